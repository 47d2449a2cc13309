"""
Reader and writer for the domain, problem and plan file formats.

The syntax is a small PDDL-like s-expression subset. Domains may declare
``(:action ...)``, ``(:event ...)`` and ``(:mitigation ...)`` blocks with an
optional integer ``:cost``. Problems declare typed objects, an initial state
and a positive goal conjunction. Plans hold one ``INDEX: (name args...)`` step
per line. ``;`` starts a comment in every format.

Every parse either returns a complete model or raises ``ParseError`` carrying
all error diagnostics with their source spans.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Union

import pyparsing as pp

from .errors import ContractViolation, ParseError
from .strips import (
    OBJECT_TYPE,
    ActionKind,
    ActionSchema,
    DomainModel,
    GroundAction,
    GroundPlan,
    Literal,
    PredicateDecl,
    Problem,
    State,
    TypedObject,
    TypedVar,
)

logger = logging.getLogger(__name__)

BLOCK_KINDS = {
    ":action": ActionKind.AGENT,
    ":event": ActionKind.EVENT,
    ":mitigation": ActionKind.MITIGATION,
}
KIND_KEYWORDS = {kind: keyword for keyword, kind in BLOCK_KINDS.items()}

_NAME = re.compile(r"^[A-Za-z][A-Za-z0-9_\-]*$")
_VAR = re.compile(r"^\?[A-Za-z][A-Za-z0-9_\-]*$")
_INDEX = re.compile(r"^[0-9]+$")


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int
    column: int

    def __post_init__(self) -> None:
        if self.line < 1 or self.column < 1:
            raise ContractViolation(f"invalid span {self.line}:{self.column}")

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


@dataclass(frozen=True)
class ParseDiagnostic:
    severity: Severity
    message: str
    span: SourceSpan

    def __str__(self) -> str:
        return f"{self.span}: {self.severity.value}: {self.message}"


@dataclass(frozen=True)
class Token:
    text: str
    loc: int


@dataclass(frozen=True)
class SExpr:
    items: tuple[Union[Token, "SExpr"], ...]
    loc: int

    def head(self) -> str | None:
        if self.items and isinstance(self.items[0], Token):
            return self.items[0].text
        return None


Node = Union[Token, SExpr]


def _build_grammar() -> pp.ParserElement:
    word = pp.Regex(r"[^\s();]+").set_parse_action(lambda s, loc, t: Token(t[0], loc))
    sexpr = pp.Forward()
    body = pp.Suppress("(") + pp.Group(pp.ZeroOrMore(word | sexpr)) + pp.Suppress(")")
    sexpr <<= body.set_parse_action(lambda s, loc, t: SExpr(tuple(t[0]), loc))
    document = sexpr + pp.StringEnd()
    document.ignore(pp.Regex(r";[^\n]*"))
    return document


_DOCUMENT = _build_grammar()
_PLAN_LINE = re.compile(r"^\s*(?P<index>\S+?)\s*:\s*(?P<body>.*)$")


class _Reader:
    """Shared diagnostics bookkeeping for one source text."""

    def __init__(self, text: str | bytes, file: str):
        self.file = file
        self.errors: list[ParseDiagnostic] = []
        self.warnings: list[ParseDiagnostic] = []
        if isinstance(text, bytes):
            try:
                text = text.decode("utf-8")
            except UnicodeDecodeError as exc:
                self.text = ""
                self.error(f"input is not valid UTF-8 ({exc.reason})", 0)
                return
        self.text = text

    def span(self, loc: int) -> SourceSpan:
        if not self.text:
            return SourceSpan(self.file, 1, 1)
        loc = max(0, min(loc, len(self.text)))
        return SourceSpan(self.file, pp.lineno(loc, self.text), pp.col(loc, self.text))

    def error(self, message: str, loc: int) -> None:
        self.errors.append(ParseDiagnostic(Severity.ERROR, message, self.span(loc)))

    def warn(self, message: str, loc: int) -> None:
        self.warnings.append(ParseDiagnostic(Severity.WARNING, message, self.span(loc)))

    def read_sexpr(self) -> SExpr | None:
        if self.errors:
            return None
        try:
            return _DOCUMENT.parse_string(self.text, parse_all=True)[0]
        except pp.ParseBaseException as exc:
            self.errors.append(
                ParseDiagnostic(
                    Severity.ERROR,
                    f"syntax error: {exc.msg}",
                    SourceSpan(self.file, max(exc.lineno, 1), max(exc.col, 1)),
                )
            )
        except RecursionError:
            self.error("syntax error: nesting too deep", 0)
        return None

    def finish(self, diagnostics: list[ParseDiagnostic] | None) -> None:
        for warning in self.warnings:
            logger.warning("%s", warning)
        if diagnostics is not None:
            diagnostics.extend(self.warnings)
        if self.errors:
            if diagnostics is not None:
                diagnostics.extend(self.errors)
            raise ParseError(self.errors)

    # Small structural helpers -------------------------------------------------

    def token(self, node: Node, what: str) -> str | None:
        if isinstance(node, Token):
            return node.text
        self.error(f"expected {what}, found a parenthesised list", node.loc)
        return None

    def name(self, node: Node, what: str) -> str | None:
        text = self.token(node, what)
        if text is not None and not _NAME.match(text):
            self.error(f"invalid {what} {text!r}", node.loc)
            return None
        return text

    def expect_list(self, node: Node, what: str) -> SExpr | None:
        if isinstance(node, SExpr):
            return node
        self.error(f"expected {what}, found {node.text!r}", node.loc)
        return None

    def typed_list(self, items: Iterable[Node], variables: bool) -> list[tuple[str, str, int]]:
        """Parse ``a b - t c - u`` (or ``?x - t``) into (name, type, loc) triples."""
        out: list[tuple[str, str, int]] = []
        pending: list[tuple[str, int]] = []
        items = list(items)
        i = 0
        while i < len(items):
            node = items[i]
            text = self.token(node, "a name")
            if text is None:
                i += 1
                continue
            if text == "-":
                if not pending or i + 1 >= len(items):
                    self.error("dangling type marker '-'", node.loc)
                    i += 1
                    continue
                type_name = self.name(items[i + 1], "type name")
                for name, loc in pending:
                    out.append((name, type_name or OBJECT_TYPE, loc))
                pending = []
                i += 2
                continue
            pattern = _VAR if variables else _NAME
            if not pattern.match(text):
                kind = "variable" if variables else "object name"
                self.error(f"invalid {kind} {text!r}", node.loc)
            else:
                pending.append((text, node.loc))
            i += 1
        out.extend((name, OBJECT_TYPE, loc) for name, loc in pending)
        return out


def _read_define(reader: _Reader, root: SExpr, keyword: str) -> tuple[str | None, list[SExpr]]:
    if root.head() != "define" or len(root.items) < 2:
        reader.error("expected (define ...)", root.loc)
        return None, []
    header = reader.expect_list(root.items[1], f"({keyword} NAME)")
    name = None
    if header is not None:
        if header.head() != keyword or len(header.items) != 2:
            reader.error(f"expected ({keyword} NAME)", header.loc)
        else:
            name = reader.name(header.items[1], f"{keyword} name")
    blocks = []
    for node in root.items[2:]:
        block = reader.expect_list(node, "a section")
        if block is not None:
            blocks.append(block)
    return name, blocks


def _literal(reader: _Reader, node: Node, *, allow_negative: bool = True) -> Literal | None:
    expr = reader.expect_list(node, "a literal")
    if expr is None:
        return None
    if expr.head() == "not":
        if not allow_negative:
            reader.error("negative literal not allowed here", expr.loc)
            return None
        if len(expr.items) != 2:
            reader.error("(not ...) takes exactly one atom", expr.loc)
            return None
        inner = _literal(reader, expr.items[1], allow_negative=False)
        return inner.negate() if inner else None
    if not expr.items:
        reader.error("empty literal", expr.loc)
        return None
    predicate = reader.name(expr.items[0], "predicate name")
    args = [reader.token(arg, "a term") for arg in expr.items[1:]]
    if predicate is None or any(a is None for a in args):
        return None
    return Literal(predicate, tuple(args))  # type: ignore[arg-type]


def _conjunction(reader: _Reader, node: Node, *, allow_negative: bool = True) -> list[tuple[Literal, int]]:
    expr = reader.expect_list(node, "a conjunction")
    if expr is None:
        return []
    parts = list(expr.items[1:]) if expr.head() == "and" else [expr]
    out = []
    for part in parts:
        lit = _literal(reader, part, allow_negative=allow_negative)
        if lit is not None:
            out.append((lit, part.loc))
    return out


def _check_literal(
    reader: _Reader,
    domain_preds: dict[str, PredicateDecl],
    lit: Literal,
    loc: int,
    term_type,
) -> None:
    """Validate predicate, arity and term types; ``term_type`` maps a term to its type or None."""
    decl = domain_preds.get(lit.predicate)
    if decl is None:
        reader.error(f"undeclared predicate {lit.predicate}", loc)
        return
    if decl.arity != len(lit.args):
        reader.error(
            f"predicate {lit.predicate} expects {decl.arity} arguments, got {len(lit.args)}", loc
        )
        return
    for arg, param in zip(lit.args, decl.params):
        actual = term_type(arg, loc)
        if actual is None:
            continue
        if param.type != OBJECT_TYPE and actual != param.type:
            reader.error(
                f"argument {arg} of {lit.predicate} has type {actual}, expected {param.type}", loc
            )


def parse_domain(
    text: str | bytes, *, file: str = "<domain>", diagnostics: list[ParseDiagnostic] | None = None
) -> DomainModel:
    reader = _Reader(text, file)
    root = reader.read_sexpr()
    if root is None:
        reader.finish(diagnostics)
    name, blocks = _read_define(reader, root, "domain")  # type: ignore[arg-type]

    types: list[str] = []
    predicates: dict[str, PredicateDecl] = {}
    schema_blocks: list[SExpr] = []
    for block in blocks:
        head = block.head()
        if head == ":types":
            for node in block.items[1:]:
                type_name = reader.name(node, "type name")
                if type_name is None:
                    continue
                if type_name in types:
                    reader.error(f"duplicate type {type_name}", node.loc)
                types.append(type_name)
        elif head == ":predicates":
            for node in block.items[1:]:
                proto = reader.expect_list(node, "a predicate prototype")
                if proto is None or not proto.items:
                    continue
                pred_name = reader.name(proto.items[0], "predicate name")
                params = reader.typed_list(proto.items[1:], variables=True)
                if pred_name is None:
                    continue
                if pred_name in predicates:
                    reader.error(f"duplicate predicate {pred_name}", proto.loc)
                    continue
                predicates[pred_name] = PredicateDecl(
                    pred_name, tuple(TypedVar(n, t) for n, t, _ in params)
                )
        elif head in BLOCK_KINDS:
            schema_blocks.append(block)
        elif head == ":requirements":
            reader.warn("(:requirements ...) is ignored", block.loc)
        else:
            reader.error(f"unknown domain section {head!r}", block.loc)

    declared_types = set(types) | {OBJECT_TYPE}
    for pred in predicates.values():
        for param in pred.params:
            if param.type not in declared_types:
                reader.error(f"undeclared type {param.type} in predicate {pred.name}", root.loc)

    schemas: list[ActionSchema] = []
    seen: set[str] = set()
    for block in schema_blocks:
        schema = _schema(reader, block, predicates, declared_types)
        if schema is None:
            continue
        if schema.name in seen:
            reader.error(f"duplicate schema {schema.name}", block.loc)
            continue
        seen.add(schema.name)
        schemas.append(schema)

    used = {lit.predicate for s in schemas for lit in (*s.preconditions, *s.effects)}
    for pred in predicates:
        if pred not in used:
            reader.warn(f"predicate {pred} is never used", root.loc)

    reader.finish(diagnostics)
    return DomainModel(
        name=name or "",
        types=tuple(types),
        predicates=tuple(predicates.values()),
        schemas=tuple(schemas),
    )


def _schema(
    reader: _Reader,
    block: SExpr,
    predicates: dict[str, PredicateDecl],
    declared_types: set[str],
) -> ActionSchema | None:
    kind = BLOCK_KINDS[block.head()]  # type: ignore[index]
    if len(block.items) < 2:
        reader.error("schema without a name", block.loc)
        return None
    name = reader.name(block.items[1], "schema name")
    fields: dict[str, Node] = {}
    items = block.items[2:]
    for i in range(0, len(items), 2):
        key = reader.token(items[i], "a keyword")
        if key is None:
            continue
        if key not in (":parameters", ":precondition", ":effect", ":cost"):
            reader.error(f"unknown keyword {key} in {name}", items[i].loc)
            continue
        if i + 1 >= len(items):
            reader.error(f"{key} without a value in {name}", items[i].loc)
            continue
        fields[key] = items[i + 1]
    for required in (":parameters", ":precondition", ":effect"):
        if required not in fields:
            reader.error(f"{name}: missing {required}", block.loc)
    if name is None or any(r not in fields for r in (":parameters", ":precondition", ":effect")):
        return None

    param_list = reader.expect_list(fields[":parameters"], "a parameter list")
    params = reader.typed_list(param_list.items if param_list else (), variables=True)
    variables: dict[str, str] = {}
    for var, type_name, loc in params:
        if type_name not in declared_types:
            reader.error(f"undeclared type {type_name}", loc)
        if var in variables:
            reader.error(f"duplicate parameter {var}", loc)
        variables[var] = type_name

    def term_type(term: str, loc: int) -> str | None:
        if term.startswith("?"):
            if term not in variables:
                reader.error(f"undeclared variable {term}", loc)
                return None
            return variables[term]
        return None  # constants are checked against the problem's objects when grounding

    pre = _conjunction(reader, fields[":precondition"])
    eff = _conjunction(reader, fields[":effect"])
    for lit, loc in (*pre, *eff):
        _check_literal(reader, predicates, lit, loc, term_type)

    cost = 1
    if ":cost" in fields:
        text = reader.token(fields[":cost"], "a cost")
        if text is None or not _INDEX.match(text):
            reader.error(f"{name}: cost must be a nonnegative integer", fields[":cost"].loc)
        else:
            cost = int(text)
    try:
        return ActionSchema(
            name=name,
            parameters=tuple(TypedVar(v, t) for v, t, _ in params),
            preconditions=tuple(lit for lit, _ in pre),
            effects=tuple(lit for lit, _ in eff),
            cost=cost,
            kind=kind,
        )
    except ContractViolation as exc:
        reader.error(str(exc), block.loc)
        return None


def parse_problem(
    text: str | bytes,
    domain: DomainModel,
    *,
    file: str = "<problem>",
    diagnostics: list[ParseDiagnostic] | None = None,
) -> Problem:
    reader = _Reader(text, file)
    root = reader.read_sexpr()
    if root is None:
        reader.finish(diagnostics)
    name, blocks = _read_define(reader, root, "problem")  # type: ignore[arg-type]
    predicates = {p.name: p for p in domain.predicates}

    objects: dict[str, TypedObject] = {}
    init_nodes: list[Node] = []
    goal_node: Node | None = None
    for block in blocks:
        head = block.head()
        if head == ":domain":
            if len(block.items) != 2:
                reader.error("expected (:domain NAME)", block.loc)
                continue
            domain_name = reader.name(block.items[1], "domain name")
            if domain_name is not None and domain_name != domain.name:
                reader.error(
                    f"problem targets domain {domain_name}, not {domain.name}", block.items[1].loc
                )
        elif head == ":objects":
            for obj, type_name, loc in reader.typed_list(block.items[1:], variables=False):
                if not domain.declares_type(type_name):
                    reader.error(f"undeclared type {type_name}", loc)
                if obj in objects:
                    reader.error(f"duplicate object {obj}", loc)
                objects[obj] = TypedObject(obj, type_name)
        elif head == ":init":
            init_nodes.extend(block.items[1:])
        elif head == ":goal":
            if len(block.items) != 2:
                reader.error("expected (:goal CONJUNCTION)", block.loc)
            else:
                goal_node = block.items[1]
        else:
            reader.error(f"unknown problem section {head!r}", block.loc)

    def term_type(term: str, loc: int) -> str | None:
        obj = objects.get(term)
        if obj is None:
            reader.error(f"undeclared object {term}", loc)
            return None
        return obj.type

    init: list[Literal] = []
    for node in init_nodes:
        lit = _literal(reader, node, allow_negative=False)
        if lit is not None:
            _check_literal(reader, predicates, lit, node.loc, term_type)
            init.append(lit)
    goal: list[Literal] = []
    if goal_node is not None:
        for lit, loc in _conjunction(reader, goal_node, allow_negative=False):
            _check_literal(reader, predicates, lit, loc, term_type)
            goal.append(lit)

    reader.finish(diagnostics)
    return Problem(
        name=name or "",
        domain_name=domain.name,
        objects=tuple(objects.values()),
        init=State.of(init),
        goal=tuple(goal),
    )


def parse_plan(
    text: str | bytes,
    domain: DomainModel,
    problem: Problem,
    *,
    file: str = "<plan>",
    diagnostics: list[ParseDiagnostic] | None = None,
) -> GroundPlan:
    reader = _Reader(text, file)
    steps: list[GroundAction] = []
    offset = 0
    for line in reader.text.splitlines(keepends=True):
        start = offset
        offset += len(line)
        content = line.split(";", 1)[0]
        if not content.strip():
            continue
        match = _PLAN_LINE.match(content.rstrip("\r\n"))
        if match is None:
            reader.error("expected INDEX: (action args...)", start)
            continue
        index_text = match.group("index")
        if not _INDEX.match(index_text):
            reader.error(f"invalid step index {index_text!r}", start + match.start("index"))
            continue
        if int(index_text) != len(steps):
            reader.error(
                f"step indices must be contiguous from 0: expected {len(steps)}, got {index_text}",
                start + match.start("index"),
            )
            continue
        body_loc = start + match.start("body")
        try:
            expr = _DOCUMENT.parse_string(match.group("body"), parse_all=True)[0]
        except pp.ParseBaseException as exc:
            reader.error(f"syntax error: {exc.msg}", body_loc + max(exc.col - 1, 0))
            continue
        except RecursionError:
            reader.error("syntax error: nesting too deep", body_loc)
            continue
        action = _resolve_step(reader, expr, domain, problem, body_loc)
        if action is not None:
            steps.append(action)
        else:
            # keep later indices aligned with the file so only the real error is reported
            steps.append(None)  # type: ignore[arg-type]
    reader.finish(diagnostics)
    return GroundPlan(tuple(steps))


def _resolve_step(
    reader: _Reader, expr: SExpr, domain: DomainModel, problem: Problem, loc: int
) -> GroundAction | None:
    if not expr.items or any(isinstance(item, SExpr) for item in expr.items):
        reader.error("a plan step is a flat (name args...) list", loc)
        return None
    name, *args = [item.text for item in expr.items]  # type: ignore[union-attr]
    try:
        schema = domain.schema(name)
    except KeyError:
        reader.error(f"unknown action {name}", loc)
        return None
    if len(args) != len(schema.parameters):
        reader.error(
            f"{name} expects {len(schema.parameters)} arguments, got {len(args)}", loc
        )
        return None
    binding: dict[str, str] = {}
    for param, arg in zip(schema.parameters, args):
        obj_type = problem.object_type(arg)
        if obj_type is None:
            reader.error(f"undeclared object {arg}", loc)
            return None
        if param.type != OBJECT_TYPE and obj_type != param.type:
            reader.error(f"{arg} has type {obj_type}, {name} expects {param.type}", loc)
            return None
        binding[param.name] = arg
    return GroundAction.from_schema(schema, binding)


# Writers -----------------------------------------------------------------------


def _conj_text(lits: Iterable[Literal]) -> str:
    lits = list(lits)
    return "(and" + "".join(" " + str(lit) for lit in lits) + ")"


def _vars_text(params: Iterable[TypedVar]) -> str:
    return "(" + " ".join(str(p) for p in params) + ")"


def format_domain(domain: DomainModel) -> str:
    lines = [f"(define (domain {domain.name})"]
    if domain.types:
        lines.append("  (:types " + " ".join(domain.types) + ")")
    if domain.predicates:
        lines.append("  (:predicates")
        for pred in domain.predicates:
            params = "".join(" " + str(p) for p in pred.params)
            lines.append(f"    ({pred.name}{params})")
        lines[-1] += ")"
    for schema in domain.schemas:
        lines.append(f"  ({KIND_KEYWORDS[schema.kind]} {schema.name}")
        lines.append(f"    :parameters {_vars_text(schema.parameters)}")
        lines.append(f"    :precondition {_conj_text(schema.preconditions)}")
        lines.append(f"    :effect {_conj_text(schema.effects)}")
        lines.append(f"    :cost {schema.cost})")
    lines.append(")")
    return "\n".join(lines) + "\n"


def format_problem(problem: Problem) -> str:
    lines = [f"(define (problem {problem.name})", f"  (:domain {problem.domain_name})"]
    lines.append("  (:objects")
    for obj in problem.objects:
        lines.append(f"    {obj.name} - {obj.type}")
    lines[-1] += ")"
    lines.append("  (:init")
    for lit in problem.init.sorted_atoms():
        lines.append(f"    {lit}")
    lines[-1] += ")"
    lines.append(f"  (:goal {_conj_text(problem.goal)})")
    lines.append(")")
    return "\n".join(lines) + "\n"


def format_plan(plan: GroundPlan | Iterable[GroundAction]) -> str:
    return "".join(f"{i}: {step}\n" for i, step in enumerate(plan))
