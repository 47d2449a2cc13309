"""
Grounded STRIPS model: literals, schemas, grounding, state transition and projection.

Semantics are closed-world with negative preconditions. Effects are applied
delete-before-add, so an action that both deletes and adds an atom leaves it true.
All values are immutable once built.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import ContractViolation, GroundingError, ProjectionError

logger = logging.getLogger(__name__)

OBJECT_TYPE = "object"


class ActionKind(str, Enum):
    AGENT = "agent"
    EVENT = "exogenous-event"
    MITIGATION = "mitigation-candidate"


@dataclass(frozen=True, order=True)
class Literal:
    predicate: str
    args: tuple[str, ...] = ()
    positive: bool = True

    @property
    def atom(self) -> "Literal":
        return self if self.positive else Literal(self.predicate, self.args, True)

    def negate(self) -> "Literal":
        return Literal(self.predicate, self.args, not self.positive)

    def is_ground(self) -> bool:
        return not any(a.startswith("?") for a in self.args)

    def substitute(self, binding: Mapping[str, str]) -> "Literal":
        return Literal(self.predicate, tuple(binding.get(a, a) for a in self.args), self.positive)

    def __str__(self) -> str:
        body = "(" + " ".join((self.predicate, *self.args)) + ")"
        return body if self.positive else f"(not {body})"


def atom(predicate: str, *args: str) -> Literal:
    return Literal(predicate, tuple(args))


@dataclass(frozen=True)
class TypedVar:
    name: str
    type: str = OBJECT_TYPE

    def __str__(self) -> str:
        return f"{self.name} - {self.type}"


@dataclass(frozen=True)
class PredicateDecl:
    name: str
    params: tuple[TypedVar, ...] = ()

    @property
    def arity(self) -> int:
        return len(self.params)


@dataclass(frozen=True)
class ActionSchema:
    name: str
    parameters: tuple[TypedVar, ...] = ()
    preconditions: tuple[Literal, ...] = ()
    effects: tuple[Literal, ...] = ()
    cost: int = 1
    kind: ActionKind = ActionKind.AGENT

    def __post_init__(self) -> None:
        declared = {p.name for p in self.parameters}
        for lit in (*self.preconditions, *self.effects):
            for arg in lit.args:
                if arg.startswith("?") and arg not in declared:
                    raise ContractViolation(f"{self.name}: undeclared variable {arg}")
        if self.cost < 0:
            raise ContractViolation(f"{self.name}: negative cost {self.cost}")
        effects = set(self.effects)
        for lit in self.effects:
            if lit.negate() in effects:
                raise ContractViolation(f"{self.name}: effects contain {lit} and its negation")


@dataclass(frozen=True)
class DomainModel:
    name: str
    types: tuple[str, ...] = ()
    predicates: tuple[PredicateDecl, ...] = ()
    schemas: tuple[ActionSchema, ...] = ()

    def schema(self, name: str) -> ActionSchema:
        for schema in self.schemas:
            if schema.name == name:
                return schema
        raise KeyError(name)

    def predicate(self, name: str) -> PredicateDecl | None:
        for pred in self.predicates:
            if pred.name == name:
                return pred
        return None

    def declares_type(self, name: str) -> bool:
        return name == OBJECT_TYPE or name in self.types

    @cached_property
    def static_predicates(self) -> frozenset[str]:
        """Predicates that no schema of any kind ever changes."""
        changed = {lit.predicate for s in self.schemas for lit in s.effects}
        return frozenset(p.name for p in self.predicates if p.name not in changed)


@dataclass(frozen=True)
class State:
    atoms: frozenset[Literal] = frozenset()

    @classmethod
    def of(cls, atoms: Iterable[Literal]) -> "State":
        return cls(frozenset(a.atom for a in atoms))

    def holds(self, lit: Literal) -> bool:
        return (lit.atom in self.atoms) == lit.positive

    def __contains__(self, lit: Literal) -> bool:
        return lit in self.atoms

    def sorted_atoms(self) -> list[Literal]:
        return sorted(self.atoms, key=str)


@dataclass(frozen=True)
class TypedObject:
    name: str
    type: str = OBJECT_TYPE


@dataclass(frozen=True)
class Problem:
    name: str
    domain_name: str
    objects: tuple[TypedObject, ...] = ()
    init: State = State()
    goal: tuple[Literal, ...] = ()

    def objects_of(self, type_name: str) -> list[str]:
        if type_name == OBJECT_TYPE:
            return [o.name for o in self.objects]
        return [o.name for o in self.objects if o.type == type_name]

    def object_type(self, name: str) -> str | None:
        for obj in self.objects:
            if obj.name == name:
                return obj.type
        return None


@dataclass(frozen=True)
class GroundAction:
    schema: str
    args: tuple[str, ...]
    preconditions: tuple[Literal, ...] = field(compare=False)
    effects: tuple[Literal, ...] = field(compare=False)
    cost: int = 1
    kind: ActionKind = ActionKind.AGENT
    binding: tuple[tuple[str, str], ...] = field(default=(), compare=False)
    pos_pre: frozenset[Literal] = field(init=False, repr=False, compare=False)
    neg_pre: frozenset[Literal] = field(init=False, repr=False, compare=False)
    add: frozenset[Literal] = field(init=False, repr=False, compare=False)
    delete: frozenset[Literal] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "pos_pre", frozenset(p for p in self.preconditions if p.positive))
        object.__setattr__(
            self, "neg_pre", frozenset(p.atom for p in self.preconditions if not p.positive)
        )
        object.__setattr__(self, "add", frozenset(e for e in self.effects if e.positive))
        object.__setattr__(self, "delete", frozenset(e.atom for e in self.effects if not e.positive))

    @classmethod
    def from_schema(cls, schema: ActionSchema, binding: Mapping[str, str]) -> "GroundAction":
        missing = [p.name for p in schema.parameters if p.name not in binding]
        if missing:
            raise ContractViolation(f"{schema.name}: binding lacks {', '.join(missing)}")
        return cls(
            schema=schema.name,
            args=tuple(binding[p.name] for p in schema.parameters),
            preconditions=tuple(lit.substitute(binding) for lit in schema.preconditions),
            effects=tuple(lit.substitute(binding) for lit in schema.effects),
            cost=schema.cost,
            kind=schema.kind,
            binding=tuple((p.name, binding[p.name]) for p in schema.parameters),
        )

    @property
    def name(self) -> str:
        return str(self)

    def __str__(self) -> str:
        return "(" + " ".join((self.schema, *self.args)) + ")"


@dataclass(frozen=True)
class GroundPlan:
    steps: tuple[GroundAction, ...] = ()

    @property
    def total_cost(self) -> int:
        return sum(step.cost for step in self.steps)

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self) -> Iterator[GroundAction]:
        return iter(self.steps)

    def __getitem__(self, index: int) -> GroundAction:
        return self.steps[index]

    def names(self) -> list[str]:
        return [str(step) for step in self.steps]


def ground(domain: DomainModel, problem: Problem) -> tuple[GroundAction, ...]:
    """Every type-consistent binding of every schema whose static preconditions hold.

    Order is deterministic: schemas by name, then bindings lexicographically.
    """
    static = domain.static_predicates
    init = problem.init.atoms
    declared = {o.name for o in problem.objects}
    untyped = [o for o in problem.objects if not domain.declares_type(o.type)]
    result: list[GroundAction] = []

    for schema in sorted(domain.schemas, key=lambda s: s.name):
        if untyped:
            obj = untyped[0]
            raise GroundingError(schema.name, f"object {obj.name} has undeclared type {obj.type}")
        domains: list[list[str]] = []
        for param in schema.parameters:
            if not domain.declares_type(param.type):
                raise GroundingError(schema.name, f"undeclared type {param.type}")
            domains.append(sorted(problem.objects_of(param.type)))
        for lit in (*schema.preconditions, *schema.effects):
            for arg in lit.args:
                if not arg.startswith("?") and arg not in declared:
                    raise GroundingError(schema.name, f"undeclared object {arg}")

        # Static preconditions are checked as soon as all their variables are bound.
        checks: list[list[Literal]] = [[] for _ in range(len(schema.parameters) + 1)]
        position = {p.name: i for i, p in enumerate(schema.parameters)}
        for lit in schema.preconditions:
            if lit.predicate not in static:
                continue
            depth = max((position[a] + 1 for a in lit.args if a.startswith("?")), default=0)
            checks[depth].append(lit)

        def holds(lits: list[Literal], binding: dict[str, str]) -> bool:
            for lit in lits:
                if (lit.substitute(binding).atom in init) != lit.positive:
                    return False
            return True

        binding: dict[str, str] = {}

        def extend(depth: int) -> Iterator[dict[str, str]]:
            if not holds(checks[depth], binding):
                return
            if depth == len(schema.parameters):
                yield dict(binding)
                return
            name = schema.parameters[depth].name
            for value in domains[depth]:
                binding[name] = value
                yield from extend(depth + 1)
            binding.pop(name, None)

        count = 0
        for full in extend(0):
            result.append(GroundAction.from_schema(schema, full))
            count += 1
        logger.debug("Grounded %s into %s actions", schema.name, count)
    return tuple(result)


def missing_precondition(state: State, action: GroundAction) -> Literal | None:
    for lit in sorted(action.preconditions, key=str):
        if not state.holds(lit):
            return lit
    return None


def applicable(state: State, action: GroundAction) -> bool:
    atoms = state.atoms
    return action.pos_pre <= atoms and action.neg_pre.isdisjoint(atoms)


def apply(state: State, action: GroundAction) -> State:
    if not applicable(state, action):
        missing = missing_precondition(state, action)
        raise ContractViolation(f"{action} is not applicable: missing {missing}")
    return State((state.atoms - action.delete) | action.add)


def project(plan: GroundPlan | Sequence[GroundAction], init: State) -> list[State]:
    states = [init]
    for index, step in enumerate(plan):
        current = states[-1]
        if not applicable(current, step):
            raise ProjectionError(index, str(step), str(missing_precondition(current, step)))
        states.append(State((current.atoms - step.delete) | step.add))
    return states


def entails(state: State, goal: Iterable[Literal]) -> bool:
    return all(state.holds(lit) for lit in goal)


def regress(goal: Iterable[Literal], steps: Sequence[GroundAction]) -> frozenset[Literal]:
    """Positive atoms that must hold before ``steps`` for them to reach ``goal``.

    Negative preconditions are dropped; callers verify the suffix by projection.
    """
    needed = {lit for lit in goal if lit.positive}
    for step in reversed(steps):
        needed = (needed - step.add) | set(step.pos_pre)
    return frozenset(needed)
