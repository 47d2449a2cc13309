"""
Anticipatory-thinking engine.

Three passes over a ground plan:

* goal vulnerabilities: ``prestrength`` counts how often each condition is
  used and how often it is established before its first use;
* failure anticipation: ``find_conditioning_events`` finds domain actions that
  can break a protected condition mid-plan and prices each one with the
  cheapest recovery;
* failure mitigation: ``mitigate`` searches over plans with inserted
  anticipatory actions, scoring each candidate with ``at_assess``.

``classify_risk`` turns the result into a HIGH/LOW verdict.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Iterable, Mapping, Sequence

from .config import SavingsAccounting, Settings, ThreatMode, settings as default_settings
from .errors import ContractViolation, ProjectionError
from .planner import GroundTask, SearchBudget, recovery_cost
from .pocl import CausalLink, POCLPlan, detect_threats, lift_to_pocl
from .reports import whole
from .strips import (
    ActionKind,
    GroundAction,
    GroundPlan,
    Literal,
    State,
    applicable,
    apply,
    entails,
    project,
)

logger = logging.getLogger(__name__)


class Risk(str, Enum):
    HIGH = "HIGH"
    LOW = "LOW"


class EditKind(str, Enum):
    INSERT = "insert"
    DELETE = "delete"


class MitigationStatus(str, Enum):
    LOW_RISK = "low-risk"
    THRESHOLD = "threshold"
    EXHAUSTED = "exhausted"
    BUDGET_EXHAUSTED = "budget-exhausted"


# Goal vulnerabilities ----------------------------------------------------------


@dataclass(frozen=True)
class PreStrengthEntry:
    literal: Literal
    p: int
    e: int

    @property
    def score(self) -> Fraction:
        return Fraction(self.p, self.e)

    def to_dict(self) -> dict[str, Any]:
        return {"literal": str(self.literal), "p": self.p, "e": self.e, "score": self.score}


def prestrength(pocl: POCLPlan) -> list[PreStrengthEntry]:
    """One entry per positive literal used as a precondition by a plan step.

    ``p`` counts the using steps; ``e`` counts establishers (the start step
    included) strictly before the first use. Ordered by ``p/e`` descending,
    then ``p`` descending, then literal text.
    """
    plan_steps = pocl.steps[1:-1]
    uses: dict[Literal, list[int]] = {}
    for step in plan_steps:
        for lit in step.preconditions:
            if lit.positive:
                uses.setdefault(lit, []).append(step.id)

    start_effects = pocl.steps[0].effects
    entries = []
    for lit, users in uses.items():
        first = min(users)
        established = int(lit in start_effects)
        established += sum(
            1 for step in plan_steps if step.id < first and lit in step.action.add  # type: ignore[union-attr]
        )
        entries.append(PreStrengthEntry(lit, len(users), established))
    entries.sort(key=lambda entry: (-entry.score, -entry.p, str(entry.literal)))
    return entries


# Failure anticipation -------------------------------------------------------------


@dataclass(frozen=True)
class ConditioningEvent:
    event: GroundAction
    link: CausalLink
    trigger_index: int
    impact: float

    @property
    def key(self) -> tuple[str, Literal]:
        return str(self.event), self.link.condition

    @property
    def label(self) -> str:
        return f"{self.event}@{self.trigger_index}"

    def to_dict(self) -> dict[str, Any]:
        return {
            "event": str(self.event),
            "link": self.link,
            "trigger_index": self.trigger_index,
            "impact": self.impact,
        }


def event_candidates(task: GroundTask, plan: GroundPlan, mode: ThreatMode) -> tuple[GroundAction, ...]:
    if mode is ThreatMode.EVENTS_ONLY:
        return task.of_kind(ActionKind.EVENT)
    in_plan = set(plan.steps)
    return tuple(a for a in task.actions if a not in in_plan)


def find_conditioning_events(
    pocl: POCLPlan,
    task: GroundTask,
    trajectory: Sequence[State],
    mode: ThreatMode = ThreatMode.EVENTS_ONLY,
    budget: SearchBudget | None = None,
    impact_overrides: Mapping[str, float] | None = None,
) -> tuple[ConditioningEvent, ...]:
    """Threats raised by candidate events, one per (event, trigger index).

    When an event breaks several links at once, the link whose condition ranks
    highest in the prestrength order is reported, then the earliest consumer.
    """
    candidates = event_candidates(task, pocl.plan, mode)
    threats = detect_threats(pocl, candidates, trajectory)
    candidate_set = set(candidates)
    rank = {entry.literal: i for i, entry in enumerate(prestrength(pocl))}

    def link_order(link: CausalLink) -> tuple:
        return rank.get(link.condition, len(rank)), link.consumer, str(link.condition)

    chosen: dict[tuple[GroundAction, int], CausalLink] = {}
    for threat in threats:
        if threat.step not in candidate_set:
            continue
        key = (threat.step, threat.position)
        if key not in chosen or link_order(threat.link) < link_order(chosen[key]):
            chosen[key] = threat.link

    overrides = impact_overrides or {}
    events = []
    for (action, position), link in chosen.items():
        if str(action) in overrides:
            impact = float(overrides[str(action)])
        else:
            after = apply(trajectory[position], action)
            impact = recovery_cost(task, after, (link.condition,), budget)
        if math.isinf(impact):
            logger.warning("Event %s at %s is unrecoverable", action, position)
        events.append(ConditioningEvent(action, link, position, whole(impact)))
    events.sort(key=lambda ev: (ev.trigger_index, str(ev.event)))
    logger.info("Found %s conditioning events (%s mode)", len(events), mode.value)
    return tuple(events)


# Risk and assessment --------------------------------------------------------------


@dataclass(frozen=True)
class PlanEdit:
    kind: EditKind
    position: int
    action: GroundAction

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "position": self.position, "action": str(self.action)}


@dataclass(frozen=True)
class AnticipatoryActionSet:
    actions: tuple[PlanEdit, ...]
    covered: tuple[ConditioningEvent, ...]
    residuals: tuple[tuple[ConditioningEvent, float], ...] = ()

    @property
    def added_cost(self) -> int:
        return sum(edit.action.cost for edit in self.actions)

    def residual(self, event: ConditioningEvent) -> float:
        for candidate, value in self.residuals:
            if candidate == event:
                return value
        return event.impact

    def to_dict(self) -> dict[str, Any]:
        return {
            "actions": [{"position": a.position, "action": str(a.action)} for a in self.actions],
            "covered": [
                {"event": str(ev.event), "trigger_index": ev.trigger_index, "impact": ev.impact}
                for ev in self.covered
            ],
            "added_cost": self.added_cost,
            "residuals": [
                {"event": str(ev.event), "trigger_index": ev.trigger_index, "residual": value}
                for ev, value in self.residuals
            ],
        }


@dataclass(frozen=True)
class AnticipatoryExpectation:
    event: ConditioningEvent
    saving: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "event": str(self.event.event),
            "trigger_index": self.event.trigger_index,
            "saving": self.saving,
        }


@dataclass(frozen=True)
class ATAssessment:
    identified: int
    mitigated: int
    cost: float
    impact_sum: float
    value: float
    uneconomic: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "identified": self.identified,
            "mitigated": self.mitigated,
            "cost": self.cost,
            "impact_sum": self.impact_sum,
            "at_assess": self.value,
            "uneconomic": self.uneconomic,
        }


def compute_at_assess(identified: int, mitigated: int, cost: float, impact_sum: float) -> ATAssessment:
    """Coverage ratio times cost-benefit factor: (mitigated/identified) * (1 - cost/impact_sum).

    With nothing identified the value is 1 when nothing was spent and 0
    otherwise. With nothing mitigated the value is 0. ``uneconomic`` marks
    spending more than the mitigated impact.
    """
    if not 0 <= mitigated <= identified:
        raise ContractViolation(f"mitigated count {mitigated} outside [0, {identified}]")
    if cost < 0 or impact_sum < 0:
        raise ContractViolation("cost and impact sum must be nonnegative")
    uneconomic = cost > impact_sum
    if identified == 0:
        value = 1.0 if cost == 0 else 0.0
    elif mitigated == 0:
        value = 0.0
    else:
        if impact_sum == 0:
            raise ContractViolation("mitigated events must carry a positive impact sum")
        value = (mitigated / identified) * (1 - cost / impact_sum)
    if uneconomic:
        logger.debug("Uneconomic candidate: cost %s exceeds impact %s", cost, impact_sum)
    return ATAssessment(identified, mitigated, whole(cost), whole(impact_sum), value, uneconomic)


def _warn_if_uneconomic(assessment: ATAssessment) -> None:
    if assessment.uneconomic:
        logger.warning(
            "Anticipation is uneconomic: cost %s exceeds impact %s", assessment.cost, assessment.impact_sum
        )


def at_assess(
    identified: int,
    ant: Iterable[AnticipatoryActionSet],
    accounting: SavingsAccounting = SavingsAccounting.ORIGINAL,
) -> ATAssessment:
    ant = list(ant)
    mitigated = sum(len(s.covered) for s in ant)
    cost = sum(s.added_cost for s in ant)
    if accounting is SavingsAccounting.NET:
        impact_sum = sum(ev.impact - s.residual(ev) for s in ant for ev in s.covered)
    else:
        impact_sum = sum(ev.impact for s in ant for ev in s.covered)
    return compute_at_assess(identified, mitigated, cost, impact_sum)


@dataclass(frozen=True)
class RiskLevel:
    level: Risk
    justification: tuple[ConditioningEvent, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "level": self.level,
            "justification": [
                {"event": str(ev.event), "trigger_index": ev.trigger_index, "impact": ev.impact}
                for ev in self.justification
            ],
        }


def classify_risk(
    events: Iterable[ConditioningEvent],
    ant: Iterable[AnticipatoryActionSet] = (),
    covered_keys: Iterable[tuple[str, Literal]] = (),
) -> RiskLevel:
    """HIGH when an uncovered event has positive impact or any event is unrecoverable.

    Coverage matches on (event action, condition), so events recomputed on a
    mitigated plan at shifted positions still count as covered.
    """
    covered = set(covered_keys) | {ev.key for s in ant for ev in s.covered}
    offenders = tuple(
        ev
        for ev in events
        if math.isinf(ev.impact) or (ev.key not in covered and ev.impact > 0)
    )
    return RiskLevel(Risk.HIGH if offenders else Risk.LOW, offenders)


# Plan alignment -----------------------------------------------------------------


def match_origins(base: Sequence[GroundAction], derived: Sequence[GroundAction]) -> list[int | None]:
    """For each derived step, the index of the base step it keeps, or None if inserted."""
    origins: list[int | None] = []
    i = 0
    for step in derived:
        match = next((k for k in range(i, len(base)) if base[k] == step), None)
        origins.append(match)
        if match is not None:
            i = match + 1
    return origins


def align_from_origins(origins: Sequence[int | None], base_length: int) -> list[int]:
    positions = []
    for gap in range(base_length + 1):
        position = next(
            (i for i, origin in enumerate(origins) if origin is not None and origin >= gap),
            len(origins),
        )
        positions.append(position)
    return positions


def align_plans(base: Sequence[GroundAction], derived: Sequence[GroundAction]) -> list[int]:
    """Map gap j of ``base`` to the derived position just before base step j resumes.

    Actions inserted between two base steps fall before the mapped position.
    """
    return align_from_origins(match_origins(base, derived), len(base))


# Failure mitigation --------------------------------------------------------------


@dataclass(frozen=True)
class _Node:
    steps: tuple[GroundAction, ...]
    origins: tuple[int | None, ...]
    edits: tuple[PlanEdit, ...]


@dataclass(frozen=True)
class _Evaluation:
    ant: AnticipatoryActionSet
    expectations: tuple[AnticipatoryExpectation, ...]
    assessment: ATAssessment
    risk: RiskLevel

    def rank(self, node: _Node) -> tuple:
        return (-self.assessment.value, self.ant.added_cost, len(node.edits), tuple(map(str, node.steps)))


@dataclass(frozen=True)
class MitigationResult:
    plan: GroundPlan
    edits: tuple[PlanEdit, ...]
    ant: tuple[AnticipatoryActionSet, ...]
    expectations: tuple[AnticipatoryExpectation, ...]
    assessment: ATAssessment
    risk: RiskLevel
    status: MitigationStatus
    events: tuple[ConditioningEvent, ...] = ()
    expansions: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "plan_prime": [str(step) for step in self.plan],
            "edits": list(self.edits),
            "ant": list(self.ant),
            "expectations": list(self.expectations),
            "assessment": self.assessment,
            "risk": self.risk,
            "status": self.status,
            "conditioning_events": list(self.events),
        }


def mitigation_pool(task: GroundTask) -> tuple[GroundAction, ...]:
    pool = task.of_kind(ActionKind.MITIGATION)
    return pool if pool else task.of_kind(ActionKind.AGENT)


def mitigate(
    plan: GroundPlan,
    events: Sequence[ConditioningEvent],
    task: GroundTask,
    config: Settings = default_settings,
    budget: SearchBudget | None = None,
) -> MitigationResult:
    """Best-first search over plans with inserted anticipatory actions.

    Stops at the first plan whose risk is LOW or whose assessment reaches the
    threshold; otherwise returns the best plan seen when the frontier or the
    expansion budget runs out.
    """
    init, goal = task.problem.init, task.problem.goal
    base_trajectory = project(plan, init)
    pool = sorted(mitigation_pool(task), key=str)
    base_length = len(plan)

    root_costs: dict[ConditioningEvent, float] = {}
    for ev in events:
        after = apply(base_trajectory[ev.trigger_index], ev.event)
        root_costs[ev] = recovery_cost(task, after, (ev.link.condition,), budget)

    def residual(ev: ConditioningEvent, node_cost: float) -> float:
        root_cost = root_costs[ev]
        if ev.impact == root_cost:
            return node_cost
        # scripted impact: shift it by the change in recovery cost
        if node_cost >= root_cost:
            return ev.impact
        if math.isinf(root_cost):
            return min(ev.impact, node_cost)
        return max(0.0, ev.impact - (root_cost - node_cost))

    def evaluate(node: _Node) -> _Evaluation:
        trajectory = project(node.steps, init)
        positions = align_from_origins(node.origins, base_length)
        residuals = []
        covered = []
        expectations = []
        for ev in events:
            state = trajectory[positions[ev.trigger_index]]
            if not node.edits:
                value = ev.impact
            elif applicable(state, ev.event):
                value = residual(ev, recovery_cost(task, apply(state, ev.event), (ev.link.condition,), budget))
            else:
                value = residual(ev, 0)
            value = whole(value)
            residuals.append((ev, value))
            if not math.isinf(ev.impact) and value < ev.impact:
                covered.append(ev)
                expectations.append(AnticipatoryExpectation(ev, ev.impact - value))
        inserted = tuple(
            PlanEdit(EditKind.INSERT, i, step)
            for i, (step, origin) in enumerate(zip(node.steps, node.origins))
            if origin is None
        )
        ant = AnticipatoryActionSet(inserted, tuple(covered), tuple(residuals))
        assessment = at_assess(len(events), [ant] if (inserted or covered) else [], config.savings_accounting)
        return _Evaluation(ant, tuple(expectations), assessment, classify_risk(events, [ant]))

    def children(node: _Node) -> Iterable[_Node]:
        trajectory = project(node.steps, init)
        for position in range(len(node.steps) + 1):
            for action in pool:
                if not applicable(trajectory[position], action):
                    continue
                steps = node.steps[:position] + (action,) + node.steps[position:]
                origins = node.origins[:position] + (None,) + node.origins[position:]
                if _achieves(steps, init, goal):
                    yield _Node(steps, origins, node.edits + (PlanEdit(EditKind.INSERT, position, action),))
        if config.allow_deletes:
            for position, origin in enumerate(node.origins):
                if origin is None:
                    continue
                steps = node.steps[:position] + node.steps[position + 1 :]
                if _achieves(steps, init, goal):
                    origins = node.origins[:position] + node.origins[position + 1 :]
                    edit = PlanEdit(EditKind.DELETE, position, node.steps[position])
                    yield _Node(steps, origins, node.edits + (edit,))

    root = _Node(tuple(plan.steps), tuple(range(base_length)), ())
    counter = itertools.count()
    root_eval = evaluate(root)
    frontier = [(root_eval.rank(root), next(counter), root, root_eval)]
    visited = {root.steps}
    best, best_eval = root, root_eval
    expansions = 0
    status = MitigationStatus.EXHAUSTED

    while frontier:
        _, _, node, result = heapq.heappop(frontier)
        if result.rank(node) < best_eval.rank(best):
            best, best_eval = node, result
        if result.risk.level is Risk.LOW:
            best, best_eval, status = node, result, MitigationStatus.LOW_RISK
            break
        if result.assessment.value >= config.tau:
            best, best_eval, status = node, result, MitigationStatus.THRESHOLD
            break
        if expansions >= config.mitigation_budget:
            status = MitigationStatus.BUDGET_EXHAUSTED
            logger.warning("Mitigation budget of %s expansions exhausted", config.mitigation_budget)
            break
        expansions += 1
        for child in children(node):
            if child.steps in visited:
                continue
            visited.add(child.steps)
            child_eval = evaluate(child)
            logger.debug("Candidate %s scores %s", [str(e.action) for e in child.edits], child_eval.assessment.value)
            heapq.heappush(frontier, (child_eval.rank(child), next(counter), child, child_eval))

    ant = (best_eval.ant,) if (best_eval.ant.actions or best_eval.ant.covered) else ()
    logger.info(
        "Mitigation %s after %s expansions: %s edits, at_assess %.6f, risk %s",
        status.value,
        expansions,
        len(best.edits),
        best_eval.assessment.value,
        best_eval.risk.level.value,
    )
    _warn_if_uneconomic(best_eval.assessment)
    return MitigationResult(
        plan=GroundPlan(best.steps),
        edits=best.edits,
        ant=ant,
        expectations=best_eval.expectations,
        assessment=best_eval.assessment,
        risk=best_eval.risk,
        status=status,
        events=tuple(events),
        expansions=expansions,
    )


def _achieves(steps: Sequence[GroundAction], init: State, goal: Sequence[Literal]) -> bool:
    try:
        return entails(project(steps, init)[-1], goal)
    except ProjectionError:
        return False


# Whole-plan analysis ------------------------------------------------------------


@dataclass(frozen=True)
class AnalysisReport:
    prestrength: tuple[PreStrengthEntry, ...]
    events: tuple[ConditioningEvent, ...]
    risk: RiskLevel
    pocl: POCLPlan | None = field(default=None, compare=False)

    def to_dict(self) -> dict[str, Any]:
        return {
            "prestrength": list(self.prestrength),
            "conditioning_events": list(self.events),
            "risk": self.risk,
        }


def analyze(
    task: GroundTask,
    plan: GroundPlan,
    config: Settings = default_settings,
    budget: SearchBudget | None = None,
    impact_overrides: Mapping[str, float] | None = None,
) -> AnalysisReport:
    problem = task.problem
    pocl = lift_to_pocl(plan, problem.init, problem.goal)
    trajectory = project(plan, problem.init)
    events = find_conditioning_events(
        pocl, task, trajectory, config.threat_mode, budget, impact_overrides
    )
    risk = classify_risk(events)
    return AnalysisReport(tuple(prestrength(pocl)), events, risk, pocl)


def assess_report(report: Mapping[str, Any], accounting: SavingsAccounting = SavingsAccounting.ORIGINAL) -> ATAssessment:
    """Recompute the assessment from an analysis or mitigation report mapping."""
    events = report.get("conditioning_events")
    if events is None:
        raise ContractViolation("report has no conditioning_events")
    identified = len(events)
    mitigated = 0
    cost = 0
    impact_sum = 0
    for entry in report.get("ant", []):
        cost += entry["added_cost"]
        residuals = {(r["event"], r["trigger_index"]): r["residual"] for r in entry["residuals"]}
        for covered in entry["covered"]:
            mitigated += 1
            impact = covered["impact"]
            if accounting is SavingsAccounting.NET:
                impact -= residuals[(covered["event"], covered["trigger_index"])]
            impact_sum += impact
    assessment = compute_at_assess(identified, mitigated, cost, impact_sum)
    _warn_if_uneconomic(assessment)
    return assessment
