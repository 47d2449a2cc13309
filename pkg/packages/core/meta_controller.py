from __future__ import annotations

import logging
import operator
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Annotated, Any, Dict, List, Mapping, Optional

from langgraph.graph import END, StateGraph

from .at_engine import (
    ATAssessment,
    ConditioningEvent,
    EditKind,
    MitigationResult,
    MitigationStatus,
    PlanEdit,
    PreStrengthEntry,
    Risk,
    analyze,
    classify_risk,
    mitigate,
)
from .config import Settings, settings as default_settings
from .errors import ContractViolation, ControlVerificationError, ProjectionError
from .planner import GroundTask, SearchBudget
from .reports import digest
from .strips import GroundPlan, Literal, State, entails, project

logger = logging.getLogger(__name__)

PHASES = ("monitor", "interpret", "evaluate", "intend", "plan", "control")


class GoalStatus(str, Enum):
    PENDING = "pending"
    COMMITTED = "committed"
    ACHIEVED = "achieved"


class CycleStatus(str, Enum):
    NONE = "none"
    ACHIEVED = "achieved"
    FAILED = "failed"
    BUDGET_EXHAUSTED = "budget-exhausted"


@dataclass(frozen=True)
class CognitiveTrace:
    plan: GroundPlan
    goal: tuple[Literal, ...]
    init: State


@dataclass(frozen=True)
class MetaGoal:
    """Target: the plan reaches LOW risk and still achieves the goal."""

    plan: GroundPlan
    goal: tuple[Literal, ...]
    status: GoalStatus = GoalStatus.PENDING
    target_risk: Risk = Risk.LOW

    def to_dict(self) -> dict[str, Any]:
        return {
            "target_risk": self.target_risk,
            "achieves": {"plan": self.plan.names(), "goal": [str(g) for g in self.goal]},
            "status": self.status,
        }


@dataclass(frozen=True)
class MetaPlan:
    edits: tuple[PlanEdit, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {"edits": list(self.edits)}


@dataclass(frozen=True)
class Vulnerabilities:
    prestrength: tuple[PreStrengthEntry, ...]
    events: tuple[ConditioningEvent, ...]


@dataclass(frozen=True)
class PhaseRecord:
    name: str
    inputs_digest: str
    outputs_digest: str
    detail: Dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "inputs_digest": self.inputs_digest,
            "outputs_digest": self.outputs_digest,
            "detail": self.detail,
        }


@dataclass
class MetaMemory:
    """What the meta level remembers between cycles."""

    goals: List[MetaGoal] = field(default_factory=list)
    covered: set = field(default_factory=set)


@dataclass
class MetaState:
    trace: CognitiveTrace
    current_plan: Optional[GroundPlan] = None
    discrepancy: bool = False
    vulnerabilities: Optional[Vulnerabilities] = None
    goal: Optional[MetaGoal] = None
    mitigation: Optional[MitigationResult] = None
    meta_plan: Optional[MetaPlan] = None
    status: CycleStatus = CycleStatus.NONE
    assessment: Optional[ATAssessment] = None
    phases: Annotated[List[PhaseRecord], operator.add] = field(default_factory=list)


@dataclass(frozen=True)
class CycleResult:
    plan: GroundPlan
    status: CycleStatus
    goal: MetaGoal | None
    meta_plan: MetaPlan
    phases: tuple[PhaseRecord, ...]
    assessment: ATAssessment | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "phases": list(self.phases),
            "result": {
                "status": self.status,
                "at_assess": self.assessment.value if self.assessment else None,
                "plan": self.plan.names(),
                "edits": list(self.meta_plan.edits),
            },
        }


def apply_edits(plan: GroundPlan, edits: tuple[PlanEdit, ...]) -> GroundPlan:
    steps = list(plan.steps)
    for edit in edits:
        if edit.kind is EditKind.INSERT:
            steps.insert(edit.position, edit.action)
        elif steps[edit.position] != edit.action:
            raise ContractViolation(f"delete edit at {edit.position} does not match {edit.action}")
        else:
            del steps[edit.position]
    return GroundPlan(tuple(steps))


def explain(
    trace: CognitiveTrace,
    task: GroundTask,
    config: Settings = default_settings,
    budget: SearchBudget | None = None,
    impact_overrides: Mapping[str, float] | None = None,
) -> Vulnerabilities:
    """Prestrength entries and conditioning events of the traced plan.

    ``impact_overrides`` maps event labels to scripted impacts, as in ``analyze``.
    """
    report = analyze(task, trace.plan, config, budget, impact_overrides)
    return Vulnerabilities(report.prestrength, report.events)


def _record(name: str, inputs: Any, outputs: Any, detail: Dict[str, Any]) -> PhaseRecord:
    return PhaseRecord(name, digest(inputs), digest(outputs), detail)


class MetaController:
    """Runs the metacognitive phase sequence over a cognitive-level plan and goal.

    The controller keeps a memory across cycles: committed meta-goals and the
    (event, condition) keys already covered by anticipatory actions.
    """

    def __init__(
        self,
        task: GroundTask,
        config: Settings = default_settings,
        budget: SearchBudget | None = None,
        impact_overrides: Mapping[str, float] | None = None,
    ):
        self.task = task
        self.config = config
        self.budget = budget
        self.impact_overrides = dict(impact_overrides or {})
        self.memory = MetaMemory()
        self.app = self.build_graph().compile()

    def build_graph(self) -> StateGraph:
        graph = StateGraph(MetaState)
        for name in PHASES:
            graph.add_node(name, getattr(self, f"node_{name}"))
        graph.set_entry_point(PHASES[0])
        for before, after in zip(PHASES, PHASES[1:]):
            graph.add_edge(before, after)
        graph.add_edge(PHASES[-1], END)
        return graph

    # Phases -----------------------------------------------------------------

    def node_monitor(self, state: MetaState) -> Dict[str, Any]:
        trace = state.trace
        snapshot = {"plan": trace.plan.names(), "goal": [str(g) for g in trace.goal]}
        logger.info("Monitor: plan of %s steps, goal %s", len(trace.plan), snapshot["goal"])
        return {
            "current_plan": trace.plan,
            "phases": [_record("monitor", snapshot, snapshot, {"steps": len(trace.plan)})],
        }

    def node_interpret(self, state: MetaState) -> Dict[str, Any]:
        trace = state.trace
        try:
            final = project(trace.plan, trace.init)[-1]
        except ProjectionError as exc:
            raise ContractViolation(f"traced plan does not execute: {exc}") from exc
        if not entails(final, trace.goal):
            raise ContractViolation("traced plan does not achieve its goal")

        vulnerabilities = explain(trace, self.task, self.config, self.budget, self.impact_overrides)
        risk = classify_risk(vulnerabilities.events, covered_keys=self.memory.covered)
        discrepancy = risk.level is Risk.HIGH
        goal = MetaGoal(trace.plan, trace.goal) if discrepancy else None
        logger.info(
            "Interpret: %s events, risk %s", len(vulnerabilities.events), risk.level.value
        )
        detail = {
            "risk": risk,
            "vulnerable": [e.to_dict() for e in vulnerabilities.prestrength[:1]],
            "events": len(vulnerabilities.events),
            "goal_formulated": goal is not None,
        }
        return {
            "discrepancy": discrepancy,
            "vulnerabilities": vulnerabilities,
            "goal": goal,
            "phases": [_record("interpret", trace.plan.names(), detail, detail)],
        }

    def node_evaluate(self, state: MetaState) -> Dict[str, Any]:
        before = list(self.memory.goals)
        self.memory.goals = [g for g in before if g.status is not GoalStatus.ACHIEVED]
        dropped = len(before) - len(self.memory.goals)
        if dropped:
            logger.info("Evaluate: dropped %s achieved meta-goals", dropped)
        detail = {"dropped": dropped, "active": len(self.memory.goals)}
        return {"phases": [_record("evaluate", [g.to_dict() for g in before], detail, detail)]}

    def node_intend(self, state: MetaState) -> Dict[str, Any]:
        goal = state.goal
        if goal is not None:
            goal = replace(goal, status=GoalStatus.COMMITTED)
            self.memory.goals.append(goal)
        detail = {"committed": goal is not None}
        inputs = state.goal.to_dict() if state.goal else None
        return {"goal": goal, "phases": [_record("intend", inputs, detail, detail)]}

    def node_plan(self, state: MetaState) -> Dict[str, Any]:
        if state.goal is None or state.vulnerabilities is None:
            detail = {"edits": []}
            return {"meta_plan": MetaPlan(), "phases": [_record("plan", None, detail, detail)]}
        result = mitigate(
            state.trace.plan, state.vulnerabilities.events, self.task, self.config, self.budget
        )
        meta_plan = MetaPlan(result.edits)
        logger.info("Plan: %s edits (%s)", len(result.edits), result.status.value)
        detail = {
            "edits": [e.to_dict() for e in result.edits],
            "mitigation_status": result.status,
            "at_assess": result.assessment.value,
        }
        return {
            "mitigation": result,
            "meta_plan": meta_plan,
            "assessment": result.assessment,
            "phases": [_record("plan", state.trace.plan.names(), detail, detail)],
        }

    def node_control(self, state: MetaState) -> Dict[str, Any]:
        plan = state.trace.plan
        meta_plan = state.meta_plan or MetaPlan()
        if state.goal is None:
            detail = {"status": CycleStatus.NONE}
            return {
                "current_plan": plan,
                "status": CycleStatus.NONE,
                "phases": [_record("control", meta_plan, detail, detail)],
            }

        candidate = apply_edits(plan, meta_plan.edits)
        mitigation = state.mitigation
        status = CycleStatus.ACHIEVED
        diagnostic = None
        try:
            self._verify(candidate, state.trace, mitigation)
        except ControlVerificationError as exc:
            diagnostic = str(exc)
            if mitigation is not None and mitigation.status is MitigationStatus.BUDGET_EXHAUSTED:
                status = CycleStatus.BUDGET_EXHAUSTED
            else:
                status = CycleStatus.FAILED
                candidate = plan
            logger.warning("Control: %s", diagnostic)

        goal = state.goal
        if status is CycleStatus.ACHIEVED:
            goal = replace(goal, plan=candidate, status=GoalStatus.ACHIEVED)
            self.memory.goals = [goal if g.status is GoalStatus.COMMITTED else g for g in self.memory.goals]
            if mitigation is not None:
                self.memory.covered |= {ev.key for s in mitigation.ant for ev in s.covered}
        detail = {"status": status, "steps": len(candidate), "diagnostic": diagnostic}
        return {
            "current_plan": candidate,
            "goal": goal,
            "status": status,
            "phases": [_record("control", meta_plan, candidate.names(), detail)],
        }

    def _verify(
        self, candidate: GroundPlan, trace: CognitiveTrace, mitigation: MitigationResult | None
    ) -> None:
        try:
            final = project(candidate, trace.init)[-1]
        except ProjectionError as exc:
            raise ControlVerificationError(f"edited plan does not execute: {exc}") from exc
        if not entails(final, trace.goal):
            raise ControlVerificationError("edited plan does not achieve the goal")
        report = analyze(self.task, candidate, self.config, self.budget, self.impact_overrides)
        ant = mitigation.ant if mitigation is not None else ()
        risk = classify_risk(report.events, ant, self.memory.covered)
        if risk.level is not Risk.LOW:
            raise ControlVerificationError(
                f"edited plan still has {len(risk.justification)} unmitigated events"
            )

    # Cycles -------------------------------------------------------------------

    def run_cycle(self, trace: CognitiveTrace) -> CycleResult:
        logger.info("Starting meta cycle on a plan of %s steps", len(trace.plan))
        final = self.app.invoke(MetaState(trace=trace))
        value = final if isinstance(final, dict) else vars(final)
        result = CycleResult(
            plan=value.get("current_plan") or trace.plan,
            status=value.get("status", CycleStatus.NONE),
            goal=value.get("goal"),
            meta_plan=value.get("meta_plan") or MetaPlan(),
            phases=tuple(value.get("phases", [])),
            assessment=value.get("assessment"),
        )
        logger.info("Meta cycle finished: %s", result.status.value)
        return result

    def run(self, trace: CognitiveTrace, cycles: int | None = None) -> list[CycleResult]:
        """Run ``cycles`` cycles, each on the plan produced by the previous one."""
        results = []
        for _ in range(cycles or self.config.cycles):
            result = self.run_cycle(trace)
            results.append(result)
            trace = replace(trace, plan=result.plan)
        return results
