"""
Plan execution with exogenous events, and paired Monte Carlo comparison.

Gap ``k`` opens after the k-th executed plan step. Scheduled events are
considered at gaps only; recovery and replan steps open none. When the next
plan step is no longer applicable the agent first recovers the highest-ranked
broken condition with the cheapest recovery plan, then replans back onto the
remaining plan (or, failing that, straight to the goal).
"""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping, Sequence

import numpy as np

from .at_engine import align_plans, prestrength
from .errors import ContractViolation, ScheduleError
from .planner import AGENT_KINDS, GroundTask, SearchBudget
from .pocl import lift_to_pocl
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
    regress,
)

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "trial",
    "seed",
    "plan",
    "base_cost",
    "recovery_cost",
    "replan_cost",
    "total_cost",
    "events_fired",
)


class ScheduleMode(str, Enum):
    SCRIPTED = "scripted"
    STOCHASTIC = "stochastic"


class StepKind(str, Enum):
    PLAN = "plan"
    EVENT = "event"
    RECOVERY = "recovery"
    REPLAN = "replan"


class TraceStatus(str, Enum):
    ACHIEVED = "achieved"
    FAILED = "failed"


@dataclass(frozen=True)
class ScheduledEvent:
    after_step: int
    name: str
    args: tuple[str, ...] | None = None
    impact: float | None = None

    @property
    def label(self) -> str:
        if self.args is None:
            return self.name
        return "(" + " ".join((self.name, *self.args)) + ")"


@dataclass(frozen=True)
class EventSchedule:
    """Scripted entries, or a per-gap firing probability with its seed.

    ``draws`` pins the uniform number used at each gap; Monte Carlo sets it so
    that paired plans see the same wind.
    """

    mode: ScheduleMode = ScheduleMode.SCRIPTED
    entries: tuple[ScheduledEvent, ...] = ()
    probability: float = 0.0
    seed: int = 0
    window: int | None = None
    draws: Mapping[int, float] | None = field(default=None, compare=False)

    @classmethod
    def stochastic(cls, probability: float, seed: int = 0, window: int | None = None) -> "EventSchedule":
        if not 0.0 <= probability <= 1.0:
            raise ScheduleError(f"wind probability must lie in [0, 1], got {probability}")
        return cls(ScheduleMode.STOCHASTIC, (), probability, seed, window)

    def impact_overrides(self) -> dict[str, float]:
        return {e.label: e.impact for e in self.entries if e.impact is not None and e.args is not None}

    def check(self, plan_length: int) -> None:
        for entry in self.entries:
            if not 1 <= entry.after_step <= plan_length:
                raise ScheduleError(
                    f"event {entry.label} is scheduled after step {entry.after_step}, "
                    f"outside 1..{plan_length}"
                )

    def gap_draws(self, plan_length: int) -> dict[int, float]:
        if self.draws is not None:
            return dict(self.draws)
        values = np.random.default_rng(self.seed).random(plan_length)
        return {gap: float(values[gap - 1]) for gap in range(1, plan_length + 1)}


def parse_script(text: str | bytes) -> EventSchedule:
    """Read ``{"schedule": [...]}`` or ``{"stochastic": {"q": .., "seed": ..}}``."""
    try:
        data = json.loads(text)
    except (ValueError, UnicodeDecodeError) as exc:
        raise ScheduleError(f"scenario script is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ScheduleError("scenario script must be a JSON object")
    if "stochastic" in data:
        block = data["stochastic"]
        try:
            return EventSchedule.stochastic(
                float(block["q"]), int(block.get("seed", 0)), block.get("window")
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ScheduleError(f"malformed stochastic block: {exc}") from exc
    entries = []
    for i, raw in enumerate(data.get("schedule", [])):
        try:
            event = raw["event"]
            args = event.get("args")
            entries.append(
                ScheduledEvent(
                    after_step=int(raw["after_step"]),
                    name=str(event["name"]),
                    args=tuple(str(a) for a in args) if args is not None else None,
                    impact=float(raw["impact"]) if "impact" in raw else None,
                )
            )
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise ScheduleError(f"malformed schedule entry {i}: {exc!r}") from exc
    return EventSchedule(ScheduleMode.SCRIPTED, tuple(entries))


@dataclass(frozen=True)
class TraceStep:
    kind: StepKind
    action: GroundAction
    cost: int
    gap: int | None = None

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "action": str(self.action), "cost": self.cost, "gap": self.gap}


@dataclass(frozen=True)
class Segment:
    trigger: str | None
    condition: str | None
    steps: tuple[GroundAction, ...]

    @property
    def cost(self) -> int:
        return sum(step.cost for step in self.steps)

    def to_dict(self) -> dict[str, Any]:
        return {
            "trigger": self.trigger,
            "condition": self.condition,
            "steps": [str(s) for s in self.steps],
            "cost": self.cost,
        }


@dataclass(frozen=True)
class ExecutionTrace:
    steps: tuple[TraceStep, ...]
    recoveries: tuple[Segment, ...]
    replans: tuple[Segment, ...]
    base_cost: int
    recovery_cost: int
    replan_cost: int
    status: TraceStatus
    final_state: State

    @property
    def total_cost(self) -> int:
        return self.base_cost + self.recovery_cost + self.replan_cost

    @property
    def events_fired(self) -> int:
        return sum(1 for step in self.steps if step.kind is StepKind.EVENT)

    def to_dict(self) -> dict[str, Any]:
        return {
            "steps": list(self.steps),
            "recoveries": list(self.recoveries),
            "replans": list(self.replans),
            "base_cost": self.base_cost,
            "recovery_cost": self.recovery_cost,
            "replan_cost": self.replan_cost,
            "total_cost": self.total_cost,
            "events_fired": self.events_fired,
            "status": self.status,
        }


class _Run:
    """Mutable bookkeeping for one simulation."""

    def __init__(self, init: State):
        self.state = init
        self.steps: list[TraceStep] = []
        self.recoveries: list[Segment] = []
        self.replans: list[Segment] = []
        self.last_event: str | None = None

    def execute(self, kind: StepKind, action: GroundAction, gap: int | None = None) -> None:
        self.state = apply(self.state, action)
        cost = 0 if kind is StepKind.EVENT else action.cost
        self.steps.append(TraceStep(kind, action, cost, gap))

    def cost_of(self, kind: StepKind) -> int:
        return sum(step.cost for step in self.steps if step.kind is kind)


def simulate(
    task: GroundTask,
    plan: GroundPlan,
    schedule: EventSchedule | None = None,
    budget: SearchBudget | None = None,
) -> ExecutionTrace:
    schedule = schedule or EventSchedule()
    problem = task.problem
    schedule.check(len(plan))
    events = sorted(task.of_kind(ActionKind.EVENT), key=str)
    ranking = _condition_rank(plan, problem.init, problem.goal)
    draws = schedule.gap_draws(len(plan)) if schedule.mode is ScheduleMode.STOCHASTIC else {}

    run = _Run(problem.init)
    remaining = list(plan.steps)
    pending: list[ScheduledEvent] = []
    executed = 0
    failed = False

    while remaining:
        step = remaining[0]
        if not applicable(run.state, step):
            if not _recover(task, run, remaining, ranking, budget):
                failed = True
                break
            continue
        run.execute(StepKind.PLAN, step, executed + 1)
        remaining.pop(0)
        executed += 1
        gap = executed

        if schedule.mode is ScheduleMode.STOCHASTIC:
            in_window = schedule.window is None or gap <= schedule.window
            if in_window and draws.get(gap, 1.0) < schedule.probability:
                fired = next((e for e in events if applicable(run.state, e)), None)
                if fired is not None:
                    _fire(run, fired, gap)
            continue

        pending.extend(e for e in schedule.entries if e.after_step == gap)
        still_pending = []
        for entry in pending:
            fired = _ground_entry(task, entry, run.state)
            if fired is not None:
                _fire(run, fired, gap)
            elif entry.args is not None:
                still_pending.append(entry)
            else:
                logger.warning("Schema event %s had no applicable grounding at gap %s", entry.name, gap)
        pending = still_pending

    for entry in pending:
        logger.warning("Scheduled event %s never became applicable", entry.label)

    status = TraceStatus.ACHIEVED if not failed and entails(run.state, problem.goal) else TraceStatus.FAILED
    trace = ExecutionTrace(
        steps=tuple(run.steps),
        recoveries=tuple(run.recoveries),
        replans=tuple(run.replans),
        base_cost=run.cost_of(StepKind.PLAN),
        recovery_cost=run.cost_of(StepKind.RECOVERY),
        replan_cost=run.cost_of(StepKind.REPLAN),
        status=status,
        final_state=run.state,
    )
    logger.info(
        "Simulated %s steps: base %s, recovery %s, replan %s, %s events, %s",
        len(plan),
        trace.base_cost,
        trace.recovery_cost,
        trace.replan_cost,
        trace.events_fired,
        status.value,
    )
    return trace


def _condition_rank(plan: GroundPlan, init: State, goal: Sequence[Literal]) -> dict[Literal, int]:
    try:
        pocl = lift_to_pocl(plan, init, goal)
    except ContractViolation:
        return {}
    return {entry.literal: i for i, entry in enumerate(prestrength(pocl))}


def _fire(run: _Run, event: GroundAction, gap: int) -> None:
    logger.info("Event %s fired at gap %s", event, gap)
    run.execute(StepKind.EVENT, event, gap)
    run.last_event = str(event)


def _ground_entry(task: GroundTask, entry: ScheduledEvent, state: State) -> GroundAction | None:
    for action in sorted(task.of_kind(ActionKind.EVENT), key=str):
        if action.schema != entry.name:
            continue
        if entry.args is not None and action.args != entry.args:
            continue
        if applicable(state, action):
            return action
    return None


def _recover(
    task: GroundTask,
    run: _Run,
    remaining: list[GroundAction],
    ranking: dict[Literal, int],
    budget: SearchBudget | None,
) -> bool:
    """Re-establish the next step's broken condition, then rejoin the plan or replan to the goal."""
    step = remaining[0]
    broken = [lit for lit in step.preconditions if not run.state.holds(lit)]
    condition = min(broken, key=lambda lit: (ranking.get(lit, len(ranking)), str(lit)))
    recovery = task.recover(run.state, (condition,), budget)
    if recovery.solved:
        for action in recovery.plan:
            run.execute(StepKind.RECOVERY, action)
        run.recoveries.append(Segment(run.last_event, str(condition), tuple(recovery.plan)))
    else:
        logger.warning("Cannot re-establish %s before %s", condition, step)

    goal = task.problem.goal
    rejoin = sorted(regress(goal, remaining), key=str)
    result = task.search(run.state, rejoin, AGENT_KINDS, budget)
    if result.solved and _suffix_executes(result.plan, remaining, run.state, goal):
        _replan(run, result.plan, str(condition))
        return True

    result = task.search(run.state, goal, AGENT_KINDS, budget)
    if not result.solved:
        logger.warning("No plan reaches the goal from the current state; execution fails")
        return False
    _replan(run, result.plan, str(condition))
    remaining.clear()
    return True


def _suffix_executes(
    prefix: GroundPlan, suffix: Sequence[GroundAction], state: State, goal: Sequence[Literal]
) -> bool:
    try:
        return entails(project([*prefix, *suffix], state)[-1], goal)
    except ContractViolation:
        return False


def _replan(run: _Run, plan: GroundPlan, condition: str) -> None:
    for action in plan:
        run.execute(StepKind.REPLAN, action)
    run.replans.append(Segment(run.last_event, condition, tuple(plan)))


def replay(trace: ExecutionTrace, init: State) -> State:
    """Re-apply the recorded timeline; it must end in the recorded final state."""
    state = init
    for step in trace.steps:
        state = apply(state, step.action)
    if state != trace.final_state:
        raise ContractViolation("replayed trace diverges from its recorded final state")
    return state


# Monte Carlo ---------------------------------------------------------------------


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    seed: int
    plan: str
    base_cost: int
    recovery_cost: int
    replan_cost: int
    total_cost: int
    events_fired: int

    def row(self) -> list[Any]:
        return [getattr(self, column) for column in CSV_COLUMNS]


@dataclass(frozen=True)
class MonteCarloSummary:
    records: tuple[TrialRecord, ...]
    labels: tuple[str, ...]
    probability: float
    trials: int
    seed: int
    window: int | None = None

    def totals(self, label: str) -> np.ndarray:
        return np.array([r.total_cost for r in self.records if r.plan == label], dtype=float)

    def mean_total(self, label: str) -> float:
        return float(np.mean(self.totals(label)))

    def var_total(self, label: str) -> float:
        return float(np.var(self.totals(label)))

    @property
    def mean_saving(self) -> float:
        """Mean per-trial total-cost reduction of the second plan over the first."""
        if len(self.labels) < 2:
            return 0.0
        return float(np.mean(self.totals(self.labels[0]) - self.totals(self.labels[1])))

    def to_dict(self) -> dict[str, Any]:
        return {
            "plans": {
                label: {"mean_total": self.mean_total(label), "var_total": self.var_total(label)}
                for label in self.labels
            },
            "mean_saving": self.mean_saving,
            "probability": self.probability,
            "trials": self.trials,
            "seed": self.seed,
            "window": self.window,
        }

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for record in self.records:
            writer.writerow(record.row())
        return out.getvalue()


def monte_carlo(
    task: GroundTask,
    plans: Sequence[tuple[str, GroundPlan]],
    probability: float,
    trials: int,
    seed: int = 0,
    window: int | None = None,
    workers: int = 1,
    budget: SearchBudget | None = None,
) -> MonteCarloSummary:
    """Paired simulation: every plan in a trial sees the same per-gap wind draws.

    Draws are taken per gap of the first plan and mapped onto the others by
    plan alignment.
    """
    if trials < 1:
        raise ContractViolation("trials must be at least 1")
    if not plans:
        raise ContractViolation("at least one plan is required")
    base_label, base = plans[0]
    alignments = {label: align_plans(base, plan) for label, plan in plans}
    children = np.random.SeedSequence(seed).spawn(trials)

    def run_trial(trial: int) -> list[TrialRecord]:
        child = children[trial]
        trial_seed = int(child.generate_state(1)[0])
        values = np.random.default_rng(child).random(len(base))
        records = []
        for label, plan in plans:
            positions = alignments[label]
            draws: dict[int, float] = {}
            for gap in range(1, len(base) + 1):
                if window is not None and gap > window:
                    continue
                draws[positions[gap]] = float(values[gap - 1])
            schedule = EventSchedule(
                ScheduleMode.STOCHASTIC, (), probability, trial_seed, None, draws
            )
            trace = simulate(task, plan, schedule, budget)
            records.append(
                TrialRecord(
                    trial=trial,
                    seed=trial_seed,
                    plan=label,
                    base_cost=trace.base_cost,
                    recovery_cost=trace.recovery_cost,
                    replan_cost=trace.replan_cost,
                    total_cost=trace.total_cost,
                    events_fired=trace.events_fired,
                )
            )
        return records

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(run_trial, range(trials)))
    else:
        batches = [run_trial(t) for t in range(trials)]

    summary = MonteCarloSummary(
        records=tuple(r for batch in batches for r in batch),
        labels=tuple(label for label, _ in plans),
        probability=probability,
        trials=trials,
        seed=seed,
        window=window,
    )
    logger.info(
        "Monte Carlo over %s trials (q=%s): mean saving %.3f", trials, probability, summary.mean_saving
    )
    return summary
