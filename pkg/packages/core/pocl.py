"""
Partial-order causal-link view of a total-order ground plan, and threat detection.

Step ids: 0 is the synthetic start step (its effects are the initial state),
plan step k has id k + 1, and the synthetic end step (its preconditions are
the goal) has id n + 1. Trajectory position j is the state after j plan steps.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import LiftingError, ProjectionError
from .strips import GroundAction, GroundPlan, Literal, State, applicable, project

logger = logging.getLogger(__name__)

START = "start"
END = "end"


@dataclass(frozen=True, order=True)
class CausalLink:
    producer: int
    condition: Literal
    consumer: int

    def to_dict(self) -> dict:
        return {
            "producer": self.producer,
            "condition": str(self.condition),
            "consumer": self.consumer,
        }


@dataclass(frozen=True)
class POCLStep:
    id: int
    label: str
    action: GroundAction | None
    preconditions: frozenset[Literal]
    effects: frozenset[Literal]

    @property
    def bindings(self) -> dict[str, str]:
        return dict(self.action.binding) if self.action is not None else {}


@dataclass(frozen=True)
class POCLPlan:
    steps: tuple[POCLStep, ...]
    orderings: frozenset[tuple[int, int]]
    links: tuple[CausalLink, ...]
    plan: GroundPlan

    @property
    def start_id(self) -> int:
        return 0

    @property
    def end_id(self) -> int:
        return len(self.steps) - 1

    def step(self, step_id: int) -> POCLStep:
        return self.steps[step_id]

    def precedes(self, before: int, after: int) -> bool:
        # Lifted plans keep the source total order, so the closure is numeric order.
        return before < after

    def links_into(self, step_id: int) -> list[CausalLink]:
        return [link for link in self.links if link.consumer == step_id]


@dataclass(frozen=True)
class Threat:
    link: CausalLink
    position: int
    step: GroundAction

    @property
    def interval(self) -> tuple[int, int]:
        return self.link.producer, self.link.consumer - 1


def lift_to_pocl(plan: GroundPlan | Sequence[GroundAction], init: State, goal: Iterable[Literal]) -> POCLPlan:
    plan = plan if isinstance(plan, GroundPlan) else GroundPlan(tuple(plan))
    goal = tuple(goal)
    try:
        trajectory = project(plan, init)
    except ProjectionError as exc:
        raise LiftingError(exc.index, str(plan[exc.index]), exc.missing) from exc
    final = trajectory[-1]
    for lit in goal:
        if not final.holds(lit):
            raise LiftingError(len(plan), "goal", str(lit))

    n = len(plan)
    steps = [POCLStep(0, START, None, frozenset(), frozenset(init.atoms))]
    for k, action in enumerate(plan):
        steps.append(
            POCLStep(k + 1, str(action), action, frozenset(action.preconditions), frozenset(action.effects))
        )
    steps.append(POCLStep(n + 1, END, None, frozenset(goal), frozenset()))

    # latest producer of each atom so far, walking the total order
    producer: dict[Literal, int] = {atom: 0 for atom in init.atoms}
    links: list[CausalLink] = []
    for step in steps[1:]:
        for lit in sorted(step.preconditions):
            if lit.positive:
                links.append(CausalLink(producer[lit], lit, step.id))
        if step.action is not None:
            for atom in step.action.delete:
                producer.pop(atom, None)
            for atom in step.action.add:
                producer[atom] = step.id

    orderings = {(k, k + 1) for k in range(n + 1)}
    orderings |= {(0, k) for k in range(1, n + 2)} | {(k, n + 1) for k in range(n + 1)}
    logger.debug("Lifted %s steps into %s causal links", n, len(links))
    return POCLPlan(tuple(steps), frozenset(orderings), tuple(links), plan)


def detect_threats(
    pocl: POCLPlan, candidates: Iterable[GroundAction], trajectory: Sequence[State]
) -> frozenset[Threat]:
    """Every (link, w, j) where w deletes the link condition and is applicable at position j.

    Plan steps are always candidates. A step never threatens a link it produces or consumes.
    """
    pool = set(candidates) | set(pocl.plan.steps)
    by_deleted: dict[Literal, list[GroundAction]] = defaultdict(list)
    for action in pool:
        for atom in action.delete:
            by_deleted[atom].append(action)

    threats: set[Threat] = set()
    for link in pocl.links:
        threatening = by_deleted.get(link.condition)
        if not threatening:
            continue
        own = {pocl.step(link.producer).action, pocl.step(link.consumer).action}
        for position in range(link.producer, link.consumer):
            state = trajectory[position]
            for action in threatening:
                if action in own:
                    continue
                if applicable(state, action):
                    threats.add(Threat(link, position, action))
    return frozenset(threats)
