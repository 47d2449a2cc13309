"""
Grounded forward state-space search.

``find_plan`` produces baseline solution plans from agent actions only.
``recovery_cost`` is the impact oracle: the cheapest plan of agent and
mitigation-candidate actions that re-establishes a threatened condition.
Both run uniform-cost search with ties broken by the serialized action
sequence, so results are reproducible.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from .config import settings
from .errors import ContractViolation
from .strips import (
    ActionKind,
    DomainModel,
    GroundAction,
    GroundPlan,
    Literal,
    Problem,
    State,
    applicable,
    entails,
    ground,
)

logger = logging.getLogger(__name__)

AGENT_KINDS = frozenset({ActionKind.AGENT})
RECOVERY_KINDS = frozenset({ActionKind.AGENT, ActionKind.MITIGATION})


class SearchStatus(str, Enum):
    SOLVED = "solved"
    UNSOLVABLE = "unsolvable"
    BUDGET_EXHAUSTED = "budget-exhausted"


@dataclass(frozen=True)
class SearchBudget:
    max_expansions: int = settings.search_expansions
    max_cost: float | None = None

    def __post_init__(self) -> None:
        if self.max_expansions < 1:
            raise ContractViolation("max_expansions must be at least 1")
        if self.max_cost is not None and self.max_cost < 0:
            raise ContractViolation("max_cost must be nonnegative")


@dataclass(frozen=True)
class SearchResult:
    status: SearchStatus
    plan: GroundPlan | None = None
    expansions: int = 0

    @property
    def solved(self) -> bool:
        return self.status is SearchStatus.SOLVED

    @property
    def cost(self) -> float:
        return self.plan.total_cost if self.plan is not None else math.inf


class GroundTask:
    """A domain/problem pair with its ground actions and successor indexes.

    Each action is indexed under one dynamic positive precondition, the one
    shared by the fewest actions; actions with none are always candidates.
    """

    def __init__(self, domain: DomainModel, problem: Problem):
        self.domain = domain
        self.problem = problem
        self.actions: tuple[GroundAction, ...] = ground(domain, problem)
        static = domain.static_predicates
        frequency: Counter[Literal] = Counter(
            p for a in self.actions for p in a.pos_pre if p.predicate not in static
        )
        self._index: dict[frozenset[ActionKind], tuple[dict[Literal, list[GroundAction]], list[GroundAction]]] = {}
        self._anchors: dict[GroundAction, Literal | None] = {}
        for action in self.actions:
            dynamic = [p for p in action.pos_pre if p.predicate not in static]
            self._anchors[action] = (
                min(dynamic, key=lambda p: (frequency[p], str(p))) if dynamic else None
            )
        self._recovery_memo: dict[tuple, SearchResult] = {}
        logger.info(
            "Grounded %s: %s actions (%s static predicates)",
            problem.name,
            len(self.actions),
            len(static),
        )

    def of_kind(self, *kinds: ActionKind) -> tuple[GroundAction, ...]:
        return tuple(a for a in self.actions if a.kind in kinds)

    def _kind_index(self, kinds: frozenset[ActionKind]):
        if kinds not in self._index:
            by_anchor: dict[Literal, list[GroundAction]] = defaultdict(list)
            free: list[GroundAction] = []
            for action in self.actions:
                if action.kind not in kinds:
                    continue
                anchor = self._anchors[action]
                if anchor is None:
                    free.append(action)
                else:
                    by_anchor[anchor].append(action)
            self._index[kinds] = (dict(by_anchor), free)
        return self._index[kinds]

    def successors(self, state: State, kinds: Iterable[ActionKind]) -> list[GroundAction]:
        """Applicable actions of the given kinds, sorted by serialized name."""
        by_anchor, free = self._kind_index(frozenset(kinds))
        candidates = list(free)
        for atom in state.atoms:
            candidates.extend(by_anchor.get(atom, ()))
        return sorted((a for a in candidates if applicable(state, a)), key=str)

    def search(
        self,
        start: State,
        goal: Sequence[Literal],
        kinds: Iterable[ActionKind],
        budget: SearchBudget | None = None,
    ) -> SearchResult:
        return uniform_cost_search(self, start, goal, frozenset(kinds), budget or SearchBudget())

    def recover(
        self, state: State, condition: Sequence[Literal], budget: SearchBudget | None = None
    ) -> SearchResult:
        budget = budget or SearchBudget()
        key = (state, tuple(condition), budget)
        if key not in self._recovery_memo:
            self._recovery_memo[key] = self.search(state, condition, RECOVERY_KINDS, budget)
        return self._recovery_memo[key]


def uniform_cost_search(
    task: GroundTask,
    start: State,
    goal: Sequence[Literal],
    kinds: frozenset[ActionKind],
    budget: SearchBudget,
) -> SearchResult:
    counter = itertools.count()
    frontier: list[tuple] = [(0, (), next(counter), start, ())]
    closed: set[State] = set()
    expansions = 0
    while frontier:
        g, names, _, state, steps = heapq.heappop(frontier)
        if state in closed:
            continue
        if entails(state, goal):
            logger.debug("Search solved with cost %s after %s expansions", g, expansions)
            return SearchResult(SearchStatus.SOLVED, GroundPlan(steps), expansions)
        if expansions >= budget.max_expansions:
            logger.warning("Search budget of %s expansions exhausted", budget.max_expansions)
            return SearchResult(SearchStatus.BUDGET_EXHAUSTED, None, expansions)
        closed.add(state)
        expansions += 1
        for action in task.successors(state, kinds):
            cost = g + action.cost
            if budget.max_cost is not None and cost > budget.max_cost:
                continue
            child = State((state.atoms - action.delete) | action.add)
            if child in closed:
                continue
            heapq.heappush(
                frontier, (cost, names + (str(action),), next(counter), child, steps + (action,))
            )
    return SearchResult(SearchStatus.UNSOLVABLE, None, expansions)


def find_plan(
    domain: DomainModel,
    problem: Problem,
    budget: SearchBudget | None = None,
    *,
    task: GroundTask | None = None,
) -> SearchResult:
    """Minimum-cost plan from the problem's initial state using agent actions only."""
    task = task or GroundTask(domain, problem)
    result = task.search(problem.init, problem.goal, AGENT_KINDS, budget)
    logger.info(
        "find_plan %s: %s (cost %s, %s expansions)",
        problem.name,
        result.status.value,
        result.plan.total_cost if result.plan is not None else "-",
        result.expansions,
    )
    return result


def recovery_cost(
    task: GroundTask,
    state: State,
    condition: Sequence[Literal],
    budget: SearchBudget | None = None,
) -> float:
    """Cost of the cheapest plan re-establishing ``condition``; ``math.inf`` when unrecoverable."""
    result = task.recover(state, condition, budget)
    return result.plan.total_cost if result.solved else math.inf
