import pytest

from packages.core.errors import LiftingError, ProjectionError
from packages.core.nbeacons import AGENT, build_domain, build_problem, random_config
from packages.core.planner import GroundTask, find_plan
from packages.core.pocl import CausalLink, detect_threats, lift_to_pocl
from packages.core.strips import ActionKind, GroundAction, Literal, State, apply, atom, entails, project

from tests.oracles import threat_triples


def _action(name, pre=(), add=(), delete=()):
    effects = tuple(atom(p) for p in add) + tuple(atom(p).negate() for p in delete)
    return GroundAction(name, (), tuple(atom(p) for p in pre), effects)


CHAIN = (
    _action("a", add=("p",)),
    _action("b", pre=("p",), add=("q",)),
    _action("c", pre=("q",), add=("g",)),
)


def test_chain_links_use_latest_producer():
    pocl = lift_to_pocl(CHAIN, State(), (atom("g"),))
    assert pocl.links == (
        CausalLink(1, atom("p"), 2),
        CausalLink(2, atom("q"), 3),
        CausalLink(3, atom("g"), 4),
    )
    assert pocl.start_id == 0
    assert pocl.end_id == 4
    assert [s.label for s in pocl.steps] == ["start", "(a)", "(b)", "(c)", "end"]


def test_producer_is_a_step_not_the_start_when_re_established():
    init = State.of([atom("p")])
    steps = (_action("drop", pre=("p",), delete=("p",)), _action("get", add=("p",)), _action("use", pre=("p",)))
    pocl = lift_to_pocl(steps, init, ())
    assert CausalLink(0, atom("p"), 1) in pocl.links
    assert CausalLink(2, atom("p"), 3) in pocl.links


def test_orderings_follow_the_total_order():
    pocl = lift_to_pocl(CHAIN, State(), (atom("g"),))
    assert (0, 4) in pocl.orderings
    assert (1, 2) in pocl.orderings
    assert all(before < after for before, after in pocl.orderings)
    assert pocl.precedes(1, 3)


def test_links_cover_every_positive_precondition(canonical):
    pocl = lift_to_pocl(canonical.plan, canonical.problem.init, canonical.problem.goal)
    for step in pocl.steps[1:]:
        positive = {lit for lit in step.preconditions if lit.positive}
        assert {link.condition for link in pocl.links_into(step.id)} == positive
    for link in pocl.links:
        assert link.producer < link.consumer


def test_lifting_a_broken_plan_fails(canonical):
    with pytest.raises(LiftingError) as exc:
        lift_to_pocl(canonical.plan.steps[1:], canonical.problem.init, canonical.problem.goal)
    assert exc.value.index == 0
    with pytest.raises(LiftingError):
        lift_to_pocl(canonical.plan.steps[:-1], canonical.problem.init, canonical.problem.goal)


def test_step_bindings_come_from_the_schema(canonical):
    pocl = lift_to_pocl(canonical.plan, canonical.problem.init, canonical.problem.goal)
    assert pocl.step(1).bindings == {"?a": AGENT, "?from": "c6-1", "?to": "c6-2"}
    assert pocl.step(0).bindings == {}


def test_canonical_wind_threats(canonical):
    problem = canonical.problem
    pocl = lift_to_pocl(canonical.plan, problem.init, problem.goal)
    trajectory = project(canonical.plan, problem.init)
    events = canonical.task.of_kind(ActionKind.EVENT)
    threats = detect_threats(pocl, events, trajectory)
    wind = {t for t in threats if t.step.kind is ActionKind.EVENT}
    assert {t.position for t in wind} == {1, 2, 3, 4}
    can_move = atom("canMove", AGENT)
    assert {t.link for t in wind if t.position == 1 and t.link.condition == can_move} == {
        CausalLink(0, can_move, k) for k in range(2, 9)
    }
    for threat in wind:
        low, high = threat.interval
        assert low <= threat.position <= high


def test_threat_outside_its_interval_is_not_reported():
    init = State.of([atom("p")])
    steps = (_action("use", pre=("p",)), _action("late", add=("x",)))
    breaker = GroundAction("break", (), (atom("x"),), (atom("p").negate(),), kind=ActionKind.EVENT)
    pocl = lift_to_pocl(steps, init, ())
    trajectory = project(steps, init)
    assert detect_threats(pocl, (breaker,), trajectory) == frozenset()


def test_threats_match_triple_enumeration_on_random_grids():
    domain = build_domain()
    checked = 0
    for seed in range(400):
        if checked == 100:
            break
        config = random_config(4 + seed % 4, 4 + (seed // 4) % 4, sandpits=2 + seed % 5, seed=seed)
        problem = build_problem(config, domain)
        task = GroundTask(domain, problem)
        result = find_plan(domain, problem, task=task)
        if not result.solved or len(result.plan) > 12:
            continue
        pocl = lift_to_pocl(result.plan, problem.init, problem.goal)
        trajectory = project(result.plan, problem.init)
        candidates = task.of_kind(ActionKind.EVENT)
        found = {(t.link, t.position, t.step) for t in detect_threats(pocl, candidates, trajectory)}
        assert found == threat_triples(pocl, candidates, trajectory), seed
        checked += 1
    assert checked == 100


def test_injecting_a_detected_threat_breaks_the_plan(canonical):
    scenarios = [(canonical.task, canonical.plan)]
    domain = build_domain()
    for seed in range(30):
        problem = build_problem(random_config(5, 5, sandpits=3, seed=seed), domain)
        task = GroundTask(domain, problem)
        result = find_plan(domain, problem, task=task)
        if result.solved:
            scenarios.append((task, result.plan))
    checked = 0
    for task, plan in scenarios:
        init, goal = task.problem.init, task.problem.goal
        pocl = lift_to_pocl(plan, init, goal)
        trajectory = project(plan, init)
        for threat in detect_threats(pocl, task.of_kind(ActionKind.EVENT), trajectory):
            disturbed = apply(trajectory[threat.position], threat.step)
            checked += 1
            try:
                final = project(plan.steps[threat.position :], disturbed)[-1]
            except ProjectionError:
                continue
            assert not entails(final, goal), threat
    assert checked >= 4

def test_literal_ordering_is_total():
    lits = [Literal("b", ("x",)), Literal("a", ("y",)), Literal("a", ("x",), False)]
    assert sorted(lits)[0] == Literal("a", ("x",), False)
