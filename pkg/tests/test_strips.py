import pytest
from hypothesis import given, settings, strategies as st

from packages.core.errors import ContractViolation, GroundingError, ProjectionError
from packages.core.nbeacons import AGENT, GridConfig, build_domain, build_problem, cell_name
from packages.core.strips import (
    OBJECT_TYPE,
    ActionKind,
    ActionSchema,
    DomainModel,
    GroundAction,
    Literal,
    PredicateDecl,
    Problem,
    State,
    TypedObject,
    TypedVar,
    applicable,
    apply,
    atom,
    entails,
    ground,
    missing_precondition,
    project,
    regress,
)

from tests.oracles import brute_force_ground

TYPES = ("block", "slot")
PREDICATES = (("ready", 0), ("free", 1), ("on", 2), ("linked", 2))


@st.composite
def small_tasks(draw):
    """Up to three random schemas over up to six typed objects."""
    objects = tuple(
        TypedObject(f"o{i}", draw(st.sampled_from(TYPES))) for i in range(draw(st.integers(1, 6)))
    )
    names = [o.name for o in objects]

    def literal(terms):
        name, arity = draw(st.sampled_from(PREDICATES))
        return Literal(name, tuple(draw(st.sampled_from(terms)) for _ in range(arity)), draw(st.booleans()))

    schemas = []
    for index in range(draw(st.integers(1, 3))):
        params = tuple(
            TypedVar(f"?v{k}", draw(st.sampled_from(TYPES + (OBJECT_TYPE,))))
            for k in range(draw(st.integers(0, 3)))
        )
        terms = [p.name for p in params] + names[:1]
        preconditions = tuple(literal(terms) for _ in range(draw(st.integers(0, 3))))
        effects: dict[Literal, Literal] = {}
        for _ in range(draw(st.integers(1, 3))):
            lit = literal(terms)
            effects.setdefault(lit.atom, lit)
        schemas.append(ActionSchema(f"a{index}", params, preconditions, tuple(effects.values())))

    declared = tuple(
        PredicateDecl(name, tuple(TypedVar(f"?p{i}") for i in range(arity))) for name, arity in PREDICATES
    )
    domain = DomainModel("random", TYPES, declared, tuple(schemas))
    atoms = []
    for _ in range(draw(st.integers(0, 8))):
        name, arity = draw(st.sampled_from(PREDICATES))
        atoms.append(atom(name, *(draw(st.sampled_from(names)) for _ in range(arity))))
    return domain, Problem("random-1", "random", objects, State.of(atoms))


def test_grounding_prunes_only_static_failures(canonical):
    grounded = ground(canonical.domain, canonical.problem)
    assert set(grounded) == brute_force_ground(canonical.domain, canonical.problem)
    assert len(grounded) == len(set(grounded))


def test_grounding_matches_cartesian_product_on_small_grids():
    domain = build_domain()
    for seed, (w, h) in enumerate([(2, 2), (3, 2), (3, 3), (4, 3)]):
        config = GridConfig(w, h, agent_start=(1, 1), beacons=((w, h),), sandpits=((w, 1),))
        problem = build_problem(config, domain)
        assert set(ground(domain, problem)) == brute_force_ground(domain, problem), seed


@settings(max_examples=200, deadline=None)
@given(small_tasks())
def test_grounding_matches_cartesian_product_on_random_domains(task):
    domain, problem = task
    grounded = ground(domain, problem)
    assert set(grounded) == brute_force_ground(domain, problem)
    assert len(grounded) == len(set(grounded))


def test_canonical_moves_are_the_border_legal_pairs(canonical):
    offsets = {"north": (0, 1), "south": (0, -1), "east": (1, 0), "west": (-1, 0)}
    expected = {
        (f"move-{direction}", cell_name((x, y)), cell_name((x + dx, y + dy)))
        for x in range(1, 11)
        for y in range(1, 11)
        for direction, (dx, dy) in offsets.items()
        if 1 <= x + dx <= 10 and 1 <= y + dy <= 10
    }
    moves = {(a.schema, a.args[1], a.args[2]) for a in canonical.task.actions if a.schema.startswith("move-")}
    assert len(expected) == 360
    assert moves == expected
    assert ("move-west", "c3-2", "c2-2") in moves


def test_grounding_order_is_deterministic(canonical):
    first = ground(canonical.domain, canonical.problem)
    second = ground(canonical.domain, canonical.problem)
    assert [str(a) for a in first] == [str(a) for a in second]
    names = [a.schema for a in first]
    assert names == sorted(names)


def test_canonical_wind_events_are_grounded_per_downwind_fact(canonical):
    events = [a for a in canonical.task.actions if a.kind is ActionKind.EVENT]
    assert len(events) == 20
    on_route = sorted(str(e) for e in events if e.args[1].startswith("c6-"))
    assert on_route == [
        "(wind-capture agent c6-2 c2-2)",
        "(wind-capture agent c6-3 c3-3)",
        "(wind-capture agent c6-4 c1-4)",
        "(wind-capture agent c6-5 c4-5)",
    ]


def test_undeclared_object_type_is_a_grounding_error(canonical):
    problem = canonical.problem
    broken = Problem(
        name=problem.name,
        domain_name=problem.domain_name,
        objects=problem.objects + (TypedObject("rover", "vehicle"),),
        init=problem.init,
        goal=problem.goal,
    )
    with pytest.raises(GroundingError) as exc:
        ground(canonical.domain, broken)
    assert exc.value.schema == "activate"
    assert "rover" in str(exc.value)


def test_apply_removes_deleted_atoms_and_adds_new_ones():
    schema = ActionSchema(
        name="toggle",
        parameters=(TypedVar("?x"),),
        preconditions=(Literal("on", ("?x",)),),
        effects=(Literal("on", ("?x",), False), Literal("seen", ("?x",))),
    )
    action = GroundAction.from_schema(schema, {"?x": "lamp"})
    state = State.of([atom("on", "lamp")])
    after = apply(state, action)
    assert after.holds(atom("seen", "lamp"))
    assert not after.holds(atom("on", "lamp"))


def test_effects_with_both_polarities_are_rejected():
    with pytest.raises(ContractViolation):
        ActionSchema(name="flip", effects=(atom("p"), atom("p").negate()))


def test_apply_rejects_inapplicable_action(canonical):
    second = canonical.plan[1]
    state = canonical.problem.init
    assert not applicable(state, second)
    assert missing_precondition(state, second) == atom("at", AGENT, "c6-2")
    with pytest.raises(ContractViolation):
        apply(state, second)


def test_projection_yields_one_state_per_step_and_reaches_goal(canonical):
    trajectory = project(canonical.plan, canonical.problem.init)
    assert len(trajectory) == len(canonical.plan) + 1
    assert trajectory[0] == canonical.problem.init
    assert trajectory[1].holds(atom("at", AGENT, "c6-2"))
    assert entails(trajectory[-1], canonical.problem.goal)


def test_projection_error_names_the_failing_step(canonical):
    reordered = (canonical.plan[0], canonical.plan[2])
    with pytest.raises(ProjectionError) as exc:
        project(reordered, canonical.problem.init)
    assert exc.value.index == 1
    assert "c6-3" in exc.value.missing


def test_empty_plan_projects_to_initial_state(canonical):
    assert project((), canonical.problem.init) == [canonical.problem.init]


def test_regress_through_suffix_gives_needed_atoms(canonical):
    needed = regress(canonical.problem.goal, canonical.plan.steps[-2:])
    assert atom("at", AGENT, "c6-8") in needed
    assert atom("canMove", AGENT) in needed
    assert atom("activated", "beacon") not in needed


@settings(max_examples=100, deadline=None)
@given(small_tasks(), st.data())
def test_apply_changes_only_effect_atoms_along_random_plans(task, data):
    domain, problem = task
    actions = sorted(ground(domain, problem), key=str)
    state = problem.init
    steps = []
    for _ in range(data.draw(st.integers(0, 6))):
        enabled = [a for a in actions if applicable(state, a)]
        if not enabled:
            break
        action = data.draw(st.sampled_from(enabled))
        after = apply(state, action)
        touched = {lit.atom for lit in action.effects}
        assert after.atoms - touched == state.atoms - touched
        assert action.add <= after.atoms
        assert not (action.delete - action.add) & after.atoms
        steps.append(action)
        state = after

    trajectory = project(steps, problem.init)
    assert trajectory[-1] == state
    for before, step, after in zip(trajectory, steps, trajectory[1:]):
        assert applicable(before, step)
        assert apply(before, step) == after
