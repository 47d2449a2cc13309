import json

import pytest

from packages.core.at_engine import EditKind, PlanEdit
from packages.core.config import Settings
from packages.core.errors import ContractViolation
from packages.core.meta_controller import (
    PHASES,
    CognitiveTrace,
    CycleStatus,
    GoalStatus,
    MetaController,
    apply_edits,
    explain,
)
from packages.core.parser import parse_domain, parse_plan, parse_problem
from packages.core.planner import GroundTask
from packages.core.reports import write_report
from packages.core.strips import GroundPlan, atom

from tests.test_at_engine import DUEL_DOMAIN, DUEL_PROBLEM


def _trace(scenario, plan=None) -> CognitiveTrace:
    return CognitiveTrace(plan or scenario.plan, scenario.problem.goal, scenario.problem.init)


def test_canonical_cycle_inserts_the_hook(canonical):
    controller = MetaController(canonical.task)
    (result,) = controller.run(_trace(canonical), cycles=1)
    assert result.status is CycleStatus.ACHIEVED
    assert [p.name for p in result.phases] == list(PHASES)
    assert len(result.plan) == 11
    assert result.plan.names()[:2] == ["(buy-hook agent)", "(pack-hook agent)"]
    assert [e.position for e in result.meta_plan.edits] == [0, 1]
    assert result.goal.status is GoalStatus.ACHIEVED
    assert result.assessment.value == pytest.approx(5 / 6)


def test_second_cycle_finds_nothing_left_to_do(canonical):
    controller = MetaController(canonical.task)
    first, second = controller.run(_trace(canonical), cycles=2)
    assert first.status is CycleStatus.ACHIEVED
    assert second.status is CycleStatus.NONE
    assert second.plan.names() == first.plan.names()
    assert second.meta_plan.edits == ()
    assert len(controller.memory.covered) == 4


def test_phase_log_serializes_with_digests(canonical):
    (result,) = MetaController(canonical.task).run(_trace(canonical))
    data = json.loads(write_report(result))
    assert [p["name"] for p in data["phases"]] == list(PHASES)
    assert all(len(p["inputs_digest"]) == 64 for p in data["phases"])
    assert data["result"]["status"] == "achieved"
    assert data["result"]["at_assess"] == 0.833333


def test_event_free_plan_needs_no_meta_goal():
    domain = parse_domain(DUEL_DOMAIN)
    problem = parse_problem(DUEL_PROBLEM, domain)
    plan = parse_plan("0: (grab a)\n", domain, problem)
    task = GroundTask(domain, problem)
    (result,) = MetaController(task).run(CognitiveTrace(plan, problem.goal, problem.init))
    assert result.status is CycleStatus.NONE
    assert result.goal is None
    assert result.plan.names() == ["(grab a)"]


def test_partial_mitigation_fails_control_and_keeps_the_plan(errand):
    (result,) = MetaController(errand.task).run(_trace(errand))
    assert result.status is CycleStatus.FAILED
    assert result.plan.names() == errand.plan.names()
    control = result.phases[-1]
    assert "unmitigated" in control.detail["diagnostic"]


def test_mitigation_budget_surfaces_in_the_cycle(errand):
    controller = MetaController(errand.task, Settings(mitigation_budget=1))
    (result,) = controller.run(_trace(errand))
    assert result.status is CycleStatus.BUDGET_EXHAUSTED


def test_trace_that_misses_its_goal_is_rejected(canonical):
    broken = GroundPlan(canonical.plan.steps[:-1])
    with pytest.raises(ContractViolation):
        MetaController(canonical.task).run(_trace(canonical, broken))


def test_explain_ranks_can_move_first(canonical):
    vulnerabilities = explain(_trace(canonical), canonical.task)
    assert vulnerabilities.prestrength[0].literal == atom("canMove", "agent")
    assert len(vulnerabilities.events) == 4


def test_apply_edits_checks_deletions(canonical):
    first = canonical.plan.steps[0]
    shorter = apply_edits(canonical.plan, (PlanEdit(EditKind.DELETE, 0, first),))
    assert len(shorter) == 8
    with pytest.raises(ContractViolation):
        apply_edits(canonical.plan, (PlanEdit(EditKind.DELETE, 1, first),))


def test_identical_runs_write_identical_phase_logs(canonical):
    first = MetaController(canonical.task).run(_trace(canonical), cycles=2)
    second = MetaController(canonical.task).run(_trace(canonical), cycles=2)
    assert write_report({"cycles": first}) == write_report({"cycles": second})
    assert [p.outputs_digest for p in first[0].phases] == [p.outputs_digest for p in second[0].phases]


def test_scripted_impacts_flow_into_the_cycle(canonical):
    overrides = {"(wind-capture agent c6-2 c2-2)": 10}
    controller = MetaController(canonical.task, impact_overrides=overrides)
    (result,) = controller.run(_trace(canonical))
    assert result.status is CycleStatus.ACHIEVED
    assert result.assessment.impact_sum == 19
    assert result.assessment.value == pytest.approx(17 / 19)
    vulnerabilities = explain(_trace(canonical), canonical.task, impact_overrides=overrides)
    assert [ev.impact for ev in vulnerabilities.events] == [10, 3, 3, 3]
