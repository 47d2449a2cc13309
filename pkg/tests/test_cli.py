import io
import json

import pytest

from apps.cli.main import EXIT_BUDGET, EXIT_CONTRACT, EXIT_DIAGNOSTICS, EXIT_OK, run

from tests.conftest import FIXTURES
from tests.test_at_engine import DUEL_DOMAIN, DUEL_PROBLEM


def invoke(*argv, stdin=""):
    out, err = io.StringIO(), io.StringIO()
    code = run([str(a) for a in argv], stdin=io.StringIO(stdin), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture(scope="module")
def generated(tmp_path_factory):
    out = tmp_path_factory.mktemp("gen")
    code, _, _ = invoke("gen-nbeacons", "--canonical", "-o", out)
    assert code == EXIT_OK
    return out


@pytest.fixture(scope="module")
def mitigated(generated):
    report = generated / "mitigation.json"
    code, _, _ = invoke(
        "mitigate", "-d", generated / "domain.pddl", "-p", generated / "problem.pddl",
        "--plan", generated / "plan.txt", "-o", report,
    )
    assert code == EXIT_OK
    return report


def _canonical_args(generated):
    return ["-d", generated / "domain.pddl", "-p", generated / "problem.pddl"]


def test_generated_canonical_files(generated):
    assert {p.name for p in generated.iterdir()} >= {"domain.pddl", "problem.pddl", "plan.txt"}
    expected = (FIXTURES / "canonical" / "plan.txt").read_text(encoding="utf-8")
    assert (generated / "plan.txt").read_text(encoding="utf-8") == expected


def test_gen_nbeacons_without_out_prints_json():
    code, out, _ = invoke("gen-nbeacons", "--width", 5, "--height", 5, "--sandpits", 2, "--seed", 1)
    assert code == EXIT_OK
    files = json.loads(out)
    assert set(files) == {"domain.pddl", "problem.pddl"}


def test_validate_summarizes_inputs(generated):
    code, out, _ = invoke("validate", *_canonical_args(generated), "--plan", generated / "plan.txt")
    assert code == EXIT_OK
    summary = json.loads(out)
    assert summary["problem"] == "canonical-10x10"
    assert summary["plans"] == [{"cost": 9, "steps": 9}]


def test_plan_finds_the_nine_step_route(generated):
    code, out, _ = invoke("plan", *_canonical_args(generated))
    assert code == EXIT_OK
    assert len(out.splitlines()) == 9
    assert out.splitlines()[-1] == "8: (activate agent c6-9 beacon)"


def test_plan_budget_exhaustion_exits_two(generated):
    code, out, err = invoke("plan", *_canonical_args(generated), "--budget", 3)
    assert code == EXIT_BUDGET
    assert out == ""


def test_analyze_reports_four_events(generated):
    code, out, _ = invoke("analyze", *_canonical_args(generated), "--plan", generated / "plan.txt")
    assert code == EXIT_OK
    report = json.loads(out)
    assert [e["trigger_index"] for e in report["conditioning_events"]] == [1, 2, 3, 4]
    assert report["risk"]["level"] == "high"
    assert report["prestrength"][0]["p"] == 8


def test_mitigate_then_assess_reproduces_the_golden_line(mitigated):
    golden = (FIXTURES / "canonical" / "assessment.json").read_text(encoding="utf-8")
    code, out, _ = invoke("assess", mitigated)
    assert code == EXIT_OK
    assert out == golden
    code, piped, _ = invoke("assess", stdin=mitigated.read_text(encoding="utf-8"))
    assert piped == golden


def test_mitigate_writes_the_edited_plan(mitigated):
    plan = mitigated.with_suffix(".plan").read_text(encoding="utf-8").splitlines()
    assert plan[:2] == ["0: (buy-hook agent)", "1: (pack-hook agent)"]
    assert len(plan) == 11
    report = json.loads(mitigated.read_text(encoding="utf-8"))
    assert report["status"] == "low-risk"


def test_assess_net_accounting(mitigated):
    code, out, _ = invoke("assess", mitigated, "--savings-accounting", "net")
    assert code == EXIT_OK
    assert json.loads(out)["at_assess"] == 0.75


def test_assess_rejects_a_report_without_events():
    code, _, err = invoke("assess", stdin="{}")
    assert code == EXIT_CONTRACT
    assert "contract violation" in err


def test_assess_rejects_non_json():
    code, _, _ = invoke("assess", stdin="[")
    assert code == EXIT_DIAGNOSTICS


def test_scripted_simulation_compares_both_plans(generated, mitigated):
    code, out, _ = invoke(
        "simulate", *_canonical_args(generated),
        "--plan", generated / "plan.txt", "--plan", mitigated.with_suffix(".plan"),
        "--script", FIXTURES / "canonical" / "all4.json",
    )
    assert code == EXIT_OK
    traces = json.loads(out)["traces"]
    assert [t["plan"] for t in traces] == ["pi", "pi-prime"]
    assert [t["trace"]["total_cost"] for t in traces] == [35, 29]
    assert [t["trace"]["recovery_cost"] for t in traces] == [12, 4]


def test_stochastic_simulation_writes_csv_and_ledger(generated, mitigated, tmp_path):
    url = f"sqlite:///{tmp_path / 'runs.db'}"
    code, out, _ = invoke(
        "simulate", *_canonical_args(generated),
        "--plan", generated / "plan.txt", "--plan", mitigated.with_suffix(".plan"),
        "--script", FIXTURES / "canonical" / "always_windy.json",
        "--trials", 3, "--csv", "--db", url,
    )
    assert code == EXIT_OK
    lines = out.splitlines()
    assert lines[0] == "trial,seed,plan,base_cost,recovery_cost,replan_cost,total_cost,events_fired"
    assert len(lines) == 1 + 3 * 2
    totals = [int(line.split(",")[6]) for line in lines[1:]]
    assert totals == [35, 29] * 3


def test_windless_simulation_summary(generated, mitigated):
    code, out, _ = invoke(
        "simulate", *_canonical_args(generated),
        "--plan", generated / "plan.txt", "--plan", mitigated.with_suffix(".plan"),
        "--wind-prob", 0, "--trials", 2,
    )
    assert code == EXIT_OK
    assert json.loads(out)["mean_saving"] == -2


def test_meta_cycle_on_the_canonical_plan(generated):
    code, out, _ = invoke("meta", *_canonical_args(generated), "--plan", generated / "plan.txt")
    assert code == EXIT_OK
    data = json.loads(out)
    assert data["result"]["status"] == "achieved"
    assert len(data["phases"]) == 6


def test_meta_uses_scripted_impacts(generated, tmp_path):
    script = tmp_path / "impact.json"
    entry = {"after_step": 1, "event": {"name": "wind-capture", "args": ["agent", "c6-2", "c2-2"]}, "impact": 10}
    script.write_text(json.dumps({"schedule": [entry]}), encoding="utf-8")
    args = [*_canonical_args(generated), "--plan", generated / "plan.txt"]
    code, out, _ = invoke("meta", *args, "--script", script)
    assert code == EXIT_OK
    result = json.loads(out)["result"]
    assert result["status"] == "achieved"
    assert result["at_assess"] == 0.894737
    _, plain, _ = invoke("meta", *args)
    assert json.loads(plain)["result"]["at_assess"] == 0.833333


def test_meta_failure_exits_three():
    base = FIXTURES / "errand"
    code, out, _ = invoke(
        "meta", "-d", base / "domain.pddl", "-p", base / "problem.pddl", "--plan", base / "plan.txt"
    )
    assert code == EXIT_CONTRACT
    assert json.loads(out)["result"]["status"] == "failed"


def test_adversarial_analysis_serializes_infinite_impact(tmp_path):
    (tmp_path / "d.pddl").write_text(DUEL_DOMAIN, encoding="utf-8")
    (tmp_path / "p.pddl").write_text(DUEL_PROBLEM, encoding="utf-8")
    (tmp_path / "plan.txt").write_text("0: (grab a)\n", encoding="utf-8")
    code, out, _ = invoke(
        "analyze", "-d", tmp_path / "d.pddl", "-p", tmp_path / "p.pddl",
        "--plan", tmp_path / "plan.txt", "--mode", "adversarial",
    )
    assert code == EXIT_OK
    (event,) = json.loads(out)["conditioning_events"]
    assert event["impact"] is None


def test_parse_errors_exit_one_with_located_diagnostics(tmp_path):
    broken = tmp_path / "broken.pddl"
    broken.write_text("(define (domain broken)\n  (:predicates (p)\n", encoding="utf-8")
    code, _, err = invoke("validate", "-d", broken)
    assert code == EXIT_DIAGNOSTICS
    assert str(broken) in err


def test_missing_file_exits_one(tmp_path):
    code, _, err = invoke("validate", "-d", tmp_path / "absent.pddl")
    assert code == EXIT_DIAGNOSTICS
    assert "error" in err


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["frobnicate"],
        ["plan", "-d", "x.pddl"],
    ],
)
def test_usage_errors_exit_one(argv):
    assert invoke(*argv)[0] == EXIT_DIAGNOSTICS


def test_invalid_settings_exit_one(generated):
    code, _, err = invoke(
        "mitigate", *_canonical_args(generated), "--plan", generated / "plan.txt", "--tau", 2
    )
    assert code == EXIT_DIAGNOSTICS
    assert "tau" in err
