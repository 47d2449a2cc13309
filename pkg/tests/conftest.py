from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import pytest

from packages.core.nbeacons import CANONICAL_CONFIG, canonical_scenario, generate
from packages.core.parser import format_plan, parse_domain, parse_plan, parse_problem
from packages.core.planner import GroundTask
from packages.core.strips import DomainModel, GroundPlan, Problem

FIXTURES = Path(__file__).parent / "fixtures"


@dataclass(frozen=True)
class Scenario:
    domain: DomainModel
    problem: Problem
    plan: GroundPlan
    task: GroundTask


def load_fixture(name: str) -> Scenario:
    base = FIXTURES / name
    domain = parse_domain((base / "domain.pddl").read_bytes(), file=str(base / "domain.pddl"))
    problem = parse_problem((base / "problem.pddl").read_bytes(), domain)
    plan = parse_plan((base / "plan.txt").read_bytes(), domain, problem)
    return Scenario(domain, problem, plan, GroundTask(domain, problem))


@pytest.fixture(scope="session")
def canonical() -> Scenario:
    domain, problem, plan = canonical_scenario()
    return Scenario(domain, problem, plan, GroundTask(domain, problem))


@pytest.fixture(scope="session")
def errand() -> Scenario:
    return load_fixture("errand")


@pytest.fixture(scope="session")
def canonical_dir(tmp_path_factory, canonical) -> Path:
    """Canonical NBeacons files on disk, as ``gen-nbeacons --canonical`` writes them."""
    out = tmp_path_factory.mktemp("canonical")
    domain_text, problem_text = generate(CANONICAL_CONFIG)
    (out / "domain.pddl").write_text(domain_text, encoding="utf-8")
    (out / "problem.pddl").write_text(problem_text, encoding="utf-8")
    (out / "plan.txt").write_text(format_plan(canonical.plan), encoding="utf-8")
    return out
