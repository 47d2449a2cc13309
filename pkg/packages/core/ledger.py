from __future__ import annotations

import logging

from .db import get_session
from .models import SimulationRun, TrialResult
from .simulator import MonteCarloSummary

logger = logging.getLogger(__name__)


def save_monte_carlo(
    summary: MonteCarloSummary, database_url: str, *, domain: str, problem: str
) -> int:
    """Persist one Monte Carlo invocation and its trial rows; returns the run id."""
    with get_session(database_url) as session:
        run = SimulationRun(
            domain=domain,
            problem=problem,
            plans=",".join(summary.labels),
            probability=summary.probability,
            window=summary.window,
            trials=summary.trials,
            seed=summary.seed,
            mean_saving=summary.mean_saving,
        )
        session.add(run)
        session.flush()
        for record in summary.records:
            session.add(
                TrialResult(
                    run_id=run.id,
                    trial=record.trial,
                    seed=record.seed,
                    plan_label=record.plan,
                    base_cost=record.base_cost,
                    recovery_cost=record.recovery_cost,
                    replan_cost=record.replan_cost,
                    total_cost=record.total_cost,
                    events_fired=record.events_fired,
                )
            )
        run_id = run.id
    logger.info("Stored Monte Carlo run %s with %s trial rows", run_id, len(summary.records))
    return run_id
