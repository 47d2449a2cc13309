from __future__ import annotations

from datetime import datetime

from sqlalchemy import (
    BigInteger,
    CheckConstraint,
    DateTime,
    Float,
    ForeignKey,
    Integer,
    String,
    UniqueConstraint,
)
from sqlalchemy.orm import Mapped, mapped_column, relationship

from .db import Base


class SimulationRun(Base):
    __tablename__ = "simulation_runs"
    __table_args__ = (
        CheckConstraint("probability >= 0.0 AND probability <= 1.0", name="ck_run_probability"),
        CheckConstraint("trials >= 1", name="ck_run_trials"),
    )

    id: Mapped[int] = mapped_column(Integer, primary_key=True)
    created_at: Mapped[datetime] = mapped_column(
        DateTime(timezone=True), nullable=False, default=datetime.utcnow
    )
    domain: Mapped[str] = mapped_column(String(255), nullable=False)
    problem: Mapped[str] = mapped_column(String(255), nullable=False)
    plans: Mapped[str] = mapped_column(String(255), nullable=False)
    probability: Mapped[float] = mapped_column(Float, nullable=False)
    window: Mapped[int | None] = mapped_column(Integer, nullable=True)
    trials: Mapped[int] = mapped_column(Integer, nullable=False)
    seed: Mapped[int] = mapped_column(BigInteger, nullable=False)
    mean_saving: Mapped[float] = mapped_column(Float, nullable=False)

    trials_recorded: Mapped[list["TrialResult"]] = relationship(
        "TrialResult", back_populates="run", order_by="TrialResult.id"
    )


class TrialResult(Base):
    __tablename__ = "trial_records"
    __table_args__ = (
        UniqueConstraint("run_id", "trial", "plan_label", name="uq_trial_run_plan"),
        CheckConstraint(
            "base_cost >= 0 AND recovery_cost >= 0 AND replan_cost >= 0",
            name="ck_trial_costs_nonnegative",
        ),
    )

    id: Mapped[int] = mapped_column(Integer, primary_key=True)
    run_id: Mapped[int] = mapped_column(ForeignKey("simulation_runs.id"), nullable=False)
    trial: Mapped[int] = mapped_column(Integer, nullable=False)
    seed: Mapped[int] = mapped_column(BigInteger, nullable=False)
    plan_label: Mapped[str] = mapped_column(String(255), nullable=False)
    base_cost: Mapped[int] = mapped_column(Integer, nullable=False)
    recovery_cost: Mapped[int] = mapped_column(Integer, nullable=False)
    replan_cost: Mapped[int] = mapped_column(Integer, nullable=False)
    total_cost: Mapped[int] = mapped_column(Integer, nullable=False)
    events_fired: Mapped[int] = mapped_column(Integer, nullable=False)

    run: Mapped["SimulationRun"] = relationship("SimulationRun", back_populates="trials_recorded")
