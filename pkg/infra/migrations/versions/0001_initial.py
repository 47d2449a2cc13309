from alembic import op
import sqlalchemy as sa


revision = "0001_initial"
down_revision = None
branch_labels = None
depends_on = None


def upgrade() -> None:
    op.create_table(
        "simulation_runs",
        sa.Column("id", sa.Integer(), primary_key=True),
        sa.Column("created_at", sa.DateTime(timezone=True), nullable=False),
        sa.Column("domain", sa.String(length=255), nullable=False),
        sa.Column("problem", sa.String(length=255), nullable=False),
        sa.Column("plans", sa.String(length=255), nullable=False),
        sa.Column("probability", sa.Float(), nullable=False),
        sa.Column("window", sa.Integer(), nullable=True),
        sa.Column("trials", sa.Integer(), nullable=False),
        sa.Column("seed", sa.BigInteger(), nullable=False),
        sa.Column("mean_saving", sa.Float(), nullable=False),
        sa.CheckConstraint("probability >= 0.0 AND probability <= 1.0", name="ck_run_probability"),
        sa.CheckConstraint("trials >= 1", name="ck_run_trials"),
    )

    op.create_table(
        "trial_records",
        sa.Column("id", sa.Integer(), primary_key=True),
        sa.Column("run_id", sa.Integer(), sa.ForeignKey("simulation_runs.id"), nullable=False),
        sa.Column("trial", sa.Integer(), nullable=False),
        sa.Column("seed", sa.BigInteger(), nullable=False),
        sa.Column("plan_label", sa.String(length=255), nullable=False),
        sa.Column("base_cost", sa.Integer(), nullable=False),
        sa.Column("recovery_cost", sa.Integer(), nullable=False),
        sa.Column("replan_cost", sa.Integer(), nullable=False),
        sa.Column("total_cost", sa.Integer(), nullable=False),
        sa.Column("events_fired", sa.Integer(), nullable=False),
        sa.UniqueConstraint("run_id", "trial", "plan_label", name="uq_trial_run_plan"),
        sa.CheckConstraint(
            "base_cost >= 0 AND recovery_cost >= 0 AND replan_cost >= 0",
            name="ck_trial_costs_nonnegative",
        ),
    )


def downgrade() -> None:
    op.drop_table("trial_records")
    op.drop_table("simulation_runs")
