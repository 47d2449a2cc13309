import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, TextIO

from packages.core.at_engine import MitigationStatus, analyze, assess_report, mitigate
from packages.core.config import SavingsAccounting, Settings, ThreatMode, settings
from packages.core.errors import (
    ConfigError,
    ContractViolation,
    ForesightError,
    GroundingError,
    ParseError,
    ScheduleError,
)
from packages.core.meta_controller import CognitiveTrace, CycleStatus, MetaController
from packages.core.nbeacons import CANONICAL_CONFIG, canonical_plan, build_domain, generate, random_config
from packages.core.parser import format_plan, parse_domain, parse_plan, parse_problem
from packages.core.planner import GroundTask, SearchBudget, SearchStatus, find_plan
from packages.core.reports import read_report, write_report
from packages.core.simulator import (
    EventSchedule,
    MonteCarloSummary,
    ScheduleMode,
    TrialRecord,
    monte_carlo,
    parse_script,
    simulate,
)
from packages.core.strips import DomainModel, GroundPlan, Problem


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DIAGNOSTICS = 1
EXIT_BUDGET = 2
EXIT_CONTRACT = 3

PLAN_LABELS = ("pi", "pi-prime")


class CliParser(argparse.ArgumentParser):
    """Usage errors exit with the diagnostics code instead of argparse's 2."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_DIAGNOSTICS, f"{self.prog}: error: {message}\n")


class Context:
    """Parsed inputs and effective settings for one invocation."""

    def __init__(self, args: argparse.Namespace, stdin: TextIO, stdout: TextIO):
        self.args = args
        self.stdin = stdin
        self.stdout = stdout
        self.config: Settings = settings.with_overrides(
            tau=getattr(args, "tau", None),
            threat_mode=_enum(ThreatMode, getattr(args, "mode", None)),
            savings_accounting=_enum(SavingsAccounting, getattr(args, "savings_accounting", None)),
            allow_deletes=getattr(args, "allow_deletes", None) or None,
            wind_probability=getattr(args, "wind_prob", None),
            wind_window=getattr(args, "wind_window", None),
            trials=getattr(args, "trials", None),
            seed=getattr(args, "seed", None),
            cycles=getattr(args, "cycles", None),
            database_url=getattr(args, "db", None),
        )
        budget = getattr(args, "budget", None)
        if budget is not None:
            field = "search_expansions" if args.command == "plan" else "mitigation_budget"
            self.config = self.config.with_overrides(**{field: budget})
        self.budget = SearchBudget(self.config.search_expansions)
        self._domain: Optional[DomainModel] = None
        self._problem: Optional[Problem] = None
        self._task: Optional[GroundTask] = None

    @property
    def domain(self) -> DomainModel:
        if self._domain is None:
            path = self.args.domain
            self._domain = parse_domain(Path(path).read_bytes(), file=path)
        return self._domain

    @property
    def problem(self) -> Problem:
        if self._problem is None:
            path = self.args.problem
            if path is None:
                raise ConfigError("this command needs -p/--problem")
            self._problem = parse_problem(Path(path).read_bytes(), self.domain, file=path)
        return self._problem

    @property
    def task(self) -> GroundTask:
        if self._task is None:
            self._task = GroundTask(self.domain, self.problem)
        return self._task

    def plans(self) -> List[GroundPlan]:
        paths = self.args.plan or []
        if not paths:
            raise ConfigError("this command needs --plan")
        return [
            parse_plan(Path(path).read_bytes(), self.domain, self.problem, file=path) for path in paths
        ]

    def schedule(self) -> Optional[EventSchedule]:
        path = getattr(self.args, "script", None)
        if path is None:
            return None
        return parse_script(Path(path).read_bytes())

    def emit(self, text: str, out: Optional[str] = None) -> None:
        out = out if out is not None else getattr(self.args, "out", None)
        if not text.endswith("\n"):
            text += "\n"
        if out:
            Path(out).write_text(text, encoding="utf-8")
            logger.info("Wrote %s", out)
        else:
            self.stdout.write(text)


def _enum(kind, value):
    return kind(value) if value is not None else None


# Subcommands ----------------------------------------------------------------


def cmd_validate(ctx: Context) -> int:
    summary: Dict[str, object] = {
        "domain": ctx.domain.name,
        "schemas": len(ctx.domain.schemas),
        "predicates": len(ctx.domain.predicates),
    }
    if ctx.args.problem:
        summary["problem"] = ctx.problem.name
        summary["objects"] = len(ctx.problem.objects)
        summary["ground_actions"] = len(ctx.task.actions)
    if ctx.args.plan:
        summary["plans"] = [
            {"steps": len(plan), "cost": plan.total_cost} for plan in ctx.plans()
        ]
    ctx.emit(write_report(summary))
    return EXIT_OK


def cmd_plan(ctx: Context) -> int:
    result = find_plan(ctx.domain, ctx.problem, SearchBudget(ctx.config.search_expansions), task=ctx.task)
    if result.status is SearchStatus.BUDGET_EXHAUSTED:
        logger.error("Search budget exhausted after %s expansions", result.expansions)
        return EXIT_BUDGET
    if result.status is SearchStatus.UNSOLVABLE:
        logger.error("No plan reaches the goal of %s", ctx.problem.name)
        return EXIT_DIAGNOSTICS
    ctx.emit(format_plan(result.plan))
    return EXIT_OK


def cmd_analyze(ctx: Context) -> int:
    plan = ctx.plans()[0]
    schedule = ctx.schedule()
    overrides = schedule.impact_overrides() if schedule else None
    report = analyze(ctx.task, plan, ctx.config, ctx.budget, overrides)
    ctx.emit(write_report(report))
    return EXIT_OK


def cmd_mitigate(ctx: Context) -> int:
    plan = ctx.plans()[0]
    schedule = ctx.schedule()
    overrides = schedule.impact_overrides() if schedule else None
    report = analyze(ctx.task, plan, ctx.config, ctx.budget, overrides)
    result = mitigate(plan, report.events, ctx.task, ctx.config, ctx.budget)
    ctx.emit(write_report(result))
    if ctx.args.out:
        ctx.emit(format_plan(result.plan), str(Path(ctx.args.out).with_suffix(".plan")))
    if result.status is MitigationStatus.BUDGET_EXHAUSTED:
        return EXIT_BUDGET
    return EXIT_OK


def cmd_assess(ctx: Context) -> int:
    if ctx.args.report and ctx.args.report != "-":
        text = Path(ctx.args.report).read_text(encoding="utf-8")
    else:
        text = ctx.stdin.read()
    try:
        report = read_report(text)
    except ValueError as exc:
        raise ConfigError(f"cannot read report: {exc}") from exc
    assessment = assess_report(report, ctx.config.savings_accounting)
    ctx.emit(write_report(assessment))
    return EXIT_OK


def cmd_simulate(ctx: Context) -> int:
    plans = ctx.plans()
    if len(plans) > 2:
        raise ConfigError("simulate accepts at most two plans")
    labelled = list(zip(PLAN_LABELS, plans))
    schedule = ctx.schedule()

    if schedule is not None and schedule.mode is ScheduleMode.SCRIPTED:
        records = []
        traces = []
        for label, plan in labelled:
            trace = simulate(ctx.task, plan, schedule, ctx.budget)
            traces.append({"plan": label, "trace": trace})
            records.append(
                TrialRecord(
                    0, ctx.config.seed, label, trace.base_cost, trace.recovery_cost,
                    trace.replan_cost, trace.total_cost, trace.events_fired,
                )
            )
        if ctx.args.csv:
            summary = MonteCarloSummary(tuple(records), tuple(label for label, _ in labelled), 0.0, 1, ctx.config.seed)
            ctx.emit(summary.to_csv())
        else:
            ctx.emit(write_report({"traces": traces}))
        return EXIT_OK

    probability = ctx.config.wind_probability
    seed = ctx.config.seed
    window = ctx.config.wind_window
    if schedule is not None:
        probability = schedule.probability if ctx.args.wind_prob is None else probability
        seed = schedule.seed if ctx.args.seed is None else seed
        window = schedule.window if ctx.args.wind_window is None else window
    summary = monte_carlo(
        ctx.task, labelled, probability, ctx.config.trials, seed, window, budget=ctx.budget
    )
    if ctx.config.database_url:
        from packages.core.ledger import save_monte_carlo

        save_monte_carlo(
            summary, ctx.config.database_url, domain=ctx.domain.name, problem=ctx.problem.name
        )
    ctx.emit(summary.to_csv() if ctx.args.csv else write_report(summary))
    return EXIT_OK


def cmd_meta(ctx: Context) -> int:
    plan = ctx.plans()[0]
    schedule = ctx.schedule()
    overrides = schedule.impact_overrides() if schedule else None
    controller = MetaController(ctx.task, ctx.config, ctx.budget, overrides)
    trace = CognitiveTrace(plan, ctx.problem.goal, ctx.problem.init)
    results = controller.run(trace, ctx.config.cycles)
    if len(results) == 1:
        ctx.emit(write_report(results[0]))
    else:
        ctx.emit(write_report({"cycles": results}))
    statuses = {r.status for r in results}
    if CycleStatus.FAILED in statuses:
        return EXIT_CONTRACT
    if CycleStatus.BUDGET_EXHAUSTED in statuses:
        return EXIT_BUDGET
    return EXIT_OK


def cmd_gen_nbeacons(ctx: Context) -> int:
    args = ctx.args
    if args.canonical:
        config = CANONICAL_CONFIG
    else:
        config = random_config(
            args.width, args.height, args.sandpits, seed=ctx.config.seed
        )
    domain_text, problem_text = generate(config)
    files = {"domain.pddl": domain_text, "problem.pddl": problem_text}
    if args.canonical:
        files["plan.txt"] = format_plan(canonical_plan(build_domain()))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            ctx.emit(text, str(out / name))
    else:
        ctx.emit(write_report(files))
    return EXIT_OK


COMMANDS: Dict[str, Callable[[Context], int]] = {
    "validate": cmd_validate,
    "plan": cmd_plan,
    "analyze": cmd_analyze,
    "mitigate": cmd_mitigate,
    "assess": cmd_assess,
    "simulate": cmd_simulate,
    "meta": cmd_meta,
    "gen-nbeacons": cmd_gen_nbeacons,
}


def build_parser() -> argparse.ArgumentParser:
    parser = CliParser(prog="foresight", description="Anticipatory analysis of ground plans")
    sub = parser.add_subparsers(dest="command", required=True)

    def inputs(p: argparse.ArgumentParser, *, problem: bool = True, plan: bool = True) -> None:
        p.add_argument("-d", "--domain", required=True)
        p.add_argument("-p", "--problem", required=problem)
        if plan:
            p.add_argument("--plan", action="append")
        p.add_argument("-o", "--out")

    def analysis_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--mode", choices=[m.value for m in ThreatMode])
        p.add_argument("--script", help="scenario script with per-event impact overrides")

    def mitigation_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--savings-accounting", choices=[s.value for s in SavingsAccounting])
        p.add_argument("--tau", type=float)
        p.add_argument("--budget", type=int)
        p.add_argument("--allow-deletes", action="store_true")

    p = sub.add_parser("validate", help="parse and check inputs")
    inputs(p, problem=False)

    p = sub.add_parser("plan", help="find a minimum-cost plan")
    inputs(p, plan=False)
    p.add_argument("--budget", type=int)

    p = sub.add_parser("analyze", help="prestrength, conditioning events and risk")
    inputs(p)
    analysis_flags(p)

    p = sub.add_parser("mitigate", help="insert anticipatory actions")
    inputs(p)
    analysis_flags(p)
    mitigation_flags(p)

    p = sub.add_parser("assess", help="assessment of an analysis or mitigation report")
    p.add_argument("report", nargs="?")
    p.add_argument("--savings-accounting", choices=[s.value for s in SavingsAccounting])
    p.add_argument("-o", "--out")

    p = sub.add_parser("simulate", help="execute plans under wind")
    inputs(p)
    p.add_argument("--script")
    p.add_argument("--wind-prob", type=float)
    p.add_argument("--wind-window", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--csv", action="store_true")
    p.add_argument("--db", help="SQLAlchemy URL of the experiment ledger")

    p = sub.add_parser("meta", help="run metacognitive cycles")
    inputs(p)
    analysis_flags(p)
    mitigation_flags(p)
    p.add_argument("--cycles", type=int)

    p = sub.add_parser("gen-nbeacons", help="generate NBeacons domain and problem files")
    p.add_argument("--canonical", action="store_true")
    p.add_argument("--width", type=int, default=10)
    p.add_argument("--height", type=int, default=10)
    p.add_argument("--sandpits", type=int, default=4)
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--out")

    return parser


def run(
    argv: Optional[Sequence[str]] = None,
    stdin: Optional[TextIO] = None,
    stdout: Optional[TextIO] = None,
    stderr: Optional[TextIO] = None,
) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        ctx = Context(args, stdin, stdout)
        return COMMANDS[args.command](ctx)
    except ParseError as exc:
        for diagnostic in exc.diagnostics:
            print(diagnostic, file=stderr)
        return EXIT_DIAGNOSTICS
    except (ConfigError, ScheduleError, GroundingError) as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_DIAGNOSTICS
    except OSError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_DIAGNOSTICS
    except ContractViolation as exc:
        print(f"contract violation: {exc}", file=stderr)
        return EXIT_CONTRACT
    except ForesightError as exc:
        logger.exception("Unexpected failure")
        print(f"internal error: {exc}", file=stderr)
        return EXIT_CONTRACT


def main() -> None:
    logging.basicConfig(
        level=logging.INFO,
        format="%(asctime)s [%(levelname)s] %(name)s - %(message)s",
        stream=sys.stderr,
    )
    sys.exit(run())


if __name__ == "__main__":
    main()
