"""
Command-line entry point.

Exit codes: 0 optimal, 1 bad input or invalid result, 2 time limit with an
incumbent, 3 infeasible or no solution within the time limit.
"""

from __future__ import annotations

import argparse
import sys
import time
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Literal, NamedTuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .benchmarks import (
    random_instance,
    reroute_effectiveness_instance,
    stochastic_comparison_instance,
)
from .costs import format_amount
from .documents import (
    ExperimentDocument,
    PlanDocument,
    SimulationDocument,
    companion_path,
    document_error,
    read_events,
    read_instance,
    read_result,
    save_result,
)
from .errors import InputError, PdpsdError, ResultValidationError
from .experiments import reroute_effectiveness, stochastic_comparison
from .logger import configure_logging, logger
from .milp import to_lp_text
from .offline import offline_model, solve_model
from .reroute import Timeline, run_simulation
from .solomon import read_solomon, solomon_instance
from .types import (
    Instance,
    KthFromRouteEnd,
    MilpStatus,
    RequestEvent,
    SeriesPoint,
    SolverSettings,
)
from .validation import plan_violations, simulation_violations
from .version import __version__

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_TIME_LIMIT = 2


class CliConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    command: Literal["plan", "simulate", "validate", "experiment"]
    instance: Path | None = None
    events: Path | None = None
    result: Path | None = None
    k: int = Field(default=3, ge=1)
    out: Path | None = None
    format: Literal["json", "csv"] = "json"
    gap: float | None = Field(default=None, ge=0)
    time_limit: float | None = Field(default=None, gt=0)
    seed: int | None = None
    customers: int | None = Field(default=None, ge=1)
    capacity: float | None = Field(default=None, gt=0)
    fuel_consumption: float | None = Field(default=None, ge=0)
    fuel_price: float | None = Field(default=None, ge=0)
    penalty: float | None = Field(default=None, ge=0)
    realized: str | None = None
    series: Literal["all", "stochastic", "reroute"] = "all"
    dump_lp: Path | None = None
    log_level: str | None = None

    @property
    def settings(self) -> SolverSettings:
        overrides = {"time_limit": self.time_limit, "gap_tolerance": self.gap}
        return SolverSettings(**{k: v for k, v in overrides.items() if v is not None})


class CommandOutcome(NamedTuple):
    exit_code: int
    summary: str


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pdpsd",
        description="Pickup and delivery planning with stochastic package sizes.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--instance", type=Path, help="instance JSON or Solomon text file")
    common.add_argument("--customers", type=int, help="first N customers of a Solomon file")
    common.add_argument("--capacity", type=float, help="override every truck's capacity")
    common.add_argument("--fuel-consumption", type=float)
    common.add_argument("--fuel-price", type=float)
    common.add_argument("--penalty", type=float, help="outsourcing cost per package")
    common.add_argument("--seed", type=int, help="generate a random instance instead")
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING, ...")

    solving = argparse.ArgumentParser(add_help=False)
    solving.add_argument("--gap", type=float, help="absolute optimality gap")
    solving.add_argument("--time-limit", type=float, help="seconds per MILP solve")
    solving.add_argument("--format", choices=["json", "csv"], default="json")
    solving.add_argument("--out", type=Path, help="result document path")

    dynamic = argparse.ArgumentParser(add_help=False)
    dynamic.add_argument("--events", type=Path, help="request events JSON")
    dynamic.add_argument("--k", type=int, default=3, help="re-plan at the k-th stop from the end")
    dynamic.add_argument("--realized", help="scenario that happens")

    commands = parser.add_subparsers(dest="command", required=True)
    plan = commands.add_parser("plan", parents=[common, solving], help="solve the offline model")
    plan.add_argument("--dump-lp", type=Path, help="write the model in LP format")
    commands.add_parser(
        "simulate", parents=[common, solving, dynamic], help="run the re-route simulation"
    )
    validate = commands.add_parser(
        "validate", parents=[common, dynamic], help="check an instance and a result"
    )
    validate.add_argument("--result", type=Path, help="result JSON to re-validate")
    experiment = commands.add_parser(
        "experiment", parents=[common, solving, dynamic], help="emit plot-ready series"
    )
    experiment.add_argument(
        "--series", choices=["all", "stochastic", "reroute"], default="all"
    )
    return parser


def parse_config(argv: Sequence[str] | None = None) -> CliConfig:
    namespace = _parser().parse_args(argv)
    try:
        return CliConfig.model_validate(vars(namespace))
    except ValidationError as error:
        raise document_error(error) from None


### INPUTS


def load_input(config: CliConfig) -> Instance:
    """Read the instance named on the command line and apply flag overrides."""
    path = config.instance
    if path is None:
        if config.seed is None:
            raise InputError("--instance or --seed is required")
        instance = random_instance(config.seed, customers=config.customers or 5)
    elif path.suffix.lower() == ".json":
        instance = read_instance(path)
    else:
        instance = solomon_instance(read_solomon(path), customers=config.customers)
    return apply_overrides(instance, config)


def apply_overrides(instance: Instance, config: CliConfig) -> Instance:
    cost = {
        "fuel_consumption": config.fuel_consumption,
        "fuel_price": config.fuel_price,
        "outsource_penalty": config.penalty,
    }
    changes: dict[str, object] = {}
    if any(v is not None for v in cost.values()):
        update = {k: v for k, v in cost.items() if v is not None}
        changes["cost"] = instance.cost.model_copy(update=update)
    if config.capacity is not None:
        changes["trucks"] = tuple(
            t.model_copy(update={"capacity": config.capacity}) for t in instance.trucks
        )
    return instance.replace(**changes) if changes else instance


def load_events(config: CliConfig) -> list[RequestEvent]:
    return read_events(config.events) if config.events is not None else []


def _summary(status: str, objective: float | None, gap: float | None, elapsed: float) -> str:
    shown = format_amount(objective) if objective is not None else "-"
    return f"status={status} objective={shown} gap={format_amount(gap or 0.0)} time={elapsed:.2f}s"


def _emit(
    document: PlanDocument | SimulationDocument | ExperimentDocument,
    config: CliConfig,
    *,
    companion: bool = False,
) -> None:
    """
    Write `document` to --out, or to standard output without it. With
    `companion`, the other format goes next to --out as well.
    """
    text = save_result(document, config.out, config.format)
    if config.out is None:
        sys.stdout.write(text)
    elif companion:
        other = "csv" if config.format == "json" else "json"
        save_result(document, companion_path(config.out, config.format), other)


### COMMANDS


def cmd_plan(config: CliConfig) -> CommandOutcome:
    started = time.perf_counter()
    instance = load_input(config)
    model = offline_model(instance)
    if config.dump_lp is not None:
        config.dump_lp.write_text(to_lp_text(model.problem()), encoding="utf-8")
    plan = solve_model(model, config.settings)

    problems = plan_violations(plan, instance)
    if problems:
        raise ResultValidationError(problems)
    _emit(PlanDocument(instance=instance.name, plan=plan), config)
    code = EXIT_OK if plan.status == MilpStatus.OPTIMAL else EXIT_TIME_LIMIT
    elapsed = time.perf_counter() - started
    return CommandOutcome(code, _summary(plan.status, plan.expected_objective, plan.gap, elapsed))


def cmd_simulate(config: CliConfig) -> CommandOutcome:
    started = time.perf_counter()
    instance = load_input(config)
    events = load_events(config)
    trigger = KthFromRouteEnd(k=config.k)
    result = run_simulation(instance, events, trigger, config.settings, config.realized)

    problems = simulation_violations(result, Timeline(instance, events).universe)
    if problems:
        raise ResultValidationError(problems)
    document = SimulationDocument(instance=instance.name, trigger=trigger, result=result)
    _emit(document, config, companion=True)
    timed_out = result.timed_out
    gap = max((g for g in result.gaps if g is not None), default=0.0)
    status = MilpStatus.TIME_LIMIT_FEASIBLE if timed_out else MilpStatus.OPTIMAL
    elapsed = time.perf_counter() - started
    return CommandOutcome(
        EXIT_TIME_LIMIT if timed_out else EXIT_OK,
        _summary(status, result.total_cost, gap, elapsed),
    )


def cmd_validate(config: CliConfig) -> CommandOutcome:
    instance = load_input(config)
    summary = (
        f"valid instance {instance.name}: {len(instance.customers)} customers, "
        f"{len(instance.trucks)} trucks, {len(instance.scenarios.scenarios)} scenarios"
    )
    if config.result is None:
        return CommandOutcome(EXIT_OK, summary)

    document = read_result(config.result)
    match document:
        case PlanDocument():
            problems = plan_violations(document.plan, instance)
        case SimulationDocument():
            universe = Timeline(instance, load_events(config)).universe
            problems = simulation_violations(document.result, universe)
        case ExperimentDocument():
            problems = []
    if problems:
        raise ResultValidationError(problems)
    return CommandOutcome(EXIT_OK, f"{summary}; result {config.result} is valid")


def cmd_experiment(config: CliConfig) -> CommandOutcome:
    started = time.perf_counter()
    points: list[SeriesPoint] = []
    names = []
    if config.series in ("all", "stochastic"):
        instance = _experiment_input(config, stochastic_comparison_instance)
        points += stochastic_comparison(instance, config.settings)
        names.append(instance.name)
    if config.series in ("all", "reroute"):
        instance = _experiment_input(config, reroute_effectiveness_instance)
        trigger = KthFromRouteEnd(k=config.k)
        points += reroute_effectiveness(
            instance, load_events(config), trigger, config.settings, config.realized
        )
        names.append(instance.name)
    _emit(ExperimentDocument(instance=" + ".join(dict.fromkeys(names)), points=points), config)
    timed_out = any(p.status != MilpStatus.OPTIMAL for p in points)
    status = MilpStatus.TIME_LIMIT_FEASIBLE if timed_out else MilpStatus.OPTIMAL
    elapsed = time.perf_counter() - started
    return CommandOutcome(
        EXIT_TIME_LIMIT if timed_out else EXIT_OK,
        f"status={status} points={len(points)} time={elapsed:.2f}s",
    )


def _experiment_input(config: CliConfig, builtin: Callable[[], Instance]) -> Instance:
    """The named instance, or the experiment's own fixture when none is given."""
    if config.instance is None and config.seed is None:
        return apply_overrides(builtin(), config)
    return load_input(config)


COMMANDS = {
    "plan": cmd_plan,
    "simulate": cmd_simulate,
    "validate": cmd_validate,
    "experiment": cmd_experiment,
}


def run(argv: Sequence[str] | None = None) -> int:
    try:
        config = parse_config(argv)
        if config.log_level:
            configure_logging(config.log_level)
        outcome = COMMANDS[config.command](config)
    except PdpsdError as error:
        print(f"error: {error.message}", file=sys.stderr)
        return error.exit_code
    except Exception:
        logger.exception("unexpected error")
        print("error: unexpected failure, see the log", file=sys.stderr)
        return EXIT_INPUT
    print(outcome.summary)
    return outcome.exit_code


def main() -> None:
    raise SystemExit(run())

