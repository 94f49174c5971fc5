from __future__ import annotations

from collections.abc import Mapping, Sequence

from .errors import InputError, ModelInfeasibleError, NoSolutionError, ProblemError
from .formulation import RoutingModel, TruckSetup, infeasibility_hints
from .insertion import insertion_routes
from .logger import logger
from .milp import solve_milp
from .types import (
    FirstStage,
    Instance,
    MilpProblem,
    MilpSolution,
    MilpStatus,
    OfflinePlan,
    Scenario,
    ScenarioSet,
    SolverSettings,
)
from .validation import validate_instance


def check_instance(instance: Instance) -> None:
    violations = validate_instance(instance)
    if violations:
        raise InputError("; ".join(str(v) for v in violations))


def offline_model(instance: Instance) -> RoutingModel:
    """Extensive-form model of the whole day, every truck starting empty at the depot."""
    check_instance(instance)
    trucks = [TruckSetup(truck) for truck in instance.trucks]
    return RoutingModel(instance, instance.demanding, trucks, name=f"offline-{instance.name}")


def build_offline_milp(instance: Instance) -> MilpProblem:
    return offline_model(instance).problem()


def decode_routes(vector: Sequence[float], model: RoutingModel) -> OfflinePlan:
    return model.decode(vector)


def solve_model(
    model: RoutingModel,
    settings: SolverSettings | None = None,
    starts: Sequence[OfflinePlan] = (),
    routes: Sequence[Mapping[int, Sequence[int]]] = (),
) -> OfflinePlan:
    """
    Solve a routing model and decode it, raising when no plan comes out.

    The search starts from the best of `starts`, of the given `routes` (as they
    are and completed by cheapest insertion) and of a cheapest-insertion plan
    from scratch. The result is never worse than any of them that fits.
    """
    settings = settings or SolverSettings()
    seeds = [s for s in (model.start_from_plan(plan) for plan in starts) if s is not None]
    for given in routes:
        seeds.append(model.start_from_routes(given))
        seeds.append(model.start_from_routes(insertion_routes(model, given)))
    seeds.append(model.start_from_routes(insertion_routes(model)))
    solution = solve_milp(model.problem(), settings=settings, starts=seeds)
    return finish(model, solution)


def finish(model: RoutingModel, solution: MilpSolution) -> OfflinePlan:
    match solution.status:
        case MilpStatus.OPTIMAL | MilpStatus.TIME_LIMIT_FEASIBLE:
            return model.decode(
                solution.assignment,
                status=solution.status,
                gap=solution.gap,
                node_count=solution.node_count,
                wall_time=solution.wall_time,
            )
        case MilpStatus.INFEASIBLE:
            capacity = max(s.truck.capacity for s in model.trucks)
            raise ModelInfeasibleError(
                f"{model.name} has no feasible plan",
                hints=infeasibility_hints(model.instance, model.customers, capacity),
            )
        case MilpStatus.TIME_LIMIT_NO_SOLUTION:
            raise NoSolutionError(
                f"{model.name}: time limit reached after {solution.node_count} nodes "
                "without a feasible plan"
            )
        case MilpStatus.UNBOUNDED:
            raise ProblemError(f"{model.name} is unbounded")


def solve_offline(
    instance: Instance,
    settings: SolverSettings | None = None,
    starts: Sequence[OfflinePlan] = (),
) -> OfflinePlan:
    model = offline_model(instance)
    logger.info(
        f"offline model {instance.name}: {model.num_variables} variables, "
        f"{len(model.blocks)} scenario blocks"
    )
    return solve_model(model, settings, starts)


def evaluate_first_stage(
    instance: Instance,
    stage: FirstStage,
    settings: SolverSettings | None = None,
    starts: Sequence[OfflinePlan] = (),
) -> OfflinePlan:
    """
    Expected cost of a fixed truck/assignment/outsourcing decision: the routes
    are re-optimized in every scenario, the first stage is not.
    """
    model = offline_model(instance)
    model.fix_first_stage(stage)
    return solve_model(model, settings, starts)


def first_stage(plan: OfflinePlan) -> FirstStage:
    return FirstStage(
        trucks_used=list(plan.trucks_used),
        assignment=dict(plan.assignment),
        outsourced=list(plan.outsourced),
    )


def restrict_to_scenario(instance: Instance, scenario_id: str) -> Instance:
    """The same day with perfect information: only `scenario_id` can happen."""
    scenario = instance.scenarios.get(scenario_id)
    known = Scenario(id=scenario.id, probability=1.0, sizes=dict(scenario.sizes))
    return instance.replace(
        name=f"{instance.name}-{scenario_id}", scenarios=ScenarioSet(scenarios=(known,))
    )


def worst_case_instance(instance: Instance) -> Instance:
    """
    Deterministic instance where every package takes its largest size over
    all scenarios, keeping its pickup/delivery sign.
    """
    scenarios = instance.scenarios.scenarios
    sizes: dict[int, float] = {}
    for customer in instance.customer_map:
        values = [s.sizes[customer] for s in scenarios if customer in s.sizes]
        if not values:
            continue
        largest = max(values, key=abs)
        if any(value * largest < 0 for value in values):
            raise InputError(
                f"customer {customer} is a pickup in some scenarios and a delivery in others"
            )
        sizes[customer] = largest
    worst = Scenario(id="worst", probability=1.0, sizes=sizes)
    return instance.replace(
        name=f"{instance.name}-worst", scenarios=ScenarioSet(scenarios=(worst,))
    )
