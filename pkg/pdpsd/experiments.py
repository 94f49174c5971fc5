from __future__ import annotations

from collections.abc import Sequence

from .errors import ResultValidationError
from .logger import logger
from .offline import (
    evaluate_first_stage,
    first_stage,
    restrict_to_scenario,
    solve_offline,
    worst_case_instance,
)
from .reroute import PlanCache, Timeline, run_simulation
from .types import (
    AtEpochList,
    Instance,
    KthFromRouteEnd,
    MilpStatus,
    PlanSolution,
    ReplanTrigger,
    RequestEvent,
    SeriesPoint,
    SolverSettings,
)
from .validation import plan_violations, simulation_violations


def _status(*plans: PlanSolution) -> MilpStatus:
    if all(plan.status == MilpStatus.OPTIMAL for plan in plans):
        return MilpStatus.OPTIMAL
    return MilpStatus.TIME_LIMIT_FEASIBLE


def _check(plan: PlanSolution, instance: Instance) -> PlanSolution:
    problems = plan_violations(plan, instance)
    if problems:
        raise ResultValidationError([f"{instance.name}: {p}" for p in problems])
    return plan


def stochastic_comparison(
    instance: Instance, settings: SolverSettings | None = None
) -> list[SeriesPoint]:
    """
    Expected cost of the stochastic plan against a plan made for the largest
    package sizes, and against planning with each scenario known upfront.
    """
    settings = settings or SolverSettings()

    def point(label: str, metric: str, value: float, status: MilpStatus) -> SeriesPoint:
        return SeriesPoint(
            series="stochastic", label=label, metric=metric, value=value, status=status
        )

    # later plans start from earlier ones: stochastic <= worst case and
    # each known-scenario cost <= the stochastic cost of that scenario
    worst_instance = worst_case_instance(instance)
    worst = _check(solve_offline(worst_instance, settings), worst_instance)
    realized = _check(evaluate_first_stage(instance, first_stage(worst), settings), instance)
    stochastic = _check(solve_offline(instance, settings, starts=[realized]), instance)

    status = _status(stochastic)
    points = [point("stochastic", "expected_cost", stochastic.expected_objective, status)]
    for block in stochastic.scenarios:
        for scenario_id in block.merged:
            points.append(point("stochastic", f"cost_{scenario_id}", block.cost, status))
    status = _status(worst, realized)
    points.append(point("worst_case", "expected_cost", realized.expected_objective, status))
    for block in realized.scenarios:
        for scenario_id in block.merged:
            points.append(point("worst_case", f"cost_{scenario_id}", block.cost, status))

    wait_and_see = 0.0
    known_plans = [stochastic]
    for scenario in instance.scenarios.scenarios:
        restricted = restrict_to_scenario(instance, scenario.id)
        known = _check(solve_offline(restricted, settings, starts=known_plans), restricted)
        known_plans.append(known)
        points.append(
            point(f"known_{scenario.id}", "cost", known.expected_objective, _status(known))
        )
        wait_and_see += scenario.probability * known.expected_objective
    points.append(
        point("wait_and_see", "expected_cost", wait_and_see, _status(*known_plans[1:]))
    )
    points.append(
        point(
            "value_of_stochastic_solution",
            "expected_cost",
            realized.expected_objective - stochastic.expected_objective,
            _status(stochastic, worst, realized),
        )
    )
    logger.info(
        f"stochastic comparison {instance.name}: stochastic "
        f"{stochastic.expected_objective:.3f}, worst case {realized.expected_objective:.3f}"
    )
    return points


def reroute_effectiveness(
    instance: Instance,
    events: Sequence[RequestEvent] = (),
    trigger: ReplanTrigger | None = None,
    settings: SolverSettings | None = None,
    realized: str | None = None,
) -> list[SeriesPoint]:
    """
    Re-run the day accepting requests up to epoch e, for e = 0..last epoch.
    Requests of later epochs are outsourced. The runs share their plans up to
    the last accepted epoch, so each run only re-plans where the one before it
    stopped. With a single scenario, accepting one more epoch never costs more.
    """
    k = (trigger or KthFromRouteEnd()).k
    timeline = Timeline(instance, events)
    plans: PlanCache = {}
    points = []
    for accepted in range(timeline.last_epoch + 1):
        limited = AtEpochList(epochs=list(range(1, accepted + 1)), k=k)
        result = run_simulation(instance, events, limited, settings, realized, plans)
        problems = simulation_violations(result, timeline.universe)
        if problems:
            raise ResultValidationError([f"epochs <= {accepted}: {p}" for p in problems])
        status = MilpStatus.TIME_LIMIT_FEASIBLE if result.timed_out else MilpStatus.OPTIMAL
        metrics = {
            "served": len(result.served),
            "outsourced": len(result.outsourced),
            "delivery_cost": result.delivery_cost,
            "total_cost": result.total_cost,
        }
        points.extend(
            SeriesPoint(
                series="reroute", label=str(accepted), metric=name, value=value, status=status
            )
            for name, value in metrics.items()
        )
        logger.info(
            f"accepting epochs <= {accepted}: {len(result.served)} served, "
            f"total cost {result.total_cost:.3f}"
        )
    return points
