"""
Re-route simulation of one day.

Epoch 0 solves the offline model over the customers known in the morning.
At every later epoch the trucks drive their current plan up to the trigger
point, the realized package sizes are observed, the accumulated requests are
accepted and the remaining work is re-planned from each truck's position.
After the last epoch every truck finishes its plan and returns to the depot.
"""

from __future__ import annotations

from collections.abc import Collection, Iterable, Mapping, Sequence

from .costs import arc_cost, route_distance
from .errors import (
    InputError,
    ModelInfeasibleError,
    NoSolutionError,
    NumericalError,
    PdpsdError,
    StateError,
    StitchError,
)
from .formulation import RoutingModel, TruckSetup
from .logger import logger
from .offline import check_instance, solve_model
from .types import (
    DEPOT,
    ActualRoute,
    AtEpochList,
    DependencyRelation,
    EpochRecord,
    Instance,
    KthFromRouteEnd,
    MilpProblem,
    MilpStatus,
    PlanSolution,
    ReplanTrigger,
    RequestEvent,
    ScenarioSet,
    SimulationResult,
    SimulationState,
    SolverSettings,
    StitchedRoute,
    TruckRoute,
    TruckState,
)

LOAD_TOLERANCE = 1e-6

PlanCache = dict[tuple[int, frozenset[int]], PlanSolution]
"""Plans by epoch and the customers known when they were made."""


class Timeline:
    """Every request of the day, the morning instance, and what arrives when."""

    def __init__(self, instance: Instance, events: Sequence[RequestEvent] = ()):
        customers = list(instance.customers)
        sizes = {s.id: dict(s.sizes) for s in instance.scenarios.scenarios}
        pairs = list(instance.dependencies.pairs)
        seen = {c.id for c in customers}

        for event in sorted(events, key=lambda e: e.epoch):
            if event.epoch < 1:
                raise InputError(f"request events start at epoch 1, got {event.epoch}")
            for customer in event.customers:
                if customer.id in seen:
                    raise InputError(f"event {event.epoch}: customer id {customer.id} is not new")
                seen.add(customer.id)
                customers.append(customer.model_copy(update={"request_epoch": event.epoch}))
                if customer.demand_flag != 1:
                    continue
                for scenario_id, table in sizes.items():
                    try:
                        table[customer.id] = event.sizes[scenario_id][customer.id]
                    except KeyError:
                        raise InputError(
                            f"event {event.epoch}: customer {customer.id} has no size "
                            f"in scenario {scenario_id}"
                        ) from None
            pairs.extend(event.dependencies)

        scenarios = tuple(
            s.model_copy(update={"sizes": sizes[s.id]}) for s in instance.scenarios.scenarios
        )
        self.universe = instance.replace(
            customers=tuple(customers),
            scenarios=ScenarioSet(scenarios=scenarios),
            dependencies=DependencyRelation(pairs=tuple(dict.fromkeys(pairs))),
        )
        check_instance(self.universe)

        self.arrivals: dict[int, list[int]] = {}
        for customer in self.universe.customers:
            self.arrivals.setdefault(customer.request_epoch, []).append(customer.id)
        self.last_epoch = max(self.arrivals, default=0)
        self.base = self.snapshot(set(self.arrivals.get(0, [])), set(), "")

    def arriving(self, epoch: int) -> list[int]:
        return sorted(self.arrivals.get(epoch, []))

    def snapshot(self, known: Collection[int], revealed: Collection[int], realized: str) -> Instance:
        """
        The instance as the planner sees it: only `known` customers, with the
        `revealed` ones sized under the realized scenario in every scenario.
        """
        universe = self.universe
        scenarios = []
        for scenario in universe.scenarios.scenarios:
            sizes = {
                c: universe.size(c, realized if c in revealed else scenario.id)
                for c in sorted(known)
                if c in scenario.sizes
            }
            scenarios.append(scenario.model_copy(update={"sizes": sizes}))
        return universe.replace(
            customers=tuple(c for c in universe.customers if c.id in known),
            scenarios=ScenarioSet(scenarios=tuple(scenarios)),
            dependencies=DependencyRelation(
                pairs=tuple(universe.dependencies.restricted_to(set(known)))
            ),
        )


def default_realized(instance: Instance) -> str:
    """The most probable scenario, the first one on ties."""
    scenarios = instance.scenarios.scenarios
    best = max(s.probability for s in scenarios)
    return next(s.id for s in scenarios if s.probability == best)


def initial_state(instance: Instance, realized: str) -> SimulationState:
    return SimulationState(
        epoch=0,
        realized=realized,
        pending=list(instance.demanding),
        served=[],
        trucks=[TruckState(truck=t.id) for t in instance.trucks],
    )


### trigger


class TriggerPoint:
    def __init__(self, truck: int, location: int, executed: dict[int, int]):
        self.truck = truck
        self.location = location
        self.executed = executed


def trigger_stop(route: TruckRoute, k: int) -> int:
    """Stops driven when the truck reaches the k-th stop from its route end."""
    length = len(route.stops)
    return length - k + 1 if length >= k else 0


def trigger_progress(
    instance: Instance,
    routes: Mapping[int, TruckRoute],
    state: SimulationState,
    k: int,
) -> TriggerPoint | None:
    """
    Where every truck is when the first one reaches its trigger point. The
    other trucks have driven the stops within the same travelled distance.
    """
    active = [s.truck for s in state.trucks if not s.closed and s.truck in routes]
    if not active:
        return None
    moving = [t for t in active if routes[t].stops] or active

    def reach(truck: int) -> float:
        route = routes[truck]
        return route_distance(instance, route.walk[: trigger_stop(route, k) + 1])

    trigger = min(moving, key=lambda t: (reach(t), t))
    limit = reach(trigger) + 1e-9
    executed = {trigger: trigger_stop(routes[trigger], k)}
    for truck in active:
        if truck == trigger:
            continue
        route = routes[truck]
        walk = route.walk
        travelled, count = 0.0, 0
        for step, (u, v) in enumerate(zip(walk, walk[1:]), 1):
            travelled += instance.distance(u, v)
            if travelled > limit:
                break
            count = step
        if count == len(walk) - 1 and not route.arcs:
            count = 0
        executed[truck] = count
    location = routes[trigger].walk[executed[trigger]]
    return TriggerPoint(trigger, location, executed)


### state


def observe_state(
    state: SimulationState,
    routes: Mapping[int, TruckRoute],
    executed: Mapping[int, int],
    instance: Instance,
) -> SimulationState:
    """
    Advance every truck by its executed stops under the realized scenario.
    The last customer each truck visited becomes its origin and stays out of
    the served list.
    """
    realized = state.realized
    served = list(state.served)
    driven: set[int] = set()
    trucks = []
    for current in state.trucks:
        t = current.truck
        count = executed.get(t, 0)
        route = routes.get(t)
        if route is None:
            if count:
                raise StateError(f"truck {t} has no plan to execute")
            trucks.append(current)
            continue
        if route.origin != current.origin:
            raise StateError(
                f"truck {t}: plan starts at {route.origin}, truck is at {current.origin}"
            )
        if not 0 <= count <= len(route.stops) + 1:
            raise StateError(
                f"truck {t}: {count} executed stops on a route of {len(route.stops)}"
            )
        if current.closed and count:
            raise StateError(f"truck {t} is back at the depot and cannot drive again")

        if current.departed:
            load, onboard = current.load, list(current.onboard)
        else:
            load = route.start_load
            onboard = [c for c in route.stops if instance.is_depot_loaded(c, realized)]
        prefix = route.stops[:count]
        origin = current.origin
        for stop in prefix:
            load += instance.size(stop, realized)
            capacity = instance.truck(t).capacity
            if not -LOAD_TOLERANCE <= load <= capacity + LOAD_TOLERANCE:
                raise StateError(f"truck {t}: load {load:g} after c{stop} outside [0, {capacity:g}]")
        if prefix:
            if origin != DEPOT:
                served.append(origin)
            served.extend(prefix[:-1])
            origin = prefix[-1]
        driven.update(prefix)
        walk = [*current.walk, *prefix]

        home = count == len(route.stops) + 1
        if home:
            if origin != DEPOT:
                served.append(origin)
            walk.append(DEPOT)
            origin, load = DEPOT, 0.0
        trucks.append(
            TruckState(
                truck=t,
                origin=origin,
                load=load,
                walk=walk,
                onboard=[c for c in onboard if c not in driven and not home],
                closed=current.closed or home,
            )
        )
    return state.model_copy(
        update={
            "epoch": state.epoch + 1,
            "pending": [c for c in state.pending if c not in driven],
            "served": served,
            "trucks": trucks,
        }
    )


def committed_cost(state: SimulationState, instance: Instance) -> float:
    """Routing already driven plus penalties already decided."""
    routing = sum(
        arc_cost(instance, u, v)
        for truck in state.trucks
        for u, v in zip(truck.walk, truck.walk[1:])
    )
    return routing + instance.cost.outsource_penalty * len(state.committed_outsourced)


### re-route model


def reroute_model(state: SimulationState, instance: Instance) -> RoutingModel:
    customers = [c for c in state.pending if instance.customer(c).demand_flag == 1]
    setups = [
        TruckSetup(
            instance.truck(s.truck),
            origin=s.origin,
            start_load=s.load if s.departed else 0.0,
            loads_at_depot=not s.departed,
            active=not s.closed,
        )
        for s in state.trucks
    ]
    model = RoutingModel(
        instance,
        customers,
        setups,
        name=f"reroute-{instance.name}-e{state.epoch}",
        offset=committed_cost(state, instance),
    )
    _pin(model, state, instance, set(customers))
    return model


def _pin(
    model: RoutingModel, state: SimulationState, instance: Instance, pending: set[int]
) -> None:
    if state.committed_usage is not None:
        for truck, used in state.committed_usage.items():
            model.fix_usage(truck, used)

    scenario_ids = instance.scenarios.ids
    for truck in state.trucks:
        t = truck.truck
        if truck.closed:
            for c in sorted(pending):
                model.fix_assignment(c, t, False)
        elif truck.departed:
            model.fix_usage(t, True)
            for c in sorted(pending):
                if c in truck.onboard:
                    model.fix_assignment(c, t, True)
                elif any(instance.is_depot_loaded(c, s) for s in scenario_ids):
                    model.fix_assignment(c, t, False)

    visited_by = {
        stop: truck.truck for truck in state.trucks for stop in truck.walk if stop != DEPOT
    }
    outsourced = set(state.committed_outsourced)
    for i, j in instance.dependencies.pairs:
        if j in pending and i not in pending:
            if i in visited_by:
                model.fix_assignment(j, visited_by[i], True)
            elif i in outsourced:
                model.fix_outsourced(j, True)
        elif i in pending and j not in pending:
            if j in visited_by:
                raise ModelInfeasibleError(
                    f"customer {j} was served before its predecessor {i}",
                    hints=[f"dependency ({i},{j}) arrived after c{j} was visited"],
                )
            if j in outsourced:
                model.fix_outsourced(i, True)


def build_reroute_milp(state: SimulationState, instance: Instance) -> MilpProblem:
    return reroute_model(state, instance).problem()


def solve_reroute(
    state: SimulationState,
    instance: Instance,
    settings: SolverSettings | None = None,
    continuation: Mapping[int, Sequence[int]] | None = None,
) -> PlanSolution:
    """
    Re-plan the pending work. With `continuation`, the stops each truck still
    had planned, the result costs no more than driving them as they are and
    outsourcing everything else.
    """
    model = reroute_model(state, instance)
    return solve_model(model, settings, routes=[continuation] if continuation else [])


### stitching


def stitch_actual_route(
    instance: Instance,
    plans: Sequence[Mapping[int, TruckRoute]],
    executed: Sequence[Mapping[int, int]],
    *,
    outsourced: Collection[int] = (),
    trucks_used: Iterable[int] = (),
) -> StitchedRoute:
    """Concatenate the executed part of every plan into the driven route of each truck."""
    if len(plans) != len(executed):
        raise StitchError(f"{len(plans)} plans but {len(executed)} executed prefixes")
    routes = []
    for truck in (t.id for t in instance.trucks):
        walk = [DEPOT]
        for number, (plan, done) in enumerate(zip(plans, executed)):
            count = done.get(truck, 0)
            if not count:
                continue
            route = plan.get(truck)
            if route is None:
                raise StitchError(f"truck {truck}: plan {number} has no route to execute")
            if len(walk) > 1 and walk[-1] == DEPOT:
                raise StitchError(f"truck {truck} drives again after returning to the depot")
            if route.origin != walk[-1]:
                raise StitchError(
                    f"truck {truck}: plan {number} starts at {route.origin}, "
                    f"truck is at {walk[-1]}"
                )
            if count > len(route.stops) + 1:
                raise StitchError(f"truck {truck}: plan {number} executes past its end")
            walk.extend(route.walk[1 : count + 1])
        if len(walk) == 1:
            walk.append(DEPOT)
        elif walk[-1] != DEPOT:
            raise StitchError(f"truck {truck}: actual route does not return to the depot")
        routes.append(ActualRoute(truck=truck, walk=walk))

    distance = sum(route_distance(instance, r.walk) for r in routes)
    initial = sum(instance.truck(t).initial_cost for t in trucks_used)
    cost = (
        initial
        + instance.cost.routing_rate * distance
        + instance.cost.outsource_penalty * len(outsourced)
    )
    return StitchedRoute(routes=routes, total_distance=distance, total_cost=cost)


### simulation


def _fires(trigger: ReplanTrigger, epoch: int) -> bool:
    match trigger:
        case KthFromRouteEnd():
            return True
        case AtEpochList(epochs=epochs):
            return epoch in epochs


def _realized_routes(plan: PlanSolution, realized: str) -> dict[int, TruckRoute]:
    return {route.truck: route for route in plan.for_scenario(realized).routes}


def _tail(route: TruckRoute, count: int, state: SimulationState) -> TruckRoute:
    truck = state.truck(route.truck)
    if truck.closed:
        return TruckRoute(truck=route.truck)
    return TruckRoute(
        truck=route.truck,
        origin=truck.origin,
        stops=route.stops[count:],
        start_load=route.loads[count - 1] if count else route.start_load,
        loads=route.loads[count:],
    )


def _serving(state: SimulationState, plan_customers: Iterable[int]) -> int:
    return len(state.served) + len(state.origins) + len(set(plan_customers))


def _record(
    epoch: int,
    instance: Instance,
    state: SimulationState,
    plan: PlanSolution,
    *,
    accepted: list[int],
    trigger: TriggerPoint | None,
) -> EpochRecord:
    block = plan.for_scenario(state.realized)
    arcs = [arc for route in block.routes for arc in route.arcs]
    routing = sum(arc_cost(instance, u, v) for u, v in arcs)
    initial = (
        sum(instance.truck(t).initial_cost for t in plan.trucks_used) if epoch == 0 else 0.0
    )
    return EpochRecord(
        epoch=epoch,
        trigger_truck=trigger.truck if trigger else None,
        trigger_location=trigger.location if trigger else None,
        starting_weights={r.truck: r.start_load for r in block.routes},
        scenarios=list(block.merged),
        routes=block.routes,
        outsourced=list(plan.outsourced),
        accepted=accepted,
        objective=plan.expected_objective,
        plan_cost=initial + routing + instance.cost.outsource_penalty * len(plan.outsourced),
        distance=sum(instance.distance(u, v) for u, v in arcs),
        status=plan.status,
        gap=plan.gap,
        node_count=plan.node_count,
        serving=_serving(state, plan.assignment),
        wall_time=plan.wall_time,
    )


def run_simulation(
    instance: Instance,
    events: Sequence[RequestEvent] = (),
    trigger: ReplanTrigger | None = None,
    settings: SolverSettings | None = None,
    realized: str | None = None,
    plans: PlanCache | None = None,
) -> SimulationResult:
    """
    Simulate the day. Plans found are stored in `plans` under the epoch and
    the customers known at that point; a later run with the same inputs
    reuses them instead of solving again.
    """
    trigger = trigger or KthFromRouteEnd()
    plans = {} if plans is None else plans
    settings = settings or SolverSettings()
    if trigger.k < 1:
        raise InputError(f"trigger k must be at least 1, got {trigger.k}")
    timeline = Timeline(instance, events)
    universe, base = timeline.universe, timeline.base
    realized = realized or default_realized(universe)
    universe.scenarios.get(realized)

    state = initial_state(base, realized)
    model = RoutingModel(
        base, base.demanding, [TruckSetup(t) for t in base.trucks], name=f"offline-{base.name}"
    )
    key = (0, frozenset(base.customer_map))
    plan = plans.get(key) or solve_model(model, settings)
    plans[key] = plan
    trucks_used = list(plan.trucks_used)
    routes = _realized_routes(plan, realized)
    records = [_record(0, base, state, plan, accepted=list(base.demanding), trigger=None)]
    logger.info(
        f"epoch 0: {len(plan.assignment)} customers planned, "
        f"{len(plan.outsourced)} outsourced, objective {plan.expected_objective:.3f}"
    )

    route_log: list[dict[int, TruckRoute]] = [routes]
    executed_log: list[dict[int, int]] = []
    outsourced_now = list(plan.outsourced)
    known = set(base.customer_map)
    revealed: set[int] = set()
    waiting: list[int] = []
    snapshot = base
    start_loads: dict[int, float] = {}

    for epoch in range(1, timeline.last_epoch + 1):
        waiting.extend(timeline.arriving(epoch))
        if not _fires(trigger, epoch):
            continue
        point = trigger_progress(snapshot, routes, state, trigger.k)
        if point is None:
            continue
        executed_log.append(point.executed)
        records[-1].executed = point.executed
        _note_departures(state, routes, point.executed, start_loads)

        if state.committed_usage is None:
            state = state.model_copy(
                update={"committed_usage": {t.id: t.id in trucks_used for t in base.trucks}}
            )
        committed = sorted({*state.committed_outsourced, *outsourced_now})
        state = state.model_copy(update={"committed_outsourced": committed})
        state = observe_state(state, routes, point.executed, snapshot)

        revealed |= known
        known |= set(waiting)
        accepted, waiting = sorted(waiting), []
        pending = (set(state.pending) | set(accepted)) - set(committed)
        state = state.model_copy(update={"pending": sorted(pending)})
        snapshot = timeline.snapshot(known, revealed, realized)
        logger.info(
            f"epoch {epoch}: truck {point.truck} triggered at {point.location}, "
            f"{len(accepted)} requests accepted, {len(pending)} customers pending"
        )

        continuation = {
            t: route.stops[point.executed.get(t, 0) :] for t, route in routes.items()
        }
        key = (epoch, frozenset(known))
        try:
            plan = plans.get(key) or solve_reroute(state, snapshot, settings, continuation)
        except (ModelInfeasibleError, NoSolutionError, NumericalError) as error:
            logger.warning(f"epoch {epoch}: re-plan failed, keeping the current plan: {error}")
            routes = {
                t: _tail(route, point.executed.get(t, 0), state) for t, route in routes.items()
            }
            outsourced_now = []
            records.append(_failed_record(epoch, snapshot, state, routes, accepted, point, error))
        else:
            plans[key] = plan
            routes = _realized_routes(plan, realized)
            outsourced_now = list(plan.outsourced)
            records.append(_record(epoch, snapshot, state, plan, accepted=accepted, trigger=point))
        route_log.append(routes)

    final = {
        t: len(route.stops) + 1 if route.arcs else 0
        for t, route in routes.items()
        if not state.truck(t).closed
    }
    executed_log.append(final)
    records[-1].executed = final
    _note_departures(state, routes, final, start_loads)
    state = observe_state(state, routes, final, snapshot)

    committed = {*state.committed_outsourced, *outsourced_now}
    demanding = set(universe.demanding)
    rejected = sorted(
        c for c in {*waiting, *state.pending} if c in demanding and c not in committed
    )
    outsourced = sorted(committed | set(rejected))
    stitched = stitch_actual_route(
        universe, route_log, executed_log, outsourced=outsourced, trucks_used=trucks_used
    )
    served = sorted(c for r in stitched.routes for c in r.walk if c != DEPOT)
    initial = sum(universe.truck(t).initial_cost for t in trucks_used)
    delivery = initial + universe.cost.routing_rate * stitched.total_distance
    logger.info(
        f"simulation done: {len(served)} served, {len(outsourced)} outsourced, "
        f"total cost {stitched.total_cost:.3f}"
    )
    return SimulationResult(
        realized=realized,
        epochs=records,
        actual_routes=stitched.routes,
        served=served,
        outsourced=outsourced,
        rejected=rejected,
        start_loads=start_loads,
        total_distance=stitched.total_distance,
        delivery_cost=delivery,
        total_cost=stitched.total_cost,
    )


def _note_departures(
    state: SimulationState,
    routes: Mapping[int, TruckRoute],
    executed: Mapping[int, int],
    start_loads: dict[int, float],
) -> None:
    for truck in state.trucks:
        if not truck.departed and executed.get(truck.truck, 0):
            start_loads[truck.truck] = routes[truck.truck].start_load


def _failed_record(
    epoch: int,
    instance: Instance,
    state: SimulationState,
    routes: Mapping[int, TruckRoute],
    accepted: list[int],
    point: TriggerPoint,
    error: PdpsdError,
) -> EpochRecord:
    arcs = [arc for route in routes.values() for arc in route.arcs]
    status = (
        MilpStatus.INFEASIBLE
        if isinstance(error, ModelInfeasibleError)
        else MilpStatus.TIME_LIMIT_NO_SOLUTION
    )
    tail_customers = [c for route in routes.values() for c in route.stops]
    return EpochRecord(
        epoch=epoch,
        trigger_truck=point.truck,
        trigger_location=point.location,
        starting_weights={t: r.start_load for t, r in routes.items()},
        scenarios=[state.realized],
        routes=list(routes.values()),
        outsourced=[],
        accepted=accepted,
        plan_cost=sum(arc_cost(instance, u, v) for u, v in arcs),
        distance=sum(instance.distance(u, v) for u, v in arcs),
        status=status,
        serving=_serving(state, tail_customers),
        failed=True,
        failure=error.message,
    )

