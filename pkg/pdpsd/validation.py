from __future__ import annotations

import math
from collections import Counter
from collections.abc import Collection, Mapping

import networkx as nx

from .costs import route_distance
from .types import (
    DEPOT,
    Instance,
    MatrixDistance,
    PlanSolution,
    Point,
    SimulationResult,
    Violation,
)

PROBABILITY_TOLERANCE = 1e-9
LOAD_TOLERANCE = 1e-6


def validate_instance(instance: Instance) -> list[Violation]:
    """Check every structural rule of an instance. Violations are data."""
    violations: list[Violation] = []

    def flag(field: str, rule: str) -> None:
        violations.append(Violation(field=field, rule=rule))

    # trucks
    if not instance.trucks:
        flag("trucks", "at least one truck")
    for truck_id, count in Counter(t.id for t in instance.trucks).items():
        if count > 1:
            flag("trucks", f"duplicate truck id {truck_id}")
    for truck in instance.trucks:
        if not truck.capacity > 0:
            flag(f"trucks[{truck.id}].capacity", "capacity > 0")
        if truck.initial_cost < 0:
            flag(f"trucks[{truck.id}].initial_cost", "initial cost >= 0")

    # customers
    for customer_id, count in Counter(c.id for c in instance.customers).items():
        if count > 1:
            flag("customers", f"duplicate customer id {customer_id}")
    for customer in instance.customers:
        if customer.id == DEPOT or customer.id < 0:
            flag(f"customers[{customer.id}].id", "customer ids start at 1")
        if customer.demand_flag not in (0, 1):
            flag(f"customers[{customer.id}].demand_flag", "k in {0,1}")
        if customer.request_epoch < 0:
            flag(f"customers[{customer.id}].request_epoch", "request epoch >= 0")

    # cost
    cost = instance.cost
    for name in ("fuel_consumption", "fuel_price", "outsource_penalty"):
        if getattr(cost, name) < 0:
            flag(f"cost.{name}", f"{name} >= 0")

    # distances
    locations = [instance.depot, *(c.location for c in instance.customers)]
    if isinstance(instance.distances, MatrixDistance):
        matrix = instance.distances.matrix
        size = len(matrix)
        if any(len(row) != size for row in matrix):
            flag("distances.matrix", "matrix is square")
        if size != len(locations):
            flag(
                "distances.matrix",
                f"matrix dimension {size} equals location count {len(locations)}",
            )
        for row in matrix:
            if any(value < 0 or math.isnan(value) for value in row):
                flag("distances.matrix", "distances >= 0")
                break
        if any(matrix[i][i] != 0 for i in range(min([size, *map(len, matrix)]))):
            flag("distances.matrix", "distance(u,u) = 0")
        for location in locations:
            if not isinstance(location, int) or not 0 <= location < size:
                flag("distances.matrix", f"matrix index out of range: {location}")
    elif any(not isinstance(location, Point) for location in locations):
        flag("distances", "euclidean distances need coordinates on every location")

    # scenarios
    scenarios = instance.scenarios.scenarios
    if not scenarios:
        flag("scenarios", "at least one scenario")
    for scenario_id, count in Counter(s.id for s in scenarios).items():
        if count > 1:
            flag("scenarios", f"duplicate scenario id {scenario_id}")
    for scenario in scenarios:
        if not 0 <= scenario.probability <= 1:
            flag(f"scenarios[{scenario.id}].probability", "probability in [0,1]")
    total = sum(s.probability for s in scenarios)
    if scenarios and abs(total - 1) > PROBABILITY_TOLERANCE:
        flag("scenarios", f"probabilities sum to {round(total, 9):g}")
    known = set(instance.customer_map)
    for scenario in scenarios:
        for customer_id in instance.demanding:
            if customer_id not in scenario.sizes:
                flag(
                    f"scenarios[{scenario.id}].sizes",
                    f"missing size for customer {customer_id}",
                )
        for customer_id in scenario.sizes:
            if customer_id not in known:
                flag(
                    f"scenarios[{scenario.id}].sizes",
                    f"size for unknown customer {customer_id}",
                )

    # dependencies
    demanding = set(instance.demanding)
    for i, j in instance.dependencies.pairs:
        if i == j:
            flag("dependencies", f"self dependency ({i},{j})")
        for endpoint in (i, j):
            if endpoint not in known:
                flag("dependencies", f"unknown customer {endpoint} in ({i},{j})")
            elif endpoint not in demanding:
                flag("dependencies", f"customer {endpoint} in ({i},{j}) has k=0")
    graph = nx.DiGraph(list(instance.dependencies.pairs))
    if graph.number_of_nodes() and not nx.is_directed_acyclic_graph(graph):
        flag("dependencies", "dependency graph cyclic")

    return violations


def plan_violations(
    plan: PlanSolution,
    instance: Instance,
    *,
    customers: Collection[int] | None = None,
    origins: Mapping[int, int] | None = None,
) -> list[str]:
    """
    Invariants every decoded plan must satisfy. `customers` is the set the
    plan decides (all demanding customers for an offline plan) and `origins`
    the route anchor of each truck (the depot by default).
    """
    problems: list[str] = []
    decided = set(instance.demanding if customers is None else customers)
    origins = origins or {}

    assigned = set(plan.assignment)
    outsourced = set(plan.outsourced)
    for customer in sorted(decided):
        if (customer in assigned) == (customer in outsourced):
            problems.append(f"customer {customer} is not served exactly once")
    for customer, truck in plan.assignment.items():
        if truck not in plan.trucks_used:
            problems.append(f"customer {customer} assigned to unused truck {truck}")

    for block in plan.scenarios:
        scenario = block.scenario
        for route in block.routes:
            where = f"truck {route.truck}, scenario {scenario}"
            expected = {c for c, t in plan.assignment.items() if t == route.truck}
            if len(set(route.stops)) != len(route.stops):
                problems.append(f"{where}: route revisits a customer")
            if set(route.stops) != expected:
                problems.append(f"{where}: route does not cover its assigned customers")
            if route.origin != origins.get(route.truck, DEPOT):
                problems.append(f"{where}: route does not start at its origin")
            capacity = instance.truck(route.truck).capacity
            load = route.start_load
            if not -LOAD_TOLERANCE <= load <= capacity + LOAD_TOLERANCE:
                problems.append(f"{where}: start load {load:g} outside [0, {capacity:g}]")
            for stop in route.stops:
                load += instance.size(stop, scenario)
                if not -LOAD_TOLERANCE <= load <= capacity + LOAD_TOLERANCE:
                    problems.append(
                        f"{where}: load {load:g} after c{stop} outside [0, {capacity:g}]"
                    )
                    break
            order = route.visit_order
            for i, j in instance.dependencies.pairs:
                if i in order and j in order and order[i] >= order[j]:
                    problems.append(f"{where}: c{i} must precede c{j}")

    for i, j in instance.dependencies.pairs:
        if i in decided and j in decided:
            if (i in outsourced) != (j in outsourced):
                problems.append(f"dependency ({i},{j}) split between truck and outsourcing")
            elif plan.assignment.get(i) != plan.assignment.get(j):
                problems.append(f"dependency ({i},{j}) served by different trucks")
    return problems


def simulation_violations(result: SimulationResult, instance: Instance) -> list[str]:
    """
    Invariants of a finished simulation. `instance` must hold every customer
    ever requested, with the sizes that were revealed along the way.
    """
    problems: list[str] = []
    realized = result.realized
    visits: Counter[int] = Counter()
    position: dict[int, tuple[int, int]] = {}

    for route in result.actual_routes:
        walk = route.walk
        if walk[0] != DEPOT or walk[-1] != DEPOT:
            problems.append(f"truck {route.truck}: actual route not anchored at the depot")
        stops = [stop for stop in walk if stop != DEPOT]
        if DEPOT in walk[1:-1]:
            problems.append(f"truck {route.truck}: actual route passes the depot twice")
        for index, stop in enumerate(stops):
            visits[stop] += 1
            position[stop] = (route.truck, index)
        capacity = instance.truck(route.truck).capacity
        load = result.start_loads.get(route.truck, 0.0)
        for stop in stops:
            load += instance.size(stop, realized)
            if not -LOAD_TOLERANCE <= load <= capacity + LOAD_TOLERANCE:
                problems.append(
                    f"truck {route.truck}: load {load:g} after c{stop} outside [0, {capacity:g}]"
                )
                break

    outsourced = Counter(result.outsourced)
    for customer in instance.demanding:
        served = visits[customer]
        dropped = outsourced[customer]
        if served + dropped != 1:
            problems.append(
                f"customer {customer}: served {served} times, outsourced {dropped} times"
            )
    if set(result.served) != {c for c, n in visits.items() if n}:
        problems.append("served list disagrees with the actual routes")

    # late requests no plan took in may be outsourced apart from a partner already served
    unplanned = set(result.rejected) | {
        c for record in result.epochs if record.failed for c in record.accepted
    }
    for i, j in instance.dependencies.pairs:
        if (i in outsourced) != (j in outsourced):
            dropped = i if i in outsourced else j
            if dropped not in unplanned:
                problems.append(f"dependency ({i},{j}) split between truck and outsourcing")
        elif i in position and j in position:
            (truck_i, at_i), (truck_j, at_j) = position[i], position[j]
            if truck_i != truck_j or at_i >= at_j:
                problems.append(f"dependency ({i},{j}) violated on the actual route")

    for record in result.epochs:
        for route in record.routes:
            if route.walk[-1] != DEPOT:
                problems.append(f"epoch {record.epoch}: route does not end at the depot")

    distance = sum(route_distance(instance, r.walk) for r in result.actual_routes)
    if abs(distance - result.total_distance) > 1e-6:
        problems.append("total distance disagrees with the actual routes")
    return problems
