import itertools
import math

from pdpsd.types import DEPOT, Instance

TOLERANCE = 1e-9


def route_feasible(instance: Instance, stops: tuple[int, ...], scenario: str) -> bool:
    truck = instance.trucks[0]
    served = set(stops)
    load = -sum(
        instance.size(c, scenario) for c in served if instance.is_depot_loaded(c, scenario)
    )
    if load > truck.capacity + TOLERANCE:
        return False
    position = {c: n for n, c in enumerate(stops)}
    for i, j in instance.dependencies.pairs:
        if (i in served) != (j in served):
            return False
        if i in served and position[i] > position[j]:
            return False
    for stop in stops:
        load += instance.size(stop, scenario)
        if not -TOLERANCE <= load <= truck.capacity + TOLERANCE:
            return False
    return True


def best_offline_cost(instance: Instance) -> float:
    """Cheapest plan for one truck and one scenario over every subset and order."""
    (scenario,) = instance.scenarios.ids
    truck = instance.trucks[0]
    customers = instance.demanding
    rate = instance.cost.routing_rate
    penalty = instance.cost.outsource_penalty
    best = math.inf
    for count in range(len(customers) + 1):
        for chosen in itertools.combinations(customers, count):
            outsourced = penalty * (len(customers) - count)
            if not chosen:
                best = min(best, outsourced)
                continue
            for stops in itertools.permutations(chosen):
                if not route_feasible(instance, stops, scenario):
                    continue
                walk = [DEPOT, *stops, DEPOT]
                distance = sum(instance.distance(u, v) for u, v in zip(walk, walk[1:]))
                best = min(best, truck.initial_cost + outsourced + rate * distance)
    return best
