"""
Cheapest-insertion plans for a routing model.

Every truck drives the same stop sequence in all scenario blocks, so a plan
built here is feasible for every block at once whenever it passes `fits`.
Customers the heuristic cannot place profitably stay outsourced.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence

import networkx as nx

from .formulation import RoutingModel, TruckSetup
from .logger import logger
from .types import DEPOT

_EPSILON = 1e-9


class _Insertion:
    def __init__(self, truck: int, stops: list[int], added: float):
        self.truck = truck
        self.stops = stops
        self.added = added


class _Planner:
    def __init__(self, model: RoutingModel, initial: Mapping[int, Sequence[int]]):
        self.model = model
        instance = model.instance
        self.rate = instance.cost.routing_rate
        self.penalty = instance.cost.outsource_penalty
        self.distance = {
            (u, v): instance.distance(u, v)
            for u in model.locations
            for v in model.locations
        }
        self.pairs = model.instance.dependencies.restricted_to(set(model.customers))
        known = set(model.customers)
        self.routes = {
            setup.id: [c for c in initial.get(setup.id, ()) if c in known]
            for setup in model.trucks
        }
        self.setups = {
            setup.id: setup
            for setup in model.trucks
            if setup.active and self._upper(model.u[setup.id]) > 0.5
        }

    def _lower(self, index: int) -> float:
        return self.model.bounds(index)[0]

    def _upper(self, index: int) -> float:
        return self.model.bounds(index)[1]

    ### evaluation

    def length(self, setup: TruckSetup, stops: Sequence[int]) -> float:
        if not stops:
            return 0.0 if setup.origin == DEPOT else self.distance[setup.origin, DEPOT]
        walk = [setup.origin, *stops, DEPOT]
        return sum(self.distance[u, v] for u, v in zip(walk, walk[1:]))

    def fits(self, setup: TruckSetup, stops: Sequence[int]) -> bool:
        position = {c: n for n, c in enumerate(stops)}
        for i, j in self.pairs:
            if i in position and j in position and position[i] > position[j]:
                return False
        capacity = setup.truck.capacity
        for block in self.model.blocks:
            sizes = block.sizes
            load = setup.start_load
            if setup.loads_at_depot:
                load -= sum(sizes[c] for c in stops if self.model.depot_loaded(c, sizes))
            if load > capacity + _EPSILON:
                return False
            for c in stops:
                load += sizes[c]
                if load < -_EPSILON or load > capacity + _EPSILON:
                    return False
        return True

    def opening_cost(self, truck: int) -> float:
        setup = self.setups[truck]
        if self.routes[truck] or self._lower(self.model.u[truck]) > 0.5:
            return 0.0
        return setup.truck.initial_cost

    ### insertion

    def insert(self, unit: Sequence[int], truck: int) -> _Insertion | None:
        """Cheapest way to add the members of `unit`, in order, to `truck`."""
        setup = self.setups[truck]
        stops = list(self.routes[truck])
        before = self.length(setup, stops)
        for number, customer in enumerate(unit):
            earliest = 0
            for i in self.model.instance.dependencies.predecessors(customer):
                if i in stops:
                    earliest = max(earliest, stops.index(i) + 1)
            latest = len(stops)
            for j in self.model.instance.dependencies.successors(customer):
                if j in stops:
                    latest = min(latest, stops.index(j))
            if earliest > latest:
                return None
            candidates = sorted(
                (self.length(setup, stops[:p] + [customer] + stops[p:]), p)
                for p in range(earliest, latest + 1)
            )
            if number < len(unit) - 1:
                stops.insert(candidates[0][1], customer)
                continue
            for _, p in candidates:
                trial = stops[:p] + [customer] + stops[p:]
                if self.fits(setup, trial):
                    added = self.rate * (self.length(setup, trial) - before)
                    return _Insertion(truck, trial, added + self.opening_cost(truck))
            return None
        return None


def _units(model: RoutingModel, placed: set[int]) -> list[list[int]]:
    """Dependency-connected groups of unplaced customers, each in precedence order."""
    graph = nx.DiGraph()
    graph.add_nodes_from(c for c in model.customers if c not in placed)
    graph.add_edges_from(
        (i, j)
        for i, j in model.instance.dependencies.restricted_to(set(model.customers))
        if i not in placed and j not in placed
    )
    units = [
        list(nx.lexicographical_topological_sort(graph.subgraph(component)))
        for component in nx.weakly_connected_components(graph)
    ]
    return sorted(units, key=min)


def insertion_routes(
    model: RoutingModel, initial: Mapping[int, Sequence[int]] | None = None
) -> dict[int, list[int]]:
    """
    Greedy plan for `model`: starting from `initial` routes, repeatedly add the
    customer group whose insertion saves the most outsourcing cost. Groups that
    may not be outsourced go first. Returns truck id -> stops for every truck.
    """
    planner = _Planner(model, initial or {})
    placed = {c for stops in planner.routes.values() for c in stops}
    owner = {c: t for t, stops in planner.routes.items() for c in stops}
    pending = [
        unit
        for unit in _units(model, placed)
        if all(model.bounds(model.y[c])[0] < 0.5 for c in unit)
    ]

    def trucks_for(unit: list[int]) -> list[int]:
        partners = {
            owner[p]
            for c in unit
            for p in (
                *model.instance.dependencies.predecessors(c),
                *model.instance.dependencies.successors(c),
            )
            if p in owner
        }
        required = {
            t
            for c in unit
            for t in planner.setups
            if model.bounds(model.w[c, t])[0] > 0.5
        }
        choices = []
        for t in planner.setups:
            if partners and t not in partners or required and t not in required:
                continue
            if all(model.bounds(model.w[c, t])[1] > 0.5 for c in unit):
                choices.append(t)
        return choices

    cache: dict[tuple[int, int], _Insertion | None] = {}
    while pending:
        best: tuple[bool, float] | None = None
        chosen: tuple[int, _Insertion] | None = None
        for number, unit in enumerate(pending):
            forced = any(model.bounds(model.y[c])[1] < 0.5 for c in unit)
            for t in trucks_for(unit):
                key = (min(unit), t)
                if key not in cache:
                    cache[key] = planner.insert(unit, t)
                insertion = cache[key]
                if insertion is None:
                    continue
                saving = planner.penalty * len(unit) - insertion.added
                rank = (forced, saving)
                if best is None or rank > best:
                    best, chosen = rank, (number, insertion)
        if chosen is None or not best[0] and best[1] <= _EPSILON:
            break
        number, insertion = chosen
        unit = pending.pop(number)
        planner.routes[insertion.truck] = insertion.stops
        owner.update((c, insertion.truck) for c in unit)
        for key in [k for k in cache if k[1] == insertion.truck]:
            del cache[key]
        logger.debug(
            f"{model.name}: inserted {unit} on truck {insertion.truck} "
            f"for {insertion.added:.2f}"
        )
    return planner.routes
