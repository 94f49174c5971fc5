"""
Routing MILP shared by the offline and re-route planners.

Variables are laid out in blocks, in this order:

    U[t]                    truck t is used
    W[i, t]                 customer i is served by truck t
    Y[i]                    customer i is outsourced
    V[b, t, u, v]           truck t drives u -> v in scenario block b
    S[b, t, i]              visit order of customer i (continuous, MTZ)
    Q[b, t, i]              onboard weight after visiting customer i

U, W and Y are first-stage decisions shared by all scenario blocks. Every
truck gets a full |L| x |L| arc block per scenario, where L is the depot,
then the truck origins of a re-route model, then the model's customers.
Arcs a truck may not drive are kept in the layout with both bounds at 0.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence

import networkx as nx
import numpy as np

from .errors import DecodeError, InputError, ModelInfeasibleError
from .milp import MilpBuilder
from .types import (
    DEPOT,
    FirstStage,
    Instance,
    MilpProblem,
    MilpStatus,
    PlanSolution,
    ScenarioPlan,
    Truck,
    TruckRoute,
)


class TruckSetup:
    """How one truck enters a routing model."""

    def __init__(
        self,
        truck: Truck,
        *,
        origin: int = DEPOT,
        start_load: float = 0.0,
        loads_at_depot: bool = True,
        active: bool = True,
    ):
        self.truck = truck
        self.origin = origin
        self.start_load = start_load
        """Weight already on board at the origin."""
        self.loads_at_depot = loads_at_depot
        """Depot-loaded deliveries assigned to the truck add to its start load."""
        self.active = active

    @property
    def id(self) -> int:
        return self.truck.id


class ScenarioBlock:
    def __init__(self, scenario: str, probability: float, sizes: dict[int, float]):
        self.scenario = scenario
        self.merged = [scenario]
        self.probability = probability
        self.sizes = sizes


def merge_scenarios(instance: Instance, customers: Sequence[int]) -> list[ScenarioBlock]:
    """
    One block per distinct size vector over `customers`. Merged blocks keep
    the first scenario id and add up the probabilities.
    """
    blocks: dict[tuple[float, ...], ScenarioBlock] = {}
    for scenario in instance.scenarios.scenarios:
        sizes = {c: instance.size(c, scenario.id) for c in customers}
        key = tuple(sizes.values())
        block = blocks.get(key)
        if block is None:
            blocks[key] = ScenarioBlock(scenario.id, scenario.probability, sizes)
        else:
            block.merged.append(scenario.id)
            block.probability += scenario.probability
    return list(blocks.values())


def label(location: int) -> str:
    return "D" if location == DEPOT else f"c{location}"


class RoutingModel:
    def __init__(
        self,
        instance: Instance,
        customers: Iterable[int],
        trucks: Sequence[TruckSetup],
        *,
        name: str = "pdpsd",
        offset: float = 0.0,
    ):
        if not trucks:
            raise InputError("a routing model needs at least one truck")
        self.instance = instance
        self.customers = sorted(customers)
        self.trucks = list(trucks)
        self.origins = sorted({s.origin for s in trucks if s.origin != DEPOT})
        clash = set(self.origins) & set(self.customers)
        if clash:
            raise InputError(f"truck origins cannot be open customers: {sorted(clash)}")
        self.locations = [DEPOT, *self.origins, *self.customers]
        self.blocks = merge_scenarios(instance, self.customers)
        self.name = name

        self.u: dict[int, int] = {}
        self.w: dict[tuple[int, int], int] = {}
        self.y: dict[int, int] = {}
        self.v: dict[tuple[int, int, int, int], int] = {}
        self.s: dict[tuple[int, int, int], int] = {}
        self.q: dict[tuple[int, int, int], int] = {}

        self._builder = MilpBuilder(name)
        self._builder.offset = offset
        self._declare()
        self._constrain()

    @property
    def num_variables(self) -> int:
        return self._builder.num_variables

    @property
    def offset(self) -> float:
        return self._builder.offset

    def problem(self) -> MilpProblem:
        return self._builder.build()

    def setup(self, truck: int) -> TruckSetup:
        for setup in self.trucks:
            if setup.id == truck:
                return setup
        raise InputError(f"unknown truck: {truck}")

    def bounds(self, index: int) -> tuple[float, float]:
        return self._builder.lower[index], self._builder.upper[index]

    ### starting solutions

    def start_from_routes(self, routes: Mapping[int, Sequence[int]]) -> dict[int, float]:
        """Integer values of a plan that drives the same stops in every block."""
        known = set(self.customers)
        routes = {t: [c for c in stops if c in known] for t, stops in routes.items()}
        trucks_used = [t for t, stops in routes.items() if stops]
        assignment = {c: t for t, stops in routes.items() for c in stops}
        return self._start(trucks_used, assignment, [routes] * len(self.blocks))

    def start_from_plan(self, plan: PlanSolution) -> dict[int, float] | None:
        """
        Integer values of `plan`, its blocks matched to this model's by
        scenario id. A single-block plan stands for every block. None when
        some block has no counterpart.
        """
        per_block = []
        for block in self.blocks:
            matched = next((b for b in plan.scenarios if block.scenario in b.merged), None)
            if matched is None and len(plan.scenarios) == 1:
                matched = plan.scenarios[0]
            if matched is None:
                return None
            per_block.append({r.truck: r.stops for r in matched.routes})
        return self._start(plan.trucks_used, plan.assignment, per_block)

    def _start(
        self,
        trucks_used: Iterable[int],
        assignment: Mapping[int, int],
        per_block: Sequence[Mapping[int, Sequence[int]]],
    ) -> dict[int, float]:
        lower = self._builder.lower
        used = set(trucks_used)
        values: dict[int, float] = {}
        for setup in self.trucks:
            index = self.u[setup.id]
            values[index] = 1.0 if setup.id in used else lower[index]
        for i in self.customers:
            for setup in self.trucks:
                values[self.w[i, setup.id]] = float(assignment.get(i) == setup.id)
            values[self.y[i]] = float(i not in assignment)
        for k, routes in enumerate(per_block):
            driven = set()
            for setup in self.trucks:
                stops = list(routes.get(setup.id, ()))
                if stops or (setup.origin != DEPOT and setup.active):
                    walk = [setup.origin, *stops, DEPOT]
                    driven.update(zip(walk, walk[1:]))
                for u in self.locations:
                    for v in self.locations:
                        values[self.v[k, setup.id, u, v]] = float((u, v) in driven)
                driven.clear()
        return values

    ### fixing first-stage decisions

    def fix_usage(self, truck: int, used: bool) -> None:
        self._fix(self.u[truck], float(used))

    def fix_assignment(self, customer: int, truck: int, value: bool) -> None:
        self._fix(self.w[customer, truck], float(value))

    def fix_outsourced(self, customer: int, value: bool) -> None:
        self._fix(self.y[customer], float(value))

    def fix_first_stage(self, stage: FirstStage) -> None:
        for setup in self.trucks:
            self.fix_usage(setup.id, setup.id in stage.trucks_used)
        outsourced = set(stage.outsourced)
        for customer in self.customers:
            for setup in self.trucks:
                self.fix_assignment(
                    customer, setup.id, stage.assignment.get(customer) == setup.id
                )
            self.fix_outsourced(customer, customer in outsourced)

    def _fix(self, index: int, value: float) -> None:
        builder = self._builder
        low, high = builder.lower[index], builder.upper[index]
        if low == high and low != value:
            raise ModelInfeasibleError(
                f"conflicting requirements on {builder.names[index]}",
                hints=[f"{builder.names[index]} is already fixed to {low:g}"],
            )
        if not low <= value <= high:
            raise ModelInfeasibleError(
                f"{builder.names[index]} cannot take value {value:g}",
            )
        builder.fix(index, value)

    ### variables

    def _declare(self) -> None:
        instance, b = self.instance, self._builder
        rate = instance.cost.routing_rate
        n = len(self.customers)
        distance = {
            (u, v): instance.distance(u, v) for u in self.locations for v in self.locations
        }

        for setup in self.trucks:
            self.u[setup.id] = b.add_variable(
                f"U_t{setup.id}", 0, 1, integer=True, cost=setup.truck.initial_cost
            )
        for i in self.customers:
            for setup in self.trucks:
                self.w[i, setup.id] = b.add_variable(f"W_c{i}_t{setup.id}", 0, 1, integer=True)
        for i in self.customers:
            self.y[i] = b.add_variable(
                f"Y_c{i}", 0, 1, integer=True, cost=instance.cost.outsource_penalty
            )
        for k, block in enumerate(self.blocks):
            for setup in self.trucks:
                for u in self.locations:
                    for v in self.locations:
                        index = b.add_variable(
                            f"V_s{k}_t{setup.id}_{label(u)}_{label(v)}",
                            0,
                            1,
                            integer=True,
                            cost=block.probability * rate * distance[u, v],
                        )
                        self.v[k, setup.id, u, v] = index
                        if not self._arc_allowed(setup, u, v):
                            b.fix(index, 0.0)
        for k in range(len(self.blocks)):
            for setup in self.trucks:
                for i in self.customers:
                    self.s[k, setup.id, i] = b.add_variable(
                        f"S_s{k}_t{setup.id}_c{i}", 0.0, float(n)
                    )
        for k in range(len(self.blocks)):
            for setup in self.trucks:
                for i in self.customers:
                    self.q[k, setup.id, i] = b.add_variable(
                        f"Q_s{k}_t{setup.id}_c{i}", 0.0, setup.truck.capacity
                    )

    def _arc_allowed(self, setup: TruckSetup, u: int, v: int) -> bool:
        if u == v or not setup.active:
            return False
        origin = setup.origin
        if u in self.origins and u != origin or v in self.origins and v != origin:
            return False
        if origin != DEPOT and (u == DEPOT or v == origin):
            return False
        return True

    ### constraints

    def _constrain(self) -> None:
        b = self._builder
        n = len(self.customers)
        pairs = self.instance.dependencies.restricted_to(set(self.customers))

        for setup in self.trucks:
            t = setup.id
            if self.customers:
                terms = {self.w[i, t]: 1.0 for i in self.customers}
                terms[self.u[t]] = -float(n)
                b.add_row(terms, "<=", 0.0, f"usage_t{t}")
        for i in self.customers:
            terms = {self.w[i, setup.id]: 1.0 for setup in self.trucks}
            terms[self.y[i]] = 1.0
            b.add_row(terms, "=", 1.0, f"serve_c{i}")
        for i, j in pairs:
            b.add_row({self.y[i]: 1.0, self.y[j]: -1.0}, "<=", 0.0, f"dep_y_c{i}_c{j}")
            b.add_row({self.y[i]: 1.0, self.y[j]: -1.0}, ">=", 0.0, f"dep_y_c{j}_c{i}")
            for setup in self.trucks:
                t = setup.id
                wi, wj = self.w[i, t], self.w[j, t]
                b.add_row({wi: 1.0, wj: -1.0}, "<=", 0.0, f"dep_w_c{i}_c{j}_t{t}")
                b.add_row({wi: 1.0, wj: -1.0}, ">=", 0.0, f"dep_w_c{j}_c{i}_t{t}")

        for k in range(len(self.blocks)):
            for setup in self.trucks:
                self._route_rows(k, setup, pairs)

    def _route_rows(self, k: int, setup: TruckSetup, pairs: list[tuple[int, int]]) -> None:
        b, t = self._builder, setup.id
        n = len(self.customers)
        origin = setup.origin
        tag = f"s{k}_t{t}"

        def arc(u: int, v: int) -> int:
            return self.v[k, t, u, v]

        for i in self.customers:
            into = {arc(u, i): 1.0 for u in self.locations if u != i}
            into[self.w[i, t]] = -1.0
            b.add_row(into, "=", 0.0, f"in_{tag}_c{i}")
            out = {arc(i, v): 1.0 for v in self.locations if v != i}
            out[self.w[i, t]] = -1.0
            b.add_row(out, "=", 0.0, f"out_{tag}_c{i}")

        if not setup.active:
            return
        leave = {arc(origin, v): 1.0 for v in self.locations if v != origin}
        if origin == DEPOT:
            b.add_row({**leave, self.u[t]: -1.0}, "<=", 0.0, f"depart_{tag}")
            balance = dict(leave)
            for u in self.locations:
                if u != DEPOT:
                    balance[arc(u, DEPOT)] = balance.get(arc(u, DEPOT), 0.0) - 1.0
            b.add_row(balance, "=", 0.0, f"return_{tag}")
        else:
            b.add_row(leave, "=", 1.0, f"depart_{tag}")
            home = {arc(u, DEPOT): 1.0 for u in self.locations if u != DEPOT}
            b.add_row(home, "=", 1.0, f"return_{tag}")

        for i in self.customers:
            for j in self.customers:
                if i != j:
                    b.add_row(
                        {self.s[k, t, i]: 1.0, self.s[k, t, j]: -1.0, arc(i, j): float(n)},
                        "<=",
                        float(n - 1),
                        f"mtz_{tag}_c{i}_c{j}",
                    )
        for i, j in pairs:
            b.add_row(
                {self.s[k, t, i]: 1.0, self.s[k, t, j]: -1.0}, "<=", -1.0, f"order_{tag}_c{i}_c{j}"
            )

        self._load_rows(k, setup, tag)

    def _load_rows(self, k: int, setup: TruckSetup, tag: str) -> None:
        b, t = self._builder, setup.id
        sizes = self.blocks[k].sizes
        capacity = setup.truck.capacity
        big = capacity + max((abs(a) for a in sizes.values()), default=0.0)

        start = {
            self.w[j, t]: -sizes[j]
            for j in self.customers
            if setup.loads_at_depot and self.depot_loaded(j, sizes)
        }
        constant = setup.start_load
        if start:
            b.add_row(start, "<=", capacity - constant, f"start_load_{tag}")

        for j in self.customers:
            for u in [setup.origin, *self.customers]:
                if u == j or not self._arc_allowed(setup, u, j):
                    continue
                index = self.v[k, t, u, j]
                if u == setup.origin:
                    terms = {key: -value for key, value in start.items()}
                    base = constant
                else:
                    terms = {self.q[k, t, u]: -1.0}
                    base = 0.0
                terms[self.q[k, t, j]] = 1.0
                b.add_row(
                    {**terms, index: big}, "<=", big + base + sizes[j], f"load_up_{tag}_{label(u)}_{label(j)}"
                )
                b.add_row(
                    {**terms, index: -big}, ">=", -big + base + sizes[j], f"load_lo_{tag}_{label(u)}_{label(j)}"
                )

    def depot_loaded(self, customer: int, sizes: dict[int, float]) -> bool:
        return sizes[customer] < 0 and not self.instance.dependencies.predecessors(customer)

    ### decoding

    def decode(
        self,
        vector: Sequence[float],
        *,
        status: MilpStatus = MilpStatus.OPTIMAL,
        gap: float | None = 0.0,
        node_count: int = 0,
        wall_time: float = 0.0,
    ) -> PlanSolution:
        """Turn a solution vector into a plan by following arcs from each origin."""
        x = np.asarray(vector, dtype=float)
        if x.shape != (self.num_variables,):
            raise DecodeError(
                f"vector has {x.size} entries, the model has {self.num_variables}"
            )

        trucks_used = [s.id for s in self.trucks if x[self.u[s.id]] > 0.5]
        assignment: dict[int, int] = {}
        for i in self.customers:
            for setup in self.trucks:
                if x[self.w[i, setup.id]] > 0.5:
                    if i in assignment:
                        raise DecodeError(f"customer {i} is assigned to two trucks")
                    assignment[i] = setup.id
        outsourced = [i for i in self.customers if x[self.y[i]] > 0.5]

        instance = self.instance
        first_stage = (
            self.offset
            + sum(instance.truck(t).initial_cost for t in trucks_used)
            + instance.cost.outsource_penalty * len(outsourced)
        )
        scenarios = []
        for k, block in enumerate(self.blocks):
            routes = [self._decode_route(x, k, setup, assignment) for setup in self.trucks]
            distance = sum(instance.distance(u, v) for r in routes for u, v in r.arcs)
            scenarios.append(
                ScenarioPlan(
                    scenario=block.scenario,
                    merged=list(block.merged),
                    probability=block.probability,
                    routes=routes,
                    cost=first_stage + instance.cost.routing_rate * distance,
                    distance=distance,
                )
            )
        cost = np.asarray(self._builder.objective, dtype=float)
        return PlanSolution(
            status=status,
            trucks_used=trucks_used,
            assignment=assignment,
            outsourced=outsourced,
            scenarios=scenarios,
            expected_objective=float(cost @ x) + self.offset,
            gap=gap,
            node_count=node_count,
            wall_time=wall_time,
        )

    def _decode_route(
        self, x: np.ndarray, k: int, setup: TruckSetup, assignment: dict[int, int]
    ) -> TruckRoute:
        t, origin = setup.id, setup.origin
        scenario = self.blocks[k].scenario
        arcs = [
            (u, v)
            for u in self.locations
            for v in self.locations
            if u != v and x[self.v[k, t, u, v]] > 0.5
        ]
        successors: dict[int, int] = {}
        for u, v in arcs:
            if u in successors:
                raise DecodeError(
                    f"{label(u)} has more than one successor", truck=t, scenario=scenario
                )
            successors[u] = v

        stops: list[int] = []
        if origin != DEPOT or DEPOT in successors:
            current, seen = origin, {origin}
            while (following := successors.get(current)) != DEPOT:
                if following is None:
                    raise DecodeError(
                        f"route ends at {label(current)} before the depot",
                        truck=t,
                        scenario=scenario,
                    )
                if following in seen:
                    raise DecodeError(
                        f"subtour {_members(stops[stops.index(following) :])}",
                        truck=t,
                        scenario=scenario,
                    )
                stops.append(following)
                seen.add(following)
                current = following

        walked = set(zip([origin, *stops], [*stops, DEPOT]))
        stray = [a for a in arcs if a not in walked]
        if stray:
            cycle = next(iter(nx.simple_cycles(nx.DiGraph(stray))), None)
            if cycle is not None:
                raise DecodeError(f"subtour {_members(cycle)}", truck=t, scenario=scenario)
            raise DecodeError(
                f"arcs off the route: {sorted(stray)}", truck=t, scenario=scenario
            )

        sizes = self.blocks[k].sizes
        load = setup.start_load
        if setup.loads_at_depot:
            load -= sum(
                sizes[j]
                for j, truck in assignment.items()
                if truck == t and self.depot_loaded(j, sizes)
            )
        start_load = load
        loads = []
        for stop in stops:
            load += sizes[stop]
            loads.append(load)
        return TruckRoute(
            truck=t, origin=origin, stops=stops, start_load=start_load, loads=loads
        )


def _members(nodes: Iterable[int]) -> str:
    return "{" + ",".join(str(n) for n in sorted(set(nodes))) + "}"


def infeasibility_hints(
    instance: Instance, customers: Iterable[int], capacity: float
) -> list[str]:
    """Structures that commonly make a routing model infeasible."""
    hints = []
    chosen = set(customers)
    for scenario in instance.scenarios.scenarios:
        for customer in sorted(chosen):
            size = scenario.sizes.get(customer, 0.0)
            if abs(size) > capacity:
                hints.append(
                    f"customer {customer} weighs {abs(size):g} in scenario {scenario.id}, "
                    f"above capacity {capacity:g}"
                )
        for i, j in instance.dependencies.restricted_to(chosen):
            first = scenario.sizes.get(i, 0.0)
            peak = max(first, first + scenario.sizes.get(j, 0.0))
            if peak > capacity:
                hints.append(
                    f"dependency ({i},{j}) needs {peak:g} on board in scenario "
                    f"{scenario.id}, above capacity {capacity:g}"
                )
    return hints
