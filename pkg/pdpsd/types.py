from __future__ import annotations

import math
from enum import StrEnum
from functools import cached_property
from typing import Annotated, Final, Literal

from pydantic import BaseModel, ConfigDict, Field

from .errors import InputError

DEPOT: Final = 0
"""Location id of the depot. Customer ids start at 1."""


### LOCATIONS AND DISTANCES


class Point(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: float
    y: float


Location = Point | int
"""Planar coordinates, or a row index into an explicit distance matrix."""


class EuclideanDistance(BaseModel):
    model_config = ConfigDict(frozen=True)

    type: Literal["euclidean"] = "euclidean"

    def between(self, a: Location, b: Location) -> float:
        if not isinstance(a, Point) or not isinstance(b, Point):
            raise InputError("euclidean distances need coordinates on every location")
        return math.hypot(a.x - b.x, a.y - b.y)


class MatrixDistance(BaseModel):
    """Explicit distances. Entries are trusted as-is and may be asymmetric."""

    model_config = ConfigDict(frozen=True)

    type: Literal["matrix"] = "matrix"
    matrix: tuple[tuple[float, ...], ...]

    def between(self, a: Location, b: Location) -> float:
        if not isinstance(a, int) or not isinstance(b, int):
            raise InputError("matrix distances need a matrix index on every location")
        size = len(self.matrix)
        if not (0 <= a < size and 0 <= b < size):
            raise InputError(f"matrix index out of range: ({a}, {b}) for size {size}")
        return self.matrix[a][b]


DistanceProvider = Annotated[
    EuclideanDistance | MatrixDistance, Field(discriminator="type")
]


### INSTANCE


class Customer(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: int
    location: Location
    demand_flag: int = 1
    """1 when the customer requests service (k_i), 0 otherwise."""
    request_epoch: int = 0
    """Re-plan epoch at which the request becomes known. 0 for offline customers."""


class Truck(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: int
    capacity: float
    initial_cost: float = 0.0


class DependencyRelation(BaseModel):
    """Ordered pairs (i, j): customer i must be visited before customer j."""

    model_config = ConfigDict(frozen=True)

    pairs: tuple[tuple[int, int], ...] = ()

    def predecessors(self, customer: int) -> list[int]:
        return [i for i, j in self.pairs if j == customer]

    def successors(self, customer: int) -> list[int]:
        return [j for i, j in self.pairs if i == customer]

    def restricted_to(self, customers: set[int]) -> list[tuple[int, int]]:
        return [(i, j) for i, j in self.pairs if i in customers and j in customers]


class CostModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    fuel_consumption: float
    """Litres per distance unit."""
    fuel_price: float
    """Currency per litre."""
    outsource_penalty: float
    """Currency per outsourced package."""

    @property
    def routing_rate(self) -> float:
        return self.fuel_consumption * self.fuel_price


class Scenario(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    probability: float
    sizes: dict[int, float] = Field(default_factory=dict)
    """Signed package weight per customer: pickup > 0, delivery < 0."""


class ScenarioSet(BaseModel):
    model_config = ConfigDict(frozen=True)

    scenarios: tuple[Scenario, ...]

    @property
    def ids(self) -> list[str]:
        return [scenario.id for scenario in self.scenarios]

    def get(self, scenario_id: str) -> Scenario:
        for scenario in self.scenarios:
            if scenario.id == scenario_id:
                return scenario
        raise InputError(f"unknown scenario: {scenario_id}")


class Instance(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str = "instance"
    depot: Location
    customers: tuple[Customer, ...]
    trucks: tuple[Truck, ...]
    dependencies: DependencyRelation = DependencyRelation()
    cost: CostModel
    distances: DistanceProvider
    scenarios: ScenarioSet

    def replace(self, **changes: object) -> Instance:
        """Copy with some fields swapped. Unlike model_copy, drops cached lookups."""
        fields = {name: getattr(self, name) for name in type(self).model_fields}
        return type(self).model_validate({**fields, **changes})

    @cached_property
    def customer_map(self) -> dict[int, Customer]:
        return {customer.id: customer for customer in self.customers}

    @cached_property
    def demanding(self) -> list[int]:
        """Ids of customers requesting service, ascending."""
        return sorted(c.id for c in self.customers if c.demand_flag == 1)

    def customer(self, customer_id: int) -> Customer:
        try:
            return self.customer_map[customer_id]
        except KeyError:
            raise InputError(f"unknown location: {customer_id}") from None

    def truck(self, truck_id: int) -> Truck:
        for truck in self.trucks:
            if truck.id == truck_id:
                return truck
        raise InputError(f"unknown truck: {truck_id}")

    def location(self, location_id: int) -> Location:
        if location_id == DEPOT:
            return self.depot
        return self.customer(location_id).location

    def distance(self, u: int, v: int) -> float:
        if u == v:
            return 0.0
        return self.distances.between(self.location(u), self.location(v))

    def size(self, customer_id: int, scenario_id: str) -> float:
        scenario = self.scenarios.get(scenario_id)
        try:
            return scenario.sizes[customer_id]
        except KeyError:
            raise InputError(
                f"customer {customer_id} has no size in scenario {scenario_id}"
            ) from None

    def is_depot_loaded(self, customer_id: int, scenario_id: str) -> bool:
        """True for deliveries whose package leaves the depot on the truck."""
        return self.size(customer_id, scenario_id) < 0 and not (
            self.dependencies.predecessors(customer_id)
        )


class Violation(BaseModel):
    model_config = ConfigDict(frozen=True)

    field: str
    rule: str

    def __str__(self) -> str:
        return f"{self.field}: {self.rule}"


### SOLVER TYPES


class SolverSettings(BaseModel):
    model_config = ConfigDict(frozen=True)

    time_limit: float = 300.0
    """Seconds per MILP solve."""
    gap_tolerance: float = 1e-6
    """Absolute optimality gap."""
    integrality_tolerance: float = 1e-6
    feasibility_tolerance: float = 1e-6
    pivot_tolerance: float = 1e-9


class MilpStatus(StrEnum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    TIME_LIMIT_FEASIBLE = "TimeLimitFeasible"
    TIME_LIMIT_NO_SOLUTION = "TimeLimitNoSolution"


class LinearRow(BaseModel):
    indices: list[int]
    coefficients: list[float]
    relation: Literal["<=", "=", ">="]
    rhs: float
    name: str = ""


class MilpProblem(BaseModel):
    """Minimize `objective · x + objective_offset` subject to rows and bounds."""

    name: str = "problem"
    objective: list[float]
    objective_offset: float = 0.0
    rows: list[LinearRow] = Field(default_factory=list)
    lower: list[float]
    upper: list[float]
    integer: list[bool]
    names: list[str] = Field(default_factory=list)

    @property
    def num_variables(self) -> int:
        return len(self.objective)

    def variable_name(self, index: int) -> str:
        if index < len(self.names) and self.names[index]:
            return self.names[index]
        return f"x{index}"


class MilpSolution(BaseModel):
    status: MilpStatus
    objective: float | None = None
    assignment: list[float] = Field(default_factory=list)
    gap: float | None = None
    """Incumbent objective minus the best proven bound."""
    node_count: int = 0
    wall_time: float = 0.0
    bound_log: list[float] = Field(default_factory=list)
    """Bound of every processed branch-and-bound node, in processing order."""

    @property
    def has_solution(self) -> bool:
        return self.status in (MilpStatus.OPTIMAL, MilpStatus.TIME_LIMIT_FEASIBLE)


### PLANS


class TruckRoute(BaseModel):
    """A path origin -> stops -> depot for one truck in one scenario."""

    truck: int
    origin: int = DEPOT
    stops: list[int] = Field(default_factory=list)
    start_load: float = 0.0
    loads: list[float] = Field(default_factory=list)
    """Onboard weight after each stop."""

    @property
    def walk(self) -> list[int]:
        return [self.origin, *self.stops, DEPOT]

    @property
    def arcs(self) -> list[tuple[int, int]]:
        walk = self.walk
        if len(walk) == 2 and walk[0] == DEPOT:
            return []
        return list(zip(walk, walk[1:]))

    @property
    def visit_order(self) -> dict[int, int]:
        return {customer: position for position, customer in enumerate(self.stops, 1)}


class ScenarioPlan(BaseModel):
    scenario: str
    """Id of the block; the first id among `merged`."""
    merged: list[str]
    """Every scenario id sharing this block's package sizes."""
    probability: float
    routes: list[TruckRoute]
    cost: float = 0.0
    """Initial, outsourcing and routing cost if this block's scenario happens."""
    distance: float = 0.0

    def route(self, truck: int) -> TruckRoute:
        for route in self.routes:
            if route.truck == truck:
                return route
        raise InputError(f"no route for truck {truck} in scenario {self.scenario}")


class PlanSolution(BaseModel):
    """Decoded decision variables of an offline or re-route model."""

    status: MilpStatus
    trucks_used: list[int]
    assignment: dict[int, int]
    """Customer id -> serving truck id."""
    outsourced: list[int]
    scenarios: list[ScenarioPlan]
    expected_objective: float
    gap: float | None = 0.0
    """Incumbent minus best bound; None when no bound was proven before the time limit."""
    node_count: int = 0
    wall_time: float = Field(default=0.0, exclude=True)

    def for_scenario(self, scenario_id: str) -> ScenarioPlan:
        for block in self.scenarios:
            if scenario_id in block.merged:
                return block
        raise InputError(f"plan has no block for scenario {scenario_id}")


OfflinePlan = PlanSolution


class FirstStage(BaseModel):
    """Scenario-independent decisions: U, W and Y."""

    trucks_used: list[int]
    assignment: dict[int, int]
    outsourced: list[int]


### SIMULATION


class RequestEvent(BaseModel):
    epoch: int
    customers: list[Customer]
    sizes: dict[str, dict[int, float]] = Field(default_factory=dict)
    """Scenario id -> customer id -> signed size."""
    dependencies: list[tuple[int, int]] = Field(default_factory=list)


class KthFromRouteEnd(BaseModel):
    """Re-plan when a truck reaches the k-th stop counted from its route end."""

    model_config = ConfigDict(frozen=True)

    type: Literal["kth_from_route_end"] = "kth_from_route_end"
    k: int = 3


class AtEpochList(BaseModel):
    """Re-plan only at the listed epochs, at the k-th stop from the route end."""

    model_config = ConfigDict(frozen=True)

    type: Literal["at_epoch_list"] = "at_epoch_list"
    epochs: list[int]
    k: int = 3


ReplanTrigger = Annotated[KthFromRouteEnd | AtEpochList, Field(discriminator="type")]


class TruckState(BaseModel):
    truck: int
    origin: int = DEPOT
    load: float = 0.0
    """Onboard weight at the origin."""
    walk: list[int] = Field(default_factory=lambda: [DEPOT])
    """Committed walk from the depot to the origin."""
    onboard: list[int] = Field(default_factory=list)
    """Depot-loaded deliveries still on the truck."""
    closed: bool = False
    """Route finished and back at the depot."""

    @property
    def departed(self) -> bool:
        return self.origin != DEPOT or len(self.walk) > 1


class SimulationState(BaseModel):
    epoch: int
    realized: str
    pending: list[int]
    """Customers awaiting a decision, origins excluded."""
    served: list[int]
    """Served customers, excluding each truck's current origin."""
    trucks: list[TruckState]
    committed_usage: dict[int, bool] | None = None
    """Truck usage fixed by earlier plans. None while usage is still free."""
    committed_outsourced: list[int] = Field(default_factory=list)

    def truck(self, truck_id: int) -> TruckState:
        for state in self.trucks:
            if state.truck == truck_id:
                return state
        raise InputError(f"unknown truck: {truck_id}")

    @property
    def origins(self) -> list[int]:
        return sorted({t.origin for t in self.trucks if t.origin != DEPOT})


class EpochRecord(BaseModel):
    epoch: int
    trigger_truck: int | None = None
    trigger_location: int | None = None
    starting_weights: dict[int, float]
    scenarios: list[str]
    routes: list[TruckRoute]
    """Routes of the block containing the realized scenario."""
    outsourced: list[int]
    """Customers this plan leaves to the outsourcing carrier."""
    accepted: list[int] = Field(default_factory=list)
    objective: float | None = None
    """Model objective, committed constants included."""
    plan_cost: float = 0.0
    """Routing of this plan's route plus penalties of its outsourcing decisions."""
    distance: float = 0.0
    status: MilpStatus | None = None
    gap: float | None = None
    node_count: int = 0
    serving: int = 0
    """Customers served by truck once this plan completes, earlier stops included."""
    executed: dict[int, int] = Field(default_factory=dict)
    """
    Stops of each route driven before the next plan took over. One past the
    last stop means the truck also drove back to the depot.
    """
    failed: bool = False
    failure: str | None = None
    wall_time: float = Field(default=0.0, exclude=True)


class ActualRoute(BaseModel):
    truck: int
    walk: list[int]


class StitchedRoute(BaseModel):
    routes: list[ActualRoute]
    total_distance: float
    total_cost: float


class SimulationResult(BaseModel):
    realized: str
    epochs: list[EpochRecord]
    actual_routes: list[ActualRoute]
    served: list[int]
    outsourced: list[int]
    rejected: list[int] = Field(default_factory=list)
    """Outsourced customers that no plan ever considered."""
    start_loads: dict[int, float] = Field(default_factory=dict)
    total_distance: float
    delivery_cost: float
    """Initial truck costs plus routing of driven arcs."""
    total_cost: float
    """Delivery cost plus outsourcing penalties."""

    @property
    def gaps(self) -> list[float | None]:
        return [record.gap for record in self.epochs]

    @property
    def timed_out(self) -> bool:
        """Some epoch stopped at the time limit, with or without a plan."""
        limits = (MilpStatus.TIME_LIMIT_FEASIBLE, MilpStatus.TIME_LIMIT_NO_SOLUTION)
        return any(record.status in limits for record in self.epochs)


### EXPERIMENTS


class SeriesPoint(BaseModel):
    """One plot-ready value of an experiment series."""

    series: Literal["stochastic", "reroute"]
    label: str
    metric: str
    value: float
    status: MilpStatus = MilpStatus.OPTIMAL
    """TimeLimitFeasible when some solve behind the value stopped at the time limit."""
