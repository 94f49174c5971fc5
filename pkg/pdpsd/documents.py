"""
JSON documents on disk and the CSV tables written next to them.

Instance and events documents use camelCase keys. Result documents mirror
the domain models and carry a `kind` discriminator.
"""

from __future__ import annotations

import csv
import io
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Annotated, Literal

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    TypeAdapter,
    ValidationError,
    field_validator,
)
from pydantic.alias_generators import to_camel

from .costs import format_amount, format_route
from .errors import DocumentError, ErrorCode, InputError
from .types import (
    DEPOT,
    CostModel,
    Customer,
    DependencyRelation,
    EuclideanDistance,
    Instance,
    Location,
    MatrixDistance,
    PlanSolution,
    Point,
    ReplanTrigger,
    RequestEvent,
    Scenario,
    ScenarioSet,
    SeriesPoint,
    SimulationResult,
    Truck,
)
from .validation import validate_instance

TABLE_HEADER = (
    "iteration",
    "startingWeight",
    "scenario",
    "routingPlan",
    "outsourcing",
    "objectiveCost",
    "distance",
)
SERIES_HEADER = ("series", "label", "metric", "value", "status")


class DocumentModel(BaseModel):
    model_config = ConfigDict(
        alias_generator=to_camel,
        populate_by_name=True,
        serialize_by_alias=True,
        extra="forbid",
    )


### INSTANCE DOCUMENTS


class PointDocument(DocumentModel):
    x: float
    y: float


class CustomerDocument(DocumentModel):
    id: int
    x: float | None = None
    y: float | None = None
    index: int | None = None
    """Distance-matrix row. Defaults to the customer id."""
    k: int = 1
    request_epoch: int = 0
    sizes: dict[str, float] = Field(default_factory=dict)
    """Scenario id -> signed weight: pickup > 0, delivery < 0."""

    @property
    def location(self) -> Location:
        if self.x is not None and self.y is not None:
            return Point(x=self.x, y=self.y)
        return self.id if self.index is None else self.index

    def to_customer(self) -> Customer:
        return Customer(
            id=self.id,
            location=self.location,
            demand_flag=self.k,
            request_epoch=self.request_epoch,
        )


class TruckDocument(DocumentModel):
    id: int
    capacity: float
    initial_cost: float = 0.0


class CostDocument(DocumentModel):
    fuel_consumption: float
    fuel_price: float
    outsource_penalty: float


class ScenarioDocument(DocumentModel):
    id: str
    probability: float

    @field_validator("probability")
    @classmethod
    def _probability_range(cls, value: float) -> float:
        if not 0.0 <= value <= 1.0:
            raise ValueError("probability ∉ [0,1]")
        return value


class InstanceDocument(DocumentModel):
    name: str = "instance"
    depot: PointDocument | None = None
    distance_matrix: list[list[float]] | None = None
    customers: list[CustomerDocument]
    trucks: list[TruckDocument]
    dependencies: list[tuple[int, int]] = Field(default_factory=list)
    cost: CostDocument
    scenarios: list[ScenarioDocument]

    def cross_reference_issues(self) -> list[tuple[str, str]]:
        issues: list[tuple[str, str]] = []
        if (self.depot is None) == (self.distance_matrix is None):
            issues.append(("", "exactly one of depot / distanceMatrix"))
        scenario_ids = {s.id for s in self.scenarios}
        customer_ids = {c.id for c in self.customers}

        if self.distance_matrix is not None:
            size = len(self.distance_matrix)
            for r, row in enumerate(self.distance_matrix):
                if len(row) != size:
                    issues.append((f"distanceMatrix[{r}]", f"row length {size}"))

        for n, customer in enumerate(self.customers):
            path = f"customers[{n}]"
            if self.depot is not None and (customer.x is None or customer.y is None):
                issues.append((path, "x and y required with depot coordinates"))
            if self.distance_matrix is not None:
                row = customer.id if customer.index is None else customer.index
                if not 0 < row < len(self.distance_matrix):
                    issues.append((f"{path}.index", "row inside distanceMatrix"))
            for key in customer.sizes:
                if key not in scenario_ids:
                    issues.append((f"{path}.sizes.{key}", "unknown scenario"))
            if customer.k == 1:
                missing = sorted(scenario_ids - customer.sizes.keys())
                if missing:
                    issues.append((f"{path}.sizes", f"size for scenario {', '.join(missing)}"))

        for n, (i, j) in enumerate(self.dependencies):
            for customer in (i, j):
                if customer not in customer_ids:
                    issues.append((f"dependencies[{n}]", f"unknown customer {customer}"))
        return issues

    def to_instance(self) -> Instance:
        scenarios = tuple(
            Scenario(
                id=s.id,
                probability=s.probability,
                sizes={c.id: c.sizes[s.id] for c in self.customers if s.id in c.sizes},
            )
            for s in self.scenarios
        )
        if self.depot is not None:
            depot: Location = Point(x=self.depot.x, y=self.depot.y)
            distances: EuclideanDistance | MatrixDistance = EuclideanDistance()
        else:
            depot = DEPOT
            matrix = self.distance_matrix or []
            distances = MatrixDistance(matrix=tuple(tuple(row) for row in matrix))
        return Instance(
            name=self.name,
            depot=depot,
            customers=tuple(c.to_customer() for c in self.customers),
            trucks=tuple(
                Truck(id=t.id, capacity=t.capacity, initial_cost=t.initial_cost)
                for t in self.trucks
            ),
            dependencies=DependencyRelation(pairs=tuple(self.dependencies)),
            cost=CostModel(
                fuel_consumption=self.cost.fuel_consumption,
                fuel_price=self.cost.fuel_price,
                outsource_penalty=self.cost.outsource_penalty,
            ),
            distances=distances,
            scenarios=ScenarioSet(scenarios=scenarios),
        )

    @classmethod
    def from_instance(cls, instance: Instance) -> InstanceDocument:
        scenarios = instance.scenarios.scenarios
        customers = [
            _customer_document(c, {s.id: s.sizes[c.id] for s in scenarios if c.id in s.sizes})
            for c in instance.customers
        ]
        depot = instance.depot
        matrix = instance.distances
        return cls(
            name=instance.name,
            depot=PointDocument(x=depot.x, y=depot.y) if isinstance(depot, Point) else None,
            distance_matrix=(
                [list(row) for row in matrix.matrix]
                if isinstance(matrix, MatrixDistance)
                else None
            ),
            customers=customers,
            trucks=[
                TruckDocument(id=t.id, capacity=t.capacity, initial_cost=t.initial_cost)
                for t in instance.trucks
            ],
            dependencies=list(instance.dependencies.pairs),
            cost=CostDocument(
                fuel_consumption=instance.cost.fuel_consumption,
                fuel_price=instance.cost.fuel_price,
                outsource_penalty=instance.cost.outsource_penalty,
            ),
            scenarios=[ScenarioDocument(id=s.id, probability=s.probability) for s in scenarios],
        )


def _customer_document(customer: Customer, sizes: dict[str, float]) -> CustomerDocument:
    document = CustomerDocument(
        id=customer.id,
        k=customer.demand_flag,
        request_epoch=customer.request_epoch,
        sizes=sizes,
    )
    match customer.location:
        case Point(x=x, y=y):
            return document.model_copy(update={"x": x, "y": y})
        case int(index) if index != customer.id:
            return document.model_copy(update={"index": index})
        case _:
            return document


class EventDocument(DocumentModel):
    epoch: int
    customers: list[CustomerDocument]
    dependencies: list[tuple[int, int]] = Field(default_factory=list)

    def to_event(self) -> RequestEvent:
        sizes: dict[str, dict[int, float]] = {}
        for customer in self.customers:
            for scenario_id, size in customer.sizes.items():
                sizes.setdefault(scenario_id, {})[customer.id] = size
        return RequestEvent(
            epoch=self.epoch,
            customers=[c.to_customer() for c in self.customers],
            sizes=sizes,
            dependencies=list(self.dependencies),
        )


class EventsDocument(DocumentModel):
    events: list[EventDocument] = Field(default_factory=list)


### RESULT DOCUMENTS


class PlanDocument(BaseModel):
    kind: Literal["plan"] = "plan"
    instance: str
    plan: PlanSolution


class SimulationDocument(BaseModel):
    kind: Literal["simulation"] = "simulation"
    instance: str
    trigger: ReplanTrigger
    result: SimulationResult


class ExperimentDocument(BaseModel):
    kind: Literal["experiment"] = "experiment"
    instance: str
    points: list[SeriesPoint]


ResultDocument = Annotated[
    PlanDocument | SimulationDocument | ExperimentDocument, Field(discriminator="kind")
]


### PARSING


def _json_path(location: Sequence[int | str]) -> str:
    path = ""
    for part in location:
        if isinstance(part, int):
            path += f"[{part}]"
        else:
            path += f".{part}" if path else part
    return path


def document_error(error: ValidationError) -> DocumentError:
    issues = []
    for detail in error.errors():
        context = detail.get("ctx") or {}
        if detail["type"] == "value_error" and "error" in context:
            rule = str(context["error"])
        else:
            rule = detail["msg"]
        issues.append((_json_path(detail["loc"]), rule))
    return DocumentError(issues)


def _read(path: str | Path, kind: str) -> str:
    path = Path(path)
    try:
        return path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise InputError(f"{kind} not found: {path}", code=ErrorCode.INPUT_NOT_FOUND) from None


def load_instance(text: str | bytes, *, check: bool = True) -> Instance:
    try:
        document = InstanceDocument.model_validate_json(text)
    except ValidationError as error:
        raise document_error(error) from None
    issues = document.cross_reference_issues()
    if issues:
        raise DocumentError(issues)
    instance = document.to_instance()
    if check:
        violations = validate_instance(instance)
        if violations:
            raise DocumentError([(v.field, v.rule) for v in violations])
    return instance


def read_instance(path: str | Path, *, check: bool = True) -> Instance:
    return load_instance(_read(path, "instance"), check=check)


def dump_instance(instance: Instance) -> str:
    document = InstanceDocument.from_instance(instance)
    return document.model_dump_json(indent=2, exclude_none=True) + "\n"


def load_events(text: str | bytes) -> list[RequestEvent]:
    try:
        document = EventsDocument.model_validate_json(text)
    except ValidationError as error:
        raise document_error(error) from None
    return [event.to_event() for event in document.events]


def read_events(path: str | Path) -> list[RequestEvent]:
    return load_events(_read(path, "events file"))


def load_result(text: str | bytes) -> PlanDocument | SimulationDocument | ExperimentDocument:
    try:
        return TypeAdapter[ResultDocument](ResultDocument).validate_json(text)
    except ValidationError as error:
        raise document_error(error) from None


def read_result(path: str | Path) -> PlanDocument | SimulationDocument | ExperimentDocument:
    return load_result(_read(path, "result"))


### WRITING


def result_json(document: PlanDocument | SimulationDocument | ExperimentDocument) -> str:
    return document.model_dump_json(indent=2, exclude_none=True) + "\n"


def _per_truck(values: Mapping[int, str]) -> str:
    if len(values) == 1:
        return next(iter(values.values()))
    return " | ".join(f"T{truck}: {value}" for truck, value in sorted(values.items()))


def _customers(customers: Sequence[int]) -> str:
    return " ".join(f"c{c}" for c in customers)


def _weights(weights: Mapping[int, float]) -> str:
    return _per_truck({t: format_amount(w) for t, w in weights.items()})


def _table(rows: Sequence[Sequence[str]], header: Sequence[str]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def plan_rows(plan: PlanSolution) -> list[list[str]]:
    """One row per scenario block, costed as if that block happens."""
    return [
        [
            "1",
            _weights({r.truck: r.start_load for r in block.routes}),
            " ".join(block.merged),
            _per_truck({r.truck: format_route(r.walk) for r in block.routes}),
            _customers(plan.outsourced),
            format_amount(block.cost),
            format_amount(block.distance),
        ]
        for block in plan.scenarios
    ]


def simulation_rows(result: SimulationResult) -> list[list[str]]:
    """One row per epoch and a final "actual" row for the driven routes."""
    rows = [
        [
            str(record.epoch + 1),
            _weights(record.starting_weights),
            " ".join(record.scenarios),
            _per_truck({r.truck: format_route(r.walk) for r in record.routes}),
            _customers(record.outsourced),
            format_amount(record.plan_cost),
            format_amount(record.distance),
        ]
        for record in result.epochs
    ]
    rows.append(
        [
            "actual",
            _weights(result.start_loads) if result.start_loads else format_amount(0.0),
            result.realized,
            _per_truck({r.truck: format_route(r.walk) for r in result.actual_routes}),
            _customers(result.outsourced),
            format_amount(result.total_cost),
            format_amount(result.total_distance),
        ]
    )
    return rows


def result_csv(document: PlanDocument | SimulationDocument | ExperimentDocument) -> str:
    match document:
        case PlanDocument():
            return _table(plan_rows(document.plan), TABLE_HEADER)
        case SimulationDocument():
            return _table(simulation_rows(document.result), TABLE_HEADER)
        case ExperimentDocument():
            rows = [
                [p.series, p.label, p.metric, format_amount(p.value), p.status]
                for p in document.points
            ]
            return _table(rows, SERIES_HEADER)


def save_result(
    document: PlanDocument | SimulationDocument | ExperimentDocument,
    path: str | Path | None = None,
    format: Literal["json", "csv"] = "json",
) -> str:
    """Render a result document, writing it to `path` when one is given."""
    text = result_json(document) if format == "json" else result_csv(document)
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def companion_path(path: str | Path, format: Literal["json", "csv"]) -> Path:
    """Where the other rendering of a result saved at `path` in `format` goes."""
    path = Path(path)
    other = ".csv" if format == "json" else ".json"
    if path.suffix.lower() == other:
        return path.with_name(path.name + other)
    return path.with_suffix(other)
