"""
Reader for Solomon-format benchmark files (C101 and friends).

Only coordinates, demands and the vehicle capacity are used. Time windows
and service times are parsed so malformed rows are caught, then ignored.
"""

from __future__ import annotations

from collections.abc import Iterable
from pathlib import Path

from pydantic import BaseModel, ConfigDict

from .costs import STANDARD_COST
from .errors import ErrorCode, InputError, SolomonParseError
from .types import (
    CostModel,
    Customer,
    EuclideanDistance,
    Instance,
    Point,
    Scenario,
    ScenarioSet,
    Truck,
)

ROW_FIELDS = 7


class SolomonCustomer(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: int
    x: float
    y: float
    demand: float
    ready_time: float
    due_date: float
    service_time: float


class SolomonFile(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    vehicles: int
    capacity: float
    depot: SolomonCustomer
    customers: tuple[SolomonCustomer, ...]


def _numbers(fields: list[str], line: int) -> list[float]:
    try:
        return [float(field) for field in fields]
    except ValueError:
        raise SolomonParseError(f"non-numeric field in {' '.join(fields)!r}", line=line) from None


def parse_solomon(text: str) -> SolomonFile:
    name = ""
    section: str | None = None
    fleet: tuple[int, float] | None = None
    rows: list[SolomonCustomer] = []

    for number, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        upper = line.upper()
        if upper == "VEHICLE":
            section = "vehicle"
            continue
        if upper == "CUSTOMER":
            section = "customer"
            continue
        fields = line.split()
        numeric = fields[0].lstrip("-").replace(".", "", 1).isdigit()

        match section:
            case None:
                name = name or line
            case "vehicle":
                if not numeric:
                    continue
                if len(fields) != 2:
                    raise SolomonParseError(
                        f"vehicle row needs NUMBER and CAPACITY, got {len(fields)} fields",
                        line=number,
                    )
                vehicles, capacity = _numbers(fields, number)
                fleet = (int(vehicles), capacity)
            case "customer":
                if not numeric and rows:
                    raise SolomonParseError(f"malformed customer row {line!r}", line=number)
                if not numeric:
                    continue
                if len(fields) != ROW_FIELDS:
                    raise SolomonParseError(
                        f"customer row needs {ROW_FIELDS} fields, got {len(fields)}",
                        line=number,
                    )
                values = _numbers(fields, number)
                rows.append(
                    SolomonCustomer(
                        id=int(values[0]),
                        x=values[1],
                        y=values[2],
                        demand=values[3],
                        ready_time=values[4],
                        due_date=values[5],
                        service_time=values[6],
                    )
                )

    if fleet is None:
        raise SolomonParseError("no VEHICLE section")
    if not rows:
        raise SolomonParseError("no depot row")
    depot, *customers = rows
    return SolomonFile(
        name=name or "solomon",
        vehicles=fleet[0],
        capacity=fleet[1],
        depot=depot,
        customers=tuple(customers),
    )


def read_solomon(path: str | Path) -> SolomonFile:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise InputError(f"instance not found: {path}", code=ErrorCode.INPUT_NOT_FOUND) from None
    return parse_solomon(text)


def solomon_instance(
    data: SolomonFile,
    *,
    customers: int | None = None,
    capacity: float | None = None,
    cost: CostModel | None = None,
    trucks: int = 1,
    initial_cost: float = 0.0,
    scenarios: Iterable[Scenario] | None = None,
) -> Instance:
    """
    Build an instance from the first `customers` rows of a Solomon file.

    Without `scenarios`, every demand becomes a pickup of that weight in a
    single certain scenario "w1".
    """
    rows = data.customers if customers is None else data.customers[:customers]
    if customers is not None and len(rows) < customers:
        raise InputError(f"{data.name} has only {len(data.customers)} customers, asked for {customers}")
    if scenarios is None:
        scenarios = [Scenario(id="w1", probability=1.0, sizes={r.id: r.demand for r in rows})]
    fleet = capacity if capacity is not None else data.capacity
    return Instance(
        name=f"{data.name.lower()}-{len(rows)}",
        depot=Point(x=data.depot.x, y=data.depot.y),
        customers=tuple(Customer(id=r.id, location=Point(x=r.x, y=r.y)) for r in rows),
        trucks=tuple(
            Truck(id=t, capacity=fleet, initial_cost=initial_cost) for t in range(1, trucks + 1)
        ),
        cost=cost or STANDARD_COST,
        distances=EuclideanDistance(),
        scenarios=ScenarioSet(scenarios=tuple(scenarios)),
    )
