"""Ready-made instances for the worked example, the experiments and the tests."""

from __future__ import annotations

from importlib.resources import files

import numpy as np

from .costs import STANDARD_COST
from .solomon import SolomonFile, parse_solomon, solomon_instance
from .types import (
    Customer,
    DependencyRelation,
    EuclideanDistance,
    Instance,
    Point,
    Scenario,
    ScenarioSet,
    Truck,
)

TRACE_REALIZED = "w2"
"""Scenario that happens in the worked example."""


def c101() -> SolomonFile:
    """Solomon C101: the depot at (40, 50) and 100 customers."""
    text = files("pdpsd").joinpath("data/c101.txt").read_text(encoding="utf-8")
    return parse_solomon(text)


def c101_head(customers: int = 25) -> SolomonFile:
    """The depot and the first `customers` customers of C101."""
    data = c101()
    return data.model_copy(update={"customers": data.customers[:customers]})


def published_trace(data: SolomonFile | None = None) -> Instance:
    """
    The worked example: ten morning deliveries of 5 kg, five requests at
    epoch 1 whose sizes depend on the scenario (c11 -> c12 and c13 -> c14
    are linked), and five 15 kg pickups at epoch 2. One 50 kg truck.
    """
    base = solomon_instance(data or c101_head(), customers=20, capacity=50.0)
    uncertain = {
        "w1": {11: 5.0, 12: -5.0, 13: 5.0, 14: -5.0, 15: 5.0},
        "w2": {11: 10.0, 12: -10.0, 13: 10.0, 14: -10.0, 15: 10.0},
    }
    scenarios = []
    for scenario_id, late in uncertain.items():
        sizes = {c: -5.0 for c in range(1, 11)} | late | {c: 15.0 for c in range(16, 21)}
        scenarios.append(Scenario(id=scenario_id, probability=0.5, sizes=sizes))
    customers = tuple(
        c.model_copy(update={"request_epoch": 0 if c.id <= 10 else 1 if c.id <= 15 else 2})
        for c in base.customers
    )
    return base.replace(
        name="published-trace",
        customers=customers,
        dependencies=DependencyRelation(pairs=((11, 12), (13, 14))),
        scenarios=ScenarioSet(scenarios=tuple(scenarios)),
    )


def stochastic_comparison_instance(data: SolomonFile | None = None) -> Instance:
    """
    Ten customers, 15 kg under w1 and 10 kg under w2 with equal odds. c2, c6
    and c10 are deliveries fed by the pickups at c1, c5 and c8.
    """
    deliveries = {2, 6, 10}
    scenarios = tuple(
        Scenario(
            id=scenario_id,
            probability=0.5,
            sizes={c: -weight if c in deliveries else weight for c in range(1, 11)},
        )
        for scenario_id, weight in (("w1", 15.0), ("w2", 10.0))
    )
    instance = solomon_instance(
        data or c101_head(), customers=10, capacity=50.0, scenarios=scenarios
    )
    return instance.replace(
        name="stochastic-comparison",
        dependencies=DependencyRelation(pairs=((1, 2), (5, 6), (8, 10))),
    )


def reroute_effectiveness_instance(data: SolomonFile | None = None) -> Instance:
    """
    25 pickups of 5 kg: ten known in the morning and five more at each of
    epochs 1 to 3. The truck can carry all of them.
    """
    base = solomon_instance(
        data or c101_head(),
        customers=25,
        capacity=1000.0,
        scenarios=[Scenario(id="w1", probability=1.0, sizes={c: 5.0 for c in range(1, 26)})],
    )
    customers = tuple(
        c.model_copy(update={"request_epoch": max(0, (c.id - 6) // 5)}) for c in base.customers
    )
    return base.replace(name="reroute-effectiveness", customers=customers)


def random_instance(
    seed: int,
    *,
    customers: int = 5,
    trucks: int = 1,
    scenarios: int = 1,
    capacity: float = 30.0,
    delivery_share: float = 0.3,
    dependencies: int = 0,
    late: int = 0,
    epochs: int = 1,
    data: SolomonFile | None = None,
) -> Instance:
    """
    Seeded synthetic instance. Coordinates come from `data` when given,
    otherwise from a uniform 100 x 100 grid. Sizes are multiples of 5 kg.
    A dependent delivery carries the package picked up at its predecessor.
    The last `late` customers arrive spread over epochs 1..`epochs`.
    """
    rng = np.random.default_rng(seed)
    ids = list(range(1, customers + 1))
    if data is not None:
        rows = data.customers[:customers]
        depot = Point(x=data.depot.x, y=data.depot.y)
        locations = {r.id: Point(x=r.x, y=r.y) for r in rows}
        ids = [r.id for r in rows]
    else:
        xy = rng.integers(0, 101, size=(customers + 1, 2))
        depot = Point(x=float(xy[0, 0]), y=float(xy[0, 1]))
        locations = {c: Point(x=float(xy[c, 0]), y=float(xy[c, 1])) for c in ids}

    delivery = dict(zip(ids, rng.random(len(ids)) < delivery_share, strict=True))
    pairs: list[tuple[int, int]] = []
    pickups = [c for c in ids if not delivery[c]]
    drops = [c for c in ids if delivery[c]]
    for _ in range(dependencies):
        if not pickups or not drops:
            break
        i = int(rng.choice(pickups))
        j = int(rng.choice(drops))
        if i < j and all(j != taken for _, taken in pairs):
            pairs.append((i, j))

    blocks = []
    for s in range(scenarios):
        weights = rng.integers(1, 4, size=len(ids)) * 5.0
        sizes = {
            c: -float(w) if delivery[c] else float(w) for c, w in zip(ids, weights, strict=True)
        }
        for i, j in pairs:
            sizes[j] = -sizes[i]
        blocks.append(Scenario(id=f"w{s + 1}", probability=1.0 / scenarios, sizes=sizes))

    arrival = {c: 0 for c in ids}
    for n, c in enumerate(ids[len(ids) - late :] if late else []):
        arrival[c] = 1 + n * epochs // late
    return Instance(
        name=f"random-{seed}",
        depot=depot,
        customers=tuple(
            Customer(id=c, location=locations[c], request_epoch=arrival[c]) for c in ids
        ),
        trucks=tuple(Truck(id=t, capacity=capacity) for t in range(1, trucks + 1)),
        dependencies=DependencyRelation(pairs=tuple(pairs)),
        cost=STANDARD_COST,
        distances=EuclideanDistance(),
        scenarios=ScenarioSet(scenarios=tuple(blocks)),
    )
