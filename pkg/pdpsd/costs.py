from __future__ import annotations

from collections.abc import Iterable, Sequence
from decimal import ROUND_HALF_UP, Decimal

from .errors import InputError
from .logger import logger
from .types import DEPOT, CostModel, Instance


def arc_cost(instance: Instance, u: int, v: int) -> float:
    """Routing cost of driving from `u` to `v`: consumption x price x distance."""
    for location in (u, v):
        if location != DEPOT and instance.customer(location).demand_flag != 1:
            logger.warning(f"arc {u}->{v} touches customer {location}, which has no request")
    return instance.cost.routing_rate * instance.distance(u, v)


def route_distance(instance: Instance, walk: Sequence[int]) -> float:
    return sum(instance.distance(u, v) for u, v in zip(walk, walk[1:]))


def plan_cost(
    instance: Instance,
    used_trucks: Iterable[int],
    routed_arcs: Iterable[tuple[int, int]],
    outsourced: Iterable[int],
) -> float:
    """
    Single-scenario cost of a plan: initial cost of every used truck, plus
    the penalty for every outsourced customer, plus routing over the arcs.
    """
    initial = sum(instance.truck(t).initial_cost for t in used_trucks)
    demanding = set(instance.demanding)
    penalties = 0.0
    for customer in outsourced:
        if customer not in demanding:
            raise InputError(f"outsourced customer {customer} has no request")
        penalties += instance.cost.outsource_penalty
    routing = sum(arc_cost(instance, u, v) for u, v in routed_arcs)
    return initial + penalties + routing


def round_half_up(value: float, digits: int = 3) -> Decimal:
    # Clear binary noise first so 10.0275 is not read as 10.02749999...
    cleaned = Decimal(f"{value:.9f}")
    return cleaned.quantize(Decimal(1).scaleb(-digits), rounding=ROUND_HALF_UP)


def format_amount(value: float, digits: int = 3) -> str:
    rounded = round_half_up(value, digits)
    if rounded.is_zero():
        rounded = abs(rounded)
    return f"{rounded:.{digits}f}"


def format_route(walk: Sequence[int]) -> str:
    """Render a walk as "Depot-c2-c4-Depot"."""
    return "-".join("Depot" if stop == DEPOT else f"c{stop}" for stop in walk)


STANDARD_COST = CostModel(fuel_consumption=0.1, fuel_price=1.05, outsource_penalty=16.0)
"""Fuel 0.1 l per distance unit at 1.05 per litre, 16 per outsourced package."""
