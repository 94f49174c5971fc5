from decimal import Decimal

import pytest
from helpers.instances import line_instance, matrix_instance

from pdpsd.costs import (
    STANDARD_COST,
    arc_cost,
    format_amount,
    format_route,
    plan_cost,
    round_half_up,
    route_distance,
)
from pdpsd.errors import InputError


def _two_stop_instance(distance: float):
    half = distance / 2
    matrix = [
        [0.0, half, 1.0, 1.0, 1.0, 1.0],
        [half, 0.0, 1.0, 1.0, 1.0, 1.0],
        [1.0, 1.0, 0.0, 1.0, 1.0, 1.0],
        [1.0, 1.0, 1.0, 0.0, 1.0, 1.0],
        [1.0, 1.0, 1.0, 1.0, 0.0, 1.0],
        [1.0, 1.0, 1.0, 1.0, 1.0, 0.0],
    ]
    return matrix_instance(matrix, {c: -5.0 for c in range(1, 6)}, cost=STANDARD_COST)


@pytest.mark.parametrize(
    "distance, outsourced, expected",
    [
        (95.5, 0, "10.028"),
        (98.0, 0, "10.290"),
        (63.6, 4, "70.678"),
        (159.2, 4, "80.715"),
    ],
)
def test_table_costs(distance: float, outsourced: int, expected: str):
    instance = _two_stop_instance(distance)
    cost = plan_cost(instance, [1], [(0, 1), (1, 0)], range(2, 2 + outsourced))
    assert abs(round_half_up(cost) - Decimal(expected)) <= Decimal("0.001")


def test_plan_cost_adds_initial_cost_of_used_trucks():
    instance = line_instance({1: 5.0}, initial_cost=7.5)
    routing = arc_cost(instance, 0, 1) + arc_cost(instance, 1, 0)
    assert plan_cost(instance, [1], [(0, 1), (1, 0)], []) == pytest.approx(7.5 + routing)
    assert plan_cost(instance, [], [], [1]) == pytest.approx(16.0)


def test_plan_cost_rejects_outsourcing_a_customer_without_request():
    instance = matrix_instance([[0, 1, 1], [1, 0, 1], [1, 1, 0]], {1: 5.0})
    with pytest.raises(InputError, match="no request"):
        plan_cost(instance, [1], [], [2])


def test_arc_cost_is_fuel_times_price_times_distance():
    instance = line_instance({1: 5.0, 2: 5.0})
    assert instance.distance(0, 2) == pytest.approx(20.0)
    assert arc_cost(instance, 0, 2) == pytest.approx(0.1 * 1.05 * 20.0)
    assert route_distance(instance, [0, 1, 2, 0]) == pytest.approx(40.0)


@pytest.mark.parametrize(
    "value, expected",
    [
        (10.0275, "10.028"),
        (10.29, "10.290"),
        (2.0005, "2.001"),
        (95.5, "95.500"),
        (-0.0001, "0.000"),
        (-1.2345, "-1.235"),
    ],
)
def test_format_amount_rounds_half_up(value: float, expected: str):
    assert format_amount(value) == expected


def test_format_route():
    assert format_route([0, 2, 4, 0]) == "Depot-c2-c4-Depot"
    assert format_route([10, 3, 0]) == "c10-c3-Depot"


def test_arc_to_a_customer_without_request_is_logged(caplog):
    instance = matrix_instance([[0, 1, 2], [1, 0, 1], [2, 1, 0]], {1: 5.0})
    assert arc_cost(instance, 1, 2) == pytest.approx(0.105)
    assert "touches customer 2, which has no request" in caplog.text
