import pytest
from helpers.instances import line_instance, make_instance

from pdpsd.benchmarks import random_instance
from pdpsd.insertion import insertion_routes
from pdpsd.milp import solve_milp
from pdpsd.offline import offline_model, solve_model, solve_offline
from pdpsd.types import MilpStatus, SolverSettings
from pdpsd.validation import plan_violations

EXACT = SolverSettings(gap_tolerance=1e-9)


def test_pickup_is_placed_before_its_delivery():
    instance = line_instance({1: -10.0, 2: 10.0}, dependencies=[(2, 1)], capacity=10.0)
    assert insertion_routes(offline_model(instance)) == {1: [2, 1]}


def test_unprofitable_customer_stays_outsourced():
    instance = make_instance({1: (10.0, 0.0), 2: (100.0, 0.0)}, {"w1": {1: 5.0, 2: 5.0}})
    assert insertion_routes(offline_model(instance)) == {1: [1]}


def test_capacity_holds_in_every_scenario():
    instance = make_instance(
        {1: (10.0, 0.0), 2: (10.0, 10.0), 3: (0.0, 10.0)},
        {"w1": {1: 15.0, 2: 15.0, 3: 15.0}, "w2": {1: 10.0, 2: 10.0, 3: 10.0}},
        capacity=30.0,
    )
    routes = insertion_routes(offline_model(instance))
    assert len(routes[1]) == 2


def test_given_routes_are_kept():
    instance = line_instance({1: 5.0, 2: 5.0, 3: 5.0})
    assert insertion_routes(offline_model(instance), {1: [3, 1]}) == {1: [2, 3, 1]}


@pytest.mark.parametrize("seed", range(5))
def test_insertion_plan_is_a_feasible_start(seed: int):
    instance = random_instance(
        seed, customers=6, trucks=2, scenarios=2, dependencies=2, capacity=20.0
    )
    model = offline_model(instance)
    start = model.start_from_routes(insertion_routes(model))
    settings = SolverSettings(time_limit=10.0)
    solution = solve_milp(model.problem(), settings=settings, starts=[start])
    assert solution.has_solution
    plan = model.decode(solution.assignment)
    assert plan_violations(plan, instance) == []


def test_start_from_a_plan_matches_its_integer_variables():
    instance = line_instance({1: -10.0, 2: 10.0}, dependencies=[(2, 1)], capacity=10.0)
    model = offline_model(instance)
    solution = solve_milp(model.problem(), settings=EXACT)
    start = model.start_from_plan(model.decode(solution.assignment))
    assert start == pytest.approx({i: solution.assignment[i] for i in start})


def test_seeded_solve_is_never_worse_than_its_start():
    instance = random_instance(4, customers=7, trucks=2, scenarios=2, capacity=25.0)
    first = solve_offline(instance, SolverSettings(time_limit=20.0))
    again = solve_model(offline_model(instance), SolverSettings(time_limit=10.0), starts=[first])
    assert again.status in (MilpStatus.OPTIMAL, MilpStatus.TIME_LIMIT_FEASIBLE)
    assert again.expected_objective <= first.expected_objective + 1e-6


def test_short_time_limit_still_returns_a_plan():
    instance = random_instance(9, customers=8, scenarios=2, capacity=30.0)
    plan = solve_offline(instance, SolverSettings(time_limit=20.0))
    assert plan.status in (MilpStatus.OPTIMAL, MilpStatus.TIME_LIMIT_FEASIBLE)
    assert plan_violations(plan, instance) == []
