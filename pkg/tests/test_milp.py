import math

import numpy as np
import pytest
from helpers.random_milp import random_milp

from pdpsd.errors import CapabilityError, ProblemError
from pdpsd.milp import MilpBuilder, enumerate_milp, solve_lp, solve_milp, to_lp_text
from pdpsd.types import LinearRow, MilpProblem, MilpStatus, SolverSettings

EXACT = SolverSettings(gap_tolerance=1e-9)


def _knapsack() -> MilpProblem:
    builder = MilpBuilder("knapsack")
    values, weights = [10, 13, 7, 8], [5, 7, 4, 3]
    items = [
        builder.add_variable(f"take_{n}", 0, 1, integer=True, cost=-v)
        for n, v in enumerate(values)
    ]
    builder.add_row(dict(zip(items, map(float, weights))), "<=", 10, "weight")
    return builder.build()


def test_knapsack_optimum():
    solution = solve_milp(_knapsack(), settings=EXACT)
    assert solution.status == MilpStatus.OPTIMAL
    assert solution.objective == pytest.approx(-21.0)
    assert solution.gap == pytest.approx(0.0)
    assert solution.node_count >= 1
    assert len(solution.bound_log) <= solution.node_count


def test_enumeration_agrees_on_knapsack():
    assert enumerate_milp(_knapsack()).objective == pytest.approx(-21.0)


def test_integer_infeasible_but_lp_feasible():
    builder = MilpBuilder()
    x = builder.add_variable("x", 0, 1, integer=True)
    y = builder.add_variable("y", 0, 1, integer=True)
    builder.add_row({x: 2, y: 2}, "=", 1)
    assert solve_milp(builder.build()).status == MilpStatus.INFEASIBLE
    assert enumerate_milp(builder.build()).status == MilpStatus.INFEASIBLE


def test_branching_is_deterministic():
    problem = random_milp(7, integers=8, rows=6, span=2)
    first = solve_milp(problem, settings=EXACT)
    second = solve_milp(problem, settings=EXACT)
    assert first.assignment == second.assignment
    assert first.bound_log == second.bound_log
    assert first.node_count == second.node_count


@pytest.mark.parametrize("seed", range(200))
def test_pure_integer_matches_enumeration(seed: int):
    integers = 4 + seed % 9
    problem = random_milp(seed, integers=integers, rows=3 + seed % 6, span=1)
    expected = enumerate_milp(problem)
    solution = solve_milp(problem, settings=EXACT)
    assert solution.status == expected.status
    if expected.status == MilpStatus.OPTIMAL:
        assert solution.objective == pytest.approx(expected.objective, abs=1e-6)


@pytest.mark.parametrize("seed", range(40))
def test_mixed_integer_matches_enumeration(seed: int):
    problem = random_milp(1000 + seed, integers=3, continuous=2, rows=4, span=1)
    expected = enumerate_milp(problem)
    solution = solve_milp(problem, settings=EXACT)
    assert solution.status == expected.status
    if expected.status == MilpStatus.OPTIMAL:
        assert solution.objective == pytest.approx(expected.objective, abs=1e-6)


def test_time_limit_without_incumbent():
    problem = random_milp(3, integers=12, rows=8, span=2)
    solution = solve_milp(problem, time_limit=0.0)
    assert solution.status in (MilpStatus.TIME_LIMIT_NO_SOLUTION, MilpStatus.TIME_LIMIT_FEASIBLE)
    assert solution.node_count == 0


def test_enumeration_refuses_large_problems():
    builder = MilpBuilder()
    for j in range(25):
        builder.add_variable(f"x{j}", 0, 1, integer=True)
    with pytest.raises(CapabilityError):
        enumerate_milp(builder.build())


@pytest.mark.parametrize(
    "problem, message",
    [
        (
            MilpProblem(objective=[1.0], lower=[2.0], upper=[1.0], integer=[False]),
            "bounds",
        ),
        (
            MilpProblem(objective=[1.0], lower=[0.0], upper=[math.inf], integer=[True]),
            "finite bounds",
        ),
        (
            MilpProblem(
                objective=[1.0],
                lower=[0.0],
                upper=[1.0],
                integer=[False],
                rows=[LinearRow(indices=[3], coefficients=[1.0], relation="<=", rhs=1.0)],
            ),
            "out of range",
        ),
        (
            MilpProblem(objective=[1.0, 2.0], lower=[0.0], upper=[1.0, 1.0], integer=[False, False]),
            "lower has 1 entries",
        ),
    ],
)
def test_malformed_problems(problem: MilpProblem, message: str):
    with pytest.raises(ProblemError, match=message):
        solve_milp(problem)


def test_lp_text_layout():
    builder = MilpBuilder("tiny lp")
    x = builder.add_variable("x", 0, 1, integer=True, cost=3)
    y = builder.add_variable("y[1]", -math.inf, math.inf, cost=-1)
    z = builder.add_variable("z", 2, 2)
    builder.add_row({x: 1, y: -2.5}, "<=", 4, "cap")
    builder.add_row({z: 1}, ">=", 0)
    builder.offset = 1.5
    assert to_lp_text(builder.build()) == (
        "\\ Problem: tiny lp\n"
        "\\ Objective offset: 1.5\n"
        "Minimize\n"
        " obj: + 3 x - 1 y_1_\n"
        "Subject To\n"
        " cap: + 1 x - 2.5 y_1_ <= 4\n"
        " r1: + 1 z >= 0\n"
        "Bounds\n"
        " 0 <= x <= 1\n"
        " y_1_ free\n"
        " z = 2\n"
        "Generals\n"
        " x\n"
        "End\n"
    )


def test_assignment_problem_is_integral_at_the_root():
    costs = [[4, 1, 3], [2, 0, 5], [3, 2, 2]]
    builder = MilpBuilder("assignment")
    x = {
        (i, j): builder.add_variable(f"x_{i}_{j}", 0, 1, integer=True, cost=costs[i][j])
        for i in range(3)
        for j in range(3)
    }
    for i in range(3):
        builder.add_row({x[i, j]: 1.0 for j in range(3)}, "=", 1)
        builder.add_row({x[j, i]: 1.0 for j in range(3)}, "=", 1)
    solution = solve_milp(builder.build(), settings=EXACT)
    assert solution.status == MilpStatus.OPTIMAL
    assert solution.objective == pytest.approx(5.0)
    assert solution.node_count == 1


def test_contradictory_rows_on_an_integer():
    builder = MilpBuilder()
    x = builder.add_variable("x", 0, 5, integer=True)
    builder.add_row({x: 1}, ">=", 1)
    builder.add_row({x: 1}, "<=", 0)
    assert solve_milp(builder.build()).status == MilpStatus.INFEASIBLE
    assert enumerate_milp(builder.build()).status == MilpStatus.INFEASIBLE


def test_enumeration_without_integers_is_the_lp():
    problem = random_milp(11, integers=0, continuous=3, rows=4, span=1)
    expected = solve_lp(problem)
    solution = enumerate_milp(problem)
    assert solution.status == expected.status
    if expected.status == MilpStatus.OPTIMAL:
        assert solution.objective == pytest.approx(expected.objective, abs=1e-9)


def test_a_start_does_not_change_the_optimum():
    solution = solve_milp(_knapsack(), settings=EXACT, starts=[{0: 1.0, 1: 0.0, 2: 0.0, 3: 1.0}])
    assert solution.status == MilpStatus.OPTIMAL
    assert solution.objective == pytest.approx(-21.0)


@pytest.mark.parametrize(
    "start",
    [
        {0: 1.0, 1: 1.0, 2: 1.0, 3: 1.0},
        {0: 3.0},
    ],
    ids=["over-capacity", "out-of-bounds"],
)
def test_unusable_starts_are_ignored(start: dict[int, float]):
    solution = solve_milp(_knapsack(), settings=EXACT, starts=[start])
    assert solution.status == MilpStatus.OPTIMAL
    assert solution.objective == pytest.approx(-21.0)


def test_starts_cannot_make_an_infeasible_problem_feasible():
    builder = MilpBuilder()
    x = builder.add_variable("x", 0, 1, integer=True)
    y = builder.add_variable("y", 0, 1, integer=True)
    builder.add_row({x: 2, y: 2}, "=", 1)
    solution = solve_milp(builder.build(), starts=[{x: 1.0, y: 0.0}, {x: 0.0, y: 0.0}])
    assert solution.status == MilpStatus.INFEASIBLE


@pytest.mark.parametrize("seed", range(30))
def test_bound_log_never_decreases(seed: int):
    problem = random_milp(500 + seed, integers=8, continuous=2, rows=6, span=2)
    solution = solve_milp(problem, settings=EXACT)
    log = solution.bound_log
    assert all(later >= earlier - 1e-9 for earlier, later in zip(log, log[1:]))
    if solution.status == MilpStatus.OPTIMAL:
        assert max(log) <= solution.objective + 1e-6


@pytest.mark.parametrize("seed", range(30))
def test_assignment_is_feasible_and_integral(seed: int):
    problem = random_milp(700 + seed, integers=6, continuous=3, rows=5, span=2)
    solution = solve_milp(problem, settings=EXACT)
    if not solution.has_solution:
        assert enumerate_milp(problem).status == solution.status
        return
    x = np.asarray(solution.assignment)
    assert np.all(x >= np.asarray(problem.lower) - 1e-6)
    assert np.all(x <= np.asarray(problem.upper) + 1e-6)
    integers = np.asarray(problem.integer)
    assert np.all(np.abs(x[integers] - np.round(x[integers])) <= 1e-6)
    for row in problem.rows:
        lhs = float(np.dot(row.coefficients, x[row.indices]))
        match row.relation:
            case "<=":
                assert lhs <= row.rhs + 1e-6
            case ">=":
                assert lhs >= row.rhs - 1e-6
            case "=":
                assert lhs == pytest.approx(row.rhs, abs=1e-6)
    assert solution.objective == pytest.approx(float(np.dot(problem.objective, x)), abs=1e-6)


@pytest.mark.parametrize("seed", range(20))
@pytest.mark.parametrize("factor", [0.5, 3.0])
def test_scaling_the_objective_scales_the_optimum(seed: int, factor: float):
    problem = random_milp(900 + seed, integers=6, continuous=2, rows=5, span=2)
    scaled = problem.model_copy(update={"objective": [factor * c for c in problem.objective]})
    expected = solve_milp(problem, settings=EXACT)
    solution = solve_milp(scaled, settings=EXACT)
    assert solution.status == expected.status
    if expected.status == MilpStatus.OPTIMAL:
        assert solution.objective == pytest.approx(factor * expected.objective, abs=1e-6)
