import pytest
from helpers.instances import make_instance

from pdpsd.benchmarks import reroute_effectiveness_instance, stochastic_comparison_instance
from pdpsd.experiments import reroute_effectiveness, stochastic_comparison
from pdpsd.types import KthFromRouteEnd, SeriesPoint, SolverSettings

EXACT = SolverSettings(gap_tolerance=1e-9)
BOUNDED = SolverSettings(time_limit=60.0)


def _values(points: list[SeriesPoint]) -> dict[tuple[str, str], float]:
    return {(p.label, p.metric): p.value for p in points}


def test_stochastic_plan_is_never_worse_than_planning_for_the_largest_sizes():
    instance = make_instance(
        {1: (10.0, 0.0), 2: (10.0, 10.0), 3: (0.0, 10.0)},
        {"w1": {1: 15.0, 2: 15.0, 3: 15.0}, "w2": {1: 10.0, 2: 10.0, 3: 10.0}},
        capacity=30.0,
    )
    points = stochastic_comparison(instance, EXACT)
    assert {p.series for p in points} == {"stochastic"}
    values = _values(points)
    assert {key for key in values if key[0] in ("stochastic", "worst_case")} == {
        ("stochastic", "expected_cost"),
        ("stochastic", "cost_w1"),
        ("stochastic", "cost_w2"),
        ("worst_case", "expected_cost"),
        ("worst_case", "cost_w1"),
        ("worst_case", "cost_w2"),
    }

    stochastic = values["stochastic", "expected_cost"]
    worst = values["worst_case", "expected_cost"]
    wait_and_see = values["wait_and_see", "expected_cost"]
    assert stochastic <= worst + 1e-6
    assert wait_and_see <= stochastic + 1e-6
    assert values["value_of_stochastic_solution", "expected_cost"] == pytest.approx(
        worst - stochastic
    )
    assert values["known_w1", "cost"] >= values["known_w2", "cost"] - 1e-6
    assert wait_and_see == pytest.approx(
        0.5 * values["known_w1", "cost"] + 0.5 * values["known_w2", "cost"]
    )
    assert stochastic == pytest.approx(
        0.5 * values["stochastic", "cost_w1"] + 0.5 * values["stochastic", "cost_w2"]
    )


def test_accepting_more_epochs_serves_more_requests():
    instance = make_instance(
        {1: (10.0, 0.0), 2: (20.0, 0.0), 3: (15.0, 5.0), 4: (5.0, 5.0)},
        {"w1": {1: 5.0, 2: 5.0, 3: 5.0, 4: 5.0}},
        epochs={3: 1, 4: 2},
    )
    points = reroute_effectiveness(instance, trigger=KthFromRouteEnd(k=1), settings=EXACT)
    assert {p.series for p in points} == {"reroute"}
    values = _values(points)
    assert [values[str(e), "served"] for e in range(3)] == [2.0, 3.0, 4.0]
    assert [values[str(e), "outsourced"] for e in range(3)] == [2.0, 1.0, 0.0]
    for e in range(3):
        assert values[str(e), "total_cost"] == pytest.approx(
            values[str(e), "delivery_cost"] + 16.0 * values[str(e), "outsourced"]
        )
    assert values["2", "total_cost"] < values["0", "total_cost"]


@pytest.mark.slow
def test_stochastic_comparison_on_c101():
    values = _values(stochastic_comparison(stochastic_comparison_instance(), BOUNDED))
    assert values["stochastic", "expected_cost"] <= values["worst_case", "expected_cost"] + 1e-6
    assert values["wait_and_see", "expected_cost"] <= values["stochastic", "expected_cost"] + 1e-6
    assert values["known_w1", "cost"] >= values["known_w2", "cost"] - 1e-6


@pytest.mark.slow
def test_reroute_effectiveness_on_c101():
    instance = reroute_effectiveness_instance()
    values = _values(
        reroute_effectiveness(instance, trigger=KthFromRouteEnd(k=3), settings=BOUNDED)
    )
    served = [values[str(e), "served"] for e in range(4)]
    total = [values[str(e), "total_cost"] for e in range(4)]
    assert served == sorted(served)
    assert all(later <= earlier + 1e-6 for earlier, later in zip(total, total[1:]))
    assert total[-1] <= total[0] + 16.0 * 15
