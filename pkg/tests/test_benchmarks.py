from collections import Counter

import pytest

from pdpsd.benchmarks import (
    published_trace,
    random_instance,
    reroute_effectiveness_instance,
    stochastic_comparison_instance,
)
from pdpsd.validation import validate_instance


def test_published_trace():
    trace = published_trace()
    assert validate_instance(trace) == []
    assert trace.demanding == list(range(1, 21))
    assert [t.capacity for t in trace.trucks] == [50.0]
    assert trace.dependencies.pairs == ((11, 12), (13, 14))
    assert Counter(c.request_epoch for c in trace.customers) == {0: 10, 1: 5, 2: 5}
    assert trace.size(3, "w1") == trace.size(3, "w2") == -5.0
    assert (trace.size(12, "w1"), trace.size(12, "w2")) == (-5.0, -10.0)
    assert trace.size(18, "w2") == 15.0
    assert not trace.is_depot_loaded(12, "w2")
    assert trace.is_depot_loaded(4, "w2")


def test_experiment_instances():
    stochastic = stochastic_comparison_instance()
    assert validate_instance(stochastic) == []
    assert (stochastic.size(1, "w1"), stochastic.size(2, "w1"), stochastic.size(2, "w2")) == (
        15.0,
        -15.0,
        -10.0,
    )
    assert stochastic.dependencies.pairs == ((1, 2), (5, 6), (8, 10))

    reroute = reroute_effectiveness_instance()
    assert validate_instance(reroute) == []
    assert Counter(c.request_epoch for c in reroute.customers) == {0: 10, 1: 5, 2: 5, 3: 5}
    assert reroute.customer(16).request_epoch == 2


@pytest.mark.parametrize("seed", range(10))
def test_random_instances(seed: int):
    instance = random_instance(
        seed, customers=6, scenarios=2, dependencies=2, late=3, epochs=3, delivery_share=0.5
    )
    assert validate_instance(instance) == []
    assert instance.model_dump() == random_instance(
        seed, customers=6, scenarios=2, dependencies=2, late=3, epochs=3, delivery_share=0.5
    ).model_dump()
    for i, j in instance.dependencies.pairs:
        assert i < j
        for scenario in instance.scenarios.ids:
            assert instance.size(j, scenario) == -instance.size(i, scenario) < 0
    assert [c.request_epoch for c in instance.customers] == [0, 0, 0, 1, 2, 3]
