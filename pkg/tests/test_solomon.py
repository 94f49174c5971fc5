import math

import pytest

from pdpsd.benchmarks import c101, c101_head
from pdpsd.costs import arc_cost
from pdpsd.errors import ErrorCode, InputError, SolomonParseError
from pdpsd.solomon import parse_solomon, read_solomon, solomon_instance
from pdpsd.types import Point, Scenario

HEADER = """R1

VEHICLE
NUMBER     CAPACITY
  2          50

CUSTOMER
CUST NO.  XCOORD.   YCOORD.    DEMAND   READY TIME  DUE DATE   SERVICE   TIME
"""


def test_bundled_c101():
    data = c101()
    assert (data.depot.id, data.depot.x, data.depot.y) == (0, 40.0, 50.0)
    assert [c.id for c in data.customers] == list(range(1, 101))
    assert sum(c.demand for c in data.customers) == 1810.0
    assert c101_head(10).customers == data.customers[:10]


def test_bundled_c101_head():
    data = c101_head()
    assert data.name == "C101"
    assert (data.vehicles, data.capacity) == (25, 200.0)
    assert (data.depot.x, data.depot.y, data.depot.due_date) == (40.0, 50.0, 1236.0)
    assert len(data.customers) == 25
    twelfth = data.customers[11]
    assert (twelfth.id, twelfth.x, twelfth.y, twelfth.demand) == (12, 25.0, 85.0, 20.0)


def test_instance_from_the_first_rows():
    instance = solomon_instance(c101_head(), customers=5)
    assert instance.name == "c101-5"
    assert instance.depot == Point(x=40.0, y=50.0)
    assert instance.demanding == [1, 2, 3, 4, 5]
    assert instance.scenarios.ids == ["w1"]
    assert instance.size(2, "w1") == 30.0
    assert [t.capacity for t in instance.trucks] == [200.0]
    assert instance.distance(0, 1) == pytest.approx(math.sqrt(349))
    assert instance.cost.outsource_penalty == 16.0


def test_instance_overrides():
    scenarios = [
        Scenario(id="a", probability=0.5, sizes={1: 5.0, 2: -5.0}),
        Scenario(id="b", probability=0.5, sizes={1: 10.0, 2: -10.0}),
    ]
    instance = solomon_instance(
        c101_head(), customers=2, capacity=30.0, trucks=2, initial_cost=4.0, scenarios=scenarios
    )
    assert [(t.id, t.capacity, t.initial_cost) for t in instance.trucks] == [
        (1, 30.0, 4.0),
        (2, 30.0, 4.0),
    ]
    assert instance.size(2, "b") == -10.0


def test_asking_for_too_many_customers():
    with pytest.raises(InputError, match="has only 25 customers, asked for 30"):
        solomon_instance(c101_head(), customers=30)


def test_short_row_reports_its_line():
    text = HEADER + "    0      0   0    0    0   100    0\n    1      5   5   10    0   100\n"
    with pytest.raises(SolomonParseError, match="line 10: customer row needs 7 fields, got 6") as info:
        parse_solomon(text)
    assert info.value.line == 10
    assert info.value.code == ErrorCode.PARSE_SOLOMON
    assert info.value.exit_code == 1


@pytest.mark.parametrize(
    ("text", "message"),
    [
        (HEADER, "no depot row"),
        ("R1\n\nCUSTOMER\n 0 0 0 0 0 100 0\n", "no VEHICLE section"),
        (HEADER + " 0 0 0 0 0 100 0\n 1 5 x 10 0 100 0\n", "line 10: non-numeric field"),
        (HEADER + " 0 0 0 0 0 100 0\nEND OF DATA\n", "line 10: malformed customer row"),
        (HEADER.replace("  2          50", "  2"), "line 5: vehicle row needs NUMBER and CAPACITY"),
    ],
)
def test_malformed_files(text: str, message: str):
    with pytest.raises(SolomonParseError, match=message):
        parse_solomon(text)


def test_reading_files(tmp_path):
    path = tmp_path / "r1.txt"
    path.write_text(HEADER + " 0 10 10 0 0 100 0\n 1 13 14 5 0 100 10\n", encoding="utf-8")
    data = read_solomon(path)
    assert (data.name, data.capacity, len(data.customers)) == ("R1", 50.0, 1)
    assert solomon_instance(data).distance(0, 1) == pytest.approx(5.0)

    with pytest.raises(InputError, match="instance not found") as info:
        read_solomon(tmp_path / "missing.txt")
    assert info.value.code == ErrorCode.INPUT_NOT_FOUND


def test_first_two_c101_customers():
    instance = solomon_instance(c101_head(), customers=2)
    assert instance.distance(1, 2) == pytest.approx(2.0)
    assert arc_cost(instance, 1, 2) == pytest.approx(0.21)
