import json
from pathlib import Path
from typing import Any

import pytest
from helpers.instances import make_instance, matrix_instance

from pdpsd.documents import (
    ExperimentDocument,
    PlanDocument,
    SimulationDocument,
    companion_path,
    dump_instance,
    load_events,
    load_instance,
    load_result,
    read_instance,
    result_csv,
    result_json,
    save_result,
)
from pdpsd.errors import DocumentError, ErrorCode, InputError
from pdpsd.types import (
    ActualRoute,
    EpochRecord,
    KthFromRouteEnd,
    MilpStatus,
    PlanSolution,
    Point,
    ScenarioPlan,
    SeriesPoint,
    SimulationResult,
    TruckRoute,
)

HEADER = "iteration,startingWeight,scenario,routingPlan,outsourcing,objectiveCost,distance\n"


def _document(**changes: Any) -> dict[str, Any]:
    document = {
        "name": "tiny",
        "depot": {"x": 0, "y": 0},
        "customers": [
            {"id": 1, "x": 10, "y": 0, "sizes": {"w1": 5, "w2": 10}},
            {"id": 2, "x": 20, "y": 0, "sizes": {"w1": -5, "w2": -10}},
            {"id": 3, "x": 5, "y": 5, "k": 0},
        ],
        "trucks": [{"id": 1, "capacity": 50, "initialCost": 2}],
        "dependencies": [[1, 2]],
        "cost": {"fuelConsumption": 0.1, "fuelPrice": 1.05, "outsourcePenalty": 16},
        "scenarios": [{"id": "w1", "probability": 0.5}, {"id": "w2", "probability": 0.5}],
    }
    document.update(changes)
    return document


def _issues(document: dict[str, Any]) -> list[tuple[str, str]]:
    with pytest.raises(DocumentError) as info:
        load_instance(json.dumps(document))
    assert info.value.code == ErrorCode.DOCUMENT_SCHEMA
    return info.value.issues


def test_instance_document():
    instance = load_instance(json.dumps(_document()))
    assert instance.name == "tiny"
    assert instance.demanding == [1, 2]
    assert instance.location(3) == Point(x=5.0, y=5.0)
    assert instance.size(2, "w2") == -10.0
    assert instance.truck(1).initial_cost == 2.0
    assert instance.dependencies.pairs == ((1, 2),)
    assert instance.distance(1, 2) == pytest.approx(10.0)
    assert instance.cost.routing_rate == pytest.approx(0.105)


def test_schema_problems_carry_json_paths():
    document = _document(colour="red")
    document["scenarios"][0]["probability"] = 1.5
    del document["trucks"]
    issues = _issues(document)
    assert ("scenarios[0].probability", "probability ∉ [0,1]") in issues
    assert ("trucks", "Field required") in issues
    assert ("colour", "Extra inputs are not permitted") in issues


def test_cross_reference_problems():
    document = _document(dependencies=[[1, 9]])
    document["customers"][0]["sizes"]["w3"] = 1
    del document["customers"][1]["sizes"]["w2"]
    del document["customers"][2]["x"]
    assert _issues(document) == [
        ("customers[0].sizes.w3", "unknown scenario"),
        ("customers[1].sizes", "size for scenario w2"),
        ("customers[2]", "x and y required with depot coordinates"),
        ("dependencies[0]", "unknown customer 9"),
    ]


def test_distance_matrix_cross_references():
    document = _document(
        depot=None,
        distanceMatrix=[[0, 1, 2], [1, 0, 1, 4], [2, 1, 0]],
        dependencies=[],
    )
    document["customers"] = [
        {"id": 1, "sizes": {"w1": 5, "w2": 5}},
        {"id": 7, "index": 2, "sizes": {"w1": 5, "w2": 5}},
        {"id": 3, "k": 0},
    ]
    assert _issues(document) == [
        ("distanceMatrix[1]", "row length 3"),
        ("customers[2].index", "row inside distanceMatrix"),
    ]
    both = _issues(_document(distanceMatrix=[[0]]))
    assert both[0] == ("", "exactly one of depot / distanceMatrix")


def test_domain_rules_run_after_the_schema():
    document = _document()
    document["scenarios"][1]["probability"] = 0.2
    assert _issues(document) == [("scenarios", "probabilities sum to 0.7")]
    unchecked = load_instance(json.dumps(document), check=False)
    assert unchecked.scenarios.get("w2").probability == 0.2


def test_dumped_instances_load_back():
    euclidean = make_instance(
        {1: (10.0, 0.0), 2: (0.0, 10.0)},
        {"w1": {1: 5.0, 2: -5.0}, "w2": {1: 10.0, 2: -10.0}},
        dependencies=[(1, 2)],
        epochs={2: 1},
    )
    text = dump_instance(euclidean)
    assert '"requestEpoch": 1' in text
    assert '"outsourcePenalty": 16.0' in text
    assert "distanceMatrix" not in text
    assert load_instance(text).model_dump() == euclidean.model_dump()

    matrix = matrix_instance([[0, 4, 9], [4, 0, 3], [9, 3, 0]], {1: 5.0, 2: -5.0})
    text = dump_instance(matrix)
    assert '"distanceMatrix"' in text
    assert load_instance(text).model_dump() == matrix.model_dump()


def test_missing_instance_file(tmp_path):
    missing = tmp_path / "nope.json"
    with pytest.raises(InputError, match="instance not found") as info:
        read_instance(missing)
    assert info.value.code == ErrorCode.INPUT_NOT_FOUND
    assert info.value.exit_code == 1


def test_events_document():
    text = json.dumps(
        {
            "events": [
                {
                    "epoch": 2,
                    "customers": [
                        {"id": 5, "x": 1, "y": 2, "requestEpoch": 2, "sizes": {"w1": 5}},
                        {"id": 6, "x": 3, "y": 4, "sizes": {"w1": -5}},
                    ],
                    "dependencies": [[5, 6]],
                }
            ]
        }
    )
    (event,) = load_events(text)
    assert event.epoch == 2
    assert [c.id for c in event.customers] == [5, 6]
    assert event.sizes == {"w1": {5: 5.0, 6: -5.0}}
    assert event.dependencies == [(5, 6)]

    with pytest.raises(DocumentError, match=r"events\[0\].epoch"):
        load_events('{"events": [{"customers": []}]}')


def _plan() -> PlanSolution:
    return PlanSolution(
        status=MilpStatus.OPTIMAL,
        trucks_used=[1, 2],
        assignment={2: 1, 4: 1, 5: 2},
        outsourced=[3],
        scenarios=[
            ScenarioPlan(
                scenario="w1",
                merged=["w1", "w3"],
                probability=0.6,
                routes=[
                    TruckRoute(truck=1, stops=[2, 4], start_load=5.0, loads=[0.0, 10.0]),
                    TruckRoute(truck=2, stops=[5], start_load=0.0, loads=[15.0]),
                ],
                cost=12.3456,
                distance=40.0,
            ),
            ScenarioPlan(
                scenario="w2",
                merged=["w2"],
                probability=0.4,
                routes=[
                    TruckRoute(truck=1, stops=[4, 2], start_load=10.0, loads=[20.0, 10.0]),
                    TruckRoute(truck=2, stops=[5], start_load=0.0, loads=[10.0]),
                ],
                cost=20.0275,
                distance=44.5,
            ),
        ],
        expected_objective=15.41826,
    )


def test_plan_table():
    document = PlanDocument(instance="tiny", plan=_plan())
    assert result_csv(document) == HEADER + (
        "1,T1: 5.000 | T2: 0.000,w1 w3,T1: Depot-c2-c4-Depot | T2: Depot-c5-Depot,c3,12.346,40.000\n"
        "1,T1: 10.000 | T2: 0.000,w2,T1: Depot-c4-c2-Depot | T2: Depot-c5-Depot,c3,20.028,44.500\n"
    )


def test_simulation_table():
    first = TruckRoute(truck=1, stops=[1, 2, 3], start_load=10.0, loads=[5.0, 0.0, 5.0])
    second = TruckRoute(truck=1, origin=2, stops=[4, 3], start_load=0.0, loads=[5.0, 10.0])
    result = SimulationResult(
        realized="w2",
        epochs=[
            EpochRecord(
                epoch=0,
                starting_weights={1: 10.0},
                scenarios=["w1", "w2"],
                routes=[first],
                outsourced=[],
                plan_cost=6.3,
                distance=60.0,
                executed={1: 2},
            ),
            EpochRecord(
                epoch=1,
                starting_weights={1: 0.0},
                scenarios=["w2"],
                routes=[second],
                outsourced=[5],
                plan_cost=21.0,
                distance=40.0,
            ),
        ],
        actual_routes=[ActualRoute(truck=1, walk=[0, 1, 2, 4, 3, 0])],
        served=[1, 2, 3, 4],
        outsourced=[5],
        start_loads={1: 10.0},
        total_distance=70.0,
        delivery_cost=7.35,
        total_cost=23.35,
    )
    document = SimulationDocument(instance="tiny", trigger=KthFromRouteEnd(k=2), result=result)
    assert result_csv(document) == HEADER + (
        "1,10.000,w1 w2,Depot-c1-c2-c3-Depot,,6.300,60.000\n"
        "2,0.000,w2,c2-c4-c3-Depot,c5,21.000,40.000\n"
        "actual,10.000,w2,Depot-c1-c2-c4-c3-Depot,c5,23.350,70.000\n"
    )
    assert load_result(result_json(document)) == document


def test_result_documents_are_told_apart_by_kind(tmp_path):
    plan = PlanDocument(instance="tiny", plan=_plan())
    assert load_result(result_json(plan)) == plan
    assert json.loads(result_json(plan))["plan"]["expected_objective"] == 15.41826

    experiment = ExperimentDocument(
        instance="tiny",
        points=[SeriesPoint(series="reroute", label="2", metric="served", value=12.0)],
    )
    path = tmp_path / "series.csv"
    text = save_result(experiment, path, "csv")
    assert text == "series,label,metric,value,status\nreroute,2,served,12.000,Optimal\n"
    assert path.read_text(encoding="utf-8") == text

    with pytest.raises(DocumentError, match="kind"):
        load_result('{"kind": "report", "instance": "tiny"}')


@pytest.mark.parametrize(
    ("path", "format", "expected"),
    [
        ("out/day.json", "json", "out/day.csv"),
        ("out/day.csv", "csv", "out/day.json"),
        ("out/day", "json", "out/day.csv"),
        ("out/day.csv", "json", "out/day.csv.csv"),
    ],
)
def test_companion_path(path: str, format: str, expected: str):
    assert companion_path(Path(path), format) == Path(expected)
