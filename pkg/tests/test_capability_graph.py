"""Graph construction, querying, time models, and serialization."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flexline.capability_graph import (
    EntityId,
    TimeModel,
    Triple,
    achievable_operations,
    capable_agents,
    graph_from_dict,
    graph_to_dict,
    load_graph,
    operation_time,
    query,
    remove_capability,
    save_graph,
    update_time_model,
)
from flexline.errors import (
    ConsistencyError,
    MissingTimeModel,
    NoCapability,
    ParseError,
    UnknownEntity,
)

from .conftest import make_graph


@pytest.fixture()
def weld_graph():
    return make_graph(
        ("Cut", "Weld", "Inspect"),
        {"R1": ["Cut", "Weld"], "R2": ["Weld", "Inspect"], "W1": ["Inspect"]},
        {
            ("R1", "Cut"): ("Constant", 4.0, 0.0),
            ("R1", "Weld"): ("TruncNormal", 9.0, 1.0),
            ("R2", "Weld"): ("TruncNormal", 7.0, 0.5),
            ("R2", "Inspect"): ("Constant", 3.0, 0.0),
            ("W1", "Inspect"): ("LogNormal", 5.0, 1.5),
        },
    )


def test_find_and_of_kind(weld_graph):
    op = weld_graph.find("Operation", "Weld")
    assert op == EntityId("Operation", "Weld")
    assert [e.name for e in weld_graph.of_kind("Agent")] == ["R1", "R2", "W1"]
    with pytest.raises(UnknownEntity):
        weld_graph.find("Agent", "R9")


def test_query_patterns(weld_graph):
    r1 = weld_graph.find("Agent", "R1")
    has = query(weld_graph, subject=r1, predicate="has")
    assert {t.object.name for t in has} == {"c_Cut", "c_Weld"}
    assert query(weld_graph, predicate="needs", object=weld_graph.find("Capability", "c_Weld"))
    with pytest.raises(ConsistencyError):
        query(weld_graph, predicate="owns")


def test_capability_closure(weld_graph):
    assert [o.name for o in achievable_operations(weld_graph, "R1")] == ["Cut", "Weld"]
    assert [a.name for a in capable_agents(weld_graph, "Weld")] == ["R1", "R2"]


def test_one_hop_derived_has():
    g = graph_from_dict(
        {
            "entities": [
                {"kind": "Agent", "name": "R1"},
                {"kind": "Capability", "name": "torch"},
                {"kind": "Station", "name": "S1"},
            ],
            "triples": [
                ["Agent:R1", "has", "Capability:torch"],
                ["Station:S1", "contains", "Agent:R1"],
            ],
        }
    )
    s1 = g.find("Station", "S1")
    direct = query(g, subject=s1, predicate="has")
    assert direct == []
    derived = query(g, subject=s1, predicate="has", derived=True)
    assert [t.object.name for t in derived] == ["torch"]


def test_operation_time_and_errors(weld_graph):
    assert operation_time(weld_graph, "R1", "Cut").mean == 4.0
    with pytest.raises(NoCapability):
        operation_time(weld_graph, "W1", "Cut")
    g = remove_capability(weld_graph, "R1", "c_Cut")
    with pytest.raises(NoCapability):
        operation_time(g, "R1", "Cut")
    # removal also drops the orphaned time model
    assert ("R1", "Cut") not in g.time_models


def test_missing_time_model():
    g = make_graph(("Cut",), {"R1": ["Cut"]}, {})
    with pytest.raises(MissingTimeModel):
        operation_time(g, "R1", "Cut")


def test_update_time_model_immutability(weld_graph):
    new = update_time_model(weld_graph, "R1", "Cut", TimeModel("Constant", mean=6.0))
    assert operation_time(new, "R1", "Cut").mean == 6.0
    assert operation_time(weld_graph, "R1", "Cut").mean == 4.0


def test_predicate_rules_rejected():
    with pytest.raises(ConsistencyError):
        Triple(EntityId("Operation", "Cut"), "has", EntityId("Capability", "c"))


def test_dict_round_trip(weld_graph):
    data = graph_to_dict(weld_graph)
    back = graph_from_dict(data)
    assert graph_to_dict(back) == data
    assert back.time_models == weld_graph.time_models


def test_file_round_trip(weld_graph, tmp_path):
    path = str(tmp_path / "g.json")
    save_graph(weld_graph, path)
    back = load_graph(path)
    assert graph_to_dict(back) == graph_to_dict(weld_graph)


def test_parse_rejects_malformed(tmp_path):
    with pytest.raises(ParseError):
        graph_from_dict({"entities": [], "triples": [], "extra": 1})
    with pytest.raises(ParseError):
        graph_from_dict({"entities": [{"kind": "Robot", "name": "x"}], "triples": []})
    with pytest.raises(ParseError):
        graph_from_dict({"entities": [], "triples": [["Agent:a", "has"]]})
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ParseError) as e:
        load_graph(str(bad))
    assert e.value.line == 1


def test_duplicate_entity_rejected():
    with pytest.raises(ConsistencyError):
        graph_from_dict(
            {
                "entities": [
                    {"kind": "Agent", "name": "R1"},
                    {"kind": "Agent", "name": "R1"},
                ],
                "triples": [],
            }
        )


def test_dangling_triple_rejected():
    with pytest.raises(ConsistencyError):
        graph_from_dict(
            {
                "entities": [{"kind": "Agent", "name": "R1"}],
                "triples": [["Agent:R1", "has", "Capability:ghost"]],
            }
        )


def test_time_model_without_capability_rejected():
    with pytest.raises(ConsistencyError):
        make_graph(
            ("Cut",),
            {"R1": []},
            {("R1", "Cut"): ("Constant", 4.0, 0.0)},
        )


# ----------------------------------------------------------------- TimeModel


def test_time_model_validation():
    with pytest.raises(ConsistencyError):
        TimeModel("Constant", mean=0.0)
    with pytest.raises(ConsistencyError):
        TimeModel("TruncNormal", mean=5.0, sd=-1.0)
    with pytest.raises(ConsistencyError):
        TimeModel("Empirical", samples=())
    with pytest.raises(ConsistencyError):
        TimeModel("Empirical", samples=(3.0, -1.0))


def test_expected_values():
    assert TimeModel("Constant", mean=7.0).expected() == 7.0
    assert TimeModel("Empirical", samples=(2.0, 4.0, 6.0)).expected() == 4.0
    # truncation at zero pulls the mean of a wide normal upward
    tn = TimeModel("TruncNormal", mean=1.0, sd=2.0)
    assert tn.expected() > 1.0
    tight = TimeModel("TruncNormal", mean=50.0, sd=1.0)
    assert abs(tight.expected() - 50.0) < 1e-6


def test_sampling_is_seed_deterministic():
    model = TimeModel("LogNormal", mean=10.0, sd=2.0)
    a = [model.sample(np.random.default_rng(5)) for _ in range(3)]
    b = [model.sample(np.random.default_rng(5)) for _ in range(3)]
    assert a == b
    assert all(v > 0 for v in a)


def test_lognormal_sample_mean_matches_model():
    model = TimeModel("LogNormal", mean=10.0, sd=2.0)
    rng = np.random.default_rng(11)
    draws = [model.sample(rng) for _ in range(20000)]
    assert math.isclose(float(np.mean(draws)), 10.0, rel_tol=0.02)
    assert math.isclose(float(np.std(draws)), 2.0, rel_tol=0.05)


def test_scaled_preserves_cv():
    model = TimeModel("TruncNormal", mean=8.0, sd=2.0)
    double = model.scaled(2.0)
    assert double.mean == 16.0 and double.sd == 4.0
    emp = TimeModel("Empirical", samples=(1.0, 3.0)).scaled(3.0)
    assert emp.samples == (3.0, 9.0)
    with pytest.raises(ConsistencyError):
        model.scaled(0.0)


@settings(max_examples=60, deadline=None)
@given(
    mean=st.floats(min_value=0.5, max_value=100.0),
    cv=st.floats(min_value=0.0, max_value=0.5),
    factor=st.floats(min_value=0.1, max_value=10.0),
    kind=st.sampled_from(["Constant", "TruncNormal", "LogNormal"]),
)
def test_scaled_mean_property(mean, cv, factor, kind):
    model = TimeModel(kind, mean=mean, sd=cv * mean)
    scaled = model.scaled(factor)
    assert math.isclose(scaled.mean, mean * factor, rel_tol=1e-12)
    assert math.isclose(scaled.sd, cv * mean * factor, rel_tol=1e-9, abs_tol=1e-12)
