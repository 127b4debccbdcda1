"""Shipped reference line and scenario fixtures."""

from __future__ import annotations

import json

import pytest

from flexline.datasets import (
    SHIFT_SECONDS,
    WEIGHT_SETS,
    battery_line_config,
    battery_line_graph,
    line_disturbance,
    write_sample_log,
    write_scenario_bundle,
)
from flexline.line_model import bottleneck_time, derive_stations, validate
from flexline.monitor import read_sample_log


def test_graph_inventory(battery_graph):
    g = battery_graph
    assert len(g.of_kind("Operation")) == 51
    assert len(g.of_kind("Agent")) == 40
    assert len(g.time_models) == 234
    types = set(g.agent_types.values())
    assert "Worker" in types and "LargeRobot" in types


def test_config_is_valid_twenty_stations(battery_graph, battery_config):
    assert validate(battery_config, battery_graph) == []
    view = derive_stations(battery_config)
    assert len(view.stations) == 20
    assert all(cap == 2 for cap in view.buffer_capacities.values())
    assert bottleneck_time(battery_config, battery_graph) == pytest.approx(43.9)
    assert ("Worker2", "Op19") in battery_config.assignment


def test_builders_are_deterministic():
    assert battery_line_graph() == battery_line_graph()
    assert battery_line_config() == battery_line_config()


def test_line_disturbance_lookup():
    d1 = line_disturbance(1)
    assert (d1.agent, d1.time_multiplier, d1.onset) == ("Worker2", 1.5, 0.0)
    d2 = line_disturbance(2, onset=120.0)
    assert (d2.time_multiplier, d2.onset) == (3.0, 120.0)
    assert d2.affected_ops is None
    with pytest.raises(ValueError):
        line_disturbance(3)


def test_sample_log_contents(tmp_path):
    path = tmp_path / "samples.csv"
    write_sample_log(str(path), scenario=1, cycles=80, onset_cycle=50)
    rows = read_sample_log(str(path))
    assert len(rows) == 80 * 51
    ts = [r[0] for r in rows]
    assert ts == sorted(ts)
    w2 = [r for r in rows if r[1] == "Worker2"]
    per_cycle = len(w2) // 80
    early = [d for _, _, _, d in w2[: 40 * per_cycle]]
    late = [d for _, _, _, d in w2[-20 * per_cycle :]]
    ratio = (sum(late) / len(late)) / (sum(early) / len(early))
    assert ratio == pytest.approx(1.5, rel=0.05)


def test_sample_log_undisturbed_is_flat(tmp_path):
    path = tmp_path / "quiet.csv"
    write_sample_log(str(path), scenario=None, cycles=40)
    rows = read_sample_log(str(path))
    w2 = [d for _, a, _, d in rows if a == "Worker2"]
    half = len(w2) // 2
    assert sum(w2[half:]) / sum(w2[:half]) == pytest.approx(1.0, rel=0.05)


def test_sample_log_seed_repeatability(tmp_path):
    a, b, c = (tmp_path / n for n in ("a.csv", "b.csv", "c.csv"))
    write_sample_log(str(a), 1, seed=5)
    write_sample_log(str(b), 1, seed=5)
    write_sample_log(str(c), 1, seed=6)
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()


@pytest.mark.parametrize("scenario", [1, 2, None])
def test_scenario_bundle_layout(tmp_path, scenario):
    out = tmp_path / "bundle"
    scenario_path = write_scenario_bundle(str(out), scenario)
    assert scenario_path.endswith("scenario.json")
    for name in ("graph.json", "config.json", "samples.csv", "scenario.json"):
        assert (out / name).exists()
    data = json.loads((out / "scenario.json").read_text())
    assert data["graph"] == "graph.json"
    assert data["horizon_s"] == SHIFT_SECONDS
    assert data["replications"] == 3
    assert data["buffers"] == {"default": 2, "near_shared": 8}
    expected = WEIGHT_SETS.get(scenario, ((0.6, 0.4),))
    assert data["weight_sets"] == [list(w) for w in expected]
    assert set(data["policy"]) == {"min_throughput", "max_agents"}


def test_weight_sets_cover_both_scenarios():
    assert WEIGHT_SETS[1] == ((0.6, 0.4),)
    assert WEIGHT_SETS[2] == ((0.1, 0.9), (0.7, 0.3))
