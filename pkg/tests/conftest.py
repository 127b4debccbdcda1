from __future__ import annotations

from typing import Dict, Mapping, Sequence, Tuple

import pytest

from flexline import datasets
from flexline.capability_graph import CapabilityGraph, graph_from_dict
from flexline.line_model import LineConfiguration


def make_graph(
    ops: Sequence[str],
    caps: Mapping[str, Sequence[str]],
    times: Mapping[Tuple[str, str], Tuple[str, float, float]],
    agent_types: Mapping[str, str] = (),
) -> CapabilityGraph:
    """Small-graph builder: one capability per operation, agents hold the
    capabilities of the operations they can run."""
    entities = [{"kind": "Operation", "name": op} for op in ops]
    entities += [{"kind": "Capability", "name": f"c_{op}"} for op in ops]
    triples = [[f"Operation:{op}", "needs", f"Capability:c_{op}"] for op in ops]
    for agent, able in caps.items():
        row: Dict[str, str] = {"kind": "Agent", "name": agent}
        if agent in dict(agent_types):
            row["type"] = dict(agent_types)[agent]
        entities.append(row)
        for op in able:
            triples.append([f"Agent:{agent}", "has", f"Capability:c_{op}"])
    models = []
    for (agent, op), (kind, mean, sd) in times.items():
        row = {"agent": agent, "op": op, "kind": kind, "mean": mean}
        if sd:
            row["sd"] = sd
        models.append(row)
    return graph_from_dict(
        {"entities": entities, "triples": triples, "time_models": models}
    )


@pytest.fixture(scope="session")
def battery_graph() -> CapabilityGraph:
    return datasets.battery_line_graph()


@pytest.fixture(scope="session")
def battery_config() -> LineConfiguration:
    return datasets.battery_line_config()


@pytest.fixture()
def three_station_graph() -> CapabilityGraph:
    ops = ("OpA", "OpB", "OpC")
    agents = {"A1": ["OpA"], "A2": ["OpB"], "A3": ["OpC"]}
    times = {
        ("A1", "OpA"): ("Constant", 10.0, 0.0),
        ("A2", "OpB"): ("Constant", 20.0, 0.0),
        ("A3", "OpC"): ("Constant", 15.0, 0.0),
    }
    return make_graph(ops, agents, times)


@pytest.fixture()
def three_station_config() -> LineConfiguration:
    ops = ("OpA", "OpB", "OpC")
    assignment = {("A1", "OpA"): 1.0, ("A2", "OpB"): 1.0, ("A3", "OpC"): 1.0}
    return LineConfiguration(operations=ops, assignment=assignment)
