"""Shipped reference line: a 51-operation battery-module assembly analog.

Twenty stations feed, stack, weld, inspect, and pack a battery module.  The
numbers are calibrated so the initializer lands on a 20-agent layout with a
43.9 s bottleneck and the two worked disturbance cases (+50% and +200% on
Worker2) admit both a plan switch and a configuration switch, which the
command-line pipeline and the test suite exercise end to end.
"""

from __future__ import annotations

import csv
import json
import os
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from .capability_graph import CapabilityGraph, graph_from_dict, save_graph
from .line_model import DisturbanceScenario, LineConfiguration, save_config

OPERATIONS: Tuple[str, ...] = tuple(f"Op{j:02d}" for j in range(1, 52))

# Primary-performer mean seconds, operation 1 through 51.
_MEAN = (
    6.5, 6.5, 6.5, 6.5,             # feeding
    9.0, 8.5, 8.5,
    9.8, 9.9, 9.5, 9.8,             # kitting
    13.0, 13.2, 12.8,               # scan inspection
    8.65, 8.65, 8.65, 8.65,         # cell stacking
    5.8, 5.0, 5.2,                  # module stacking, manual pace
    2.6, 2.7, 2.62,                 # clip installation
    15.6133,                        # harness routing
    19.5, 19.5,                     # busbar welding
    5.8, 5.8, 5.9, 5.8, 5.9, 5.8,   # module installation
    19.5, 19.3,                     # visual inspection
    19.4, 19.4,                     # frame transfer
    43.9,                           # cover welding, the design bottleneck
    19.6, 19.5,                     # sealing
    19.3, 19.4,                     # module mounting
    21.0, 24.5,                     # final inspection
    39.2,                           # leak test
    19.5, 19.6,                     # packing preparation
    39.0,                           # kit transfer
    19.5, 19.4,                     # pick and place
    39.3,                           # final leak test
)

_CAPS: Dict[str, Tuple[int, ...]] = {
    "feeding": tuple(range(1, 8)),
    "kitting": tuple(range(8, 12)),
    "scan_inspection": (12, 13, 14),
    "cell_stacking": (15, 16, 17, 18),
    "module_stacking": (19, 20, 21),
    "clip_install": (22, 23),
    "harness_install": (24, 25),
    "welding": (26, 27),
    "module_install": tuple(range(28, 34)),
    "visual_inspection": (34, 35),
    "frame_transfer": (36, 37),
    "cover_welding": (38,),
    "sealing": (39, 40),
    "module_mounting": (41, 42),
    "final_inspection": (43, 44),
    "leak_test": (45,),
    "packing_prep": (46, 47),
    "kit_transfer": (48,),
    "pick_place": (49, 50),
    "final_leak_test": (51,),
}

_TYPE_COUNT = {
    "SmallRobot": 6,
    "MiddleRobot": 6,
    "ScanningMachine": 4,
    "LargeRobot": 6,
    "Worker": 8,
    "WeldingMachine": 3,
    "CameraInspector": 4,
    "LeakTester": 3,
}

_TYPE_CAPS = {
    "SmallRobot": ("feeding", "pick_place"),
    "MiddleRobot": ("kitting", "frame_transfer", "kit_transfer"),
    "ScanningMachine": ("scan_inspection",),
    "LargeRobot": ("cell_stacking", "module_stacking", "module_mounting"),
    "WeldingMachine": ("welding", "cover_welding"),
    "CameraInspector": ("visual_inspection", "final_inspection"),
    "LeakTester": ("leak_test", "final_leak_test"),
}

# Worker2 and Worker3 are the line's trained manual specialists; the other
# six workers only cover the sealing and packing steps.
_WORKER_CAPS = {
    "Worker2": ("module_stacking", "clip_install", "harness_install"),
    "Worker3": ("clip_install", "harness_install", "module_install"),
}
_GENERAL_WORKER_CAPS = ("sealing", "packing_prep")

# Robots take 1.5x the worker pace on the manual stacking steps.
_ROBOT_STACKING_FACTOR = 1.5

# Duration family and coefficient of variation per agent type.
_NOISE = {
    "Worker": ("LogNormal", 0.06),
    "SmallRobot": ("TruncNormal", 0.02),
    "MiddleRobot": ("TruncNormal", 0.02),
    "LargeRobot": ("TruncNormal", 0.02),
    "ScanningMachine": ("Constant", 0.0),
    "WeldingMachine": ("Constant", 0.0),
    "CameraInspector": ("Constant", 0.0),
    "LeakTester": ("Constant", 0.0),
}

# Shipped layout: agent -> inclusive operation index range.
_LAYOUT: Tuple[Tuple[str, int, int], ...] = (
    ("SmallRobot0", 1, 4),
    ("SmallRobot1", 5, 7),
    ("MiddleRobot0", 8, 11),
    ("ScanningMachine0", 12, 14),
    ("LargeRobot3", 15, 18),
    ("Worker2", 19, 25),
    ("WeldingMachine0", 26, 27),
    ("Worker3", 28, 33),
    ("CameraInspector0", 34, 35),
    ("MiddleRobot1", 36, 37),
    ("WeldingMachine1", 38, 38),
    ("Worker4", 39, 40),
    ("LargeRobot0", 41, 42),
    ("CameraInspector1", 43, 43),
    ("CameraInspector2", 44, 44),
    ("LeakTester0", 45, 45),
    ("Worker5", 46, 47),
    ("MiddleRobot2", 48, 48),
    ("SmallRobot2", 49, 50),
    ("LeakTester1", 51, 51),
)

BUFFER_CAPACITY = 2

DISTURBANCE_MULTIPLIER = {1: 1.5, 2: 3.0}
WEIGHT_SETS = {1: ((0.6, 0.4),), 2: ((0.1, 0.9), (0.7, 0.3))}

SHIFT_SECONDS = 57600.0  # one 16-hour run


def _agent_names() -> Iterator[Tuple[str, str]]:
    for typ, count in _TYPE_COUNT.items():
        for i in range(count):
            yield f"{typ}{i}", typ


def _capabilities_of(agent: str, typ: str) -> Tuple[str, ...]:
    if typ != "Worker":
        return _TYPE_CAPS[typ]
    return _WORKER_CAPS.get(agent, _GENERAL_WORKER_CAPS)


def _mean_for(typ: str, op_index: int) -> float:
    base = _MEAN[op_index - 1]
    if typ == "LargeRobot" and op_index in _CAPS["module_stacking"]:
        return base * _ROBOT_STACKING_FACTOR
    return base


def battery_line_graph() -> CapabilityGraph:
    """The reference capability graph: 51 operations, 40 agents."""
    entities: List[dict] = [{"kind": "Operation", "name": op} for op in OPERATIONS]
    entities += [{"kind": "Capability", "name": cap} for cap in _CAPS]
    triples: List[List[str]] = []
    for cap, ops in _CAPS.items():
        for j in ops:
            triples.append([f"Operation:{OPERATIONS[j - 1]}", "needs", f"Capability:{cap}"])
    time_models: List[dict] = []
    for agent, typ in _agent_names():
        entities.append({"kind": "Agent", "name": agent, "type": typ})
        kind, cv = _NOISE[typ]
        for cap in _capabilities_of(agent, typ):
            triples.append([f"Agent:{agent}", "has", f"Capability:{cap}"])
            for j in _CAPS[cap]:
                mean = _mean_for(typ, j)
                model = {"agent": agent, "op": OPERATIONS[j - 1], "kind": kind, "mean": mean}
                if cv:
                    model["sd"] = round(cv * mean, 6)
                time_models.append(model)
    return graph_from_dict(
        {"entities": entities, "triples": triples, "time_models": time_models}
    )


def battery_line_config() -> LineConfiguration:
    """The shipped 20-station layout with uniform two-slot buffers."""
    assignment = {}
    for agent, lo, hi in _LAYOUT:
        for j in range(lo, hi + 1):
            assignment[(agent, OPERATIONS[j - 1])] = 1.0
    buffers = tuple((i, BUFFER_CAPACITY) for i in range(1, len(_LAYOUT)))
    return LineConfiguration(operations=OPERATIONS, assignment=assignment, buffers=buffers)


def line_disturbance(scenario: int, onset: float = 0.0) -> DisturbanceScenario:
    """Worker2 slow-down used by the worked scenarios (1: +50%, 2: +200%)."""
    if scenario not in DISTURBANCE_MULTIPLIER:
        raise ValueError(f"unknown scenario {scenario!r}; expected 1 or 2")
    return DisturbanceScenario(
        agent="Worker2",
        time_multiplier=DISTURBANCE_MULTIPLIER[scenario],
        onset=onset,
    )


def write_sample_log(
    path: str,
    scenario: Optional[int] = None,
    *,
    cycles: int = 100,
    onset_cycle: int = 60,
    seed: int = 20240807,
) -> None:
    """Write a per-operation duration log for monitor replay.

    Every cycle logs one sample for each operation under the shipped layout;
    from onset_cycle on, the scenario's slow-down applies to Worker2's rows.
    """
    graph = battery_line_graph()
    disturbance = line_disturbance(scenario) if scenario is not None else None
    rng = np.random.default_rng(seed)
    cycle_s = 43.9
    owners = [(agent, OPERATIONS[j - 1]) for agent, lo, hi in _LAYOUT for j in range(lo, hi + 1)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp_s", "agent", "op", "duration_s"])
        for cycle in range(cycles):
            for pos, (agent, op) in enumerate(owners):
                duration = graph.time_models[(agent, op)].sample(rng)
                if disturbance is not None and cycle >= onset_cycle and agent == disturbance.agent:
                    duration *= disturbance.time_multiplier
                stamp = cycle * cycle_s + 0.8 * pos
                writer.writerow([f"{stamp:.3f}", agent, op, f"{duration:.6f}"])


def write_scenario_bundle(
    out_dir: str,
    scenario: Optional[int],
    *,
    seed: int = 7,
    horizon_s: float = SHIFT_SECONDS,
    replications: int = 3,
) -> str:
    """Write graph, config, sample log, and scenario file; returns the scenario path.

    scenario None produces an undisturbed bundle whose sample log never
    triggers a line-impacting event.
    """
    os.makedirs(out_dir, exist_ok=True)
    save_graph(battery_line_graph(), os.path.join(out_dir, "graph.json"))
    save_config(battery_line_config(), os.path.join(out_dir, "config.json"))
    write_sample_log(os.path.join(out_dir, "samples.csv"), scenario, seed=seed * 1009 + 17)
    weight_sets = WEIGHT_SETS.get(scenario, ((0.6, 0.4),))
    data = {
        "graph": "graph.json",
        "config": "config.json",
        "samples": "samples.csv",
        "weight_sets": [list(w) for w in weight_sets],
        "policy": {"min_throughput": None, "max_agents": None},
        "buffers": {"default": 2, "near_shared": 8},
        "horizon_s": horizon_s,
        "seed": seed,
        "replications": replications,
    }
    scenario_path = os.path.join(out_dir, "scenario.json")
    with open(scenario_path, "w") as fh:
        json.dump(data, fh, indent=2)
        fh.write("\n")
    return scenario_path
