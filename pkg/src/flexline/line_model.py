"""Line configurations and their derived station structure.

A configuration maps (agent, operation) pairs to work fractions over an
ordered operation sequence.  Stations are derived from the assignment: runs of
consecutive operations with the same owning agent form one station, and
minority fractions become sharing routes served by a visiting agent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

from .capability_graph import CapabilityGraph, EntityId, achievable_operations
from .errors import AmbiguousOwnership, InvalidConfiguration, ParseError

_FRACTION_EPS = 1e-9


@dataclass(frozen=True)
class LineConfiguration:
    """Ordered operations plus the fraction of each performed by each agent.

    `assignment` keys are (agent name, operation name); values in [0, 1].
    `scoped_ops` marks the operations where fractional entries are allowed
    (reconfiguration scope); None means the configuration was loaded from a
    file and carries no scope information.
    """

    operations: Tuple[str, ...]
    assignment: Mapping[Tuple[str, str], float]
    buffers: Tuple[Tuple[int, int], ...] = ()  # (after_station_index, capacity), 1-based
    scoped_ops: Optional[FrozenSet[str]] = None

    def agents_used(self) -> List[str]:
        """Agents with a positive fraction anywhere, ordered by first operation."""
        first: Dict[str, int] = {}
        for idx, op in enumerate(self.operations):
            for (agent, o), f in self.assignment.items():
                if o == op and f > _FRACTION_EPS and agent not in first:
                    first[agent] = idx
        return [a for a, _ in sorted(first.items(), key=lambda kv: (kv[1], kv[0]))]

    def fractions_of(self, op: str) -> Dict[str, float]:
        return {
            agent: f
            for (agent, o), f in self.assignment.items()
            if o == op and f > _FRACTION_EPS
        }


@dataclass(frozen=True)
class SharedRoute:
    """A visiting agent serving part of one operation at a host station."""

    op: str
    donor: str
    recipient: str
    fraction: float


@dataclass(frozen=True)
class Station:
    index: int  # 1-based position in the line
    agent: str
    ops: Tuple[str, ...]
    routes: Tuple[SharedRoute, ...] = ()


@dataclass(frozen=True)
class StationView:
    stations: Tuple[Station, ...]
    buffer_capacities: Dict[int, int] = field(default_factory=dict)  # slot after station i

    def station_of(self, agent: str) -> List[Station]:
        return [s for s in self.stations if s.agent == agent]


@dataclass(frozen=True)
class DisturbanceScenario:
    """A multiplicative slowdown of one agent's operation times from an onset."""

    agent: str
    time_multiplier: float
    onset: float = 0.0
    affected_ops: Optional[FrozenSet[str]] = None  # None means all of the agent's ops

    def applies(self, agent: str, op: str, now: float) -> bool:
        if agent != self.agent or now < self.onset:
            return False
        return self.affected_ops is None or op in self.affected_ops


def _agent_order(c: LineConfiguration) -> Dict[str, int]:
    order: Dict[str, int] = {}
    for idx, op in enumerate(c.operations):
        for (agent, o), f in c.assignment.items():
            if o == op and f > _FRACTION_EPS and agent not in order:
                order[agent] = len(order)
    return order


def derive_stations(c: LineConfiguration) -> StationView:
    """Group consecutive operations by owning agent into stations.

    Ownership is by majority fraction (>= 0.5); an exact 0.5/0.5 split goes to
    the agent appearing earlier in the line.  A fractional majority holder with
    no adjacent operation of its own cedes station membership to a sharer that
    does own a neighbor, and is recorded as the visiting recipient of a route,
    so a shared boundary operation stays at the donor's station.
    """
    order = _agent_order(c)
    owners: List[str] = []
    for op in c.operations:
        fr = c.fractions_of(op)
        if not fr:
            raise AmbiguousOwnership(f"operation {op} has no assigned agent")
        best = max(fr.values())
        if best < 0.5 - _FRACTION_EPS:
            raise AmbiguousOwnership(f"no majority owner for operation {op}")
        candidates = [a for a, f in fr.items() if abs(f - best) <= _FRACTION_EPS]
        owners.append(min(candidates, key=lambda a: order[a]))

    # Re-home isolated fractional claims to an adjacent sharer (the donor).
    n = len(owners)
    homed = list(owners)
    for i, op in enumerate(c.operations):
        fr = c.fractions_of(op)
        owner = owners[i]
        if fr[owner] >= 1.0 - _FRACTION_EPS:
            continue
        isolated = (i == 0 or owners[i - 1] != owner) and (i == n - 1 or owners[i + 1] != owner)
        if not isolated:
            continue
        neighbors = []
        if i > 0:
            neighbors.append(owners[i - 1])
        if i < n - 1:
            neighbors.append(owners[i + 1])
        sharers = [a for a in fr if a != owner and a in neighbors]
        if sharers:
            homed[i] = max(sharers, key=lambda a: (fr[a], -order[a]))

    stations: List[Station] = []
    start = 0
    for i in range(1, n + 1):
        if i == n or homed[i] != homed[start]:
            agent = homed[start]
            ops = tuple(c.operations[start:i])
            routes = []
            for op in ops:
                for other, f in sorted(c.fractions_of(op).items(), key=lambda kv: order[kv[0]]):
                    if other != agent:
                        routes.append(SharedRoute(op, agent, other, round(f, 12)))
            stations.append(Station(len(stations) + 1, agent, ops, tuple(routes)))
            start = i

    capacities = {i: 1 for i in range(1, len(stations))}
    for after, cap in c.buffers:
        if after in capacities:
            capacities[after] = cap
    return StationView(tuple(stations), capacities)


def expected_station_times(c: LineConfiguration, g: CapabilityGraph) -> Dict[str, float]:
    """Expected total work per agent: sum of fraction-weighted mean times."""
    from .capability_graph import operation_time

    out: Dict[str, float] = {}
    for (agent, op), f in c.assignment.items():
        if f <= _FRACTION_EPS:
            continue
        mean = operation_time(g, agent, op).expected()
        out[agent] = out.get(agent, 0.0) + f * mean
    return out


def bottleneck_time(c: LineConfiguration, g: CapabilityGraph) -> float:
    times = expected_station_times(c, g)
    return max(times.values()) if times else 0.0


def validate(c: LineConfiguration, g: CapabilityGraph) -> List[str]:
    """Return a list of violations; empty means the configuration is sound."""
    violations: List[str] = []
    known_ops = {e.name for e in g.of_kind("Operation")}
    known_agents = {e.name for e in g.of_kind("Agent")}
    seen = set()
    for op in c.operations:
        if op in seen:
            violations.append(f"operation {op} listed twice")
        seen.add(op)
        if op not in known_ops:
            violations.append(f"unknown operation {op}")

    capable: Dict[str, set] = {}
    for (agent, op), f in c.assignment.items():
        if agent not in known_agents:
            violations.append(f"unknown agent {agent}")
            continue
        if op not in known_ops:
            violations.append(f"unknown operation {op} in assignment")
            continue
        if f < -_FRACTION_EPS or f > 1.0 + _FRACTION_EPS:
            violations.append(f"fraction for ({agent}, {op}) outside [0, 1]")
        if f > _FRACTION_EPS:
            if agent not in capable:
                capable[agent] = {e.name for e in achievable_operations(g, agent)}
            if op not in capable[agent]:
                violations.append(f"{agent} lacks capability for {op}")

    for op in c.operations:
        total = sum(f for (a, o), f in c.assignment.items() if o == op)
        if abs(total - 1.0) > 1e-6:
            violations.append(f"fractions for {op} sum to {total:.9f}, not 1")

    if c.scoped_ops is not None:
        for (agent, op), f in c.assignment.items():
            if _FRACTION_EPS < f < 1.0 - _FRACTION_EPS and op not in c.scoped_ops:
                violations.append(f"fractional entry for ({agent}, {op}) outside scope")

    for after, cap in c.buffers:
        if cap < 1:
            violations.append(f"buffer after station {after} has capacity {cap} < 1")

    return violations


# -- file format ------------------------------------------------------------

_CONFIG_KEYS = {"operations", "assignment", "buffers"}
_ASSIGN_KEYS = {"agent", "op", "fraction"}
_BUFFER_KEYS = {"after_station_index", "capacity"}


def config_from_dict(data: dict) -> LineConfiguration:
    if not isinstance(data, dict):
        raise ParseError("configuration payload must be a JSON object")
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ParseError(f"unknown configuration keys: {sorted(unknown)}")
    ops = data.get("operations")
    if not isinstance(ops, list) or not all(isinstance(o, str) for o in ops) or not ops:
        raise ParseError("configuration needs a non-empty 'operations' string list")
    rows = data.get("assignment")
    if not isinstance(rows, list):
        raise ParseError("configuration needs an 'assignment' list")
    assignment: Dict[Tuple[str, str], float] = {}
    for row in rows:
        if not isinstance(row, dict):
            raise ParseError("assignment rows must be objects")
        unknown = set(row) - _ASSIGN_KEYS
        if unknown:
            raise ParseError(f"unknown assignment keys: {sorted(unknown)}")
        try:
            agent, op, fraction = row["agent"], row["op"], float(row["fraction"])
        except KeyError as e:
            raise ParseError(f"assignment row missing {e.args[0]!r}") from None
        except (TypeError, ValueError):
            raise ParseError("assignment fraction must be a number") from None
        if not isinstance(agent, str) or not isinstance(op, str):
            raise ParseError("assignment agent and op must be strings")
        if (agent, op) in assignment:
            raise ParseError(f"duplicate assignment row for ({agent}, {op})")
        assignment[(agent, op)] = fraction
    buffers: List[Tuple[int, int]] = []
    for row in data.get("buffers", []):
        if not isinstance(row, dict) or set(row) - _BUFFER_KEYS:
            raise ParseError("buffer rows must be {after_station_index, capacity}")
        try:
            buffers.append((int(row["after_station_index"]), int(row["capacity"])))
        except (KeyError, TypeError, ValueError):
            raise ParseError("buffer rows must carry integer fields") from None
    return LineConfiguration(tuple(ops), assignment, tuple(buffers))


def config_to_dict(c: LineConfiguration) -> dict:
    op_pos = {op: i for i, op in enumerate(c.operations)}
    rows = [
        {"agent": agent, "op": op, "fraction": f}
        for (agent, op), f in sorted(
            c.assignment.items(), key=lambda kv: (op_pos.get(kv[0][1], 0), kv[0][0])
        )
        if f > _FRACTION_EPS
    ]
    data = {"operations": list(c.operations), "assignment": rows}
    if c.buffers:
        data["buffers"] = [
            {"after_station_index": a, "capacity": cap} for a, cap in c.buffers
        ]
    return data


def load_config(path: str) -> LineConfiguration:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, line=e.lineno, column=e.colno) from None
    except OSError as e:
        raise ParseError(f"cannot read configuration file: {e}") from None
    return config_from_dict(data)


def save_config(c: LineConfiguration, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config_to_dict(c), fh, indent=2)
        fh.write("\n")
