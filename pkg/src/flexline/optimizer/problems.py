"""Problem and solution containers for line assignment optimization.

An assignment problem is a snapshot of who could run what and how long it
takes, decoupled from the capability graph so solvers stay purely numeric.
Two builders translate graphs into problems: one for planning a line from
scratch and one for adjusting a running line around a disturbed agent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Mapping, Optional, Sequence, Tuple

from ..capability_graph import CapabilityGraph, EntityId, achievable_operations
from ..errors import ConsistencyError, Infeasible, UnknownEntity
from ..line_model import LineConfiguration, derive_stations

_ADJACENT_RADIUS = 2


@dataclass(frozen=True)
class Weights:
    """Objective weights: bottleneck time, agent usages, assignment churn."""

    c_t: float
    c_z: float
    c_x: float = 0.0

    def __post_init__(self) -> None:
        if self.c_t < 0 or self.c_z < 0 or self.c_x < 0:
            raise ValueError("objective weights must be nonnegative")
        if self.c_t == 0 and self.c_z == 0:
            raise ValueError("at least one of c_t, c_z must be positive")

    @staticmethod
    def with_default_adjustment(c_t: float, c_z: float) -> "Weights":
        """Adjustment weight small enough to act only as a tie breaker."""
        return Weights(c_t, c_z, 0.001 * min(c_t, c_z))


@dataclass(frozen=True)
class InitProblem:
    """Assign every operation to exactly one agent, contiguously per agent."""

    operations: Tuple[str, ...]
    agents: Tuple[str, ...]
    capable: Mapping[str, FrozenSet[int]]  # agent -> op indices it can run
    times: Mapping[Tuple[str, int], float]  # expected duration per (agent, op)
    weights: Weights

    def time_row(self, agent: str) -> Dict[int, float]:
        return {j: self.times[(agent, j)] for j in self.capable[agent]}


@dataclass(frozen=True)
class ReconfigProblem:
    """Shift work out of a disturbed agent's operation block.

    Only operations in ``scoped_ops`` may move, and only the listed agent
    groups may change: the disturbed and adjacent agents can take fractional
    shares of a scoped operation (two block runs allowed), other line agents
    and idle agents take whole operations (one run).  Everything outside the
    scope is pinned to the current assignment.
    """

    operations: Tuple[str, ...]
    agents: Tuple[str, ...]
    capable: Mapping[str, FrozenSet[int]]
    times: Mapping[Tuple[str, int], float]
    weights: Weights
    baseline: Mapping[Tuple[str, int], float]  # current fractions, sparse
    scoped_ops: Tuple[int, ...]
    disturbed: FrozenSet[str]
    adjacent: FrozenSet[str]
    line_agents: FrozenSet[str]
    unused_agents: FrozenSet[str]
    allow_sharing: bool = True

    def __post_init__(self) -> None:
        groups = [self.disturbed, self.adjacent, self.line_agents, self.unused_agents]
        seen: set = set()
        for g in groups:
            if g & seen:
                raise ConsistencyError("agent appears in more than one reconfiguration group")
            seen |= g
        floor = min(self.weights.c_t, self.weights.c_z)
        if floor > 0 and self.weights.c_x >= 0.01 * floor:
            raise ValueError("adjustment weight must stay below 0.01 * min(c_t, c_z)")

    def fractional_agents(self) -> FrozenSet[str]:
        return self.disturbed | self.adjacent

    def baseline_of(self, agent: str, op: int) -> float:
        return float(self.baseline.get((agent, op), 0.0))


@dataclass(frozen=True)
class SolveStats:
    nodes: int
    seconds: float
    method: str
    lower_bound: float = float("nan")


@dataclass(frozen=True)
class Solution:
    """Optimizer output: an assignment plus its objective decomposition."""

    assignment: Dict[Tuple[str, int], float]
    operations: Tuple[str, ...]
    objective: float
    bottleneck: float
    station_times: Dict[str, float]
    usages: Dict[str, float]  # contiguous run count per agent (z)
    agents_used: int
    adjustment: float
    stats: SolveStats
    mode: Optional[str] = None  # reconfiguration: "config" or "plan"

    def total_usages(self) -> float:
        return float(sum(self.usages.values()))

    def to_configuration(
        self, buffers: Sequence[Tuple[int, int]] = (), scoped: Sequence[str] = ()
    ) -> LineConfiguration:
        assignment: Dict[Tuple[str, str], float] = {}
        covered = set()
        for (agent, j), frac in sorted(self.assignment.items(), key=lambda kv: (kv[0][1], kv[0][0])):
            if frac <= 1e-9:
                continue
            assignment[(agent, self.operations[j])] = round(frac, 9)
            covered.add(self.operations[j])
        return LineConfiguration(
            operations=tuple(op for op in self.operations if op in covered),
            assignment=assignment,
            buffers=tuple(buffers),
            scoped_ops=frozenset(scoped) if scoped else None,
        )


@dataclass(frozen=True)
class ParetoPoint:
    c_t: float
    c_z: float
    bottleneck: float
    agents_used: int
    solution: Solution = field(compare=False)


def _op_entities(graph: CapabilityGraph) -> Tuple[EntityId, ...]:
    return tuple(e for e in graph.entities if e.kind == "Operation")


def _agent_entities(graph: CapabilityGraph) -> Tuple[EntityId, ...]:
    return tuple(e for e in graph.entities if e.kind == "Agent")


def build_init_problem(graph: CapabilityGraph, weights: Weights) -> InitProblem:
    """Snapshot the graph's agents, capabilities, and expected times."""
    ops = _op_entities(graph)
    agents = _agent_entities(graph)
    if not ops:
        raise Infeasible("the graph defines no operations to assign")
    index = {op.name: j for j, op in enumerate(ops)}
    capable: Dict[str, FrozenSet[int]] = {}
    times: Dict[Tuple[str, int], float] = {}
    for agent in agents:
        reachable = set()
        for op in achievable_operations(graph, agent):
            j = index[op.name]
            model = graph.time_models.get((agent.name, op.name))
            if model is None:
                continue
            reachable.add(j)
            times[(agent.name, j)] = model.expected()
        capable[agent.name] = frozenset(reachable)
    return InitProblem(
        operations=tuple(op.name for op in ops),
        agents=tuple(a.name for a in agents),
        capable=capable,
        times=times,
        weights=weights,
    )


def build_reconfig_problem(
    graph: CapabilityGraph,
    config: LineConfiguration,
    disturbed_agent: str,
    weights: Weights,
    allow_sharing: bool = True,
    adjacency_radius: int = _ADJACENT_RADIUS,
) -> ReconfigProblem:
    """Scope a reconfiguration around one disturbed agent.

    The graph must already reflect the disturbed processing times.  The scope
    is the disturbed agent's current operation block; adjacent agents are the
    owners of stations within ``adjacency_radius`` positions of its station.
    """
    if weights.c_x == 0.0:
        weights = Weights.with_default_adjustment(weights.c_t, weights.c_z)
    ops = _op_entities(graph)
    agents = _agent_entities(graph)
    agent_names = {a.name for a in agents}
    if disturbed_agent not in agent_names:
        raise UnknownEntity(f"unknown agent '{disturbed_agent}'")
    index = {op.name: j for j, op in enumerate(ops)}
    for op in config.operations:
        if op not in index:
            raise UnknownEntity(f"configuration references unknown operation '{op}'")

    baseline: Dict[Tuple[str, int], float] = {}
    for (agent, op), frac in config.assignment.items():
        if agent not in agent_names:
            raise UnknownEntity(f"configuration references unknown agent '{agent}'")
        if op not in index:
            raise UnknownEntity(f"configuration references unknown operation '{op}'")
        if frac > 0:
            if abs(frac - 1.0) > 1e-9:
                raise ConsistencyError(
                    "reconfiguration starts from a whole-operation assignment;"
                    f" '{agent}' holds a fractional share of '{op}'"
                )
            baseline[(agent, index[op])] = 1.0

    scoped = sorted(j for (a, j) in baseline if a == disturbed_agent)
    if not scoped:
        raise Infeasible(f"agent '{disturbed_agent}' holds no operations in the configuration")

    view = derive_stations(config)
    station_of: Dict[str, int] = {s.agent: s.index for s in view.stations}
    if disturbed_agent not in station_of:
        raise Infeasible(f"agent '{disturbed_agent}' owns no station in the configuration")
    home = station_of[disturbed_agent]
    adjacent = frozenset(
        a
        for a, idx in station_of.items()
        if a != disturbed_agent and abs(idx - home) <= adjacency_radius
    )
    in_config = {a for (a, _) in baseline}
    line_agents = frozenset(in_config - adjacent - {disturbed_agent})
    unused = frozenset(agent_names - in_config - adjacent - {disturbed_agent})

    capable: Dict[str, FrozenSet[int]] = {}
    times: Dict[Tuple[str, int], float] = {}
    for agent in agents:
        reachable = set()
        for op in achievable_operations(graph, agent):
            j = index[op.name]
            model = graph.time_models.get((agent.name, op.name))
            if model is None:
                continue
            reachable.add(j)
            times[(agent.name, j)] = model.expected()
        capable[agent.name] = frozenset(reachable)

    # Pinned assignments must stay runnable even if capability data is sparse.
    for (agent, j), frac in baseline.items():
        if (agent, j) not in times:
            raise ConsistencyError(
                f"no usable time model for '{agent}' on '{ops[j].name}' held in the configuration"
            )

    return ReconfigProblem(
        operations=tuple(op.name for op in ops),
        agents=tuple(a.name for a in agents),
        capable=capable,
        times=times,
        weights=weights,
        baseline=baseline,
        scoped_ops=tuple(scoped),
        disturbed=frozenset({disturbed_agent}),
        adjacent=adjacent,
        line_agents=line_agents,
        unused_agents=unused,
        allow_sharing=allow_sharing,
    )
