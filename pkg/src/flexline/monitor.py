"""Stream monitor that turns operation-time samples into reconfiguration triggers.

Each (agent, op) stream is compared against the baseline stored in the
capability graph: when the rolling mean of the last W samples stays above
mu0 + k*sigma0/sqrt(W) long enough, the pair latches and a disturbance event
is emitted.  The latch releases once the rolling mean returns to mu0, so one
sustained slowdown yields one event.  Speed-ups are counted but never trigger.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .capability_graph import CapabilityGraph, TimeModel
from .errors import (
    InsufficientSamples,
    NonPositiveDuration,
    ParseError,
    UnknownPair,
)
from .line_model import LineConfiguration


@dataclass(frozen=True)
class BaselineStats:
    mean: float
    sd: float
    source: TimeModel

    def __post_init__(self):
        if self.mean <= 0:
            raise ValueError("baseline mean must be positive")
        if self.sd < 0:
            raise ValueError("baseline sd must be non-negative")


@dataclass(frozen=True)
class DisturbanceEvent:
    agent: str
    ops: Tuple[str, ...]
    multiplier: float
    onset: int  # sample index (per stream, 0-based) of the breaching window's start
    line_impacting: bool


class _PairState:
    __slots__ = ("samples", "seen", "breaches", "latched", "onset", "post_event", "speedups")

    def __init__(self, window: int):
        self.samples: deque = deque(maxlen=window)
        self.seen = 0
        self.breaches = 0
        self.latched = False
        self.onset: Optional[int] = None
        self.post_event = 0
        self.speedups = 0


@dataclass(frozen=True)
class _Projection:
    """Expected per-agent station times of the configured line."""

    agent_time: Dict[str, float]
    op_share: Dict[Tuple[str, str], float]  # fraction-weighted mean contribution
    bottleneck: float


@dataclass
class MonitorState:
    baselines: Dict[Tuple[str, str], BaselineStats]
    k: float = 3.0
    window: int = 10
    persistence: int = 1
    projection: Optional[_Projection] = None
    pairs: Dict[Tuple[str, str], _PairState] = field(default_factory=dict)

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("k must be positive")
        if self.window < 2:
            raise ValueError("window must be at least 2")
        if self.persistence < 1:
            raise ValueError("persistence must be at least 1")

    def _pair(self, key: Tuple[str, str]) -> _PairState:
        ps = self.pairs.get(key)
        if ps is None:
            ps = self.pairs[key] = _PairState(self.window)
        return ps


def build_monitor(
    g: CapabilityGraph,
    config: Optional[LineConfiguration] = None,
    k: float = 3.0,
    window: int = 10,
    persistence: int = 1,
) -> MonitorState:
    """Monitor every (agent, op) pair the graph has a time model for.

    With a configuration, events also judge whether the slowdown pushes the
    agent's station past the current line bottleneck; without one, events are
    conservatively marked line-impacting.
    """
    baselines = {
        key: BaselineStats(m.expected(), m.spread(), m)
        for key, m in g.time_models.items()
    }
    projection = None
    if config is not None:
        from .capability_graph import operation_time

        agent_time: Dict[str, float] = {}
        op_share: Dict[Tuple[str, str], float] = {}
        for (agent, op), f in config.assignment.items():
            if f <= 0:
                continue
            share = f * operation_time(g, agent, op).expected()
            op_share[(agent, op)] = share
            agent_time[agent] = agent_time.get(agent, 0.0) + share
        projection = _Projection(
            agent_time, op_share, max(agent_time.values(), default=0.0)
        )
    return MonitorState(baselines, k, window, persistence, projection)


def _rolling_mean(ps: _PairState) -> float:
    return sum(ps.samples) / len(ps.samples)


def _pair_multiplier(s: MonitorState, key: Tuple[str, str]) -> float:
    return _rolling_mean(s.pairs[key]) / s.baselines[key].mean


def _projected_impact(s: MonitorState, agent: str) -> bool:
    """Does the agent's projected station time exceed the line bottleneck?"""
    if s.projection is None:
        return True
    base = s.projection.agent_time.get(agent)
    if base is None:
        return False  # agent not on the line
    projected = base
    for (a, op), ps in s.pairs.items():
        if a == agent and ps.latched:
            share = s.projection.op_share.get((a, op), 0.0)
            projected += (_pair_multiplier(s, (a, op)) - 1.0) * share
    return projected > s.projection.bottleneck + 1e-12


def ingest_sample(
    s: MonitorState, agent: str, op: str, duration: float
) -> Tuple[MonitorState, Optional[DisturbanceEvent]]:
    """Feed one duration sample; returns the state and at most one event."""
    if duration <= 0:
        raise NonPositiveDuration(f"duration must be positive, got {duration}")
    key = (agent, op)
    b = s.baselines.get(key)
    if b is None:
        raise UnknownPair(f"no baseline for agent {agent!r}, op {op!r}")
    ps = s._pair(key)
    ps.samples.append(float(duration))
    ps.seen += 1
    if ps.latched:
        ps.post_event += 1
    if ps.seen < s.window:
        return s, None

    mean = _rolling_mean(ps)
    margin = s.k * b.sd / math.sqrt(s.window)
    if ps.latched:
        if mean <= b.mean:
            ps.latched = False
            ps.breaches = 0
            ps.post_event = 0
        return s, None
    if mean > b.mean + margin:
        ps.breaches += 1
    else:
        if mean < b.mean - margin:
            ps.speedups += 1
        ps.breaches = 0
        return s, None
    if ps.breaches < 1 + (s.persistence - 1) * s.window:
        return s, None

    ps.latched = True
    ps.onset = ps.seen - s.window
    ps.post_event = 0
    event = DisturbanceEvent(
        agent=agent,
        ops=(op,),
        multiplier=mean / b.mean,
        onset=ps.onset,
        line_impacting=_projected_impact(s, agent),
    )
    return s, event


def estimated_multiplier(s: MonitorState, agent: str, op: str) -> float:
    """Rolling-window multiplier for a latched pair with a settled window."""
    key = (agent, op)
    if key not in s.baselines:
        raise UnknownPair(f"no baseline for agent {agent!r}, op {op!r}")
    ps = s.pairs.get(key)
    if ps is None or not ps.latched or ps.post_event < s.window:
        have = 0 if ps is None or not ps.latched else ps.post_event
        raise InsufficientSamples(
            f"need {s.window} samples after onset for ({agent}, {op}), have {have}"
        )
    return _pair_multiplier(s, key)


def update_time_model_from_stream(s: MonitorState, agent: str, op: str) -> TimeModel:
    """Baseline model rescaled to the observed slowdown, spread kept proportional."""
    mult = estimated_multiplier(s, agent, op)
    return s.baselines[(agent, op)].source.scaled(mult)


def false_positive_rate(
    baseline: TimeModel,
    thresholds: Tuple[float, int, int] = (3.0, 10, 1),
    n_samples: int = 10_000,
    seed: int = 0,
) -> float:
    """Fraction of full-window checks an undisturbed stream would trip.

    Measures the detection rule itself (no latch suppression), so at k=3 on a
    normal baseline the rate sits near the one-sided tail of the window mean.
    """
    k, window, persistence = thresholds
    if window < 2 or k < 0 or persistence < 1:
        raise ValueError("bad thresholds")
    if n_samples < 10 * window:
        raise ValueError(f"need at least {10 * window} samples")
    mu = baseline.expected()
    margin = k * baseline.spread() / math.sqrt(window)
    need = 1 + (persistence - 1) * window
    rng = np.random.default_rng(seed)
    buf: deque = deque(maxlen=window)
    breaches = 0
    hits = 0
    checks = 0
    for _ in range(n_samples):
        buf.append(baseline.sample(rng))
        if len(buf) < window:
            continue
        checks += 1
        if sum(buf) / window > mu + margin:
            breaches += 1
            if breaches >= need:
                hits += 1
        else:
            breaches = 0
    return hits / checks if checks else 0.0


def agent_triggers(s: MonitorState) -> List[DisturbanceEvent]:
    """One aggregated event per agent with latched streams.

    The multiplier is the baseline-mean-weighted average of per-op rolling
    multipliers, the natural agent-level slowdown estimate when every op of
    the agent drifts together.
    """
    by_agent: Dict[str, List[Tuple[int, str]]] = {}
    for (agent, op), ps in s.pairs.items():
        if ps.latched:
            by_agent.setdefault(agent, []).append((ps.onset or 0, op))
    out: List[DisturbanceEvent] = []
    for agent in sorted(by_agent):
        entries = sorted(by_agent[agent])
        ops = tuple(op for _, op in entries)
        wsum = 0.0
        msum = 0.0
        for _, op in entries:
            w = s.baselines[(agent, op)].mean
            wsum += w
            msum += w * _pair_multiplier(s, (agent, op))
        out.append(
            DisturbanceEvent(
                agent=agent,
                ops=ops,
                multiplier=msum / wsum,
                onset=min(onset for onset, _ in entries),
                line_impacting=_projected_impact(s, agent),
            )
        )
    return out


def read_sample_log(path: str) -> List[Tuple[float, str, str, float]]:
    """Parse a `timestamp_s,agent,op,duration_s` CSV (header required)."""
    rows: List[Tuple[float, str, str, float]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("sample log is empty", line=1) from None
        if [h.strip() for h in header] != ["timestamp_s", "agent", "op", "duration_s"]:
            raise ParseError(
                "sample log header must be 'timestamp_s,agent,op,duration_s'", line=1
            )
        for i, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 4:
                raise ParseError(f"expected 4 fields, got {len(row)}", line=i)
            try:
                ts = float(row[0])
                dur = float(row[3])
            except ValueError:
                raise ParseError("timestamp and duration must be numbers", line=i) from None
            rows.append((ts, row[1].strip(), row[2].strip(), dur))
    return rows


def replay_samples(
    s: MonitorState, rows: Iterable[Tuple[float, str, str, float]]
) -> List[DisturbanceEvent]:
    """Drive ingest_sample over parsed log rows; returns events in order."""
    events: List[DisturbanceEvent] = []
    for _, agent, op, duration in rows:
        _, ev = ingest_sample(s, agent, op, duration)
        if ev is not None:
            events.append(ev)
    return events
