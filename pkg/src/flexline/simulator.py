"""Seeded discrete-event simulation of a serial flow line.

Parts move station to station through finite buffers; a saturated source
feeds station 1.  Operation durations are sampled from the capability graph's
time models, scaled by any active disturbance.  An operation shared between
two agents is routed per part by a Bernoulli draw.  Routed work is a handoff:
once the host station's own operations are done the part moves on and the
recipient performs its share in the buffer zone, so the host station's
effective time stays the fraction-weighted load the optimizer planned with.
A part is not released downstream until its handoff work is complete, and an
agent serving several duties processes one request at a time, FIFO.

Every random draw comes from a counter-based stream keyed by the master seed
and stable name hashes, so identical (model, seed) pairs replay identical
traces and adding a station never perturbs another station's draws.
"""

from __future__ import annotations

import hashlib
import heapq
import itertools
import math
from collections import deque
from dataclasses import dataclass, replace
from typing import Dict, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np
from scipy import stats as _scipy_stats

from .capability_graph import CapabilityGraph, TimeModel, operation_time
from .errors import InsufficientSamples, InvalidConfiguration
from .line_model import (
    DisturbanceScenario,
    LineConfiguration,
    SharedRoute,
    StationView,
    derive_stations,
    validate,
)

_MIN_DURATION = 1e-9


@dataclass(frozen=True)
class Event:
    time: float
    kind: str  # PartEnter | OpStart | OpFinish | PartDepart | BufferFull | BufferFree
    station: int
    part: int
    agent: str = ""


@dataclass(frozen=True)
class SimModel:
    view: StationView
    time_models: Mapping[Tuple[str, str], TimeModel]
    scenarios: Tuple[DisturbanceScenario, ...]
    horizon: float
    seed: int


@dataclass(frozen=True)
class SimReport:
    horizon: float
    seed: int
    throughput: int
    parts_entered: int
    parts_departed: int
    wip: int
    station_agent: Dict[int, str]
    station_time_mean: Dict[int, float]
    station_time_max: Dict[int, float]
    op_time_mean: Dict[str, float]
    buffer_occupancy_mean: Dict[int, float]
    buffer_occupancy_max: Dict[int, int]
    cycle_time_mean: float
    cycle_time_p95: float
    cycle_times: Tuple[float, ...]
    route_counts: Dict[str, Tuple[int, int]]  # op -> (recipient runs, total runs)
    events: Optional[Tuple[Event, ...]] = None

    def bottleneck(self) -> float:
        return max(self.station_time_mean.values()) if self.station_time_mean else 0.0


@dataclass(frozen=True)
class ComparisonResult:
    t_statistic: float
    p_value: float
    mean_difference: float


def _name_hash(name: str) -> int:
    return int.from_bytes(hashlib.sha256(name.encode("utf-8")).digest()[:8], "little")


def _stream(seed: int, *names: str) -> np.random.Generator:
    entropy = [seed & 0xFFFFFFFFFFFFFFFF] + [_name_hash(n) for n in names]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def build_sim(
    c: LineConfiguration,
    g: CapabilityGraph,
    scenarios: Sequence[DisturbanceScenario] = (),
    horizon: float = 3600.0,
    seed: int = 0,
) -> SimModel:
    """Translate a validated configuration into a simulation model."""
    violations = validate(c, g)
    if violations:
        raise InvalidConfiguration(violations)
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    view = derive_stations(c)
    models: Dict[Tuple[str, str], TimeModel] = {}
    for (agent, op), f in c.assignment.items():
        if f > 1e-9:
            models[(agent, op)] = operation_time(g, agent, op)
    return SimModel(view, models, tuple(scenarios), float(horizon), int(seed))


class _Run:
    """One simulation execution; all mutable state lives here."""

    def __init__(self, m: SimModel, collect_events: bool):
        self.m = m
        self.collect = collect_events
        self.now = 0.0
        self.seq = itertools.count()
        self.heap: List[Tuple[float, int, object, tuple]] = []
        stations = m.view.stations
        self.S = len(stations)
        self.stations = stations
        # per station: op -> sharing routes in line order of the recipients
        self.routes: List[Dict[str, List[SharedRoute]]] = []
        for s in stations:
            by_op: Dict[str, List[SharedRoute]] = {}
            for r in s.routes:
                by_op.setdefault(r.op, []).append(r)
            self.routes.append(by_op)
        # station state: idle | waiting | working | blocked | holding
        self.state = ["idle"] * (self.S + 1)  # 1-based
        self.part_at: List[Optional[int]] = [None] * (self.S + 1)
        self.op_ptr = [0] * (self.S + 1)
        self.acc = [0.0] * (self.S + 1)  # host work on the current part
        self.skip: List[Set[str]] = [set() for _ in range(self.S + 1)]
        self.agent_busy: Dict[str, bool] = {}
        self.agent_queue: Dict[str, deque] = {}
        for s in stations:
            self.agent_busy.setdefault(s.agent, False)
            self.agent_queue.setdefault(s.agent, deque())
            for r in s.routes:
                self.agent_busy.setdefault(r.recipient, False)
                self.agent_queue.setdefault(r.recipient, deque())
        caps = m.view.buffer_capacities
        self.buf_cap = {i: caps.get(i, 1) for i in range(1, self.S)}
        self.buf: Dict[int, deque] = {i: deque() for i in range(1, self.S)}
        self.buf_integral = {i: 0.0 for i in range(1, self.S)}
        self.buf_last = {i: 0.0 for i in range(1, self.S)}
        self.buf_max = {i: 0 for i in range(1, self.S)}
        # handoff work still owed per part: deque of (op, recipient, home station)
        self.pending: Dict[int, deque] = {}
        self.in_buffer: Dict[int, int] = {}  # part -> buffer slot index
        self.next_part = itertools.count(1)
        self.entered = 0
        self.departed = 0
        self.departure_times: List[float] = []
        self.station_sum = [0.0] * (self.S + 1)
        self.station_cnt = [0] * (self.S + 1)
        self.station_max = [0.0] * (self.S + 1)
        self.op_sum: Dict[str, float] = {}
        self.op_cnt: Dict[str, int] = {}
        self.route_counts: Dict[str, List[int]] = {}
        self.trace: List[Event] = []
        self._time_rng: Dict[Tuple[str, str], np.random.Generator] = {}
        self._route_rng: Dict[str, np.random.Generator] = {}

    # -- plumbing ---------------------------------------------------------

    def emit(self, kind: str, station: int, part: int, agent: str = "") -> None:
        if self.collect:
            self.trace.append(Event(self.now, kind, station, part, agent))

    def schedule(self, delay: float, fn, *args) -> None:
        heapq.heappush(self.heap, (self.now + delay, next(self.seq), fn, args))

    def time_rng(self, agent: str, op: str) -> np.random.Generator:
        key = (agent, op)
        if key not in self._time_rng:
            self._time_rng[key] = _stream(self.m.seed, "time", agent, op)
        return self._time_rng[key]

    def route_rng(self, op: str) -> np.random.Generator:
        if op not in self._route_rng:
            self._route_rng[op] = _stream(self.m.seed, "route", op)
        return self._route_rng[op]

    def buffer_track(self, i: int) -> None:
        # called immediately before the deque mutates
        self.buf_integral[i] += len(self.buf[i]) * (self.now - self.buf_last[i])
        self.buf_last[i] = self.now

    def sample_duration(self, agent: str, op: str) -> float:
        model = self.m.time_models[(agent, op)]
        d = model.sample(self.time_rng(agent, op))
        for sc in self.m.scenarios:
            if sc.applies(agent, op, self.now):
                d *= sc.time_multiplier
        d = max(d, _MIN_DURATION)
        self.op_sum[op] = self.op_sum.get(op, 0.0) + d
        self.op_cnt[op] = self.op_cnt.get(op, 0) + 1
        return d

    def request(self, agent: str, token: tuple) -> None:
        if self.agent_busy[agent]:
            self.agent_queue[agent].append(token)
        else:
            self.start_work(agent, token)

    def release(self, agent: str) -> None:
        queue = self.agent_queue[agent]
        if queue:
            self.start_work(agent, queue.popleft())
        else:
            self.agent_busy[agent] = False

    def start_work(self, agent: str, token: tuple) -> None:
        self.agent_busy[agent] = True
        if token[0] == "host":
            self.start_host_op(token[1], agent)
        else:
            self.start_handoff_op(token[1], token[2], token[3], agent)

    # -- line mechanics -----------------------------------------------------

    def try_pull(self, s: int) -> None:
        if self.state[s] != "idle":
            return
        if s == 1:
            part = next(self.next_part)
            self.entered += 1
        else:
            queue = self.buf[s - 1]
            if not queue or self.pending.get(queue[0]):
                return  # empty, or head part still owes handoff work
            self.buffer_track(s - 1)
            part = queue.popleft()
            del self.in_buffer[part]
        # claim the station before any cascading call can re-enter this pull
        self.state[s] = "waiting"
        self.part_at[s] = part
        self.op_ptr[s] = 0
        self.acc[s] = 0.0
        self.emit("PartEnter", s, part)
        self.plan_routes(s, part)
        if s > 1:
            self.unblock(s - 1)
        self.advance_host(s)

    def plan_routes(self, s: int, part: int) -> None:
        """Draw the performer of every shared op of this station for one part."""
        station = self.stations[s - 1]
        self.skip[s].clear()
        handed: List[Tuple[str, str, int]] = []
        for op in station.ops:
            routes = self.routes[s - 1].get(op)
            if not routes:
                continue
            counts = self.route_counts.setdefault(op, [0, 0])
            counts[1] += 1
            u = self.route_rng(op).random()
            edge = 0.0
            for r in routes:
                edge += r.fraction
                if u < edge:
                    self.skip[s].add(op)
                    handed.append((op, r.recipient, s))
                    counts[0] += 1
                    break
        if handed:
            self.pending[part] = deque(handed)

    def advance_host(self, s: int) -> None:
        """Run the station agent's next own op, or close out the host phase."""
        station = self.stations[s - 1]
        ptr = self.op_ptr[s]
        while ptr < len(station.ops) and station.ops[ptr] in self.skip[s]:
            ptr += 1
        self.op_ptr[s] = ptr
        if ptr >= len(station.ops):
            self.host_done(s)
            return
        self.state[s] = "waiting"
        self.request(station.agent, ("host", s))

    def start_host_op(self, s: int, agent: str) -> None:
        op = self.stations[s - 1].ops[self.op_ptr[s]]
        self.state[s] = "working"
        self.emit("OpStart", s, self.part_at[s], agent)
        d = self.sample_duration(agent, op)
        self.acc[s] += d
        self.schedule(d, self.finish_host_op, s, agent)

    def finish_host_op(self, s: int, agent: str) -> None:
        self.emit("OpFinish", s, self.part_at[s], agent)
        self.release(agent)
        self.op_ptr[s] += 1
        self.advance_host(s)

    def host_done(self, s: int) -> None:
        """All host-performed ops finished: record the visit and move along."""
        part = self.part_at[s]
        self.station_sum[s] += self.acc[s]
        self.station_cnt[s] += 1
        self.station_max[s] = max(self.station_max[s], self.acc[s])
        queue = self.pending.get(part)
        if queue:
            self.request(queue[0][1], ("handoff", part, queue[0][0], queue[0][2]))
        if s == self.S:
            if self.pending.get(part):
                self.state[s] = "holding"
            else:
                self.depart(s)
            return
        if len(self.buf[s]) < self.buf_cap[s]:
            self.move_to_buffer(s, part)
            self.free_station(s)
        else:
            self.state[s] = "blocked"
            self.emit("BufferFull", s, part)

    def move_to_buffer(self, s: int, part: int) -> None:
        self.buffer_track(s)
        self.buf[s].append(part)
        self.buf_max[s] = max(self.buf_max[s], len(self.buf[s]))
        self.in_buffer[part] = s
        self.try_pull(s + 1)

    def free_station(self, s: int) -> None:
        self.state[s] = "idle"
        self.part_at[s] = None
        self.acc[s] = 0.0
        self.try_pull(s)

    def unblock(self, s: int) -> None:
        """A slot opened in buffer s; move a blocked upstream part in."""
        if s >= 1 and self.state[s] == "blocked" and len(self.buf[s]) < self.buf_cap[s]:
            part = self.part_at[s]
            self.emit("BufferFree", s, part)
            # release occupancy first: move_to_buffer cascades downstream pulls
            self.state[s] = "idle"
            self.part_at[s] = None
            self.acc[s] = 0.0
            self.move_to_buffer(s, part)
            self.try_pull(s)

    # -- handoff work --------------------------------------------------------

    def start_handoff_op(self, part: int, op: str, home: int, agent: str) -> None:
        self.emit("OpStart", home, part, agent)
        d = self.sample_duration(agent, op)
        self.schedule(d, self.finish_handoff_op, part, op, home, agent)

    def finish_handoff_op(self, part: int, op: str, home: int, agent: str) -> None:
        self.emit("OpFinish", home, part, agent)
        self.release(agent)
        queue = self.pending[part]
        queue.popleft()
        if queue:
            self.request(queue[0][1], ("handoff", part, queue[0][0], queue[0][2]))
            return
        del self.pending[part]
        slot = self.in_buffer.get(part)
        if slot is not None:
            if self.buf[slot][0] == part:
                self.try_pull(slot + 1)
        elif self.part_at[self.S] == part and self.state[self.S] == "holding":
            self.depart(self.S)

    def depart(self, s: int) -> None:
        part = self.part_at[s]
        self.emit("PartDepart", s, part)
        self.departed += 1
        self.departure_times.append(self.now)
        self.free_station(s)

    # -- driver ------------------------------------------------------------

    def execute(self) -> SimReport:
        self.try_pull(1)
        H = self.m.horizon
        while self.heap:
            t, _, fn, args = heapq.heappop(self.heap)
            if t > H:
                break
            self.now = t
            fn(*args)
        self.now = H
        for i in self.buf:
            self.buffer_track(i)

        gaps = tuple(
            b - a for a, b in zip(self.departure_times, self.departure_times[1:])
        )
        report = SimReport(
            horizon=H,
            seed=self.m.seed,
            throughput=max(0, self.departed - 1),
            parts_entered=self.entered,
            parts_departed=self.departed,
            wip=self.entered - self.departed,
            station_agent={s.index: s.agent for s in self.stations},
            station_time_mean={
                i: (self.station_sum[i] / self.station_cnt[i] if self.station_cnt[i] else 0.0)
                for i in range(1, self.S + 1)
            },
            station_time_max={i: self.station_max[i] for i in range(1, self.S + 1)},
            op_time_mean={
                op: self.op_sum[op] / self.op_cnt[op] for op in sorted(self.op_sum)
            },
            buffer_occupancy_mean={
                i: self.buf_integral[i] / H for i in sorted(self.buf_integral)
            },
            buffer_occupancy_max=dict(sorted(self.buf_max.items())),
            cycle_time_mean=float(np.mean(gaps)) if gaps else 0.0,
            cycle_time_p95=float(np.percentile(gaps, 95)) if gaps else 0.0,
            cycle_times=gaps,
            route_counts={op: (c[0], c[1]) for op, c in sorted(self.route_counts.items())},
            events=tuple(self.trace) if self.collect else None,
        )
        return report


def run(m: SimModel, collect_events: bool = False) -> SimReport:
    """Execute one seeded simulation run to the model's horizon."""
    return _Run(m, collect_events).execute()


def replicate(
    m: SimModel, n: int, base_seed: Optional[int] = None
) -> Tuple[List[SimReport], Dict[str, Tuple[float, float]]]:
    """n independent runs with consecutive seeds, plus (mean, sd) aggregates."""
    if n < 1:
        raise ValueError("replication count must be at least 1")
    start = m.seed if base_seed is None else int(base_seed)
    reports = [run(replace(m, seed=start + i)) for i in range(n)]
    metrics = {
        "throughput": [float(r.throughput) for r in reports],
        "cycle_time_mean": [r.cycle_time_mean for r in reports],
        "cycle_time_p95": [r.cycle_time_p95 for r in reports],
        "bottleneck": [r.bottleneck() for r in reports],
    }
    aggregate = {
        name: (float(np.mean(vals)), float(np.std(vals)))
        for name, vals in metrics.items()
    }
    return reports, aggregate


def compare_reports(a: SimReport, b: SimReport) -> ComparisonResult:
    """Welch's t-test on per-part cycle times of two runs."""
    xa, xb = a.cycle_times, b.cycle_times
    if len(xa) < 2 or len(xb) < 2:
        raise InsufficientSamples(
            f"need at least 2 cycle samples per side, got {len(xa)} and {len(xb)}"
        )
    diff = float(np.mean(xa) - np.mean(xb))
    if np.std(xa) == 0.0 and np.std(xb) == 0.0:
        if diff == 0.0:
            return ComparisonResult(0.0, 1.0, 0.0)
        return ComparisonResult(math.copysign(math.inf, diff), 0.0, diff)
    t, p = _scipy_stats.ttest_ind(xa, xb, equal_var=False)
    return ComparisonResult(float(t), float(p), diff)


def report_to_dict(r: SimReport) -> dict:
    """JSON-ready summary of a run; raw cycle times and events are omitted."""
    return {
        "horizon_s": r.horizon,
        "seed": r.seed,
        "throughput": r.throughput,
        "parts_entered": r.parts_entered,
        "parts_departed": r.parts_departed,
        "wip": r.wip,
        "bottleneck_s": round(r.bottleneck(), 6),
        "stations": {
            str(i): {
                "agent": r.station_agent[i],
                "time_mean_s": round(r.station_time_mean[i], 6),
                "time_max_s": round(r.station_time_max[i], 6),
            }
            for i in sorted(r.station_agent)
        },
        "op_time_mean_s": {
            op: round(v, 6) for op, v in sorted(r.op_time_mean.items())
        },
        "buffers": {
            str(i): {
                "occupancy_mean": round(r.buffer_occupancy_mean[i], 6),
                "occupancy_max": r.buffer_occupancy_max[i],
            }
            for i in sorted(r.buffer_occupancy_mean)
        },
        "cycle_time_mean_s": round(r.cycle_time_mean, 6),
        "cycle_time_p95_s": round(r.cycle_time_p95, 6),
        "route_counts": {
            op: list(pair) for op, pair in sorted(r.route_counts.items())
        },
    }
