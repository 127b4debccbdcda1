"""Exact solvers for line initialization and scoped reconfiguration.

Initialization assigns every operation to one agent so that each agent's
operations form a single contiguous block, minimizing a weighted sum of the
bottleneck time and the number of agents.  Two cooperating engines share the
work: a dynamic program over contiguous segments that yields both a global
lower bound and a repaired feasible plan (exact whenever interchangeable
agents are plentiful), and a best-first branch-and-bound over the LP
relaxation for everything the DP cannot certify.

Reconfiguration reuses the branch-and-bound on a scoped model where only the
disturbed agent's operations may move and only nearby agents may absorb
fractional shares; the number of contiguous usages is measured as the total
positive variation of each agent's assignment row.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass, replace
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..errors import HitNodeLimit, Infeasible, NumericalFailure
from .lp import INFEASIBLE, OPTIMAL, Basis, BoundedSimplex
from .problems import (
    InitProblem,
    ParetoPoint,
    ReconfigProblem,
    Solution,
    SolveStats,
    Weights,
)

_NODE_LIMIT = 10**6
_INT_TOL = 1e-6
_GAP_TOL = 1e-9
_SNAP_TOL = 1e-7

# Objective selectors used by the Pareto sweep's lexicographic refinement.
_OBJ_WEIGHTED = "weighted"
_OBJ_AGENTS = "agents"
_OBJ_BOTTLENECK = "bottleneck"


# ---------------------------------------------------------------------------
# Generic MILP container and branch-and-bound driver
# ---------------------------------------------------------------------------


@dataclass
class _Milp:
    """Sparse MILP rows over a fixed variable block, minimization."""

    n: int
    c: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    eq_rows: List[Tuple[Dict[int, float], float]]
    ub_rows: List[Tuple[Dict[int, float], float]]
    binaries: List[int]
    meta: Dict[int, Tuple[int, int]]  # branching tie order per binary
    const: float = 0.0


def _build_core(m: _Milp) -> Tuple[BoundedSimplex, np.ndarray, np.ndarray, np.ndarray]:
    rows = len(m.eq_rows) + len(m.ub_rows)
    n_slack = len(m.ub_rows)
    A = np.zeros((rows, m.n + n_slack))
    b = np.zeros(rows)
    for i, (coefs, rhs) in enumerate(m.eq_rows):
        for idx, v in coefs.items():
            A[i, idx] = v
        b[i] = rhs
    for i, (coefs, rhs) in enumerate(m.ub_rows):
        r = len(m.eq_rows) + i
        for idx, v in coefs.items():
            A[r, idx] = v
        A[r, m.n + i] = 1.0
        b[r] = rhs
    lb = np.concatenate([m.lb, np.zeros(n_slack)])
    ub = np.concatenate([m.ub, np.full(n_slack, np.inf)])
    core = BoundedSimplex(A, b, lb, ub)
    c_full = np.concatenate([m.c, np.zeros(n_slack)])
    return core, c_full, core.lb.copy(), core.ub.copy()


def _branch_var(m: _Milp, x: np.ndarray) -> Optional[int]:
    best = None
    best_key: Tuple[float, Tuple[int, int]] = (0.0, (0, 0))
    for i in m.binaries:
        f = x[i] - math.floor(x[i])
        dist = min(f, 1.0 - f)
        if dist <= _INT_TOL:
            continue
        key = (-dist, m.meta.get(i, (i, i)))
        if best is None or key < best_key:
            best = i
            best_key = key
    return best


def _solve_milp(
    m: _Milp,
    node_limit: int,
    incumbent_x: Optional[np.ndarray] = None,
    incumbent_obj: float = math.inf,
) -> Optional[Tuple[np.ndarray, float, int]]:
    """Best-first branch and bound.  Returns (x, objective, nodes) or None
    when the problem is infeasible and no incumbent was supplied."""
    core, c_full, base_lb, base_ub = _build_core(m)

    def lp_at(diffs: Tuple[Tuple[int, float, float], ...], basis: Optional[Basis]) -> str:
        core.lb[:] = base_lb
        core.ub[:] = base_ub
        for idx, lo, hi in diffs:
            core.lb[idx] = lo
            core.ub[idx] = hi
        if basis is not None:
            try:
                return core.resolve(c_full, basis)
            except NumericalFailure:
                pass
        return core.solve(c_full)

    nodes = 0
    status = lp_at((), None)
    nodes += 1
    if status == INFEASIBLE:
        if incumbent_x is None:
            return None
        return incumbent_x, incumbent_obj, nodes
    if status != OPTIMAL:
        raise NumericalFailure(f"root relaxation reported {status}")

    best_x = incumbent_x
    best_obj = incumbent_obj
    counter = itertools.count()
    heap: List[Tuple[float, int, Tuple[Tuple[int, float, float], ...], Optional[Basis]]] = []

    def process(status: str) -> None:
        nonlocal best_x, best_obj
        if status == INFEASIBLE:
            return
        if status != OPTIMAL:
            raise NumericalFailure(f"node relaxation reported {status}")
        obj = core.objective(c_full)
        if obj >= best_obj - _GAP_TOL:
            return
        x = core.solution()
        var = _branch_var(m, x)
        if var is None:
            best_x = x[: m.n].copy()
            best_obj = obj
            return
        snap = core.snapshot()
        down = diffs + ((var, 0.0, 0.0),)
        up = diffs + ((var, 1.0, 1.0),)
        heapq.heappush(heap, (obj, next(counter), down, snap))
        heapq.heappush(heap, (obj, next(counter), up, snap))

    diffs: Tuple[Tuple[int, float, float], ...] = ()
    process(status)
    while heap:
        bound, _, diffs, basis = heapq.heappop(heap)
        if bound >= best_obj - _GAP_TOL:
            continue
        if nodes >= node_limit:
            raise HitNodeLimit(f"exceeded {node_limit} branch-and-bound nodes")
        nodes += 1
        process(lp_at(diffs, basis))

    if best_x is None:
        return None
    x = best_x.copy()
    for i in m.binaries:
        if abs(x[i] - round(x[i])) < _SNAP_TOL:
            x[i] = round(x[i])
    return x, best_obj, nodes


# ---------------------------------------------------------------------------
# Initialization: segment DP bound + repair
# ---------------------------------------------------------------------------


@dataclass
class _MenuEntry:
    m: int
    relaxed_b: float  # minimax segment time, agents reusable (lower bound)
    segments: Optional[List[Tuple[int, int]]]
    agents: Optional[List[str]]  # distinct-agent repair, or None
    repaired_b: float  # bottleneck of the repair, inf when none


def _capability_runs(indices: FrozenSet[int]) -> List[List[int]]:
    runs: List[List[int]] = []
    for j in sorted(indices):
        if runs and runs[-1][-1] == j - 1:
            runs[-1].append(j)
        else:
            runs.append([j])
    return runs


def _segment_menu(p: InitProblem) -> List[_MenuEntry]:
    n = len(p.operations)
    best = np.full((n, n), np.inf)
    for agent in p.agents:
        for run in _capability_runs(p.capable[agent]):
            for ai, a in enumerate(run):
                total = 0.0
                for b in run[ai:]:
                    total += p.times[(agent, b)]
                    if total < best[a, b]:
                        best[a, b] = total

    # D[m][i]: minimax segment time covering the first i operations with m
    # segments, agents treated as reusable.
    D = np.full((n + 1, n + 1), np.inf)
    D[0, 0] = 0.0
    split = np.zeros((n + 1, n + 1), dtype=np.int64)
    for m in range(1, n + 1):
        for i in range(m, n + 1):
            best_v = np.inf
            best_s = -1
            for s in range(m - 1, i):
                v = max(D[m - 1, s], best[s, i - 1])
                if v < best_v - 1e-15:
                    best_v = v
                    best_s = s
            D[m, i] = best_v
            split[m, i] = best_s

    menu: List[_MenuEntry] = []
    order = {a: i for i, a in enumerate(p.agents)}
    for m in range(1, n + 1):
        relaxed = float(D[m, n])
        if not np.isfinite(relaxed):
            continue
        segments: List[Tuple[int, int]] = []
        i = n
        for mm in range(m, 0, -1):
            s = int(split[mm, i])
            segments.append((s, i - 1))
            i = s
        segments.reverse()
        used: set = set()
        agents: List[str] = []
        times: List[float] = []
        ok = True
        for a, b in segments:
            cands = []
            for agent in p.agents:
                if agent in used:
                    continue
                caps = p.capable[agent]
                if all(j in caps for j in range(a, b + 1)):
                    t = sum(p.times[(agent, j)] for j in range(a, b + 1))
                    cands.append((t, order[agent], agent))
            if not cands:
                ok = False
                break
            t, _, agent = min(cands)
            used.add(agent)
            agents.append(agent)
            times.append(t)
        if ok:
            menu.append(_MenuEntry(m, relaxed, segments, agents, max(times)))
        else:
            menu.append(_MenuEntry(m, relaxed, segments, None, math.inf))
    return menu


def _runs_of(indices: Sequence[int]) -> int:
    runs = 0
    prev = None
    for j in sorted(indices):
        if prev is None or j != prev + 1:
            runs += 1
        prev = j
    return runs


def _init_solution(
    p: InitProblem,
    owner: Mapping[int, str],
    nodes: int,
    seconds: float,
    method: str,
    lower_bound: float,
) -> Solution:
    per_agent: Dict[str, List[int]] = {}
    for j, agent in owner.items():
        per_agent.setdefault(agent, []).append(j)
    station_times = {
        a: sum(p.times[(a, j)] for j in js) for a, js in per_agent.items()
    }
    usages = {a: float(_runs_of(js)) for a, js in per_agent.items()}
    bottleneck = max(station_times.values())
    objective = p.weights.c_t * bottleneck + p.weights.c_z * sum(usages.values())
    return Solution(
        assignment={(a, j): 1.0 for j, a in owner.items()},
        operations=p.operations,
        objective=objective,
        bottleneck=bottleneck,
        station_times=station_times,
        usages=usages,
        agents_used=len(per_agent),
        adjustment=0.0,
        stats=SolveStats(nodes, seconds, method, lower_bound),
    )


def _twin_groups(
    agents: Sequence[str],
    capable: Mapping[str, FrozenSet[int]],
    times: Mapping[Tuple[str, int], float],
) -> List[List[str]]:
    groups: Dict[Tuple, List[str]] = {}
    for a in agents:
        key = tuple(sorted((j, times[(a, j)]) for j in capable[a]))
        groups.setdefault(key, []).append(a)
    return [g for g in groups.values() if len(g) > 1]


def _init_milp(
    p: InitProblem,
    objective: str,
    bottleneck_cap: Optional[float],
    usage_cap: Optional[float],
    objective_cap: Optional[float],
) -> Tuple[_Milp, Dict[Tuple[str, int], int]]:
    n_ops = len(p.operations)
    x_idx: Dict[Tuple[str, int], int] = {}
    y_idx: Dict[Tuple[str, int], int] = {}
    order = {a: i for i, a in enumerate(p.agents)}
    nxt = 0
    for a in p.agents:
        for j in sorted(p.capable[a]):
            x_idx[(a, j)] = nxt
            nxt += 1
    for a in p.agents:
        for j in sorted(p.capable[a]):
            y_idx[(a, j)] = nxt
            nxt += 1
    t_idx = nxt
    nxt += 1

    lb = np.zeros(nxt)
    ub = np.ones(nxt)
    heaviest = sum(
        max(p.times[(a, j)] for a in p.agents if j in p.capable[a])
        for j in range(n_ops)
    )
    floor = max(
        min(p.times[(a, j)] for a in p.agents if j in p.capable[a])
        for j in range(n_ops)
    )
    lb[t_idx] = floor
    ub[t_idx] = heaviest + 1.0
    if bottleneck_cap is not None:
        ub[t_idx] = min(ub[t_idx], bottleneck_cap)

    eq_rows: List[Tuple[Dict[int, float], float]] = []
    for j in range(n_ops):
        row = {x_idx[(a, j)]: 1.0 for a in p.agents if j in p.capable[a]}
        eq_rows.append((row, 1.0))

    ub_rows: List[Tuple[Dict[int, float], float]] = []
    for a in p.agents:
        for j in sorted(p.capable[a]):
            row = {x_idx[(a, j)]: 1.0, y_idx[(a, j)]: -1.0}
            if j - 1 in p.capable[a]:
                row[x_idx[(a, j - 1)]] = -1.0
            ub_rows.append((row, 0.0))
        if p.capable[a]:
            ub_rows.append(({y_idx[(a, j)]: 1.0 for j in p.capable[a]}, 1.0))
            ub_rows.append(
                (
                    {
                        **{x_idx[(a, j)]: p.times[(a, j)] for j in p.capable[a]},
                        t_idx: -1.0,
                    },
                    0.0,
                )
            )
    for group in _twin_groups(p.agents, p.capable, p.times):
        for a1, a2 in zip(group, group[1:]):
            row = {y_idx[(a2, j)]: 1.0 for j in p.capable[a2]}
            for j in p.capable[a1]:
                row[y_idx[(a1, j)]] = row.get(y_idx[(a1, j)], 0.0) - 1.0
            ub_rows.append((row, 0.0))
    if usage_cap is not None:
        ub_rows.append(({idx: 1.0 for idx in y_idx.values()}, usage_cap))

    weighted = np.zeros(nxt)
    weighted[t_idx] = p.weights.c_t
    for idx in y_idx.values():
        weighted[idx] = p.weights.c_z
    if objective_cap is not None:
        ub_rows.append(({i: weighted[i] for i in range(nxt) if weighted[i]}, objective_cap))

    c = np.zeros(nxt)
    if objective == _OBJ_WEIGHTED:
        c = weighted
    elif objective == _OBJ_AGENTS:
        for idx in y_idx.values():
            c[idx] = 1.0
    elif objective == _OBJ_BOTTLENECK:
        c[t_idx] = 1.0
    else:
        raise ValueError(f"unknown objective '{objective}'")

    meta = {idx: (j, order[a]) for (a, j), idx in x_idx.items()}
    milp = _Milp(
        n=nxt,
        c=c,
        lb=lb,
        ub=ub,
        eq_rows=eq_rows,
        ub_rows=ub_rows,
        binaries=sorted(x_idx.values()),
        meta=meta,
        const=0.0,
    )
    return milp, x_idx, y_idx, t_idx


def _menu_value(objective: str, w: Weights, b: float, m: int) -> float:
    if objective == _OBJ_WEIGHTED:
        return w.c_t * b + w.c_z * m
    if objective == _OBJ_AGENTS:
        return float(m)
    return b


def solve_init(
    p: InitProblem,
    node_limit: int = _NODE_LIMIT,
    *,
    objective: str = _OBJ_WEIGHTED,
    bottleneck_cap: Optional[float] = None,
    usage_cap: Optional[float] = None,
    objective_cap: Optional[float] = None,
) -> Solution:
    """Globally optimal contiguous assignment of every operation.

    The refinement knobs (alternate objectives and caps) serve the Pareto
    sweep's lexicographic tie-breaking; plain calls use the weighted default.
    """
    t0 = time.perf_counter()
    for j, op in enumerate(p.operations):
        if not any(j in p.capable[a] for a in p.agents):
            raise Infeasible(
                f"operation '{op}' has no capable agent; check if more agents are available"
            )

    menu = _segment_menu(p)

    def relaxed_ok(e: _MenuEntry) -> bool:
        if bottleneck_cap is not None and e.relaxed_b > bottleneck_cap + 1e-9:
            return False
        if usage_cap is not None and e.m > usage_cap + 1e-9:
            return False
        if objective_cap is not None:
            if _menu_value(_OBJ_WEIGHTED, p.weights, e.relaxed_b, e.m) > objective_cap + 1e-9:
                return False
        return True

    def repaired_ok(e: _MenuEntry) -> bool:
        if e.agents is None:
            return False
        if bottleneck_cap is not None and e.repaired_b > bottleneck_cap + 1e-9:
            return False
        if usage_cap is not None and e.m > usage_cap + 1e-9:
            return False
        if objective_cap is not None:
            if _menu_value(_OBJ_WEIGHTED, p.weights, e.repaired_b, e.m) > objective_cap + 1e-9:
                return False
        return True

    lb_entries = [e for e in menu if relaxed_ok(e)]
    inc_entries = [e for e in menu if repaired_ok(e)]
    lower = min(
        (_menu_value(objective, p.weights, e.relaxed_b, e.m) for e in lb_entries),
        default=math.inf,
    )
    best_entry: Optional[_MenuEntry] = None
    best_val = math.inf
    for e in inc_entries:
        v = _menu_value(objective, p.weights, e.repaired_b, e.m)
        if v < best_val - 1e-12 or (
            abs(v - best_val) <= 1e-12 and best_entry is not None and e.m < best_entry.m
        ):
            best_val = v
            best_entry = e

    if best_entry is not None and best_val <= lower + _GAP_TOL:
        owner: Dict[int, str] = {}
        for (a, b), agent in zip(best_entry.segments, best_entry.agents):
            for j in range(a, b + 1):
                owner[j] = agent
        return _init_solution(
            p, owner, 0, time.perf_counter() - t0, "segment-dp", lower
        )

    milp, x_idx, y_idx, t_idx = _init_milp(
        p, objective, bottleneck_cap, usage_cap, objective_cap
    )
    seed_x = None
    seed_obj = math.inf
    if best_entry is not None:
        seed_x = np.zeros(milp.n)
        for (a, b), agent in zip(best_entry.segments, best_entry.agents):
            seed_x[y_idx[(agent, a)]] = 1.0
            for j in range(a, b + 1):
                seed_x[x_idx[(agent, j)]] = 1.0
        seed_x[t_idx] = best_entry.repaired_b
        seed_obj = float(milp.c @ seed_x)
    result = _solve_milp(milp, node_limit, seed_x, seed_obj)
    if result is None:
        raise Infeasible("no contiguous assignment satisfies the given restrictions")
    x, _, nodes = result
    owner = {}
    for (a, j), idx in x_idx.items():
        if x[idx] > 0.5:
            owner[j] = a
    return _init_solution(
        p, owner, nodes, time.perf_counter() - t0, "branch-and-bound", lower
    )


# ---------------------------------------------------------------------------
# Pareto sweep
# ---------------------------------------------------------------------------


def sweep_pareto(
    p: InitProblem,
    grid: Sequence[float],
    node_limit: int = _NODE_LIMIT,
    dedup: bool = True,
) -> List[ParetoPoint]:
    """Trade-off curve between bottleneck time and agent count.

    Each grid point is refined lexicographically (weighted objective, then
    fewest agents, then lowest bottleneck), which pins a unique Pareto vertex
    and makes the sweep monotone: bottleneck non-increasing and agent count
    non-decreasing in c_t.
    """
    points: List[ParetoPoint] = []
    for c_t in grid:
        c_t = float(c_t)
        if not 0.0 <= c_t <= 1.0:
            raise ValueError(f"grid value {c_t} outside [0, 1]")
        q = replace(p, weights=Weights(c_t, 1.0 - c_t))
        first = solve_init(q, node_limit)
        cap = first.objective + 1e-7
        fewest = solve_init(q, node_limit, objective=_OBJ_AGENTS, objective_cap=cap)
        m_star = round(fewest.total_usages())
        final = solve_init(
            q,
            node_limit,
            objective=_OBJ_BOTTLENECK,
            objective_cap=cap,
            usage_cap=m_star + 0.5,
        )
        points.append(ParetoPoint(c_t, 1.0 - c_t, final.bottleneck, final.agents_used, final))
    if not dedup:
        return points
    out: List[ParetoPoint] = []
    for pt in points:
        key = (round(pt.bottleneck, 6), pt.agents_used)
        if out and key == (round(out[-1].bottleneck, 6), out[-1].agents_used):
            continue
        out.append(pt)
    return out


# ---------------------------------------------------------------------------
# Reconfiguration
# ---------------------------------------------------------------------------


@dataclass
class _ReconfigModel:
    milp: _Milp
    w_idx: Dict[Tuple[str, int], int]
    u_idx: Dict[Tuple[str, int], int]
    y_info: List[Tuple[int, object, object]]  # (y index, cur expr, prev expr)
    t_idx: int
    pinned: Dict[Tuple[str, int], float]
    const_adjust: float
    const_runs: float


def _reconfig_milp(p: ReconfigProblem) -> _ReconfigModel:
    n_ops = len(p.operations)
    order = {a: i for i, a in enumerate(p.agents)}
    scoped = frozenset(p.scoped_ops)
    fractional = p.fractional_agents()

    pinned: Dict[Tuple[str, int], float] = {
        key: v for key, v in p.baseline.items() if key[1] not in scoped
    }

    w_idx: Dict[Tuple[str, int], int] = {}
    participants: List[str] = []
    nxt = 0
    for a in p.agents:
        allowed = sorted(scoped & p.capable[a])
        if allowed:
            participants.append(a)
            for j in allowed:
                w_idx[(a, j)] = nxt
                nxt += 1
    p_idx = {key: nxt + i for i, key in enumerate(sorted(w_idx, key=w_idx.get))}
    nxt += len(w_idx)
    n_idx = {key: nxt + i for i, key in enumerate(sorted(w_idx, key=w_idx.get))}
    nxt += len(w_idx)

    # Window indicators for agents allowed fractional shares: u bounds w from
    # above and usage runs are counted on the u pattern, so a partial share
    # occupies a whole slot of the agent's window.
    u_idx: Dict[Tuple[str, int], int] = {}
    if p.allow_sharing:
        for key in sorted(w_idx, key=w_idx.get):
            if key[0] in fractional:
                u_idx[key] = nxt
                nxt += 1

    eq_rows: List[Tuple[Dict[int, float], float]] = []
    ub_rows: List[Tuple[Dict[int, float], float]] = []

    # Scoped operations must still be fully covered.
    for j in p.scoped_ops:
        row = {w_idx[(a, j)]: 1.0 for a in participants if (a, j) in w_idx}
        if not row:
            raise Infeasible(
                f"no agent can take over operation '{p.operations[j]}';"
                " check if more agents are available"
            )
        eq_rows.append((row, 1.0))

    # Deviation split pair: w - pos + neg = baseline.
    for key, idx in w_idx.items():
        eq_rows.append(
            ({idx: 1.0, p_idx[key]: -1.0, n_idx[key]: 1.0}, p.baseline_of(*key))
        )

    for key, idx in u_idx.items():
        ub_rows.append(({w_idx[key]: 1.0, idx: -1.0}, 0.0))

    # Adjustment paid for baseline work that no variable can retain (the
    # disturbed agent lost the capability outright).
    const_adjust = sum(
        v for (a, j), v in p.baseline.items() if j in scoped and (a, j) not in w_idx
    )

    # Usage counting: number of maximal runs in each agent's activity window.
    y_info: List[Tuple[int, object, object]] = []
    y_by_agent: Dict[str, List[int]] = {}
    const_runs = 0.0
    agents_with_vars = set(participants)

    def expr_at(a: str, j: int):
        if (a, j) in u_idx:
            return u_idx[(a, j)]
        if (a, j) in w_idx:
            return w_idx[(a, j)]
        if j in scoped:
            return 0.0  # lost capability: effective share is zero
        return float(p.baseline.get((a, j), 0.0))

    for a in p.agents:
        if a not in agents_with_vars:
            vals = [float(p.baseline.get((a, j), 0.0)) for j in range(n_ops)]
            prev = 0.0
            for v in vals:
                const_runs += max(0.0, v - prev)
                prev = v
            continue
        base = 0.0
        ys: List[int] = []
        prev: object = 0.0
        for j in range(n_ops):
            cur = expr_at(a, j)
            cur_is_var = isinstance(cur, int)
            prev_is_var = isinstance(prev, int)
            if not cur_is_var and not prev_is_var:
                base += max(0.0, cur - prev)
            elif not cur_is_var and cur <= 0.0:
                pass  # a non-positive constant can never exceed the previous value
            else:
                nonlocal_idx = nxt
                nxt += 1
                row: Dict[int, float] = {nonlocal_idx: -1.0}
                rhs = 0.0
                if cur_is_var:
                    row[cur] = row.get(cur, 0.0) + 1.0
                else:
                    rhs -= float(cur)
                if prev_is_var:
                    row[prev] = row.get(prev, 0.0) - 1.0
                else:
                    rhs += float(prev)
                ub_rows.append((row, rhs))
                y_info.append((nonlocal_idx, cur, prev))
                ys.append(nonlocal_idx)
            prev = cur
        cap = 2.0 if a in fractional else 1.0
        if ys:
            ub_rows.append(({idx: 1.0 for idx in ys}, cap - base))
        elif base > cap + 1e-9:
            raise Infeasible(f"agent '{a}' already exceeds its usage cap")
        y_by_agent[a] = ys
        const_runs += base

    t_idx = nxt
    nxt += 1

    # Station time rows; pinned loads enter as constants.
    pinned_load: Dict[str, float] = {}
    for (a, j), v in pinned.items():
        pinned_load[a] = pinned_load.get(a, 0.0) + v * p.times[(a, j)]
    t_floor = max([0.0] + [load for a, load in pinned_load.items() if a not in agents_with_vars])
    t_ceiling = 1.0
    for a in participants:
        span = pinned_load.get(a, 0.0) + sum(
            p.times[(a, j)] for j in sorted(scoped & p.capable[a])
        )
        t_ceiling = max(t_ceiling, span + 1.0)
        row = {w_idx[(a, j)]: p.times[(a, j)] for j in sorted(scoped & p.capable[a])}
        row[t_idx] = -1.0
        ub_rows.append((row, -pinned_load.get(a, 0.0)))
    t_ceiling = max(t_ceiling, t_floor + 1.0)

    # Idle twins are interchangeable: force usage in agent order.
    unused_twins: Dict[Tuple, List[str]] = {}
    for a in p.agents:
        if a in p.unused_agents and a in agents_with_vars:
            key = tuple(sorted((j, p.times[(a, j)]) for j in scoped & p.capable[a]))
            unused_twins.setdefault(key, []).append(a)
    for group in unused_twins.values():
        for a1, a2 in zip(group, group[1:]):
            row: Dict[int, float] = {}
            for idx in y_by_agent[a2]:
                row[idx] = row.get(idx, 0.0) + 1.0
            for idx in y_by_agent[a1]:
                row[idx] = row.get(idx, 0.0) - 1.0
            if row:
                ub_rows.append((row, 0.0))

    lb = np.zeros(nxt)
    ub = np.ones(nxt)
    lb[t_idx] = t_floor
    ub[t_idx] = t_ceiling

    c = np.zeros(nxt)
    c[t_idx] = p.weights.c_t
    for idx, _, _ in y_info:
        c[idx] = p.weights.c_z
    for key in w_idx:
        c[p_idx[key]] = p.weights.c_x
        c[n_idx[key]] = p.weights.c_x

    binaries: List[int] = []
    meta: Dict[int, Tuple[int, int]] = {}
    for (a, j), idx in w_idx.items():
        meta[idx] = (j, order[a])
        if a not in fractional or not p.allow_sharing:
            binaries.append(idx)
    for (a, j), idx in u_idx.items():
        meta[idx] = (j, order[a])
        binaries.append(idx)

    milp = _Milp(
        n=nxt,
        c=c,
        lb=lb,
        ub=ub,
        eq_rows=eq_rows,
        ub_rows=ub_rows,
        binaries=sorted(binaries),
        meta=meta,
        const=p.weights.c_z * const_runs + p.weights.c_x * const_adjust,
    )
    return _ReconfigModel(
        milp, w_idx, u_idx, y_info, t_idx, pinned, const_adjust, const_runs
    )


def solve_reconfig(p: ReconfigProblem, node_limit: int = _NODE_LIMIT) -> Solution:
    """Optimal scoped reassignment after a disturbance.

    Keeping the original plan is always a candidate, so the solve fails only
    when the disturbed agent can no longer run an operation nobody else can
    take over.
    """
    t0 = time.perf_counter()
    model = _reconfig_milp(p)
    milp = model.milp

    # Seed with the unchanged plan whenever it is still available.
    seed_x = None
    seed_obj = math.inf
    if all((a, j) in model.w_idx for (a, j) in p.baseline if j in set(p.scoped_ops)):
        seed_x = np.zeros(milp.n)
        for key, idx in model.w_idx.items():
            seed_x[idx] = p.baseline_of(*key)
        for key, idx in model.u_idx.items():
            seed_x[idx] = 1.0 if p.baseline_of(*key) > 0 else 0.0

        def value_of(expr) -> float:
            return seed_x[expr] if isinstance(expr, int) else float(expr)

        for idx, cur, prev in model.y_info:
            seed_x[idx] = max(0.0, value_of(cur) - value_of(prev))
        loads: Dict[str, float] = {}
        for (a, j), v in p.baseline.items():
            loads[a] = loads.get(a, 0.0) + v * p.times[(a, j)]
        seed_x[model.t_idx] = max(max(loads.values(), default=0.0), milp.lb[model.t_idx])
        seed_obj = float(milp.c @ seed_x)

    result = _solve_milp(milp, node_limit, seed_x, seed_obj)
    if result is None:
        raise Infeasible(
            "no feasible reassignment of the disturbed operations exists;"
            " check if more agents are available"
        )
    x, _, nodes = result

    # Snap near-integers, then restore exact column sums on the scoped ops.
    w: Dict[Tuple[str, int], float] = {}
    for key, idx in model.w_idx.items():
        v = float(x[idx])
        if abs(v - round(v)) < _SNAP_TOL:
            v = float(round(v))
        w[key] = min(1.0, max(0.0, v))
    for j in p.scoped_ops:
        col = [key for key in w if key[1] == j]
        err = 1.0 - sum(w[key] for key in col)
        if col and abs(err) > 0:
            top = max(col, key=lambda key: w[key])
            w[top] += err

    n_ops = len(p.operations)
    rows: Dict[str, List[float]] = {}
    for a in p.agents:
        vals = []
        for j in range(n_ops):
            if (a, j) in w:
                vals.append(w[(a, j)])
            elif j in set(p.scoped_ops):
                vals.append(0.0)
            else:
                vals.append(float(p.baseline.get((a, j), 0.0)))
        if any(v > 0 for v in vals):
            rows[a] = vals

    station_times = {
        a: sum(v * p.times[(a, j)] for j, v in enumerate(vals) if v > 0)
        for a, vals in rows.items()
    }

    # Usage is the number of maximal runs in the agent's activity window; for
    # agents allowed fractional shares the window indicators decide membership,
    # so a window may bridge an operation the agent holds no share of.
    scoped_set = set(p.scoped_ops)

    def window_at(a: str, j: int) -> float:
        key = (a, j)
        if key in model.u_idx:
            return float(x[model.u_idx[key]])
        if key in model.w_idx:
            return w[key]
        if j in scoped_set:
            return 0.0
        return float(p.baseline.get(key, 0.0))

    usages: Dict[str, float] = {}
    for a in rows:
        runs = 0
        active = False
        for j in range(n_ops):
            on = window_at(a, j) > 0.5
            if on and not active:
                runs += 1
            active = on
        usages[a] = float(runs)
    bottleneck = max(station_times.values()) if station_times else 0.0
    adjustment = model.const_adjust + sum(
        abs(w[key] - p.baseline_of(*key)) for key in model.w_idx
    )
    assignment = {
        (a, j): v for a, vals in rows.items() for j, v in enumerate(vals) if v > 0
    }
    # A plan switch redistributes work among the agents already on the line;
    # adding or dropping any agent makes it a configuration switch.
    baseline_agents = {a for (a, _j), v in p.baseline.items() if v > 0}
    mode = "plan" if set(rows) == baseline_agents else "config"
    objective = (
        p.weights.c_t * bottleneck
        + p.weights.c_z * sum(usages.values())
        + p.weights.c_x * adjustment
    )
    method = "branch-and-bound" if milp.binaries else "lp"
    return Solution(
        assignment=assignment,
        operations=p.operations,
        objective=objective,
        bottleneck=bottleneck,
        station_times=station_times,
        usages=usages,
        agents_used=len(rows),
        adjustment=round(adjustment, 9),
        stats=SolveStats(nodes, time.perf_counter() - t0, method),
        mode=mode,
    )
