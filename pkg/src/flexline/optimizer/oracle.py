"""Exhaustive reference solvers used to cross-check the optimizer.

Deliberately independent of the branch-and-bound machinery: initialization is
checked by enumerating every contiguous partition with distinct agents, and
reconfiguration by enumerating all 0/1 activity-window patterns over the
affected operations.  For a fixed window the usage count of every agent is a
constant, so the remaining sharing fractions reduce to a small linear program
(scipy's linprog, or a fraction grid).  Guards reject instances too large to
enumerate.
"""

from __future__ import annotations

import itertools
import math
import time
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import linprog

from ..errors import Infeasible, TooLarge
from .problems import InitProblem, ReconfigProblem, Solution, SolveStats

_MAX_OPS = 10
_MAX_AGENTS = 6
_MAX_PATTERNS = 4096
_MAX_GRID_COMBOS = 200_000


def brute_force_oracle(
    p: Union[InitProblem, ReconfigProblem],
    fraction_grid: Optional[float] = None,
) -> Solution:
    """Provably optimal solution by exhaustive enumeration.

    ``fraction_grid`` applies to reconfiguration only: when set, sharing
    fractions are restricted to multiples of the step instead of being refined
    by an inner linear program.
    """
    if isinstance(p, InitProblem):
        return _oracle_init(p)
    return _oracle_reconfig(p, fraction_grid)


# ---------------------------------------------------------------------------
# Initialization: ordered partitions with distinct agents
# ---------------------------------------------------------------------------


def _oracle_init(p: InitProblem) -> Solution:
    n = len(p.operations)
    if n > _MAX_OPS or len(p.agents) > _MAX_AGENTS:
        raise TooLarge(f"oracle limited to {_MAX_OPS} operations and {_MAX_AGENTS} agents")
    t0 = time.perf_counter()

    def segment_time(agent: str, a: int, b: int) -> Optional[float]:
        caps = p.capable[agent]
        if not all(j in caps for j in range(a, b + 1)):
            return None
        return sum(p.times[(agent, j)] for j in range(a, b + 1))

    best_obj = math.inf
    best: Optional[Tuple[List[Tuple[int, int]], List[str]]] = None
    max_m = min(n, len(p.agents))
    for m in range(1, max_m + 1):
        for cuts in itertools.combinations(range(1, n), m - 1):
            edges = [0, *cuts, n]
            segments = [(edges[i], edges[i + 1] - 1) for i in range(m)]
            for perm in itertools.permutations(p.agents, m):
                worst = 0.0
                ok = True
                for agent, (a, b) in zip(perm, segments):
                    t = segment_time(agent, a, b)
                    if t is None:
                        ok = False
                        break
                    worst = max(worst, t)
                if not ok:
                    continue
                obj = p.weights.c_t * worst + p.weights.c_z * m
                if obj < best_obj - 1e-12:
                    best_obj = obj
                    best = (segments, list(perm))
    if best is None:
        raise Infeasible("no contiguous assignment with distinct agents exists")
    segments, agents = best
    assignment = {}
    station_times = {}
    for agent, (a, b) in zip(agents, segments):
        station_times[agent] = sum(p.times[(agent, j)] for j in range(a, b + 1))
        for j in range(a, b + 1):
            assignment[(agent, j)] = 1.0
    return Solution(
        assignment=assignment,
        operations=p.operations,
        objective=best_obj,
        bottleneck=max(station_times.values()),
        station_times=station_times,
        usages={a: 1.0 for a in agents},
        agents_used=len(agents),
        adjustment=0.0,
        stats=SolveStats(0, time.perf_counter() - t0, "enumeration"),
    )


# ---------------------------------------------------------------------------
# Reconfiguration: binary patterns x inner continuous refinement
# ---------------------------------------------------------------------------


def _count_runs(values: Sequence[float]) -> int:
    runs, active = 0, False
    for v in values:
        on = v > 0.5
        if on and not active:
            runs += 1
        active = on
    return runs


def _oracle_reconfig(p: ReconfigProblem, fraction_grid: Optional[float]) -> Solution:
    n = len(p.operations)
    if n > _MAX_OPS or len(p.agents) > _MAX_AGENTS:
        raise TooLarge(f"oracle limited to {_MAX_OPS} operations and {_MAX_AGENTS} agents")
    t0 = time.perf_counter()
    scoped = list(p.scoped_ops)
    scoped_set = set(scoped)
    sharing = p.fractional_agents() if p.allow_sharing else frozenset()
    caps = {a: (2.0 if a in p.fractional_agents() else 1.0) for a in p.agents}

    # One 0/1 window bit per capable (agent, affected op) pair.  Agents outside
    # the sharing set take whole operations, so their bit is also their share;
    # sharing agents get any fraction within their window.
    all_vars: List[Tuple[str, int]] = []
    for a in p.agents:
        for j in scoped:
            if j in p.capable[a]:
                all_vars.append((a, j))
    var_set = set(all_vars)
    if 2 ** len(all_vars) > _MAX_PATTERNS:
        raise TooLarge(f"too many window variables ({len(all_vars)})")

    # Baseline work that cannot be retained (capability lost by the holder).
    lost = sum(
        v for (a, j), v in p.baseline.items() if j in scoped_set and (a, j) not in var_set
    )

    best_obj = math.inf
    best_rows: Optional[Dict[str, List[float]]] = None
    best_usages: Optional[Dict[str, float]] = None

    for bits in itertools.product((0.0, 1.0), repeat=len(all_vars)):
        window = dict(zip(all_vars, bits))

        def pattern_at(a: str, j: int) -> float:
            if (a, j) in window:
                return window[(a, j)]
            if j in scoped_set:
                return 0.0
            return float(p.baseline.get((a, j), 0.0))

        # Usage is fixed by the window alone: maximal runs of each agent's row.
        usages: Dict[str, float] = {}
        ok = True
        for a in p.agents:
            z = _count_runs([pattern_at(a, j) for j in range(n)])
            if z > caps[a] + 1e-9:
                ok = False
                break
            if z:
                usages[a] = float(z)
        if not ok:
            continue
        total_z = sum(usages.values())

        free = [key for key in all_vars if window[key] == 1.0 and key[0] in sharing]
        for j in scoped:
            fixed_sum = sum(
                window[(a, j)]
                for a in p.agents
                if (a, j) in window and a not in sharing
            )
            headroom = sum(
                window[(a, j)] for a in p.agents if (a, j) in window and a in sharing
            )
            if fixed_sum > 1.0 + 1e-9 or fixed_sum + headroom < 1.0 - 1e-9:
                ok = False
                break
        if not ok:
            continue

        def w_value(a: str, j: int, frac: Dict[Tuple[str, int], float]) -> float:
            key = (a, j)
            if key in frac:
                return frac[key]
            if key in window:
                return 0.0 if a in sharing else window[key]
            if j in scoped_set:
                return 0.0
            return float(p.baseline.get(key, 0.0))

        def evaluate(frac: Dict[Tuple[str, int], float]) -> Optional[Tuple[float, Dict[str, List[float]]]]:
            rows: Dict[str, List[float]] = {}
            for a in p.agents:
                vals = [w_value(a, j, frac) for j in range(n)]
                if any(v > 1e-12 for v in vals):
                    rows[a] = vals
            for j in scoped:
                total = sum(rows.get(a, [0.0] * n)[j] for a in p.agents)
                if abs(total - 1.0) > 1e-9:
                    return None
            t_max = max(
                sum(v * p.times[(a, j)] for j, v in enumerate(vals) if v > 0)
                for a, vals in rows.items()
            )
            adjust = lost
            for key in all_vars:
                a, j = key
                adjust += abs(w_value(a, j, frac) - p.baseline.get(key, 0.0))
            obj = (
                p.weights.c_t * t_max
                + p.weights.c_z * total_z
                + p.weights.c_x * adjust
            )
            return obj, rows

        if not free:
            got = evaluate({})
            if got and got[0] < best_obj - 1e-12:
                best_obj, best_rows, best_usages = got[0], got[1], dict(usages)
            continue

        if fraction_grid is not None:
            steps = int(round(1.0 / fraction_grid))
            levels = [i * fraction_grid for i in range(steps + 1)]
            if len(levels) ** len(free) > _MAX_GRID_COMBOS:
                raise TooLarge("fraction grid enumeration too large")
            for combo in itertools.product(levels, repeat=len(free)):
                got = evaluate(dict(zip(free, combo)))
                if got and got[0] < best_obj - 1e-12:
                    best_obj, best_rows, best_usages = got[0], got[1], dict(usages)
            continue

        got = _inner_lp(p, window, free, lost, total_z)
        if got and got[0] < best_obj - 1e-12:
            best_obj, best_rows, best_usages = got[0], got[1], dict(usages)

    if best_rows is None:
        raise Infeasible("no feasible reassignment exists in the oracle search space")

    station_times = {
        a: sum(v * p.times[(a, j)] for j, v in enumerate(vals) if v > 0)
        for a, vals in best_rows.items()
    }
    usages = {a: z for a, z in best_usages.items() if a in best_rows}
    assignment = {
        (a, j): v for a, vals in best_rows.items() for j, v in enumerate(vals) if v > 1e-12
    }
    adjustment = lost
    for key in all_vars:
        a, j = key
        adjustment += abs(best_rows.get(a, [0.0] * n)[j] - p.baseline.get(key, 0.0))
    baseline_agents = {a for (a, _j), v in p.baseline.items() if v > 0}
    return Solution(
        assignment=assignment,
        operations=p.operations,
        objective=best_obj,
        bottleneck=max(station_times.values()) if station_times else 0.0,
        station_times=station_times,
        usages=usages,
        agents_used=len(best_rows),
        adjustment=adjustment,
        stats=SolveStats(0, time.perf_counter() - t0, "enumeration"),
        mode="plan" if set(best_rows) == baseline_agents else "config",
    )


def _inner_lp(
    p: ReconfigProblem,
    window: Dict[Tuple[str, int], float],
    free: List[Tuple[str, int]],
    lost: float,
    total_z: float,
) -> Optional[Tuple[float, Dict[str, List[float]]]]:
    """Optimal sharing fractions inside one fixed window pattern.

    The usage term is a constant here, so only the bottleneck and the
    adjustment remain: variables are [w | pos | neg | t].
    """
    n = len(p.operations)
    scoped_set = set(p.scoped_ops)
    sharing = p.fractional_agents() if p.allow_sharing else frozenset()
    idx = {key: i for i, key in enumerate(free)}
    nv = len(free)

    def const_value(a: str, j: int) -> Optional[float]:
        key = (a, j)
        if key in idx:
            return None
        if key in window:
            return 0.0 if a in sharing else window[key]
        if j in scoped_set:
            return 0.0
        return float(p.baseline.get(key, 0.0))

    pos0 = nv
    neg0 = 2 * nv
    t_col = 3 * nv
    ncols = t_col + 1

    c = np.zeros(ncols)
    c[t_col] = p.weights.c_t
    for i in range(nv):
        c[pos0 + i] = p.weights.c_x
        c[neg0 + i] = p.weights.c_x

    A_eq: List[np.ndarray] = []
    b_eq: List[float] = []
    for j in p.scoped_ops:
        row = np.zeros(ncols)
        rhs = 1.0
        has_var = False
        for a in p.agents:
            if (a, j) in idx:
                row[idx[(a, j)]] = 1.0
                has_var = True
            else:
                cv = const_value(a, j)
                if cv:
                    rhs -= cv
        if has_var:
            A_eq.append(row)
            b_eq.append(rhs)
        elif abs(rhs) > 1e-9:
            return None
    for key, i in idx.items():
        row = np.zeros(ncols)
        row[i] = 1.0
        row[pos0 + i] = -1.0
        row[neg0 + i] = 1.0
        A_eq.append(row)
        b_eq.append(float(p.baseline.get(key, 0.0)))

    A_ub: List[np.ndarray] = []
    b_ub: List[float] = []
    for a in p.agents:
        terms = [(i, p.times[key]) for key, i in idx.items() if key[0] == a]
        load = sum(
            (const_value(a, j) or 0.0) * p.times[(a, j)]
            for j in range(n)
            if const_value(a, j)
        )
        if not terms and load == 0.0:
            continue
        row = np.zeros(ncols)
        for col, coef in terms:
            row[col] = coef
        row[t_col] = -1.0
        A_ub.append(row)
        b_ub.append(-load)

    bounds = [(0.0, 1.0)] * (3 * nv) + [(0.0, None)]
    res = linprog(
        c,
        A_ub=np.array(A_ub) if A_ub else None,
        b_ub=np.array(b_ub) if b_ub else None,
        A_eq=np.array(A_eq) if A_eq else None,
        b_eq=np.array(b_eq) if b_eq else None,
        bounds=bounds,
        method="highs",
    )
    if not res.success:
        return None
    frac = {key: float(res.x[i]) for key, i in idx.items()}
    rows: Dict[str, List[float]] = {}
    for a in p.agents:
        vals = []
        for j in range(n):
            cv = const_value(a, j)
            vals.append(frac[(a, j)] if cv is None else cv)
        if any(v > 1e-12 for v in vals):
            rows[a] = vals
    fixed_dev = sum(
        abs((0.0 if key[0] in sharing else bit) - p.baseline.get(key, 0.0))
        for key, bit in window.items()
        if key not in idx
    )
    obj = (
        float(res.fun)
        + p.weights.c_z * total_z
        + p.weights.c_x * (lost + fixed_dev)
    )
    return obj, rows
