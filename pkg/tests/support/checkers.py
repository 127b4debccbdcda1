"""Independent validation of optimizer solutions.

Recomputes every constraint and the objective decomposition straight from the
problem data, sharing no code with the solver.  Returns violation messages;
an empty list means the solution is structurally sound.
"""

from __future__ import annotations

from typing import Dict, List, Sequence

from flexline.optimizer.problems import InitProblem, ReconfigProblem, Solution

TOL = 1e-9


def run_count(active: Sequence[bool]) -> int:
    runs = 0
    prev = False
    for on in active:
        if on and not prev:
            runs += 1
        prev = on
    return runs


def _bridged_run_count(active: List[bool], bridgeable: List[bool]) -> int:
    """Minimal run count after filling gaps whose columns are all bridgeable."""
    filled = list(active)
    n = len(filled)
    idx = [j for j, on in enumerate(active) if on]
    for a, b in zip(idx, idx[1:]):
        gap = range(a + 1, b)
        if gap and all(bridgeable[j] for j in gap):
            for j in gap:
                filled[j] = True
    return run_count(filled)


def check_init(p: InitProblem, sol: Solution) -> List[str]:
    bad: List[str] = []
    n = len(p.operations)
    cover: Dict[int, float] = {j: 0.0 for j in range(n)}
    loads: Dict[str, float] = {}
    for (a, j), v in sol.assignment.items():
        if abs(v - 1.0) > TOL:
            bad.append(f"non-integral value {v} at ({a}, {j})")
        if j not in p.capable.get(a, frozenset()):
            bad.append(f"agent {a} not capable of op {j}")
            continue
        cover[j] += v
        loads[a] = loads.get(a, 0.0) + v * p.times[(a, j)]
    for j, s in cover.items():
        if abs(s - 1.0) > TOL:
            bad.append(f"op {j} column sums to {s}")
    for a in loads:
        ops = sorted(j for (aa, j) in sol.assignment if aa == a)
        if ops != list(range(ops[0], ops[-1] + 1)):
            bad.append(f"agent {a} block {ops} is not contiguous")
        if abs(sol.usages.get(a, 0.0) - 1.0) > TOL:
            bad.append(f"agent {a} usage {sol.usages.get(a)} != 1")
    if sol.agents_used != len(loads):
        bad.append(f"agents_used {sol.agents_used} != {len(loads)}")
    bottleneck = max(loads.values()) if loads else 0.0
    if abs(sol.bottleneck - bottleneck) > TOL:
        bad.append(f"bottleneck {sol.bottleneck} != {bottleneck}")
    obj = p.weights.c_t * bottleneck + p.weights.c_z * sum(sol.usages.values())
    if abs(sol.objective - obj) > TOL:
        bad.append(f"objective {sol.objective} != {obj}")
    return bad


def check_reconfig(p: ReconfigProblem, sol: Solution) -> List[str]:
    bad: List[str] = []
    n = len(p.operations)
    scoped = set(p.scoped_ops)
    fractional = p.fractional_agents() if p.allow_sharing else frozenset()

    for (a, j), v in sol.assignment.items():
        if not (-TOL < v <= 1.0 + TOL):
            bad.append(f"value {v} at ({a}, {j}) outside [0, 1]")
        if v > TOL and j not in p.capable.get(a, frozenset()):
            bad.append(f"agent {a} not capable of op {j}")
        if j in scoped and a not in fractional and abs(v - round(v)) > 1e-6:
            bad.append(f"agent {a} must take op {j} whole, got {v}")

    for j in range(n):
        total = sum(v for (a, jj), v in sol.assignment.items() if jj == j)
        if abs(total - 1.0) > 1e-6:
            bad.append(f"op {j} column sums to {total}")

    for a in p.agents:
        for j in range(n):
            if j in scoped:
                continue
            have = sol.assignment.get((a, j), 0.0)
            pinned = p.baseline_of(a, j)
            if abs(have - pinned) > TOL:
                bad.append(f"pinned ({a}, {j}) moved from {pinned} to {have}")

    active = {a for (a, _j), v in sol.assignment.items() if v > TOL}
    loads = {
        a: sum(v * p.times[(a, j)] for (aa, j), v in sol.assignment.items() if aa == a)
        for a in active
    }
    for a in active:
        pattern = [sol.assignment.get((a, j), 0.0) > TOL for j in range(n)]
        usage = sol.usages.get(a)
        if usage is None:
            bad.append(f"active agent {a} missing from usages")
            continue
        if abs(usage - round(usage)) > TOL:
            bad.append(f"usage {usage} of {a} not integral")
        if a in fractional:
            bridge = [j in scoped and j in p.capable[a] for j in range(n)]
            expect = _bridged_run_count(pattern, bridge)
        else:
            expect = run_count(pattern)
        if abs(usage - expect) > TOL:
            bad.append(f"usage {usage} of {a} != achievable run count {expect}")
        cap = 2 if a in p.disturbed | p.adjacent else 1
        if usage > cap + TOL:
            bad.append(f"usage {usage} of {a} exceeds cap {cap}")

    bottleneck = max(loads.values()) if loads else 0.0
    if abs(sol.bottleneck - bottleneck) > 1e-6:
        bad.append(f"bottleneck {sol.bottleneck} != {bottleneck}")
    adjust = 0.0
    for a in p.agents:
        for j in scoped:
            adjust += abs(sol.assignment.get((a, j), 0.0) - p.baseline_of(a, j))
    if abs(sol.adjustment - adjust) > 1e-6:
        bad.append(f"adjustment {sol.adjustment} != {adjust}")
    obj = (
        p.weights.c_t * bottleneck
        + p.weights.c_z * sum(sol.usages.values())
        + p.weights.c_x * adjust
    )
    if abs(sol.objective - obj) > 1e-6:
        bad.append(f"objective {sol.objective} != {obj}")

    baseline_agents = {a for (a, _j), v in p.baseline.items() if v > 0}
    expected_mode = "plan" if active == baseline_agents else "config"
    if sol.mode != expected_mode:
        bad.append(f"mode {sol.mode} != {expected_mode}")
    return bad
