"""Exact-arithmetic reference LP solver.

A dense two-phase primal simplex over `fractions.Fraction`: no tolerances, no
scaling, Bland's rule throughout so it cannot cycle.  Orders of magnitude
slower than the float engine, which is the point; it cross-checks the float
engine on small programs where both should agree to machine precision.

Float inputs are converted with `Fraction(value)`, which is exact for binary
floats, so both solvers see literally the same program.
"""

from __future__ import annotations

from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

Row = List[Fraction]


def _fr(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(v)


def _pivot(rows: List[Row], basis: List[int], r: int, col: int) -> None:
    piv = rows[r][col]
    rows[r] = [v / piv for v in rows[r]]
    for i, row in enumerate(rows):
        if i != r and row[col] != 0:
            f = row[col]
            rows[i] = [a - f * b for a, b in zip(row, rows[r])]
    basis[r] = col


def _iterate(rows: List[Row], obj: Row, basis: List[int], ncols: int) -> str:
    """Minimize obj over the tableau in place; Bland's rule."""
    while True:
        enter = -1
        for j in range(ncols):
            if obj[j] < 0:
                enter = j
                break
        if enter < 0:
            return OPTIMAL
        leave = -1
        best: Optional[Fraction] = None
        for i, row in enumerate(rows):
            if row[enter] > 0:
                ratio = row[-1] / row[enter]
                if best is None or ratio < best or (
                    ratio == best and basis[i] < basis[leave]
                ):
                    best = ratio
                    leave = i
        if leave < 0:
            return UNBOUNDED
        _pivot(rows, basis, leave, enter)
        f = obj[enter]
        if f != 0:
            obj[:] = [a - f * b for a, b in zip(obj, rows[leave])]


def solve_exact(
    c: Sequence,
    A_ub: Optional[Sequence[Sequence]] = None,
    b_ub: Optional[Sequence] = None,
    A_eq: Optional[Sequence[Sequence]] = None,
    b_eq: Optional[Sequence] = None,
    bounds: Optional[Sequence[Tuple]] = None,
) -> Tuple[str, Optional[Fraction], Optional[List[Fraction]]]:
    """min c'x subject to A_ub x <= b_ub, A_eq x = b_eq, bounds per variable.

    bounds entries are (lo, hi); hi None means unbounded above.  Defaults to
    (0, None).  Returns (status, objective, x).
    """
    n = len(c)
    cost = [_fr(v) for v in c]
    if bounds is None:
        bounds = [(0, None)] * n
    lo = [_fr(b[0]) for b in bounds]
    hi = [None if b[1] is None else _fr(b[1]) for b in bounds]

    # Shift x = lo + s so s >= 0; finite upper bounds become extra <= rows.
    ub_rows: List[Tuple[Row, Fraction]] = []
    if A_ub is not None:
        for row, rhs in zip(A_ub, b_ub):
            coef = [_fr(v) for v in row]
            shift = sum(a * l for a, l in zip(coef, lo))
            ub_rows.append((coef, _fr(rhs) - shift))
    for j in range(n):
        if hi[j] is not None:
            coef = [Fraction(0)] * n
            coef[j] = Fraction(1)
            ub_rows.append((coef, hi[j] - lo[j]))
    eq_rows: List[Tuple[Row, Fraction]] = []
    if A_eq is not None:
        for row, rhs in zip(A_eq, b_eq):
            coef = [_fr(v) for v in row]
            shift = sum(a * l for a, l in zip(coef, lo))
            eq_rows.append((coef, _fr(rhs) - shift))

    m_ub, m_eq = len(ub_rows), len(eq_rows)
    m = m_ub + m_eq
    nslack = m_ub
    nart = m
    width = n + nslack + nart + 1

    rows: List[Row] = []
    for i, (coef, rhs) in enumerate(ub_rows + eq_rows):
        row = [Fraction(0)] * width
        row[:n] = coef
        if i < m_ub:
            row[n + i] = Fraction(1)
        row[-1] = rhs
        if rhs < 0:
            row = [-v for v in row]
        row[n + nslack + i] = Fraction(1)
        rows.append(row)
    basis = [n + nslack + i for i in range(m)]

    # Phase 1: minimize the artificial sum.
    obj1 = [Fraction(0)] * width
    for row in rows:
        obj1 = [a - b for a, b in zip(obj1, row)]
    for i in range(m):
        obj1[n + nslack + i] = Fraction(0)
    status = _iterate(rows, obj1, basis, n + nslack)
    if status != OPTIMAL or -obj1[-1] != 0:
        return INFEASIBLE, None, None

    # Drive any artificial still basic (at zero) out, or drop its row.
    for i in list(range(len(rows) - 1, -1, -1)):
        if basis[i] >= n + nslack:
            col = next(
                (j for j in range(n + nslack) if rows[i][j] != 0), None
            )
            if col is None:
                del rows[i]
                del basis[i]
            else:
                _pivot(rows, basis, i, col)

    # Phase 2 objective row: reduced costs for the real objective.
    obj2 = [Fraction(0)] * width
    obj2[:n] = cost[:]
    for i, row in enumerate(rows):
        f = obj2[basis[i]]
        if f != 0:
            obj2 = [a - f * b for a, b in zip(obj2, row)]
    status = _iterate(rows, obj2, basis, n + nslack)
    if status != OPTIMAL:
        return status, None, None

    s = [Fraction(0)] * (n + nslack)
    for i, b in enumerate(basis):
        if b < n + nslack:
            s[b] = rows[i][-1]
    x = [lo[j] + s[j] for j in range(n)]
    objective = sum(a * v for a, v in zip(cost, x))
    return OPTIMAL, objective, x
