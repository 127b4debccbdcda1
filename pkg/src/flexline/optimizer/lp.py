"""Dense bounded-variable simplex solver.

Solves  min c'x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  lb <= x <= ub.

Implemented from scratch so the optimizer carries no external solver
dependency: a two-phase primal simplex for cold starts and a dual simplex for
re-solving after bound changes, which is the only modification branch and
bound ever makes.  The basis inverse is kept explicitly and refactorized
periodically.  Each row owns a fixed pair of signed artificial columns, so the
constraint matrix never mutates and basis snapshots stay valid across solves.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ..errors import NumericalFailure

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_FEAS_TOL = 1e-9
_DUAL_TOL = 1e-9
_PIVOT_TOL = 1e-10
_REFACTOR_EVERY = 150
_BLAND_AFTER = 60


@dataclass
class LpModel:
    """A linear program in standard inequality/equality form."""

    c: np.ndarray
    A_ub: Optional[np.ndarray] = None
    b_ub: Optional[np.ndarray] = None
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    lb: Optional[np.ndarray] = None
    ub: Optional[np.ndarray] = None


@dataclass
class LpResult:
    status: str
    x: Optional[np.ndarray]
    objective: Optional[float]


@dataclass
class Basis:
    """Snapshot of a simplex basis for warm starting."""

    rows: np.ndarray  # variable index basic in each row
    at_upper: np.ndarray  # nonbasic-at-upper flags, full variable length


class BoundedSimplex:
    """Equality-form core: min c'v s.t. A v = b, l <= v <= u.

    Columns are [structural | +I | -I]; the signed identity pair seeds phase 1
    regardless of residual sign and is pinned to zero afterwards.
    """

    def __init__(self, A: np.ndarray, b: np.ndarray, lb: np.ndarray, ub: np.ndarray):
        self.m, n = A.shape
        self.n_real = n
        self.A = np.hstack([A, np.eye(self.m), -np.eye(self.m)])
        self.b = b.astype(float).copy()
        self.lb = np.concatenate([lb.astype(float), np.zeros(2 * self.m)])
        self.ub = np.concatenate([ub.astype(float), np.zeros(2 * self.m)])
        self.n = self.n_real + 2 * self.m
        self.basis: np.ndarray = np.arange(self.n_real, self.n_real + self.m, dtype=np.int64)
        self.at_upper: np.ndarray = np.zeros(self.n, dtype=bool)
        self.binv: np.ndarray = np.eye(self.m)
        self.xb: np.ndarray = np.zeros(self.m)

    # -- state helpers --------------------------------------------------------

    def _nonbasic_values(self) -> np.ndarray:
        v = np.where(self.at_upper, self.ub, self.lb)
        v[~np.isfinite(v)] = 0.0
        v[self.basis] = 0.0
        return v

    def _refactorize(self) -> None:
        B = self.A[:, self.basis]
        try:
            self.binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            raise NumericalFailure("singular basis") from None
        self._recompute_xb()

    def _recompute_xb(self) -> None:
        v = self._nonbasic_values()
        self.xb = self.binv @ (self.b - self.A @ v)

    def _solution(self) -> np.ndarray:
        v = self._nonbasic_values()
        v[self.basis] = self.xb
        return v

    def _pivot(self, row: int, entering: int) -> None:
        col = self.binv @ self.A[:, entering]
        pivot = col[row]
        if abs(pivot) < _PIVOT_TOL:
            raise NumericalFailure("vanishing pivot element")
        scale = col / pivot
        scale[row] = 1.0 - 1.0 / pivot
        self.binv -= np.outer(scale, self.binv[row])
        self.basis[row] = entering

    # -- primal simplex ---------------------------------------------------------

    def _primal(self, c: np.ndarray, max_iter: int) -> str:
        degenerate_streak = 0
        for it in range(max_iter):
            if it and it % _REFACTOR_EVERY == 0:
                self._refactorize()
            y = self.binv.T @ c[self.basis]
            d = c - self.A.T @ y
            is_basic = np.zeros(self.n, dtype=bool)
            is_basic[self.basis] = True
            lower_elig = (~is_basic) & (~self.at_upper) & (d < -_DUAL_TOL)
            upper_elig = (~is_basic) & self.at_upper & (d > _DUAL_TOL)
            candidates = np.flatnonzero(lower_elig | upper_elig)
            if candidates.size == 0:
                return OPTIMAL
            if degenerate_streak > _BLAND_AFTER:
                e = int(candidates[0])
            else:
                e = int(candidates[np.argmax(np.abs(d[candidates]))])
            direction = -1.0 if self.at_upper[e] else 1.0
            step = direction * (self.binv @ self.A[:, e])
            lo_b = self.lb[self.basis]
            up_b = self.ub[self.basis]
            with np.errstate(divide="ignore", invalid="ignore"):
                t_lo = np.where(step > _PIVOT_TOL, (self.xb - lo_b) / step, np.inf)
                t_up = np.where(step < -_PIVOT_TOL, (self.xb - up_b) / step, np.inf)
            ratios = np.minimum(t_lo, t_up)
            ratios = np.where(ratios < 0, 0.0, ratios)
            r = int(np.argmin(ratios))
            t_basic = float(ratios[r])
            t_flip = float(self.ub[e] - self.lb[e])
            t = min(t_basic, t_flip)
            if not np.isfinite(t):
                return UNBOUNDED
            if degenerate_streak > _BLAND_AFTER and t_basic <= t_flip:
                tied = np.flatnonzero(np.isclose(ratios, t_basic, rtol=0.0, atol=1e-12))
                r = int(tied[np.argmin(self.basis[tied])])
            degenerate_streak = 0 if t > 1e-12 else degenerate_streak + 1
            self.xb -= t * step
            if t_flip < t_basic - 1e-15:
                self.at_upper[e] = ~self.at_upper[e]
                continue
            leaving = self.basis[r]
            goes_upper = step[r] < 0
            self._pivot(r, e)
            self.xb[r] = (self.lb[e] if direction > 0 else self.ub[e]) + direction * t
            self.at_upper[leaving] = bool(goes_upper)
        raise NumericalFailure("primal simplex iteration limit")

    # -- dual simplex -------------------------------------------------------------

    def _dual(self, c: np.ndarray, max_iter: int) -> str:
        for it in range(max_iter):
            if it and it % _REFACTOR_EVERY == 0:
                self._refactorize()
            lo_b = self.lb[self.basis]
            up_b = self.ub[self.basis]
            below = lo_b - self.xb
            above = self.xb - up_b
            viol = np.maximum(below, above)
            r = int(np.argmax(viol))
            if viol[r] <= _FEAS_TOL:
                return OPTIMAL
            leaving_low = below[r] > above[r]
            y = self.binv.T @ c[self.basis]
            d = c - self.A.T @ y
            alpha = self.binv[r] @ self.A
            is_basic = np.zeros(self.n, dtype=bool)
            is_basic[self.basis] = True
            free = ~is_basic
            if leaving_low:
                elig = free & (
                    ((~self.at_upper) & (alpha < -_PIVOT_TOL))
                    | (self.at_upper & (alpha > _PIVOT_TOL))
                )
            else:
                elig = free & (
                    ((~self.at_upper) & (alpha > _PIVOT_TOL))
                    | (self.at_upper & (alpha < -_PIVOT_TOL))
                )
            # Pinned columns cannot re-enter.
            elig &= self.ub - self.lb > _PIVOT_TOL
            idx = np.flatnonzero(elig)
            if idx.size == 0:
                return INFEASIBLE
            ratios = np.abs(d[idx] / alpha[idx])
            e = int(idx[np.argmin(ratios)])
            leaving = self.basis[r]
            target = self.lb[leaving] if leaving_low else self.ub[leaving]
            delta = target - self.xb[r]
            col = self.binv @ self.A[:, e]
            dx_e = -delta / col[r]
            self.xb -= dx_e * col
            entering_from = self.ub[e] if self.at_upper[e] else self.lb[e]
            self._pivot(r, e)
            self.xb[r] = entering_from + dx_e
            self.at_upper[leaving] = not leaving_low
        raise NumericalFailure("dual simplex iteration limit")

    # -- public drives ---------------------------------------------------------------

    def _extended_cost(self, c_real: np.ndarray) -> np.ndarray:
        return np.concatenate([c_real.astype(float), np.zeros(2 * self.m)])

    def solve(self, c_real: np.ndarray, max_iter: Optional[int] = None) -> str:
        """Two-phase cold solve from the signed artificial basis."""
        if np.any(self.lb[: self.n_real] > self.ub[: self.n_real] + _FEAS_TOL):
            return INFEASIBLE
        c = self._extended_cost(c_real)
        limit = max_iter or (60 * (self.m + self.n_real) + 2000)

        self.at_upper = np.zeros(self.n, dtype=bool)
        finite_lb = np.isfinite(self.lb)
        self.at_upper[~finite_lb & np.isfinite(self.ub)] = True
        self.ub[self.n_real :] = np.inf
        v = self._nonbasic_values_no_basis()
        resid = self.b - self.A[:, : self.n_real] @ v[: self.n_real]
        pos = resid >= 0
        plus = np.arange(self.n_real, self.n_real + self.m, dtype=np.int64)
        minus = plus + self.m
        self.basis = np.where(pos, plus, minus)
        self.binv = np.diag(np.where(pos, 1.0, -1.0))
        self.xb = np.abs(resid)

        phase1 = np.concatenate([np.zeros(self.n_real), np.ones(2 * self.m)])
        status = self._primal(phase1, limit)
        if status != OPTIMAL:
            raise NumericalFailure("phase 1 did not converge")
        if float(phase1[self.basis] @ np.abs(self.xb)) > 1e-7:
            self.ub[self.n_real :] = 0.0
            return INFEASIBLE
        self.ub[self.n_real :] = 0.0
        artificial = self.basis >= self.n_real
        self.xb[artificial] = 0.0
        return self._primal(c, limit)

    def _nonbasic_values_no_basis(self) -> np.ndarray:
        v = np.where(self.at_upper, self.ub, self.lb)
        v[~np.isfinite(v)] = 0.0
        return v

    def resolve(self, c_real: np.ndarray, basis: Basis, max_iter: Optional[int] = None) -> str:
        """Warm solve from a stored basis after bound changes (dual simplex)."""
        if np.any(self.lb[: self.n_real] > self.ub[: self.n_real] + _FEAS_TOL):
            return INFEASIBLE
        c = self._extended_cost(c_real)
        limit = max_iter or (60 * (self.m + self.n_real) + 2000)
        self.basis = basis.rows.copy()
        self.at_upper = basis.at_upper.copy()
        self.ub[self.n_real :] = 0.0
        self._refactorize()
        status = self._dual(c, limit)
        if status != OPTIMAL:
            return status
        return self._primal(c, limit)

    def snapshot(self) -> Basis:
        return Basis(self.basis.copy(), self.at_upper.copy())

    def objective(self, c_real: np.ndarray) -> float:
        v = self._solution()
        return float(c_real @ v[: self.n_real])

    def solution(self) -> np.ndarray:
        return self._solution()[: self.n_real]

    def residual(self) -> float:
        v = self._solution()
        return float(np.max(np.abs(self.A @ v - self.b))) if self.m else 0.0


def _expand(model: LpModel) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, int]:
    c = np.asarray(model.c, dtype=float)
    n = c.size
    lb = np.zeros(n) if model.lb is None else np.asarray(model.lb, dtype=float)
    ub = np.full(n, np.inf) if model.ub is None else np.asarray(model.ub, dtype=float)
    blocks = []
    rhs = []
    if model.A_eq is not None and len(model.A_eq):
        blocks.append((np.asarray(model.A_eq, dtype=float), False))
        rhs.append(np.asarray(model.b_eq, dtype=float))
    if model.A_ub is not None and len(model.A_ub):
        blocks.append((np.asarray(model.A_ub, dtype=float), True))
        rhs.append(np.asarray(model.b_ub, dtype=float))
    if not blocks:
        raise NumericalFailure("model has no constraints")
    m = sum(b.shape[0] for b, _ in blocks)
    n_slack = sum(b.shape[0] for b, is_ub in blocks if is_ub)
    A = np.zeros((m, n + n_slack))
    b = np.concatenate(rhs)
    row = 0
    slack = n
    for block, is_ub in blocks:
        k = block.shape[0]
        A[row : row + k, :n] = block
        if is_ub:
            A[row : row + k, slack : slack + k] = np.eye(k)
            slack += k
        row += k
    full_lb = np.concatenate([lb, np.zeros(n_slack)])
    full_ub = np.concatenate([ub, np.full(n_slack, np.inf)])
    return A, b, full_lb, full_ub, n


def _solve_box_only(model: LpModel) -> LpResult:
    """No constraint rows: each variable sits at whichever bound its cost favors."""
    c = np.asarray(model.c, dtype=float)
    n = c.size
    lb = np.zeros(n) if model.lb is None else np.asarray(model.lb, dtype=float)
    ub = np.full(n, np.inf) if model.ub is None else np.asarray(model.ub, dtype=float)
    if np.any(lb > ub):
        return LpResult(INFEASIBLE, None, None)
    x = np.where(c >= 0, lb, ub)
    if np.any(~np.isfinite(x) & (np.abs(c) > 0)):
        return LpResult(UNBOUNDED, None, None)
    # zero-cost variables may have both bounds infinite; any value is optimal
    fallback = np.where(np.isfinite(lb), lb, np.where(np.isfinite(ub), ub, 0.0))
    x = np.where(np.isfinite(x), x, fallback)
    return LpResult(OPTIMAL, x, float(c @ x))


def lp_solve(model: LpModel) -> LpResult:
    """Solve an LP.  Decision variables must each carry a finite bound."""
    no_eq = model.A_eq is None or not len(model.A_eq)
    no_ub = model.A_ub is None or not len(model.A_ub)
    if no_eq and no_ub:
        return _solve_box_only(model)
    A, b, lb, ub, n = _expand(model)
    if np.any(~np.isfinite(lb[:n]) & ~np.isfinite(ub[:n])):
        raise NumericalFailure("variables without any finite bound are not supported")
    core = BoundedSimplex(A, b, lb, ub)
    status = core.solve(np.concatenate([np.asarray(model.c, dtype=float), np.zeros(A.shape[1] - n)]))
    if status != OPTIMAL:
        return LpResult(status, None, None)
    x = core.solution()[:n]
    return LpResult(OPTIMAL, x, float(np.asarray(model.c, dtype=float) @ x))
