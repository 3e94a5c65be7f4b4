"""Dense bounded-variable primal simplex.

Each row ``a.x (<=|>=|=) b`` receives a slack ``r`` with ``a.x + r = b``
whose bounds encode the sense, so the slack columns form the starting basis.
Rows whose starting slack would violate its bounds get an artificial
variable. Phase 1 minimises the artificial sum, phase 2 the real objective.
Pricing is Dantzig's rule; after ``stall_limit`` consecutive iterations
without objective progress both pricing and the ratio test switch to
Bland's smallest-index rule, which cannot cycle.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL = "numerical-failure"
ITERATION_LIMIT = "iteration-limit"


@dataclass
class LpResult:
    status: str
    objective: float = float("nan")
    x: np.ndarray | None = None
    iterations: int = 0
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


class _Tableau:
    def __init__(self, A, b, lb, ub, basis, x, pivot_tol):
        self.A = A
        self.b = b
        self.lb = lb
        self.ub = ub
        self.basis = np.array(basis)
        self.x = x
        self.pivot_tol = pivot_tol
        # The starting basis is a signed identity, so its inverse is itself.
        signs = A[np.arange(len(self.basis)), self.basis]
        self.T = A * signs[:, None]
        self.refactor(values_only=True)

    def refactor(self, values_only=False):
        B = self.A[:, self.basis]
        if not values_only:
            self.T = np.linalg.solve(B, self.A)
        nonbasic = np.ones(self.A.shape[1], dtype=bool)
        nonbasic[self.basis] = False
        rhs = self.b - self.A[:, nonbasic] @ self.x[nonbasic]
        self.x[self.basis] = np.linalg.solve(B, rhs)

    def pivot(self, row, col):
        piv = self.T[row, col]
        self.T[row] /= piv
        colvals = self.T[:, col].copy()
        colvals[row] = 0.0
        self.T -= np.outer(colvals, self.T[row])
        self.basis[row] = col


def _run(tab: _Tableau, c, eligible, tol, max_iter, stall_limit, counter):
    """Minimise ``c.x`` from the current basic feasible solution."""
    n = tab.A.shape[1]
    is_basic = np.zeros(n, dtype=bool)
    is_basic[tab.basis] = True
    bland = False
    stall = 0
    best = c @ tab.x
    since_refactor = 0
    while True:
        if counter[0] >= max_iter:
            return ITERATION_LIMIT
        d = c - c[tab.basis] @ tab.T
        x = tab.x
        can_up = (x < tab.ub - tol) & ~is_basic & eligible
        can_down = (x > tab.lb + tol) & ~is_basic & eligible
        score = np.where(can_up & (d < -tol), -d, 0.0)
        score = np.maximum(score, np.where(can_down & (d > tol), d, 0.0))
        candidates = np.flatnonzero(score > 0)
        if candidates.size == 0:
            return OPTIMAL
        j = int(candidates[0]) if bland else int(candidates[np.argmax(score[candidates])])
        direction = 1.0 if (d[j] < 0 and can_up[j]) else -1.0

        alpha = direction * tab.T[:, j]
        xb = x[tab.basis]
        lbb, ubb = tab.lb[tab.basis], tab.ub[tab.basis]
        ratios = np.full(alpha.shape, np.inf)
        dec = alpha > tab.pivot_tol
        inc = alpha < -tab.pivot_tol
        with np.errstate(invalid="ignore"):
            ratios[dec] = np.maximum(0.0, (xb[dec] - lbb[dec]) / alpha[dec])
            ratios[inc] = np.maximum(0.0, (ubb[inc] - xb[inc]) / -alpha[inc])
        flip = tab.ub[j] - tab.lb[j]
        step = min(ratios.min(initial=np.inf), flip)
        if not np.isfinite(step):
            return UNBOUNDED

        counter[0] += 1
        if flip <= step:
            row = None
        else:
            ties = np.flatnonzero(ratios <= step + 1e-12)
            if bland:
                row = int(ties[np.argmin(tab.basis[ties])])
            else:
                row = int(ties[np.argmax(np.abs(alpha[ties]))])
            step = ratios[row]

        x[j] += direction * step
        x[tab.basis] -= step * alpha
        if row is None:
            x[j] = tab.ub[j] if direction > 0 else tab.lb[j]
        else:
            leaving = tab.basis[row]
            x[leaving] = tab.lb[leaving] if alpha[row] > 0 else tab.ub[leaving]
            tab.pivot(row, j)
            is_basic[leaving] = False
            is_basic[j] = True
            since_refactor += 1
            if since_refactor >= 100:
                tab.refactor()
                since_refactor = 0

        obj = c @ x
        if obj < best - tol:
            best = obj
            stall = 0
        else:
            stall += 1
            if stall >= stall_limit and not bland:
                logger.debug("simplex stalled for %d iterations; switching to Bland's rule", stall)
                bland = True


def simplex(c, A, senses, rhs, lb, ub, *, maximize=False, tol=1e-9, feas_tol=1e-7,
            max_iter=50_000, stall_limit=50) -> LpResult:
    """Solve ``min/max c.x`` subject to ``A x (senses) rhs`` and ``lb <= x <= ub``.

    Returned ``x`` covers the structural variables only. Results are
    re-verified against the original rows; a basis that fails the check
    after refactoring is reported as ``numerical-failure`` rather than
    optimal.
    """
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    rhs = np.asarray(rhs, dtype=float)
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    m, n = A.shape if A.size else (0, c.size)
    if np.any(lb > ub):
        return LpResult(INFEASIBLE, message="empty variable bounds")
    if m == 0:
        A = np.zeros((0, n))

    s_lb = np.zeros(m)
    s_ub = np.zeros(m)
    for r, sense in enumerate(senses):
        if sense == "<=":
            s_lb[r], s_ub[r] = 0.0, np.inf
        elif sense == ">=":
            s_lb[r], s_ub[r] = -np.inf, 0.0
        elif sense == "=":
            s_lb[r], s_ub[r] = 0.0, 0.0
        else:
            raise ValueError(f"unknown sense {sense!r}")

    x0 = np.where(np.isfinite(lb), lb, np.where(np.isfinite(ub), ub, 0.0))
    resid = rhs - A @ x0
    slack = np.clip(resid, s_lb, s_ub)
    art = resid - slack
    needs_art = np.abs(art) > 0
    n_art = int(needs_art.sum())

    art_cols = np.zeros((m, n_art))
    rows = np.flatnonzero(needs_art)
    art_cols[rows, np.arange(n_art)] = np.sign(art[rows])
    full_A = np.hstack([A, np.eye(m), art_cols])
    full_lb = np.concatenate([lb, s_lb, np.zeros(n_art)])
    full_ub = np.concatenate([ub, s_ub, np.full(n_art, np.inf)])
    full_x = np.concatenate([x0, slack, np.abs(art[rows])])
    basis = np.arange(n, n + m)
    basis[rows] = n + m + np.arange(n_art)

    try:
        return _two_phase(c, A, senses, rhs, lb, ub, n, m, n_art, full_A, full_lb, full_ub, full_x,
                          basis, maximize, tol, feas_tol, max_iter, stall_limit)
    except np.linalg.LinAlgError as exc:
        return LpResult(NUMERICAL, message=f"singular basis: {exc}")


def _two_phase(c, A, senses, rhs, lb, ub, n, m, n_art, full_A, full_lb, full_ub, full_x,
               basis, maximize, tol, feas_tol, max_iter, stall_limit):
    tab = _Tableau(full_A, rhs, full_lb, full_ub, basis, full_x, pivot_tol=1e-9)
    counter = [0]
    eligible = np.ones(full_A.shape[1], dtype=bool)

    if n_art:
        c1 = np.zeros(full_A.shape[1])
        c1[n + m:] = 1.0
        status = _run(tab, c1, eligible, tol, max_iter, stall_limit, counter)
        if status != OPTIMAL:
            return LpResult(status, iterations=counter[0], message="phase 1 did not finish")
        tab.refactor(values_only=True)
        infeas = tab.x[n + m:].sum()
        if infeas > feas_tol:
            return LpResult(INFEASIBLE, iterations=counter[0])
        tab.x[n + m:] = 0.0
        tab.ub[n + m:] = 0.0
        eligible[n + m:] = False

    sign = -1.0 if maximize else 1.0
    c2 = np.zeros(full_A.shape[1])
    c2[:n] = sign * c
    status = _run(tab, c2, eligible, tol, max_iter, stall_limit, counter)
    if status != OPTIMAL:
        return LpResult(status, iterations=counter[0])

    tab.refactor(values_only=True)
    xs = tab.x[:n].copy()
    xs = np.clip(xs, lb, ub)
    if not _feasible(A, senses, rhs, xs, feas_tol):
        return LpResult(NUMERICAL, iterations=counter[0],
                        message="final basis violates constraints beyond tolerance")
    return LpResult(OPTIMAL, float(c @ xs), xs, counter[0])


def _feasible(A, senses, rhs, xs, tol):
    act = A @ xs
    scale = 1.0 + np.abs(rhs)
    for r, sense in enumerate(senses):
        gap = act[r] - rhs[r]
        if sense == "<=" and gap > tol * scale[r]:
            return False
        if sense == ">=" and gap < -tol * scale[r]:
            return False
        if sense == "=" and abs(gap) > tol * scale[r]:
            return False
    return True


def lp_solve(model, fixings: dict | None = None, **kwargs) -> LpResult:
    """Solve the LP relaxation of ``model`` with some binaries fixed.

    ``fixings`` maps binary ``VarRef``s to 0 or 1. The model must carry an
    objective; ``x`` in the result is ordered like ``model.variables``.
    """
    if model.objective is None:
        raise ValueError("model has no objective")
    if fixings:
        model = model.with_bounds({v: (val, val) for v, val in fixings.items()})
    arr = model.to_arrays()
    return simplex(arr.c, arr.A, arr.senses, arr.rhs, arr.lb, arr.ub, maximize=arr.maximize, **kwargs)
