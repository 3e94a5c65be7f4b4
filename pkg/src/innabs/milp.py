"""Branch-and-bound over binary variables with simplex relaxations."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .lp import INFEASIBLE, OPTIMAL, simplex

NODE_LIMIT = "node-limit"
TIME_LIMIT = "time-limit"


class SolverError(RuntimeError):
    """The LP relaxation failed numerically; no trustworthy bound is available."""


@dataclass(frozen=True)
class SolveConfig:
    node_limit: int | None = None
    time_limit: float | None = None
    abs_gap: float = 1e-6
    int_tol: float = 1e-6
    feas_tol: float = 1e-7
    propagate: bool = True


@dataclass
class SolveStats:
    nodes: int = 0
    lp_iterations: int = 0
    wall_time: float = 0.0


@dataclass
class SolveResult:
    status: str
    objective: float
    bound: float
    x: np.ndarray | None
    stats: SolveStats = field(default_factory=SolveStats)

    @property
    def exact(self) -> bool:
        return self.status in (OPTIMAL, INFEASIBLE)

    def values(self, model) -> dict | None:
        if self.x is None:
            return None
        return dict(zip(model.variables, self.x))


def _as_leq(A, senses, rhs):
    rows, b = [], []
    for a, sense, r in zip(A, senses, rhs):
        if sense in ("<=", "="):
            rows.append(a)
            b.append(r)
        if sense in (">=", "="):
            rows.append(-a)
            b.append(-r)
    n = A.shape[1]
    return np.array(rows).reshape(-1, n), np.array(b)


def propagate(G, h, lb, ub, integer, rounds=10, tol=1e-9):
    """Activity-based bound tightening for rows ``G x <= h``.

    Returns tightened copies of ``(lb, ub)``, or ``None`` when the bounds
    prove the rows infeasible. New bounds are relaxed by a relative ``tol``
    so rounding can never cut off a feasible point.
    """
    lb, ub = lb.copy(), ub.copy()
    pos, neg = G > 0, G < 0
    for _ in range(rounds):
        with np.errstate(invalid="ignore"):
            contrib = np.where(pos, G * lb, 0.0) + np.where(neg, G * ub, 0.0)
        minact = contrib.sum(axis=1)
        finite = np.isfinite(minact)
        if np.any(finite & (minact > h + 1e-7 * (1 + np.abs(h)))):
            return None
        slack = (h - minact)[:, None] + contrib
        with np.errstate(divide="ignore", invalid="ignore"):
            cand = slack / G
        cand = np.where(finite[:, None], cand, np.nan)
        new_ub = np.where(pos, cand, np.inf)
        new_lb = np.where(neg, cand, -np.inf)
        new_ub = np.nanmin(np.where(np.isnan(new_ub), np.inf, new_ub), axis=0, initial=np.inf)
        new_lb = np.nanmax(np.where(np.isnan(new_lb), -np.inf, new_lb), axis=0, initial=-np.inf)
        new_ub = new_ub + tol * (1 + np.abs(new_ub))
        new_lb = new_lb - tol * (1 + np.abs(new_lb))
        new_ub[integer] = np.floor(new_ub[integer] + 1e-6)
        new_lb[integer] = np.ceil(new_lb[integer] - 1e-6)
        tighter_ub = new_ub < ub - 1e-9 * (1 + np.abs(ub))
        tighter_lb = new_lb > lb + 1e-9 * (1 + np.abs(lb))
        if not (tighter_ub.any() or tighter_lb.any()):
            break
        ub = np.where(tighter_ub, new_ub, ub)
        lb = np.where(tighter_lb, new_lb, lb)
        if np.any(lb > ub + 1e-7 * (1 + np.abs(ub))):
            return None
        crossed = lb > ub
        lb[crossed] = ub[crossed] = 0.5 * (lb[crossed] + ub[crossed])
    return lb, ub


def solve(model, config: SolveConfig = SolveConfig()) -> SolveResult:
    """Solve ``model`` to optimality, or until a node/time limit is reached.

    The search is depth-first: both children are solved when a node is
    branched and the one with the better relaxation bound is explored first.
    Branching picks the most fractional binary. When a limit stops the
    search early, ``bound`` still holds a valid outer bound on the optimum.
    """
    if model.objective is None:
        raise ValueError("model has no objective")
    arr = model.to_arrays()
    sign = 1.0 if arr.maximize else -1.0  # internally maximise sign * objective
    ints = np.flatnonzero(arr.integer)
    stats = SolveStats()
    start = time.perf_counter()

    G, h = _as_leq(arr.A, arr.senses, arr.rhs)

    def relax(lb, ub):
        if config.propagate:
            tightened = propagate(G, h, lb, ub, arr.integer)
            if tightened is None:
                stats.nodes += 1
                return None
            lb, ub = tightened
        res = simplex(arr.c, arr.A, arr.senses, arr.rhs, lb, ub, maximize=arr.maximize,
                      feas_tol=config.feas_tol)
        stats.lp_iterations += res.iterations
        stats.nodes += 1
        if res.status == INFEASIBLE:
            return None
        if res.status != OPTIMAL:
            raise SolverError(f"LP relaxation ended with status {res.status}: {res.message}")
        return sign * res.objective, res.x

    def finish(status, incumbent, best_x, bound):
        stats.wall_time = time.perf_counter() - start
        if best_x is None:
            obj = float("nan")
        else:
            obj = sign * incumbent
        return SolveResult(status, obj, sign * bound, best_x, stats)

    root = relax(arr.lb, arr.ub)
    if root is None:
        stats.wall_time = time.perf_counter() - start
        return SolveResult(INFEASIBLE, float("nan"), float("nan"), None, stats)

    incumbent = -math.inf
    best_x = None
    # stack entries: (relaxation value, x, lb, ub)
    stack = [(root[0], root[1], arr.lb.copy(), arr.ub.copy())]

    while stack:
        open_bound = max(node[0] for node in stack)
        if config.time_limit is not None and time.perf_counter() - start > config.time_limit:
            return finish(TIME_LIMIT, incumbent, best_x, max(open_bound, incumbent))
        if config.node_limit is not None and stats.nodes >= config.node_limit:
            return finish(NODE_LIMIT, incumbent, best_x, max(open_bound, incumbent))

        value, xs, lb, ub = stack.pop()
        if value <= incumbent + config.abs_gap:
            continue
        frac = np.abs(xs[ints] - np.round(xs[ints]))
        if ints.size == 0 or frac.max() <= config.int_tol:
            if ints.size and frac.max() > 0:
                # Re-solve with the rounded binaries so the incumbent is exactly feasible.
                clb, cub = lb.copy(), ub.copy()
                clb[ints] = cub[ints] = np.round(xs[ints])
                res = relax(clb, cub)
                if res is None:
                    continue
                value, xs = res
            if value > incumbent:
                incumbent, best_x = value, xs
            continue

        j = int(ints[np.argmax(frac)])
        children = []
        for fixed in (0.0, 1.0):
            clb, cub = lb.copy(), ub.copy()
            clb[j] = cub[j] = fixed
            res = relax(clb, cub)
            if res is not None and res[0] > incumbent + config.abs_gap:
                children.append((res[0], res[1], clb, cub))
        children.sort(key=lambda node: node[0])
        stack.extend(children)

    if best_x is None:
        stats.wall_time = time.perf_counter() - start
        return SolveResult(INFEASIBLE, float("nan"), float("nan"), None, stats)
    return finish(OPTIMAL, incumbent, best_x, incumbent)
