"""Output range analysis, the enumeration oracle and sampled soundness checks."""
from __future__ import annotations

import itertools
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import linprog

from .abstraction import Partition, abstract_network, check_partition
from .encoding import MilpModel, encode, set_objective, x
from .lp import INFEASIBLE, OPTIMAL
from .milp import SolveConfig, solve
from .network import InnNetwork, InputBox, check_network, evaluate, is_concrete, sample_selection

logger = logging.getLogger(__name__)

ORACLE_NODE_LIMIT = 16
ORACLE_BINARY_LIMIT = 20
SOUNDNESS_TOL = 1e-6


@dataclass(frozen=True)
class RangeConfig:
    solver: SolveConfig = SolveConfig()
    literal_bounds: bool = False
    unscaled: bool = False
    allow_io_merge: bool = False
    extra_input_rows: tuple = ()
    jobs: int = 1


@dataclass
class BoundInfo:
    status: str
    value: float | None
    exact: bool
    nodes: int = 0
    lp_iterations: int = 0
    solve_time: float = 0.0


@dataclass
class RangeResult:
    lower: list
    upper: list
    lower_info: list
    upper_info: list
    timings: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def exact(self) -> bool:
        return all(b.exact for b in self.lower_info + self.upper_info)

    @property
    def intervals(self) -> list[tuple]:
        return list(zip(self.lower, self.upper))

    def to_dict(self) -> dict:
        """Results first, timings in their own field so outputs can be diffed without them."""
        return {
            "result": {
                "lower": self.lower,
                "upper": self.upper,
                "exact": self.exact,
                "lower_info": [_bound_dict(b) for b in self.lower_info],
                "upper_info": [_bound_dict(b) for b in self.upper_info],
            },
            "meta": self.meta,
            "timings": self.timings,
        }


def _bound_dict(b: BoundInfo) -> dict:
    d = asdict(b)
    d.pop("solve_time")
    return d


def _solve_bound(args):
    model, var, sense, solver_cfg = args
    res = solve(set_objective(model, var, sense), solver_cfg)
    if res.status == INFEASIBLE:
        value = None
    elif res.status == OPTIMAL:
        value = float(res.objective)
    else:
        # Limits hit: report the outer bound, never the incumbent.
        value = float(res.bound)
    return BoundInfo(res.status, value, res.exact, res.stats.nodes, res.stats.lp_iterations,
                     res.stats.wall_time)


def _map(fn, items, jobs):
    if jobs is None or jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def solve_range(model: MilpModel, n_outputs: int, k: int, solver_cfg: SolveConfig, jobs: int = 1):
    tasks = [(model, x(k, t), sense, solver_cfg) for t in range(n_outputs) for sense in ("min", "max")]
    infos = _map(_solve_bound, tasks, jobs)
    return infos[0::2], infos[1::2]


def output_range(net: InnNetwork, box: InputBox, partition: Partition | None = None,
                 config: RangeConfig = RangeConfig()) -> RangeResult:
    """Bounds on every output node over ``box``, optionally on an abstraction of ``net``.

    Each output needs one minimisation and one maximisation. The timings
    cover abstraction, encoding and solving separately. A bound that hit a
    solver limit is reported as its outer bound and marked non-exact.
    """
    check_network(net)
    meta = {"abstraction": None, "layer_sizes": list(net.layer_sizes)}
    t0 = time.perf_counter()
    target = net
    if partition is not None:
        check_partition(net, partition, require_io_identity=not config.allow_io_merge)
        target = abstract_network(net, partition, scaled=not config.unscaled)
        meta["abstraction"] = target.meta["abstraction"]
        meta["abstract_layer_sizes"] = list(target.layer_sizes)
        if config.unscaled:
            meta["warning"] = "unscaled abstraction is unsound; bounds may exclude reachable outputs"
    t1 = time.perf_counter()
    model = encode(target, box, config.extra_input_rows, literal_bounds=config.literal_bounds)
    t2 = time.perf_counter()
    lo_info, hi_info = solve_range(model, target.layer_sizes[-1], target.k, config.solver, config.jobs)
    t3 = time.perf_counter()
    meta["bounds_mode"] = model.meta["bounds_mode"]
    return RangeResult(
        lower=[b.value for b in lo_info],
        upper=[b.value for b in hi_info],
        lower_info=lo_info,
        upper_info=hi_info,
        timings={"abstraction": t1 - t0, "encoding": t2 - t1, "solve": t3 - t2},
        meta=meta,
    )


def _highs_arrays(model: MilpModel):
    arr = model.to_arrays()
    ub_rows, ub_rhs, eq_rows, eq_rhs = [], [], [], []
    for row, sense, rhs in zip(arr.A, arr.senses, arr.rhs):
        if sense == "<=":
            ub_rows.append(row)
            ub_rhs.append(rhs)
        elif sense == ">=":
            ub_rows.append(-row)
            ub_rhs.append(-rhs)
        else:
            eq_rows.append(row)
            eq_rhs.append(rhs)
    return arr, (np.array(ub_rows) if ub_rows else None, np.array(ub_rhs) if ub_rhs else None,
                 np.array(eq_rows) if eq_rows else None, np.array(eq_rhs) if eq_rhs else None)


def exact_range_oracle(net: InnNetwork, box: InputBox, extra_input_rows=(), *,
                       literal_bounds: bool = False) -> RangeResult:
    """Ground-truth range by enumerating every binary assignment of the encoding.

    Each assignment leaves a linear program, solved with HiGHS through
    scipy (independent of the in-house simplex). Assignments are skipped
    only when the model's own variable bounds already fix the binary.
    """
    check_network(net)
    sizes = net.layer_sizes
    n_nodes = sum(sizes[1:])
    if n_nodes > ORACLE_NODE_LIMIT:
        raise ValueError(f"oracle limited to {ORACLE_NODE_LIMIT} hidden+output nodes, network has {n_nodes}")
    t0 = time.perf_counter()
    model = encode(net, box, extra_input_rows, literal_bounds=literal_bounds)
    arr, (A_ub, b_ub, A_eq, b_eq) = _highs_arrays(model)
    bins = np.flatnonzero(arr.integer)
    if bins.size > ORACLE_BINARY_LIMIT:
        raise ValueError(f"oracle limited to {ORACLE_BINARY_LIMIT} binaries, model has {bins.size}")
    choices = [sorted({arr.lb[j], arr.ub[j]}) for j in bins]
    out_cols = [model.index[x(net.k, t)] for t in range(sizes[-1])]
    lows = np.full(len(out_cols), np.inf)
    highs = np.full(len(out_cols), -np.inf)
    n_lp = 0
    for combo in itertools.product(*choices):
        lb, ub = arr.lb.copy(), arr.ub.copy()
        lb[bins] = ub[bins] = combo
        bounds = list(zip(lb, ub))
        feas = linprog(np.zeros(lb.size), A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                       bounds=bounds, method="highs")
        n_lp += 1
        if feas.status == 2:
            continue
        if feas.status != 0:
            raise RuntimeError(f"HiGHS failed on assignment {combo}: {feas.message}")
        for t, col in enumerate(out_cols):
            c = np.zeros(lb.size)
            for sgn in (1.0, -1.0):
                c[col] = sgn
                res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
                n_lp += 1
                if res.status != 0:
                    raise RuntimeError(f"HiGHS failed on assignment {combo}: {res.message}")
                if sgn > 0:
                    lows[t] = min(lows[t], res.fun)
                else:
                    highs[t] = max(highs[t], -res.fun)
    elapsed = time.perf_counter() - t0
    feasible = np.isfinite(lows[0]) if lows.size else True
    status = OPTIMAL if feasible else INFEASIBLE

    def info(v):
        return BoundInfo(status, float(v) if feasible else None, True, n_lp)

    return RangeResult(
        lower=[info(v).value for v in lows],
        upper=[info(v).value for v in highs],
        lower_info=[info(v) for v in lows],
        upper_info=[info(v) for v in highs],
        timings={"oracle": elapsed},
        meta={"method": "enumeration", "assignments": int(np.prod([len(c) for c in choices])),
              "layer_sizes": list(sizes)},
    )


@dataclass
class Violation:
    input: list
    selection_seed: int
    node: int
    value: float
    bound: str
    limit: float


@dataclass
class SoundnessReport:
    samples: int
    violations: list
    max_slack: float
    range: RangeResult | None = None

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "violations": [asdict(v) for v in self.violations],
            "max_slack": self.max_slack,
            "range": None if self.range is None else self.range.to_dict(),
        }


def soundness_check(net: InnNetwork, partition: Partition, box: InputBox, n_samples: int = 100,
                    seed: int = 0, *, n_selections: int = 10, config: RangeConfig = RangeConfig(),
                    abstract_range: RangeResult | None = None) -> SoundnessReport:
    """Sample executions of ``net`` and check they stay inside the abstract range.

    ``n_samples`` inputs are drawn uniformly from ``box``; each is run under
    ``n_selections`` weight selections (one for a concrete network). A
    violation is an output outside ``[l - 1e-6, u + 1e-6]``. ``max_slack`` is
    the largest amount by which any sample exceeds its bound (negative when
    every sample is strictly inside).
    """
    if abstract_range is None:
        abstract_range = output_range(net, box, partition, config)
    lower = np.array([np.nan if v is None else v for v in abstract_range.lower])
    upper = np.array([np.nan if v is None else v for v in abstract_range.upper])

    per_input = 1 if is_concrete(net) else n_selections
    ss = np.random.SeedSequence(seed)
    input_rng = np.random.default_rng(ss.spawn(1)[0])
    violations = []
    max_slack = -np.inf
    count = 0
    for _ in range(n_samples):
        inp = box.sample(input_rng)
        for _ in range(per_input):
            sel_seed = int(input_rng.integers(2**31))
            out = evaluate(net, inp, sample_selection(net, sel_seed))
            count += 1
            over = out - upper
            under = lower - out
            max_slack = max(max_slack, float(np.nanmax(np.maximum(over, under))))
            for t in range(out.size):
                if not out[t] >= lower[t] - SOUNDNESS_TOL:
                    violations.append(Violation(inp.tolist(), sel_seed, t, float(out[t]), "lower", float(lower[t])))
                elif not out[t] <= upper[t] + SOUNDNESS_TOL:
                    violations.append(Violation(inp.tolist(), sel_seed, t, float(out[t]), "upper", float(upper[t])))
    return SoundnessReport(count, violations, max_slack, abstract_range)
