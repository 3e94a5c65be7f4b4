"""Big-M mixed-integer encoding of interval ReLU networks.

Every node ``t`` of layer ``i + 1`` contributes four rows::

    sum_s Wlo[s,t] x_s + blo[t] <= x_t
    0 <= x_t
    sum_s Whi[s,t] x_s + bhi[t] + M_t q_t >= x_t
    M_t (1 - q_t) >= x_t

Endpoint substitution is exact only for non-negative ``x_s``, which holds
after every ReLU. Inputs may be negative: an input whose box lies in the
non-positive half-line swaps the endpoints, and an input whose box straddles
zero while feeding a non-singular edge is split into ``x = p - n`` with a
sign indicator, adding one auxiliary binary and three rows.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable

import numpy as np

from .network import InnNetwork, InputBox, check_network, interval_bounds

BIG_M_INFLATION = 1.05
BIG_M_FLOOR = 1.0

CONTINUOUS_KINDS = ("x", "p", "n")
BINARY_KINDS = ("q", "s")


@dataclass(frozen=True, order=True)
class VarRef:
    """Variable identity: ``x``/``q`` are node variables, ``p``/``n``/``s`` auxiliary input-split ones."""

    kind: str
    layer: int
    node: int

    @property
    def name(self) -> str:
        return f"{self.kind}_{self.layer}_{self.node}"

    @property
    def is_binary(self) -> bool:
        return self.kind in BINARY_KINDS

    @classmethod
    def parse(cls, name: str) -> "VarRef":
        kind, layer, node = name.split("_")
        if kind not in CONTINUOUS_KINDS + BINARY_KINDS:
            raise ValueError(f"unknown variable kind in {name!r}")
        return cls(kind, int(layer), int(node))


def x(layer, node):
    return VarRef("x", layer, node)


def q(layer, node):
    return VarRef("q", layer, node)


@dataclass(frozen=True)
class LinearConstraint:
    terms: tuple  # ((coef, VarRef), ...)
    sense: str  # "<=", ">=", "="
    rhs: float
    tag: str = ""

    def __post_init__(self):
        if self.sense not in ("<=", ">=", "="):
            raise ValueError(f"unknown constraint sense {self.sense!r}")
        terms = tuple((float(c), v) for c, v in self.terms)
        refs = [v for _, v in terms]
        if len(set(refs)) != len(refs):
            raise ValueError(f"constraint {self.tag!r} repeats a variable")
        if not all(np.isfinite(c) for c, _ in terms) or not np.isfinite(self.rhs):
            raise ValueError(f"constraint {self.tag!r} has non-finite data")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "rhs", float(self.rhs))

    def activity(self, values: dict) -> float:
        return sum(c * values[v] for c, v in self.terms)

    def violation(self, values: dict) -> float:
        lhs = self.activity(values)
        if self.sense == "<=":
            return max(0.0, lhs - self.rhs)
        if self.sense == ">=":
            return max(0.0, self.rhs - lhs)
        return abs(lhs - self.rhs)


@dataclass(frozen=True)
class ModelArrays:
    c: np.ndarray
    A: np.ndarray
    senses: np.ndarray
    rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    integer: np.ndarray
    maximize: bool


@dataclass(frozen=True, eq=False)
class MilpModel:
    """Variables with bounds, linear rows and an optional single-variable objective."""

    variables: tuple
    lb: tuple
    ub: tuple
    constraints: tuple
    objective: tuple | None = None  # (sense, VarRef)
    big_m: tuple = ()
    meta: dict = field(default_factory=dict)

    @cached_property
    def index(self) -> dict:
        return {v: j for j, v in enumerate(self.variables)}

    @property
    def binaries(self) -> list:
        return [v for v in self.variables if v.is_binary]

    @property
    def n_variables(self) -> int:
        return len(self.variables)

    def bounds_of(self, var: VarRef) -> tuple[float, float]:
        j = self.index[var]
        return self.lb[j], self.ub[j]

    def with_bounds(self, updates: dict) -> "MilpModel":
        lb, ub = list(self.lb), list(self.ub)
        for var, (lo, hi) in updates.items():
            j = self.index[var]
            lb[j], ub[j] = float(lo), float(hi)
        return replace(self, lb=tuple(lb), ub=tuple(ub))

    def to_arrays(self) -> ModelArrays:
        n = len(self.variables)
        idx = self.index
        A = np.zeros((len(self.constraints), n))
        for r, con in enumerate(self.constraints):
            for coef, var in con.terms:
                A[r, idx[var]] += coef
        c = np.zeros(n)
        maximize = False
        if self.objective is not None:
            sense, var = self.objective
            c[idx[var]] = 1.0
            maximize = sense == "max"
        return ModelArrays(
            c=c,
            A=A,
            senses=np.array([con.sense for con in self.constraints], dtype=object),
            rhs=np.array([con.rhs for con in self.constraints]),
            lb=np.array(self.lb, dtype=float),
            ub=np.array(self.ub, dtype=float),
            integer=np.array([v.is_binary for v in self.variables], dtype=bool),
            maximize=maximize,
        )

    def max_violation(self, values: dict) -> float:
        worst = 0.0
        for con in self.constraints:
            worst = max(worst, con.violation(values))
        for v, lo, hi in zip(self.variables, self.lb, self.ub):
            worst = max(worst, lo - values[v], values[v] - hi)
        return worst

    def to_dict(self) -> dict:
        """JSON-friendly dump for debugging and diffing."""
        return {
            "variables": [
                {"name": v.name, "lb": _json_num(lo), "ub": _json_num(hi), "binary": v.is_binary}
                for v, lo, hi in zip(self.variables, self.lb, self.ub)
            ],
            "constraints": [
                {"tag": c.tag, "terms": [[coef, v.name] for coef, v in c.terms], "sense": c.sense, "rhs": c.rhs}
                for c in self.constraints
            ],
            "objective": None if self.objective is None else [self.objective[0], self.objective[1].name],
            "big_m": [list(m) for m in self.big_m],
            "meta": dict(self.meta),
        }


def _json_num(v):
    if np.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def compute_big_m(net: InnNetwork, box: InputBox, bounds=None) -> list[np.ndarray]:
    """Per-node big-M for layers ``1..k`` from interval pre-activation bounds."""
    if bounds is None:
        bounds = interval_bounds(net, box)
    out = []
    for b in bounds[1:]:
        m = np.maximum(np.abs(b.pre_lo), np.abs(b.pre_hi))
        m = np.where(m > 0, BIG_M_INFLATION * m, BIG_M_FLOOR)
        out.append(m)
    return out


def _needs_split(net, box, s):
    lo, hi = box.lo[s], box.hi[s]
    singular = np.array_equal(net.weights_lo[0][s], net.weights_hi[0][s])
    return lo < 0 < hi and not singular


def encode(
    net: InnNetwork,
    box: InputBox,
    extra_input_rows: Iterable[LinearConstraint] = (),
    *,
    literal_bounds: bool = False,
) -> MilpModel:
    """Build the mixed-integer model of ``net`` over ``box`` (no objective).

    By default node variables are bounded by their interval post-activation
    bounds and indicators of stable neurons are fixed. ``literal_bounds``
    bounds each ``x`` in ``[0, M]`` and leaves every indicator free in
    ``[0, 1]``.
    """
    check_network(net)
    sizes = net.layer_sizes
    if len(box) != sizes[0]:
        raise ValueError(f"box has {len(box)} entries, network has {sizes[0]} inputs")
    extra_input_rows = tuple(extra_input_rows)
    for row in extra_input_rows:
        for _, var in row.terms:
            if var.kind != "x" or var.layer != 0 or not 0 <= var.node < sizes[0]:
                raise ValueError(f"input row {row.tag!r} references non-input variable {var.name}")

    bounds = interval_bounds(net, box)
    big_m = compute_big_m(net, box, bounds)

    variables, lb, ub = [], [], []

    def add(var, lo, hi):
        variables.append(var)
        lb.append(float(lo))
        ub.append(float(hi))

    for s in range(sizes[0]):
        add(x(0, s), box.lo[s], box.hi[s])
    for i in range(1, net.k + 1):
        m = big_m[i - 1]
        b = bounds[i]
        for t in range(sizes[i]):
            if literal_bounds:
                add(x(i, t), 0.0, m[t])
            else:
                add(x(i, t), 0.0, max(0.0, b.pre_hi[t]))
        for t in range(sizes[i]):
            if literal_bounds:
                add(q(i, t), 0.0, 1.0)
            elif b.pre_lo[t] > 0:
                add(q(i, t), 0.0, 0.0)
            elif b.pre_hi[t] < 0:
                add(q(i, t), 1.0, 1.0)
            else:
                add(q(i, t), 0.0, 1.0)

    constraints = list(extra_input_rows)

    # Input terms of the lower / upper rows of layer 1, per input node.
    low_terms, high_terms = {}, {}
    w_lo, w_hi = net.weights_lo[0], net.weights_hi[0]
    for s in range(sizes[0]):
        if _needs_split(net, box, s):
            p, n, sign = VarRef("p", 0, s), VarRef("n", 0, s), VarRef("s", 0, s)
            hi, neg = float(box.hi[s]), float(-box.lo[s])
            add(p, 0.0, hi)
            add(n, 0.0, neg)
            add(sign, 0.0, 1.0)
            constraints += [
                LinearConstraint(((1.0, x(0, s)), (-1.0, p), (1.0, n)), "=", 0.0, f"S_0_{s}_1"),
                LinearConstraint(((1.0, p), (-hi, sign)), "<=", 0.0, f"S_0_{s}_2"),
                LinearConstraint(((1.0, n), (neg, sign)), "<=", neg, f"S_0_{s}_3"),
            ]
            low_terms[s] = lambda t, p=p, n=n, s=s: [(w_lo[s, t], p), (-w_hi[s, t], n)]
            high_terms[s] = lambda t, p=p, n=n, s=s: [(w_hi[s, t], p), (-w_lo[s, t], n)]
        elif box.hi[s] <= 0:
            low_terms[s] = lambda t, s=s: [(w_hi[s, t], x(0, s))]
            high_terms[s] = lambda t, s=s: [(w_lo[s, t], x(0, s))]
        else:
            low_terms[s] = lambda t, s=s: [(w_lo[s, t], x(0, s))]
            high_terms[s] = lambda t, s=s: [(w_hi[s, t], x(0, s))]

    for i in range(net.k):
        m = big_m[i]
        for t in range(sizes[i + 1]):
            out, ind = x(i + 1, t), q(i + 1, t)
            if i == 0:
                lower = [term for s in range(sizes[0]) for term in low_terms[s](t)]
                upper = [term for s in range(sizes[0]) for term in high_terms[s](t)]
            else:
                lower = [(net.weights_lo[i][s, t], x(i, s)) for s in range(sizes[i])]
                upper = [(net.weights_hi[i][s, t], x(i, s)) for s in range(sizes[i])]
            tag = f"C_{i + 1}_{t}"
            constraints += [
                LinearConstraint(tuple(lower) + ((-1.0, out),), "<=", -net.biases_lo[i][t], tag + "_1"),
                LinearConstraint(((1.0, out),), ">=", 0.0, tag + "_2"),
                LinearConstraint(tuple(upper) + ((m[t], ind), (-1.0, out)), ">=", -net.biases_hi[i][t], tag + "_3"),
                LinearConstraint(((m[t], ind), (1.0, out)), "<=", m[t], tag + "_4"),
            ]

    return MilpModel(
        variables=tuple(variables),
        lb=tuple(lb),
        ub=tuple(ub),
        constraints=tuple(constraints),
        big_m=tuple(tuple(float(v) for v in m) for m in big_m),
        meta={
            "bounds_mode": "literal-bounds" if literal_bounds else "interval",
            "layer_sizes": list(sizes),
            "input_rows": len(extra_input_rows),
            "input_splits": sum(1 for v in variables if v.kind == "s"),
        },
    )


def set_objective(model: MilpModel, var: VarRef, sense: str) -> MilpModel:
    """Attach ``max``/``min`` of an output node; replaces any previous objective."""
    if sense not in ("min", "max"):
        raise ValueError(f"objective sense must be 'min' or 'max', got {sense!r}")
    k = len(model.meta.get("layer_sizes", ())) - 1
    if var.kind != "x" or var.layer != k or var not in model.index:
        raise ValueError(f"objective must be an output-layer node variable x_{k}_*, got {var.name}")
    return replace(model, objective=(sense, var))
