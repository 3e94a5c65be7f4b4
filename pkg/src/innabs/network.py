"""Interval neural networks: data model, semantics and interval bound propagation.

Layers are numbered ``0..k``. ``weights_lo[i]`` / ``weights_hi[i]`` hold the
edge intervals from layer ``i`` to layer ``i + 1`` as ``|S_i| x |S_{i+1}|``
arrays, and ``biases_lo[i]`` / ``biases_hi[i]`` hold the bias intervals of
layer ``i + 1``. Every non-input layer applies ReLU, including the output.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

TOL = 1e-9


class Interval(NamedTuple):
    lo: float
    hi: float


def _as_float_arrays(arrays):
    out = []
    for a in arrays:
        arr = np.array(a, dtype=float)
        arr.setflags(write=False)
        out.append(arr)
    return tuple(out)


@dataclass(frozen=True, eq=False)
class InnNetwork:
    """A feed-forward ReLU network whose weights and biases are closed intervals.

    Instances are immutable. Construction only coerces types; call
    :func:`validate` (or :func:`check_network`) to enforce the structural
    invariants.
    """

    weights_lo: tuple
    weights_hi: tuple
    biases_lo: tuple
    biases_hi: tuple
    node_names: tuple | None = None
    meta: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "weights_lo", _as_float_arrays(self.weights_lo))
        object.__setattr__(self, "weights_hi", _as_float_arrays(self.weights_hi))
        object.__setattr__(self, "biases_lo", _as_float_arrays(self.biases_lo))
        object.__setattr__(self, "biases_hi", _as_float_arrays(self.biases_hi))
        if self.node_names is not None:
            object.__setattr__(
                self, "node_names", tuple(tuple(str(n) for n in layer) for layer in self.node_names)
            )
        object.__setattr__(self, "meta", dict(self.meta))

    @classmethod
    def from_concrete(cls, weights: Sequence, biases: Sequence, **kwargs) -> "InnNetwork":
        """Build a network with singular intervals from plain weight/bias arrays."""
        return cls(weights, weights, biases, biases, **kwargs)

    @property
    def k(self) -> int:
        return len(self.weights_lo)

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        if not self.weights_lo:
            return ()
        return (self.weights_lo[0].shape[0],) + tuple(w.shape[1] for w in self.weights_lo)

    def weight(self, i: int, s: int, t: int) -> Interval:
        return Interval(float(self.weights_lo[i][s, t]), float(self.weights_hi[i][s, t]))

    def bias(self, layer: int, t: int) -> Interval:
        """Bias interval of node ``t`` in ``layer`` (``1 <= layer <= k``)."""
        return Interval(float(self.biases_lo[layer - 1][t]), float(self.biases_hi[layer - 1][t]))

    def same_as(self, other: "InnNetwork") -> bool:
        """Bitwise equality of shapes and interval endpoints (names and meta ignored)."""
        if self.k != other.k:
            return False
        pairs = zip(
            self.weights_lo + self.weights_hi + self.biases_lo + self.biases_hi,
            other.weights_lo + other.weights_hi + other.biases_lo + other.biases_hi,
        )
        return all(a.shape == b.shape and np.array_equal(a, b) for a, b in pairs)

    def __eq__(self, other):
        if not isinstance(other, InnNetwork):
            return NotImplemented
        return self.same_as(other) and self.node_names == other.node_names

    __hash__ = None


@dataclass(frozen=True)
class WeightSelection:
    """One concrete choice of every weight and bias from the network's intervals."""

    weights: tuple
    biases: tuple


@dataclass(frozen=True)
class InputBox:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lo, dtype=float).reshape(-1)
        hi = np.array(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise ValueError(f"box bounds have different lengths ({lo.size} vs {hi.size})")
        bad = np.flatnonzero(~(lo <= hi))
        if bad.size:
            j = int(bad[0])
            raise ValueError(f"box interval {j} is empty: [{lo[j]}, {hi[j]}]")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def from_pairs(cls, pairs) -> "InputBox":
        pairs = np.asarray(pairs, dtype=float).reshape(-1, 2)
        return cls(pairs[:, 0], pairs[:, 1])

    def __len__(self):
        return self.lo.size

    def intervals(self) -> list[Interval]:
        return [Interval(float(a), float(b)) for a, b in zip(self.lo, self.hi)]

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lo, self.hi)


def validate(net: InnNetwork) -> list[str]:
    """Return human-readable descriptions of every violated invariant (empty if valid)."""
    problems = []
    k = len(net.weights_lo)
    if k < 1:
        return ["network has no layers (k must be >= 1)"]
    for name, seq in (("weights_hi", net.weights_hi), ("biases_lo", net.biases_lo), ("biases_hi", net.biases_hi)):
        if len(seq) != k:
            problems.append(f"{name} has {len(seq)} layers, expected {k}")
    for i, (wl, wh) in enumerate(zip(net.weights_lo, net.weights_hi)):
        if wl.ndim != 2 or wh.ndim != 2:
            problems.append(f"layer {i}: weight matrices must be 2-dimensional")
    if problems:
        return problems

    sizes = [net.weights_lo[0].shape[0]] + [w.shape[1] for w in net.weights_lo]
    for i in range(k):
        wl, wh = net.weights_lo[i], net.weights_hi[i]
        expected = (sizes[i], sizes[i + 1])
        if wl.shape[0] != sizes[i]:
            problems.append(
                f"layer {i}: weight matrix has {wl.shape[0]} rows but layer {i} has {sizes[i]} nodes"
            )
        if wh.shape != wl.shape:
            problems.append(f"layer {i}: upper weights shape {wh.shape} != lower weights shape {wl.shape}")
        elif wl.shape == expected:
            for s, t in zip(*np.nonzero(~(wl <= wh))):
                problems.append(
                    f"layer {i}: weight entry ({s},{t}) is empty interval [{wl[s, t]}, {wh[s, t]}]"
                )
        if 0 in expected:
            problems.append(f"layer {i}: zero-width layer {expected}")
        wrong = [(name, b.size) for name, b in (("lower", net.biases_lo[i]), ("upper", net.biases_hi[i]))
                 if b.shape != (sizes[i + 1],)]
        if wrong:
            found = ", ".join(f"{name} {n}" for name, n in wrong)
            problems.append(f"layer {i + 1}: bias vector length ({found}), expected {sizes[i + 1]}")
        bl, bh = net.biases_lo[i], net.biases_hi[i]
        if bl.shape == bh.shape:
            for t in np.flatnonzero(~(bl <= bh)):
                problems.append(f"layer {i + 1}: bias entry {t} is empty interval [{bl[t]}, {bh[t]}]")
    for i, w in enumerate(net.weights_lo + net.weights_hi + net.biases_lo + net.biases_hi):
        if not np.all(np.isfinite(w)):
            problems.append("non-finite weight or bias value")
            break
    if net.node_names is not None:
        if len(net.node_names) != k + 1:
            problems.append(f"node_names has {len(net.node_names)} layers, expected {k + 1}")
        else:
            for i, names in enumerate(net.node_names):
                if len(names) != sizes[i]:
                    problems.append(f"layer {i}: {len(names)} node names for {sizes[i]} nodes")
                if len(set(names)) != len(names):
                    problems.append(f"layer {i}: node names are not unique")
    return problems


def check_network(net: InnNetwork) -> None:
    problems = validate(net)
    if problems:
        raise ValueError("invalid network: " + "; ".join(problems))


def is_concrete(net: InnNetwork) -> bool:
    return all(
        np.array_equal(lo, hi)
        for lo, hi in zip(net.weights_lo + net.biases_lo, net.weights_hi + net.biases_hi)
    )


def lower_selection(net: InnNetwork) -> WeightSelection:
    return WeightSelection(net.weights_lo, net.biases_lo)


def sample_selection(net: InnNetwork, seed) -> WeightSelection:
    """Draw every weight and bias uniformly from its interval.

    ``seed`` may be anything accepted by :func:`numpy.random.default_rng`,
    including a ``Generator``; integer seeds make the result reproducible.
    """
    rng = np.random.default_rng(seed)
    weights = tuple(rng.uniform(lo, hi) for lo, hi in zip(net.weights_lo, net.weights_hi))
    biases = tuple(rng.uniform(lo, hi) for lo, hi in zip(net.biases_lo, net.biases_hi))
    return WeightSelection(weights, biases)


def post_layer(net: InnNetwork, i: int, v, sel: WeightSelection) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    w = sel.weights[i]
    if v.shape != (w.shape[0],):
        raise ValueError(f"valuation of length {v.size} does not match layer {i} size {w.shape[0]}")
    return np.maximum(0.0, v @ w + sel.biases[i])


def evaluate(net: InnNetwork, x, sel: WeightSelection | None = None, *, return_all: bool = False):
    """Run the network on input ``x`` under ``sel`` (lower endpoints by default).

    With ``return_all`` the valuations of every layer are returned as a list.
    """
    if sel is None:
        sel = lower_selection(net)
    values = [np.asarray(x, dtype=float)]
    for i in range(net.k):
        values.append(post_layer(net, i, values[-1], sel))
    return values if return_all else values[-1]


def affine_range(w_lo: np.ndarray, w_hi: np.ndarray, b_lo, b_hi, v) -> tuple[np.ndarray, np.ndarray]:
    """Exact range of ``v @ w + b`` over the weight/bias box for a fixed valuation ``v``."""
    v = np.asarray(v, dtype=float)[:, None]
    pos = v > 0
    lo = np.where(pos, w_lo * v, w_hi * v).sum(axis=0) + b_lo
    hi = np.where(pos, w_hi * v, w_lo * v).sum(axis=0) + b_hi
    return lo, hi


def layer_membership(net: InnNetwork, i: int, v, v_next, tol: float = TOL) -> bool:
    """Decide whether ``(v, v_next)`` is a possible transition of layer ``i``."""
    v = np.asarray(v, dtype=float)
    v_next = np.asarray(v_next, dtype=float)
    sizes = net.layer_sizes
    if v.shape != (sizes[i],) or v_next.shape != (sizes[i + 1],):
        raise ValueError(
            f"valuation shapes {v.shape}, {v_next.shape} do not match layers {i}, {i + 1}"
        )
    lo, hi = affine_range(net.weights_lo[i], net.weights_hi[i], net.biases_lo[i], net.biases_hi[i], v)
    if np.any(v_next < -tol):
        return False
    active = v_next > tol
    ok_active = (lo - tol <= v_next) & (v_next <= hi + tol)
    ok_zero = lo <= tol
    return bool(np.all(np.where(active, ok_active, ok_zero)))


@dataclass(frozen=True)
class LayerBounds:
    pre_lo: np.ndarray
    pre_hi: np.ndarray
    post_lo: np.ndarray
    post_hi: np.ndarray


def interval_product(a_lo, a_hi, b_lo, b_hi):
    """Elementwise product of intervals (broadcasting)."""
    cands = np.stack(np.broadcast_arrays(a_lo * b_lo, a_lo * b_hi, a_hi * b_lo, a_hi * b_hi))
    return cands.min(axis=0), cands.max(axis=0)


def interval_bounds(net: InnNetwork, box: InputBox) -> list[LayerBounds]:
    """Propagate the input box through the network with interval arithmetic.

    Entry ``i`` holds the bounds of layer ``i``; for layer 0 the pre- and
    post-activation bounds are both the box. The pre-activation bounds cover
    every input in the box and every weight/bias selection.
    """
    if len(box) != net.layer_sizes[0]:
        raise ValueError(f"box has {len(box)} entries, network has {net.layer_sizes[0]} inputs")
    bounds = [LayerBounds(box.lo, box.hi, box.lo, box.hi)]
    x_lo, x_hi = box.lo, box.hi
    for i in range(net.k):
        p_lo, p_hi = interval_product(net.weights_lo[i], net.weights_hi[i], x_lo[:, None], x_hi[:, None])
        pre_lo = p_lo.sum(axis=0) + net.biases_lo[i]
        pre_hi = p_hi.sum(axis=0) + net.biases_hi[i]
        x_lo, x_hi = np.maximum(0.0, pre_lo), np.maximum(0.0, pre_hi)
        bounds.append(LayerBounds(pre_lo, pre_hi, x_lo, x_hi))
    return bounds


def random_network(rng: np.random.Generator, sizes: Sequence[int], scale: float = 2.0,
                   interval_width: float = 0.0) -> InnNetwork:
    """Random network with weights/biases uniform in ``[-scale, scale]``.

    With ``interval_width > 0`` each entry becomes an interval whose width is
    uniform in ``[0, interval_width]``.
    """
    w = [rng.uniform(-scale, scale, (a, b)) for a, b in zip(sizes[:-1], sizes[1:])]
    b = [rng.uniform(-scale, scale, n) for n in sizes[1:]]
    if interval_width <= 0:
        return InnNetwork.from_concrete(w, b)
    wh = [x + rng.uniform(0, interval_width, x.shape) for x in w]
    bh = [x + rng.uniform(0, interval_width, x.shape) for x in b]
    return InnNetwork(w, wh, b, bh)
