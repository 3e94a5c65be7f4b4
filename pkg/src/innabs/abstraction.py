"""Node-merging abstraction of interval neural networks.

A partition groups the nodes of every layer. Merging produces a smaller
network whose edge intervals are the hull of the member edges scaled by the
size of the *source* group, and whose bias intervals are the plain hull of
the member biases. The scaling is what makes the abstraction sound; the
unscaled variant is kept only to demonstrate that it is not.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .network import InnNetwork, Interval, check_network

Groups = tuple  # tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class Partition:
    """Per-layer grouping of node indices; ``layers[i]`` is the group list of layer ``i``."""

    layers: tuple

    def __post_init__(self):
        object.__setattr__(
            self,
            "layers",
            tuple(tuple(tuple(int(n) for n in g) for g in groups) for groups in self.layers),
        )

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(groups) for groups in self.layers)

    def to_list(self) -> list:
        return [[list(g) for g in groups] for groups in self.layers]


def identity_partition(net: InnNetwork) -> Partition:
    return Partition(tuple(tuple((j,) for j in range(n)) for n in net.layer_sizes))


def _hidden_groups(net, make_groups):
    sizes = net.layer_sizes
    layers = [tuple((j,) for j in range(sizes[0]))]
    for i in range(1, net.k):
        layers.append(make_groups(i, sizes[i]))
    layers.append(tuple((j,) for j in range(sizes[-1])))
    return Partition(tuple(layers))


def _group_count(n_groups, n):
    if n_groups < 1:
        raise ValueError(f"group count must be positive, got {n_groups}")
    return min(n_groups, n)


def random_partition(net: InnNetwork, n_groups: int, seed=None) -> Partition:
    """Balanced random grouping of each hidden layer into ``n_groups`` groups.

    Input and output layers stay as singletons. Layers narrower than
    ``n_groups`` keep every node separate. Group sizes differ by at most one.
    """
    rng = np.random.default_rng(seed)

    def make(i, n):
        m = _group_count(n_groups, n)
        perm = rng.permutation(n)
        return tuple(tuple(sorted(int(j) for j in chunk)) for chunk in np.array_split(perm, m))

    return _hidden_groups(net, make)


def contiguous_partition(net: InnNetwork, n_groups: int) -> Partition:
    """Split each hidden layer into ``n_groups`` consecutive, balanced index blocks."""

    def make(i, n):
        m = _group_count(n_groups, n)
        return tuple(tuple(int(j) for j in chunk) for chunk in np.array_split(np.arange(n), m))

    return _hidden_groups(net, make)


def round_robin_partition(net: InnNetwork, n_groups: int) -> Partition:
    """Deal hidden nodes into ``n_groups`` groups in turn: node ``j`` joins group ``j % n_groups``."""

    def make(i, n):
        m = _group_count(n_groups, n)
        return tuple(tuple(range(g, n, m)) for g in range(m))

    return _hidden_groups(net, make)


def _groups_violations(groups, n, where):
    problems = []
    seen = {}
    for g_idx, group in enumerate(groups):
        if len(group) == 0:
            problems.append(f"{where}: group {g_idx} is empty")
        for node in group:
            if not 0 <= node < n:
                problems.append(f"{where}: node {node} out of range 0..{n - 1}")
            elif node in seen:
                problems.append(f"{where}: node {node} appears in groups {seen[node]} and {g_idx}")
            else:
                seen[node] = g_idx
    missing = sorted(set(range(n)) - set(seen))
    if missing:
        problems.append(f"{where}: nodes {missing} are not covered by any group")
    return problems


def validate_partition(net: InnNetwork, partition: Partition, require_io_identity: bool = True) -> list[str]:
    sizes = net.layer_sizes
    if len(partition.layers) != len(sizes):
        return [f"partition has {len(partition.layers)} layers, network has {len(sizes)}"]
    problems = []
    for i, (groups, n) in enumerate(zip(partition.layers, sizes)):
        problems += _groups_violations(groups, n, f"layer {i}")
    if require_io_identity:
        for i in (0, len(sizes) - 1):
            if any(len(g) != 1 for g in partition.layers[i]):
                problems.append(f"layer {i}: input/output layers must not merge nodes")
    return problems


def check_partition(net, partition, require_io_identity=True):
    problems = validate_partition(net, partition, require_io_identity)
    if problems:
        raise ValueError("invalid partition: " + "; ".join(problems))


def _merge_layer(w_lo, w_hi, left: Sequence, right: Sequence, scaled: bool):
    """Hull of the edge intervals between every (left group, right group) pair."""
    lo = np.empty((len(left), len(right)))
    hi = np.empty((len(left), len(right)))
    for a, src in enumerate(left):
        src = list(src)
        factor = float(len(src)) if scaled else 1.0
        for b, dst in enumerate(right):
            dst = list(dst)
            lo[a, b] = factor * w_lo[np.ix_(src, dst)].min()
            hi[a, b] = factor * w_hi[np.ix_(src, dst)].max()
    return lo, hi


def _merge_bias(b_lo, b_hi, groups):
    return (
        np.array([b_lo[list(g)].min() for g in groups]),
        np.array([b_hi[list(g)].max() for g in groups]),
    )


def _merged_names(net, partition):
    if net.node_names is None:
        return None
    return tuple(
        tuple("+".join(names[j] for j in g) for g in groups)
        for names, groups in zip(net.node_names, partition.layers)
    )


def abstract_network(net: InnNetwork, partition: Partition, *, scaled: bool = True) -> InnNetwork:
    """Merge the nodes of ``net`` according to ``partition``.

    ``scaled=False`` drops the source-group-size factor. That variant does not
    over-approximate the original network and is flagged as unsound in the
    result's ``meta``.
    """
    check_network(net)
    check_partition(net, partition, require_io_identity=False)
    w_lo, w_hi, b_lo, b_hi = [], [], [], []
    for i in range(net.k):
        lo, hi = _merge_layer(net.weights_lo[i], net.weights_hi[i],
                              partition.layers[i], partition.layers[i + 1], scaled)
        w_lo.append(lo)
        w_hi.append(hi)
        lo, hi = _merge_bias(net.biases_lo[i], net.biases_hi[i], partition.layers[i + 1])
        b_lo.append(lo)
        b_hi.append(hi)
    meta = {"abstraction": "scaled-hull" if scaled else "unscaled-hull"}
    if not scaled:
        meta["unsound"] = True
    return InnNetwork(w_lo, w_hi, b_lo, b_hi, node_names=_merged_names(net, partition), meta=meta)


def layer_slice(net: InnNetwork, j: int) -> InnNetwork:
    """The one-layer network formed by layers ``j`` and ``j + 1`` of ``net``."""
    return InnNetwork(
        [net.weights_lo[j]], [net.weights_hi[j]], [net.biases_lo[j]], [net.biases_hi[j]]
    )


def labs(net: InnNetwork, j: int, groups: Groups) -> InnNetwork:
    """Merge the left layer ``j`` only, scaling each hull by its group size.

    Returns a one-layer network from the groups of layer ``j`` to the
    unchanged nodes of layer ``j + 1``, with layer ``j + 1``'s biases.
    """
    if not 0 <= j < net.k:
        raise ValueError(f"layer {j} has no outgoing edges (k = {net.k})")
    problems = _groups_violations(groups, net.layer_sizes[j], f"layer {j}")
    if problems:
        raise ValueError("invalid groups: " + "; ".join(problems))
    right = [(t,) for t in range(net.layer_sizes[j + 1])]
    lo, hi = _merge_layer(net.weights_lo[j], net.weights_hi[j], groups, right, scaled=True)
    return InnNetwork([lo], [hi], [net.biases_lo[j]], [net.biases_hi[j]])


def rabs(net1: InnNetwork, groups: Groups) -> InnNetwork:
    """Merge the right layer of a one-layer network by plain hull (no scaling)."""
    if net1.k != 1:
        raise ValueError(f"rabs needs a one-layer network, got k = {net1.k}")
    problems = _groups_violations(groups, net1.layer_sizes[1], "layer 1")
    if problems:
        raise ValueError("invalid groups: " + "; ".join(problems))
    left = [(s,) for s in range(net1.layer_sizes[0])]
    lo, hi = _merge_layer(net1.weights_lo[0], net1.weights_hi[0], left, groups, scaled=False)
    b_lo, b_hi = _merge_bias(net1.biases_lo[0], net1.biases_hi[0], groups)
    return InnNetwork([lo], [hi], [b_lo], [b_hi])


def alpha(v, groups: Groups) -> list[Interval]:
    """Box of abstract valuations: each group ranges between its members' min and max."""
    v = np.asarray(v, dtype=float)
    problems = _groups_violations(groups, v.size, "valuation")
    if problems:
        raise ValueError("groups do not match valuation: " + "; ".join(problems))
    return [Interval(float(v[list(g)].min()), float(v[list(g)].max())) for g in groups]


def averaged_weight(w, v) -> float:
    """Single weight reproducing ``sum(w_i v_i)`` against the mean of ``v``.

    For non-negative ``v`` with positive mean the result lies within
    ``n * [min w, max w]``. All-zero ``v`` returns ``n * min(w)`` (any value
    in range works since both sides vanish).
    """
    w = np.asarray(w, dtype=float)
    v = np.asarray(v, dtype=float)
    mean = v.mean()
    if mean == 0:
        return float(w.size * w.min())
    return float(np.dot(w, v) / mean)
