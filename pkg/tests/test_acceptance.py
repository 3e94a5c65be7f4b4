"""Acceptance criteria, one test per criterion.

Each criterion prints a single PASS/FAIL line (also when the module is run
directly with ``python3 tests/test_acceptance.py``).
"""
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import random_box  # noqa: E402

from innabs.abstraction import (  # noqa: E402
    Partition,
    abstract_network,
    labs,
    layer_slice,
    rabs,
    random_partition,
)
from innabs.analysis import RangeConfig, exact_range_oracle, output_range, soundness_check  # noqa: E402
from innabs.bench import bench_partitions  # noqa: E402
from innabs.encoding import LinearConstraint, encode, x  # noqa: E402
from innabs.formats import (  # noqa: E402
    NnetNormalization,
    parse_box_json,
    parse_network_json,
    parse_nnet,
    parse_partition_json,
    write_box_json,
    write_network_json,
    write_nnet,
    write_partition_json,
)
from innabs.network import InnNetwork, InputBox, Interval, random_network  # noqa: E402

TOL = 1e-6


def _random_sizes(rng, n_layers, lo=2, hi=6):
    return [int(rng.integers(lo, hi + 1)) for _ in range(n_layers)]


def _partition_for(net, rng):
    """Random group count per hidden layer, then a balanced random grouping."""
    sizes = net.layer_sizes
    layers = [tuple((j,) for j in range(sizes[0]))]
    for n in sizes[1:-1]:
        count = int(rng.integers(1, n + 1))
        perm = rng.permutation(n)
        layers.append(tuple(tuple(sorted(int(j) for j in c)) for c in np.array_split(perm, count)))
    layers.append(tuple((j,) for j in range(sizes[-1])))
    return Partition(tuple(layers))


# --------------------------------------------------------------------------- criteria


def criterion_1():
    """Soundness of abstraction on sampled executions."""
    rng = np.random.default_rng(101)
    violations, worst = 0, -np.inf
    for _ in range(100):
        k = int(rng.integers(2, 5))
        net = random_network(rng, _random_sizes(rng, k + 1), scale=2.0)
        part = _partition_for(net, rng)
        box = random_box(rng, net.layer_sizes[0])
        report = soundness_check(net, part, box, n_samples=100, seed=int(rng.integers(2**31)))
        violations += len(report.violations)
        worst = max(worst, report.max_slack)
    return violations == 0, f"100 nets x 100 samples, violations={violations}, max slack={worst:.3g}"


def _guard_sized(rng, interval):
    n_in = int(rng.integers(1, 4))
    hidden_layers = int(rng.integers(1, 4))
    budget = 12
    sizes = [n_in]
    for h in range(hidden_layers):
        remaining = hidden_layers - h
        cap = max(1, min(4, budget - remaining))
        n = int(rng.integers(1, cap + 1))
        sizes.append(n)
        budget -= n
    sizes.append(int(rng.integers(1, min(2, budget) + 1)))
    width = float(rng.uniform(0.05, 0.8)) if interval else 0.0
    return random_network(rng, sizes, scale=2.0, interval_width=width)


def criterion_2():
    """Branch-and-bound against full enumeration."""
    rng = np.random.default_rng(202)
    worst, mismatches = 0.0, 0
    for case in range(200):
        net = _guard_sized(rng, interval=case % 2 == 1)
        assert sum(net.layer_sizes[1:]) <= 12
        box = random_box(rng, net.layer_sizes[0])
        ours = output_range(net, box)
        ref = exact_range_oracle(net, box)
        for a, b in zip(ours.lower + ours.upper, ref.lower + ref.upper):
            gap = abs(a - b)
            worst = max(worst, gap)
            mismatches += gap > TOL
    return mismatches == 0, f"200 nets/INNs, mismatches={mismatches}, max gap={worst:.3g}"


def _random_groups(rng, n):
    count = int(rng.integers(1, n + 1))
    perm = rng.permutation(n)
    return tuple(tuple(sorted(int(j) for j in c)) for c in np.array_split(perm, count))


def criterion_3():
    """rabs(labs(.)) equals the matching layer of the abstract network, bit for bit."""
    rng = np.random.default_rng(303)
    failures = 0
    for _ in range(1000):
        sizes = _random_sizes(rng, int(rng.integers(3, 6)), 1, 7)
        net = random_network(rng, sizes, scale=float(rng.uniform(0.1, 10)),
                             interval_width=float(rng.choice([0.0, rng.uniform(0, 3)])))
        layers = [_random_groups(rng, n) for n in sizes]
        part = Partition(tuple(layers))
        j = int(rng.integers(0, net.k))
        composed = rabs(labs(net, j, layers[j]), layers[j + 1])
        expected = layer_slice(abstract_network(net, part), j)
        failures += not composed.same_as(expected)
    return failures == 0, f"1000 cases, mismatches={failures}"


def criterion_4():
    """Worked merge example."""
    w = [np.ones((1, 2)), np.array([[7.0, 8.0], [10.0, 11.0]]), np.ones((2, 1))]
    net = InnNetwork.from_concrete(w, [np.zeros(2), np.zeros(2), np.zeros(1)])
    pairs = ((0, 1),)
    full = abstract_network(net, Partition((((0,),), pairs, pairs, ((0,),)))).weight(1, 0, 0)
    left = labs(net, 1, pairs)
    single = left.weight(0, 0, 0)
    hull = rabs(left, pairs).weight(0, 0, 0)
    ok = full == Interval(14.0, 22.0) and single == Interval(14.0, 20.0) and hull == Interval(14.0, 22.0)
    ok = ok and left.weight(0, 0, 1) == Interval(16.0, 22.0)
    return ok, f"abstract={tuple(full)}, labs={tuple(single)}, rabs={tuple(hull)}"


def find_unscaled_witness(max_tries=500):
    """Search one-input nets with a mergeable hidden pair for an unscaled-hull violation."""
    rng = np.random.default_rng(505)
    part = Partition((((0,),), ((0, 1),), ((0,),)))
    box = InputBox([0.0], [1.0])
    unscaled = RangeConfig(unscaled=True)
    for attempt in range(max_tries):
        w0 = rng.uniform(0.0, 2.0, (1, 2))
        w1 = rng.uniform(0.0, 2.0, (2, 1))
        net = InnNetwork.from_concrete([w0, w1], [np.zeros(2), np.zeros(1)])
        bad = soundness_check(net, part, box, n_samples=100, seed=attempt, config=unscaled)
        if bad.violations:
            return net, part, box, attempt
    return None


def criterion_5():
    """Unscaled merging is unsound on a searched witness; the scaled one holds on the same samples."""
    found = find_unscaled_witness()
    if found is None:
        return False, "no witness found"
    net, part, box, seed = found
    bad = soundness_check(net, part, box, n_samples=100, seed=seed, config=RangeConfig(unscaled=True))
    good = soundness_check(net, part, box, n_samples=100, seed=seed)
    ok = len(bad.violations) >= 1 and len(good.violations) == 0
    w0 = np.round(net.weights_lo[0].ravel(), 3).tolist()
    w1 = np.round(net.weights_lo[1].ravel(), 3).tolist()
    return ok, (f"witness w_in={w0} w_out={w1}: unscaled violations={len(bad.violations)}, "
                f"scaled violations={len(good.violations)}")


def criterion_6():
    """Exact range of the network lies inside the exact range of its abstraction."""
    rng = np.random.default_rng(606)
    failures, checked = 0, 0
    while checked < 50:
        net = _guard_sized(rng, interval=checked % 2 == 1)
        if net.k < 2:
            continue
        part = _partition_for(net, rng)
        box = random_box(rng, net.layer_sizes[0])
        concrete = exact_range_oracle(net, box)
        abstract = exact_range_oracle(abstract_network(net, part), box)
        for t in range(net.layer_sizes[-1]):
            inside = (abstract.lower[t] <= concrete.lower[t] + TOL
                      and concrete.upper[t] <= abstract.upper[t] + TOL)
            failures += not inside
        checked += 1
    return failures == 0, f"50 nets, containment failures={failures}"


ACCEPT7_SEED = 7
ACCEPT7_BOX = InputBox([0.2, 0.1], [0.4, 0.3])


def criterion_7():
    """Bound trend as the abstraction is refined."""
    net = random_network(np.random.default_rng(ACCEPT7_SEED), [2, 12, 12, 12, 1], scale=1.0)
    exact = output_range(net, ACCEPT7_BOX)
    counts = (2, 4, 8, 12)
    table = bench_partitions(net, ACCEPT7_BOX, counts, runs_per_count=10, seed=0)
    means = [float(np.mean(table.upper_bounds(c))) for c in counts]
    non_increasing = all(a >= b - TOL for a, b in zip(means, means[1:]))
    identity_exact = all(abs(u - exact.upper[0]) <= TOL for u in table.upper_bounds(12))
    identity_exact = identity_exact and all(
        abs(r["lower"] - exact.lower[0]) <= TOL for r in table.rows if r["count"] == 12)
    ub2 = table.upper_bounds(2)
    spread = max(ub2) / min(ub2)
    all_exact = all(r["exact"] for r in table.rows)
    ok = non_increasing and identity_exact and spread > 1 and all_exact
    shown = ", ".join(f"{c}:{m:.4g}" for c, m in zip(counts, means))
    return ok, (f"mean upper {shown}; exact upper {exact.upper[0]:.6g}; "
                f"count-2 max/min ratio {spread:.3f}")


def criterion_8():
    """Constraint and binary counts of the encoding."""
    rng = np.random.default_rng(808)
    bad = 0
    for _ in range(100):
        sizes = _random_sizes(rng, int(rng.integers(2, 6)), 1, 8)
        net = random_network(rng, sizes)
        rows = int(rng.integers(0, 4))
        extra = [LinearConstraint(((1.0, x(0, int(rng.integers(sizes[0])))),), "<=", 0.5, f"I_{r}")
                 for r in range(rows)]
        model = encode(net, random_box(rng, sizes[0]), extra)
        nodes = sum(sizes[1:])
        bad += len(model.constraints) != 4 * nodes + rows or len(model.binaries) != nodes
    return bad == 0, f"100 shapes, count mismatches={bad}"


def criterion_9():
    """JSON and NNet documents survive a write/read cycle bit for bit."""
    rng = np.random.default_rng(909)
    failures = 0
    for _ in range(100):
        sizes = _random_sizes(rng, int(rng.integers(2, 5)), 1, 6)
        scale = float(10.0 ** rng.uniform(-3, 3))
        inn = random_network(rng, sizes, scale=scale, interval_width=float(rng.uniform(0, scale)))
        concrete = random_network(rng, sizes, scale=scale)
        norm = NnetNormalization(rng.uniform(-5, 0, sizes[0]), rng.uniform(0, 5, sizes[0]),
                                 rng.normal(size=sizes[0] + 1), rng.uniform(0.1, 10, sizes[0] + 1))
        part = random_partition(inn, int(rng.integers(1, 4)), rng)
        box = random_box(rng, sizes[0], limit=scale)

        ok = parse_network_json(write_network_json(inn)).same_as(inn)
        net2, norm2 = parse_nnet(write_nnet(concrete, norm))
        ok &= net2.same_as(concrete)
        ok &= all(np.array_equal(a, b) for a, b in zip(
            (norm.input_mins, norm.input_maxes, norm.means, norm.ranges),
            (norm2.input_mins, norm2.input_maxes, norm2.means, norm2.ranges)))
        ok &= parse_partition_json(write_partition_json(part), inn) == part
        box2 = parse_box_json(write_box_json(box), inn)
        ok &= np.array_equal(box2.lo, box.lo) and np.array_equal(box2.hi, box.hi)
        failures += not ok
    return failures == 0, f"100 documents, round-trip failures={failures}"


CRITERIA = {
    1: (criterion_1, 180),
    2: (criterion_2, 300),
    3: (criterion_3, 30),
    4: (criterion_4, None),
    5: (criterion_5, None),
    6: (criterion_6, None),
    7: (criterion_7, 600),
    8: (criterion_8, None),
    9: (criterion_9, None),
}


def run_criterion(n):
    fn, budget = CRITERIA[n]
    t0 = time.perf_counter()
    ok, detail = fn()
    elapsed = time.perf_counter() - t0
    if budget is not None and elapsed > budget:
        ok = False
        detail += f"; over time budget ({budget}s)"
    line = f"ACCEPTANCE {n}: {'PASS' if ok else 'FAIL'} ({elapsed:.1f}s) {detail}"
    return ok, line


@pytest.mark.acceptance
@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(n, capsys):
    ok, line = run_criterion(n)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [run_criterion(n) for n in sorted(CRITERIA)]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
