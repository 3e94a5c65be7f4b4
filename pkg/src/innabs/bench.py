"""Benchmark harness: output ranges over random abstractions of varying size.

For each requested group count, several random partitions are drawn (the
count applies to every hidden layer), the abstract range is computed, and
abstraction / encoding / solve times are recorded next to the bounds.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .abstraction import random_partition
from .analysis import RangeConfig, _map, output_range
from .network import InnNetwork, InputBox


@dataclass
class BenchTable:
    rows: list = field(default_factory=list)
    summary: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"meta": self.meta, "summary": self.summary, "rows": self.rows}

    def upper_bounds(self, count: int, node: int = 0) -> list:
        return [r["upper"] for r in self.rows if r["count"] == count and r["node"] == node]


def _stats(values):
    vals = [v for v in values if v is not None]
    if not vals:
        return {"avg": None, "min": None, "max": None}
    return {"avg": float(np.mean(vals)), "min": float(np.min(vals)), "max": float(np.max(vals))}


def _one_run(args):
    net, box, count, run, seed, config = args
    # Seeded per (count, run) so results do not depend on scheduling.
    rng = np.random.default_rng([seed, count, run])
    partition = random_partition(net, count, rng)
    t0 = time.perf_counter()
    res = output_range(net, box, partition, config)
    total = time.perf_counter() - t0
    rows = []
    for node, (lo, hi) in enumerate(res.intervals):
        rows.append({
            "count": count,
            "run": run,
            "node": node,
            "abs_time": res.timings["abstraction"],
            "enc_time": res.timings["encoding"],
            "solve_time": res.timings["solve"],
            "lower": lo,
            "upper": hi,
            "exact": res.lower_info[node].exact and res.upper_info[node].exact,
        })
    return rows, partition.to_list(), total


def bench_partitions(net: InnNetwork, box: InputBox, node_counts, runs_per_count: int = 30,
                     seed: int = 0, config: RangeConfig = RangeConfig(), jobs: int = 1) -> BenchTable:
    """Range statistics over ``runs_per_count`` random partitions per group count."""
    widths = net.layer_sizes[1:-1]
    for count in node_counts:
        if widths and count > min(widths):
            raise ValueError(f"group count {count} exceeds the narrowest hidden layer ({min(widths)})")
    tasks = [(net, box, int(c), run, seed, config) for c in node_counts for run in range(runs_per_count)]
    outputs = _map(_one_run, tasks, jobs)
    table = BenchTable(meta={
        "seed": seed,
        "runs_per_count": runs_per_count,
        "node_counts": [int(c) for c in node_counts],
        "count_semantics": "groups per hidden layer",
        "layer_sizes": list(net.layer_sizes),
    })
    partitions = {}
    for (rows, part, _), task in zip(outputs, tasks):
        table.rows.extend(rows)
        partitions[(task[2], task[3])] = part
    n_out = net.layer_sizes[-1]
    for count in node_counts:
        rows = [r for r in table.rows if r["count"] == count]
        entry = {"count": int(count)}
        for key in ("abs_time", "enc_time", "solve_time"):
            entry[key] = _stats([r[key] for r in rows if r["node"] == 0])
        entry["nodes"] = [
            {"node": t,
             "lower": _stats([r["lower"] for r in rows if r["node"] == t]),
             "upper": _stats([r["upper"] for r in rows if r["node"] == t])}
            for t in range(n_out)
        ]
        table.summary.append(entry)
    table.meta["partitions"] = [
        {"count": c, "run": r, "layers": partitions[(c, r)]} for c, r in sorted(partitions)
    ]
    return table
