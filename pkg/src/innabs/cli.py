"""Command-line entry point.

Exit codes: 0 success, 1 validation or input error, 2 infeasible or a
solver limit was hit.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .abstraction import abstract_network, identity_partition, validate_partition
from .analysis import RangeConfig, exact_range_oracle, output_range, soundness_check
from .bench import bench_partitions
from .encoding import encode, set_objective, x
from .formats import (
    FormatError,
    parse_box_json,
    parse_network_json,
    parse_nnet,
    parse_partition_json,
    write_lp,
    write_network_json,
    write_results_csv,
    write_results_json,
)
from .lp import INFEASIBLE, OPTIMAL
from .milp import SolveConfig, SolverError
from .network import validate

EXIT_OK, EXIT_INVALID, EXIT_INCOMPLETE = 0, 1, 2


class UsageError(Exception):
    """A user-facing error; printed without a traceback."""


def _read(path: str, what: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {what} file {path!r}: {exc.strerror}") from None


def load_network(path: str):
    text = _read(path, "network")
    try:
        if path.lower().endswith(".nnet"):
            return parse_nnet(text)[0]
        return parse_network_json(text)
    except FormatError as exc:
        raise UsageError(f"{path}: {exc}") from None


def load_partition(path: str, net):
    try:
        return parse_partition_json(_read(path, "partition"), net)
    except (FormatError, ValueError) as exc:
        raise UsageError(f"{path}: {exc}") from None


def load_box(path: str, net):
    try:
        return parse_box_json(_read(path, "box"), net)
    except (FormatError, ValueError) as exc:
        raise UsageError(f"{path}: {exc}") from None


def _emit(args, text: str) -> None:
    if args.output:
        try:
            Path(args.output).write_text(text)
        except OSError as exc:
            raise UsageError(f"--output {args.output!r}: {exc.strerror}") from None
    else:
        sys.stdout.write(text)


def _range_config(args) -> RangeConfig:
    if args.unscaled and not args.allow_unsound:
        raise UsageError("--unscaled produces unsound bounds; pass --allow-unsound to use it anyway")
    solver = SolveConfig(node_limit=args.node_limit, time_limit=args.time_limit)
    return RangeConfig(solver=solver, literal_bounds=args.literal_bounds, unscaled=args.unscaled,
                       jobs=args.jobs)


def _range_exit(result) -> int:
    infos = result.lower_info + result.upper_info
    if any(b.status != OPTIMAL for b in infos):
        return EXIT_INCOMPLETE
    return EXIT_OK


# --------------------------------------------------------------------------- commands


def cmd_validate(args) -> int:
    net = load_network(args.network)
    problems = validate(net)
    report = {"network": args.network, "layer_sizes": list(net.layer_sizes), "problems": problems}
    if args.partition and not problems:
        part = load_partition(args.partition, None)
        pproblems = validate_partition(net, part, require_io_identity=not args.allow_io_merge)
        report["partition"] = args.partition
        report["problems"] = problems = pproblems
    report["ok"] = not problems
    _emit(args, json.dumps(report, indent=2) + "\n")
    return EXIT_OK if not problems else EXIT_INVALID


def cmd_abstract(args) -> int:
    if args.unscaled and not args.allow_unsound:
        raise UsageError("--unscaled produces unsound abstractions; pass --allow-unsound to use it anyway")
    net = load_network(args.network)
    part = load_partition(args.partition, net)
    abs_net = abstract_network(net, part, scaled=not args.unscaled)
    _emit(args, write_network_json(abs_net))
    return EXIT_OK


def cmd_encode(args) -> int:
    net = load_network(args.network)
    box = load_box(args.box, net)
    if args.partition:
        net = abstract_network(net, load_partition(args.partition, net))
    n_out = net.layer_sizes[-1]
    if not 0 <= args.node < n_out:
        raise UsageError(f"--node {args.node} out of range; network has {n_out} outputs")
    model = encode(net, box, literal_bounds=args.literal_bounds)
    model = set_objective(model, x(net.k, args.node), args.sense)
    _emit(args, write_lp(model))
    return EXIT_OK


def cmd_range(args) -> int:
    net = load_network(args.network)
    box = load_box(args.box, net)
    part = load_partition(args.partition, net) if args.partition else None
    result = output_range(net, box, part, _range_config(args))
    _emit(args, write_results_json(result))
    return _range_exit(result)


def cmd_oracle(args) -> int:
    net = load_network(args.network)
    box = load_box(args.box, net)
    result = exact_range_oracle(net, box, literal_bounds=args.literal_bounds)
    _emit(args, write_results_json(result))
    return EXIT_OK if result.lower_info[0].status != INFEASIBLE else EXIT_INCOMPLETE


def cmd_check_soundness(args) -> int:
    net = load_network(args.network)
    part = load_partition(args.partition, net)
    box = load_box(args.box, net)
    config = _range_config(args)
    report = soundness_check(net, part, box, n_samples=args.samples, seed=args.seed,
                             n_selections=args.selections, config=config)
    doc = report.to_dict()
    doc["ok"] = report.ok
    _emit(args, json.dumps(doc, indent=2) + "\n")
    if not _range_exit(report.range) == EXIT_OK:
        return EXIT_INCOMPLETE
    return EXIT_OK if report.ok else EXIT_INVALID


def cmd_bench(args) -> int:
    net = load_network(args.network)
    box = load_box(args.box, net)
    try:
        counts = [int(c) for c in args.counts.split(",") if c.strip()]
    except ValueError:
        raise UsageError(f"--counts expects comma-separated integers, got {args.counts!r}") from None
    if not counts or any(c < 1 for c in counts):
        raise UsageError("--counts needs at least one positive integer")
    config = _range_config(args)
    try:
        table = bench_partitions(net, box, counts, args.runs, args.seed, replace(config, jobs=1),
                                 jobs=args.jobs)
    except ValueError as exc:
        raise UsageError(f"--counts: {exc}") from None
    if args.format == "csv":
        _emit(args, write_results_csv(table.rows))
    else:
        _emit(args, write_results_json(table))
    return EXIT_OK if all(r["exact"] for r in table.rows) else EXIT_INCOMPLETE


# --------------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="innabs", description="Interval neural network abstraction and output range analysis.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def common(p, *, box=False, partition=None):
        p.add_argument("network", help="network file (.nnet or JSON)")
        if partition == "required":
            p.add_argument("partition", help="partition JSON")
        if box:
            p.add_argument("box", help="input box JSON")
        if partition == "optional":
            p.add_argument("--partition", help="partition JSON; omit for the unabstracted network")
        p.add_argument("-o", "--output", help="write to this file instead of stdout")

    def solver_flags(p):
        p.add_argument("--node-limit", type=int, help="branch-and-bound node limit per bound")
        p.add_argument("--time-limit", type=float, help="wall-clock seconds per bound")
        p.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
        p.add_argument("--literal-bounds", action="store_true", help="use [0, M] variable bounds only")
        p.add_argument("--unscaled", action="store_true", help="unscaled hull abstraction (unsound)")
        p.add_argument("--allow-unsound", action="store_true", help="opt in to --unscaled")

    p = sub.add_parser("validate", help="check a network and optionally a partition")
    common(p)
    p.add_argument("--partition", help="partition JSON to check against the network")
    p.add_argument("--allow-io-merge", action="store_true", help="allow merged input/output nodes")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("abstract", help="write the abstract network as JSON")
    common(p, partition="required")
    p.add_argument("--unscaled", action="store_true", help="unscaled hull abstraction (unsound)")
    p.add_argument("--allow-unsound", action="store_true", help="opt in to --unscaled")
    p.set_defaults(func=cmd_abstract)

    p = sub.add_parser("encode", help="write the MILP for one output bound as an LP file")
    common(p, box=True, partition="optional")
    p.add_argument("--node", type=int, default=0, help="output node to optimise (default 0)")
    p.add_argument("--sense", choices=("max", "min"), default="max")
    p.add_argument("--literal-bounds", action="store_true", help="use [0, M] variable bounds only")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("range", help="compute output bounds")
    common(p, box=True, partition="optional")
    solver_flags(p)
    p.set_defaults(func=cmd_range)

    p = sub.add_parser("oracle", help="exact range by enumerating activation patterns (small nets)")
    common(p, box=True)
    p.add_argument("--literal-bounds", action="store_true", help="use [0, M] variable bounds only")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("check-soundness", help="sample the network and check the abstract range")
    common(p, box=True, partition="required")
    solver_flags(p)
    p.add_argument("--samples", type=int, default=100, help="sampled inputs (default 100)")
    p.add_argument("--selections", type=int, default=10, help="weight selections per input for INNs")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.set_defaults(func=cmd_check_soundness)

    p = sub.add_parser("bench", help="ranges over random partitions of several sizes")
    common(p, box=True)
    solver_flags(p)
    p.add_argument("--counts", default="2,4,8", help="comma-separated groups per hidden layer")
    p.add_argument("--runs", type=int, default=30, help="random partitions per count (default 30)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"innabs {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SolverError as exc:
        print(f"innabs {args.command}: solver error: {exc}", file=sys.stderr)
        return EXIT_INCOMPLETE
    except ValueError as exc:
        print(f"innabs {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
