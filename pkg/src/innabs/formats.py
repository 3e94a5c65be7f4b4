"""Readers and writers: NNet text, JSON documents, LP files and result tables."""
from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass

import numpy as np

from .abstraction import Partition, validate_partition
from .encoding import LinearConstraint, MilpModel, VarRef
from .network import InnNetwork, InputBox, validate

FORMAT_VERSION = 1
CSV_HEADER = ("count", "run", "node", "abs_time", "enc_time", "solve_time", "lower", "upper")


class FormatError(ValueError):
    """A document failed to parse or validate; the message names the location."""


class _EndOfFile(FormatError):
    pass


def _num(v: float) -> str:
    return f"{v:.17g}"


# --------------------------------------------------------------------------- NNet


@dataclass(frozen=True)
class NnetNormalization:
    input_mins: np.ndarray
    input_maxes: np.ndarray
    means: np.ndarray
    ranges: np.ndarray

    def box(self) -> InputBox:
        """Box given by the file's raw input limits."""
        return InputBox(self.input_mins, self.input_maxes)

    def normalize_box(self, box: InputBox) -> InputBox:
        """Map a box in raw input units into the network's normalised input space."""
        n = len(box)
        mean, rng = self.means[:n], self.ranges[:n]
        return InputBox((box.lo - mean) / rng, (box.hi - mean) / rng)


def _nnet_lines(text):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("/"):
            continue
        yield lineno, raw


def _nnet_numbers(lineno, raw, *, integer=False):
    values = []
    col = 0
    for field in raw.split(","):
        start = col + 1 + (len(field) - len(field.lstrip()))
        col += len(field) + 1
        tok = field.strip()
        if not tok:
            continue
        try:
            values.append(int(tok) if integer else float(tok))
        except ValueError:
            kind = "integer" if integer else "number"
            raise FormatError(f"line {lineno}, column {start}: expected {kind}, got {tok!r}") from None
    return values


def parse_nnet(text: str) -> tuple[InnNetwork, NnetNormalization]:
    """Parse the NNet dialect used by the ACAS Xu benchmarks.

    The returned network is concrete; normalisation constants come back
    separately and are never applied implicitly.
    """
    lines = iter(_nnet_lines(text))

    def take(what, count=None, integer=False):
        try:
            lineno, raw = next(lines)
        except StopIteration:
            raise _EndOfFile(f"unexpected end of file while reading {what}") from None
        vals = _nnet_numbers(lineno, raw, integer=integer)
        if count is not None and len(vals) < count:
            raise FormatError(f"line {lineno}: {what} expects {count} values, found {len(vals)}")
        return lineno, vals[:count] if count is not None else vals

    lineno, header = take("header", 4, integer=True)
    n_layers, n_in, n_out, _max_size = header
    if n_layers < 1:
        raise FormatError(f"line {lineno}: layer count must be positive, got {n_layers}")
    lineno, sizes = take("layer sizes", n_layers + 1, integer=True)
    if sizes[0] != n_in or sizes[-1] != n_out:
        raise FormatError(
            f"line {lineno}: layer sizes {sizes} disagree with header input/output sizes {n_in}/{n_out}"
        )
    take("symmetric flag")
    _, mins = take("input minimums", n_in)
    _, maxes = take("input maximums", n_in)
    _, means = take("input means", n_in + 1)
    _, ranges = take("input ranges", n_in + 1)

    weights, biases = [], []
    for layer in range(n_layers):
        rows_in, rows_out = sizes[layer], sizes[layer + 1]
        w = np.empty((rows_out, rows_in))
        for r in range(rows_out):
            try:
                lineno, vals = take(f"weights of layer {layer}, row {r}")
            except _EndOfFile as exc:
                raise FormatError(
                    f"truncated weight block for layer {layer}: expected {rows_out} rows of {rows_in}, "
                    f"found {r} rows ({exc})"
                ) from None
            if len(vals) != rows_in:
                raise FormatError(
                    f"line {lineno}: weight row {r} of layer {layer} expects {rows_in} values, found {len(vals)}"
                )
            w[r] = vals
        b = np.empty(rows_out)
        for r in range(rows_out):
            try:
                lineno, vals = take(f"bias {r} of layer {layer}")
            except _EndOfFile as exc:
                raise FormatError(
                    f"truncated bias block for layer {layer}: expected {rows_out} biases, found {r} ({exc})"
                ) from None
            if len(vals) != 1:
                raise FormatError(f"line {lineno}: bias {r} of layer {layer} expects 1 value, found {len(vals)}")
            b[r] = vals[0]
        weights.append(w.T)
        biases.append(b)
    net = InnNetwork.from_concrete(weights, biases, meta={"source": "nnet"})
    norm = NnetNormalization(np.array(mins), np.array(maxes), np.array(means), np.array(ranges))
    return net, norm


def write_nnet(net: InnNetwork, norm: NnetNormalization | None = None, comment: str = "") -> str:
    """Serialise a concrete network in the NNet dialect (lower endpoints are written)."""
    sizes = net.layer_sizes
    n_in = sizes[0]
    if norm is None:
        norm = NnetNormalization(np.full(n_in, -1.0), np.full(n_in, 1.0), np.zeros(n_in + 1), np.ones(n_in + 1))
    out = [f"// {line}" for line in comment.splitlines()] if comment else ["// written by innabs"]
    out.append(f"{net.k},{sizes[0]},{sizes[-1]},{max(sizes)},")
    out.append(",".join(str(s) for s in sizes) + ",")
    out.append("0,")
    for arr in (norm.input_mins, norm.input_maxes, norm.means, norm.ranges):
        out.append(",".join(_num(v) for v in arr) + ",")
    for w, b in zip(net.weights_lo, net.biases_lo):
        for row in w.T:
            out.append(",".join(_num(v) for v in row) + ",")
        for v in b:
            out.append(_num(v) + ",")
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------- JSON


def _interval(value, path):
    if isinstance(value, bool):
        raise FormatError(f"{path}: expected number or [lo, hi], got {value!r}")
    if isinstance(value, (int, float)):
        return float(value), float(value)
    if isinstance(value, list) and len(value) == 2 and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        lo, hi = float(value[0]), float(value[1])
        if not lo <= hi:
            raise FormatError(f"{path}: empty interval [{value[0]}, {value[1]}]")
        return lo, hi
    raise FormatError(f"{path}: expected number or [lo, hi], got {value!r}")


def _emit(lo, hi):
    lo, hi = float(lo), float(hi)
    return lo if lo == hi else [lo, hi]


def _require(doc, key, kind, path="$"):
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: expected an object")
    if key not in doc:
        raise FormatError(f"{path}: missing required field {key!r}")
    if not isinstance(doc[key], kind):
        raise FormatError(f"{path}.{key}: expected {kind.__name__}")
    return doc[key]


def network_from_dict(doc) -> InnNetwork:
    sizes = _require(doc, "layers", list)
    if len(sizes) < 2 or not all(isinstance(s, int) and not isinstance(s, bool) and s > 0 for s in sizes):
        raise FormatError("$.layers: expected at least two positive integers")
    weights = _require(doc, "weights", list)
    biases = _require(doc, "biases", list)
    k = len(sizes) - 1
    if len(weights) != k:
        raise FormatError(f"$.weights: expected {k} layers, found {len(weights)}")
    if len(biases) != k:
        raise FormatError(f"$.biases: expected {k} layers, found {len(biases)}")
    w_lo, w_hi, b_lo, b_hi = [], [], [], []
    for i in range(k):
        rows = weights[i]
        path = f"$.weights[{i}]"
        if not isinstance(rows, list) or len(rows) != sizes[i]:
            raise FormatError(f"{path}: expected {sizes[i]} rows")
        lo = np.empty((sizes[i], sizes[i + 1]))
        hi = np.empty_like(lo)
        for s, row in enumerate(rows):
            if not isinstance(row, list) or len(row) != sizes[i + 1]:
                raise FormatError(f"{path}[{s}]: expected {sizes[i + 1]} entries")
            for t, v in enumerate(row):
                lo[s, t], hi[s, t] = _interval(v, f"{path}[{s}][{t}]")
        w_lo.append(lo)
        w_hi.append(hi)
        vec = biases[i]
        path = f"$.biases[{i}]"
        if not isinstance(vec, list) or len(vec) != sizes[i + 1]:
            raise FormatError(f"{path}: expected {sizes[i + 1]} entries")
        pairs = [_interval(v, f"{path}[{t}]") for t, v in enumerate(vec)]
        b_lo.append([p[0] for p in pairs])
        b_hi.append([p[1] for p in pairs])
    names = doc.get("names")
    if names is not None:
        if not isinstance(names, list) or len(names) != len(sizes) or not all(
            isinstance(layer, list) and len(layer) == n and all(isinstance(x, str) for x in layer)
            for layer, n in zip(names, sizes)
        ):
            raise FormatError("$.names: expected one list of strings per layer matching the layer sizes")
    meta = {}
    if "provenance" in doc:
        meta["provenance"] = doc["provenance"]
    net = InnNetwork(w_lo, w_hi, b_lo, b_hi, node_names=names, meta=meta)
    problems = validate(net)
    if problems:
        raise FormatError("$: " + "; ".join(problems))
    return net


def network_to_dict(net: InnNetwork) -> dict:
    doc = {
        "format_version": FORMAT_VERSION,
        "layers": list(net.layer_sizes),
        "weights": [
            [[_emit(a, b) for a, b in zip(row_lo, row_hi)] for row_lo, row_hi in zip(lo, hi)]
            for lo, hi in zip(net.weights_lo, net.weights_hi)
        ],
        "biases": [[_emit(a, b) for a, b in zip(lo, hi)] for lo, hi in zip(net.biases_lo, net.biases_hi)],
    }
    if net.node_names is not None:
        doc["names"] = [list(layer) for layer in net.node_names]
    if "provenance" in net.meta:
        doc["provenance"] = net.meta["provenance"]
    return doc


def _loads(text, what):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{what}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def parse_network_json(text: str) -> InnNetwork:
    return network_from_dict(_loads(text, "network"))


def write_network_json(net: InnNetwork) -> str:
    return json.dumps(network_to_dict(net), indent=1) + "\n"


def partition_from_dict(doc, net: InnNetwork | None = None, require_io_identity: bool = False) -> Partition:
    layers = _require(doc, "layers", list)
    for i, groups in enumerate(layers):
        if not isinstance(groups, list):
            raise FormatError(f"$.layers[{i}]: expected a list of groups")
        for g, group in enumerate(groups):
            if not isinstance(group, list) or not all(isinstance(n, int) and not isinstance(n, bool) for n in group):
                raise FormatError(f"$.layers[{i}][{g}]: expected a list of node indices")
    part = Partition(tuple(tuple(tuple(g) for g in groups) for groups in layers))
    if net is not None:
        problems = validate_partition(net, part, require_io_identity)
        if problems:
            raise FormatError("$.layers: " + "; ".join(problems))
    return part


def parse_partition_json(text: str, net: InnNetwork | None = None, require_io_identity: bool = False) -> Partition:
    return partition_from_dict(_loads(text, "partition"), net, require_io_identity)


def write_partition_json(part: Partition) -> str:
    return json.dumps({"layers": part.to_list()}) + "\n"


def box_from_dict(doc, net: InnNetwork | None = None) -> InputBox:
    bounds = _require(doc, "bounds", list)
    pairs = []
    for j, pair in enumerate(bounds):
        if not isinstance(pair, list) or len(pair) != 2:
            raise FormatError(f"$.bounds[{j}]: expected [lo, hi]")
        pairs.append(_interval(pair, f"$.bounds[{j}]"))
    if net is not None and len(pairs) != net.layer_sizes[0]:
        raise FormatError(f"$.bounds: expected {net.layer_sizes[0]} intervals, found {len(pairs)}")
    if not pairs:
        raise FormatError("$.bounds: empty box")
    return InputBox([p[0] for p in pairs], [p[1] for p in pairs])


def parse_box_json(text: str, net: InnNetwork | None = None) -> InputBox:
    return box_from_dict(_loads(text, "box"), net)


def write_box_json(box: InputBox) -> str:
    return json.dumps({"bounds": [[float(a), float(b)] for a, b in zip(box.lo, box.hi)]}) + "\n"


# --------------------------------------------------------------------------- results


def write_results_json(result) -> str:
    """Serialise anything with a ``to_dict`` (range results, soundness reports, bench tables)."""
    return json.dumps(result.to_dict(), indent=2) + "\n"


def write_results_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow([
            row["count"], row["run"], row["node"],
            _num(row["abs_time"]), _num(row["enc_time"]), _num(row["solve_time"]),
            "" if row["lower"] is None else _num(row["lower"]),
            "" if row["upper"] is None else _num(row["upper"]),
        ])
    return buf.getvalue()


# --------------------------------------------------------------------------- LP files


def _lp_expr(terms):
    parts = []
    for coef, var in terms:
        sign = "-" if coef < 0 or (coef == 0 and np.signbit(coef)) else "+"
        parts.append(f"{sign} {_num(abs(coef))} {var.name}")
    return " ".join(parts)


def write_lp(model: MilpModel, sink=None) -> str:
    """Write ``model`` in the CPLEX LP dialect; returns the text and writes it to ``sink`` if given."""
    if model.objective is None:
        raise ValueError("cannot write an LP file without an objective")
    sense, var = model.objective
    lines = ["\\ interval network range encoding", "Maximize" if sense == "max" else "Minimize",
             f" obj: {var.name}", "Subject To"]
    op = {"<=": "<=", ">=": ">=", "=": "="}
    for r, con in enumerate(model.constraints):
        tag = con.tag or f"R{r}"
        lines.append(f" {tag}: {_lp_expr(con.terms)} {op[con.sense]} {_num(con.rhs)}")
    lines.append("Bounds")
    for v, lo, hi in zip(model.variables, model.lb, model.ub):
        if np.isinf(lo) and np.isinf(hi):
            lines.append(f" {v.name} free")
        else:
            lo_s = "-inf" if np.isinf(lo) else _num(lo)
            hi_s = "+inf" if np.isinf(hi) else _num(hi)
            lines.append(f" {lo_s} <= {v.name} <= {hi_s}")
    binaries = [v.name for v in model.variables if v.is_binary]
    if binaries:
        lines.append("Binary")
        lines += [f" {name}" for name in binaries]
    lines.append("End")
    text = "\n".join(lines) + "\n"
    if sink is not None:
        sink.write(text)
    return text


_TERM = re.compile(r"([+-])\s*(\S+)\s+([a-z]_\d+_\d+)")


def read_lp(text: str) -> MilpModel:
    """Parse LP files produced by :func:`write_lp` back into a model."""
    section = None
    objective = None
    constraints, bounds, binaries = [], {}, set()
    order, declared = [], []

    def note(var):
        if var not in bounds:
            bounds[var] = (0.0, np.inf)
            order.append(var)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("\\"):
            continue
        low = line.lower()
        if low in ("maximize", "minimize"):
            section, objective = "obj", ["max" if low == "maximize" else "min", None]
            continue
        if low in ("subject to", "bounds", "binary", "end"):
            section = low
            continue
        if section == "obj":
            objective[1] = VarRef.parse(line.split(":")[1].strip())
        elif section == "subject to":
            tag, body = line.split(":", 1)
            m = re.match(r"(.*)\s(<=|>=|=)\s(\S+)$", body.strip())
            if not m:
                raise FormatError(f"line {lineno}: cannot parse constraint {line!r}")
            expr, sense, rhs = m.groups()
            terms = []
            for sign, coef, name in _TERM.findall(expr):
                var = VarRef.parse(name)
                note(var)
                terms.append(((-1.0 if sign == "-" else 1.0) * float(coef), var))
            constraints.append(LinearConstraint(tuple(terms), sense, float(rhs), tag.strip()))
        elif section == "bounds":
            parts = line.split()
            if len(parts) == 2 and parts[1] == "free":
                var = VarRef.parse(parts[0])
                note(var)
                declared.append(var)
                bounds[var] = (-np.inf, np.inf)
            elif len(parts) == 5:
                var = VarRef.parse(parts[2])
                note(var)
                declared.append(var)
                bounds[var] = (float(parts[0]), float(parts[4]))
            else:
                raise FormatError(f"line {lineno}: cannot parse bound {line!r}")
        elif section == "binary":
            var = VarRef.parse(line)
            note(var)
            binaries.add(var)
        else:
            raise FormatError(f"line {lineno}: content outside any section")
    if objective is None or objective[1] is None:
        raise FormatError("missing objective section")
    note(objective[1])
    seen = set(declared)
    variables = tuple(declared) + tuple(v for v in order if v not in seen)
    return MilpModel(
        variables=variables,
        lb=tuple(bounds[v][0] for v in variables),
        ub=tuple(bounds[v][1] for v in variables),
        constraints=tuple(constraints),
        objective=(objective[0], objective[1]),
    )


def read_solution(text: str) -> dict:
    """Read ``name value`` pairs (one per line) from an external solver's solution file."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.replace("=", " ").split()
        if len(parts) < 2:
            raise FormatError(f"line {lineno}: expected 'name value'")
        try:
            values[parts[0]] = float(parts[1])
        except ValueError:
            raise FormatError(f"line {lineno}: {parts[1]!r} is not a number") from None
    return values
