import json
import subprocess
import sys

import numpy as np
import pytest

from innabs.abstraction import identity_partition, random_partition
from innabs.cli import main
from innabs.formats import read_lp, write_box_json, write_network_json, write_nnet, write_partition_json
from innabs.network import InputBox, random_network


@pytest.fixture
def files(tmp_path):
    net = random_network(np.random.default_rng(0), [2, 4, 4, 1], scale=1.0)
    paths = {
        "net": tmp_path / "net.json",
        "nnet": tmp_path / "net.nnet",
        "part": tmp_path / "part.json",
        "ident": tmp_path / "ident.json",
        "box": tmp_path / "box.json",
    }
    paths["net"].write_text(write_network_json(net))
    paths["nnet"].write_text(write_nnet(net))
    paths["part"].write_text(write_partition_json(random_partition(net, 2, 0)))
    paths["ident"].write_text(write_partition_json(identity_partition(net)))
    paths["box"].write_text(write_box_json(InputBox([0, 0], [0.5, 0.5])))
    return {k: str(v) for k, v in paths.items()}


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_validate(files, capsys):
    code, out, _ = run(["validate", files["net"], "--partition", files["part"]], capsys)
    assert code == 0 and json.loads(out)["ok"]


def test_validate_reports_bad_partition(files, tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"layers": [[[0, 1]], [[0], [1], [2], [3]], [[0], [1], [2], [3]], [[0]]]}')
    code, out, _ = run(["validate", files["net"], "--partition", str(bad)], capsys)
    assert code == 1 and json.loads(out)["problems"]


def test_range_identity_matches_plain(files, capsys):
    _, plain, _ = run(["range", files["net"], files["box"]], capsys)
    _, ident, _ = run(["range", files["net"], files["box"], "--partition", files["ident"]], capsys)
    a, b = json.loads(plain)["result"], json.loads(ident)["result"]
    assert (a["lower"], a["upper"]) == (b["lower"], b["upper"])


def test_nnet_input_gives_same_range(files, capsys):
    _, a, _ = run(["range", files["net"], files["box"]], capsys)
    _, b, _ = run(["range", files["nnet"], files["box"]], capsys)
    assert json.loads(a)["result"]["upper"] == json.loads(b)["result"]["upper"]


def test_oracle_agrees(files, capsys):
    _, a, _ = run(["range", files["net"], files["box"]], capsys)
    code, b, _ = run(["oracle", files["net"], files["box"]], capsys)
    assert code == 0
    np.testing.assert_allclose(json.loads(a)["result"]["upper"], json.loads(b)["result"]["upper"], atol=1e-6)


def test_encode_writes_lp(files, tmp_path, capsys):
    out = tmp_path / "model.lp"
    code, _, _ = run(["encode", files["net"], files["box"], "--sense", "min", "-o", str(out)], capsys)
    assert code == 0
    model = read_lp(out.read_text())
    assert model.objective[0] == "min" and "C_1_0_3" in {c.tag for c in model.constraints}


def test_abstract(files, capsys):
    code, out, _ = run(["abstract", files["net"], files["part"]], capsys)
    assert code == 0 and json.loads(out)["layers"] == [2, 2, 2, 1]


def test_unscaled_requires_opt_in(files, capsys):
    code, _, err = run(["range", files["net"], files["box"], "--partition", files["part"], "--unscaled"], capsys)
    assert code == 1 and "--allow-unsound" in err
    code, out, _ = run(["range", files["net"], files["box"], "--partition", files["part"],
                        "--unscaled", "--allow-unsound"], capsys)
    assert code == 0 and "warning" in json.loads(out)["meta"]


def test_check_soundness(files, capsys):
    code, out, _ = run(["check-soundness", files["net"], files["part"], files["box"], "--samples", "20"], capsys)
    assert code == 0 and json.loads(out)["ok"]


def test_bench_csv_rows(files, capsys):
    code, out, _ = run(["bench", files["net"], files["box"], "--counts", "1,2,3", "--runs", "10",
                        "--format", "csv"], capsys)
    assert code == 0
    assert len(out.splitlines()) == 31


def test_bench_deterministic(files, capsys):
    argv = ["bench", files["net"], files["box"], "--counts", "2", "--runs", "3", "--seed", "4"]
    _, a, _ = run(argv, capsys)
    _, b, _ = run(argv, capsys)
    strip = lambda doc: [(r["lower"], r["upper"]) for r in json.loads(doc)["rows"]]
    assert strip(a) == strip(b)


def test_node_limit_exit_code(tmp_path, capsys):
    net = random_network(np.random.default_rng(1), [2, 8, 8, 1])
    p = tmp_path / "n.json"
    p.write_text(write_network_json(net))
    b = tmp_path / "b.json"
    b.write_text(write_box_json(InputBox([-1, -1], [1, 1])))
    code, out, _ = run(["range", str(p), str(b), "--node-limit", "1"], capsys)
    assert code == 2 and not json.loads(out)["result"]["exact"]


def test_errors_name_the_file(files, tmp_path, capsys):
    missing = str(tmp_path / "nope.json")
    code, _, err = run(["range", missing, files["box"]], capsys)
    assert code == 1 and "nope.json" in err and "Traceback" not in err
    broken = tmp_path / "broken.json"
    broken.write_text("{")
    code, _, err = run(["range", str(broken), files["box"]], capsys)
    assert code == 1 and "broken.json" in err
    code, _, err = run(["bench", files["net"], files["box"], "--counts", "a,b"], capsys)
    assert code == 1 and "--counts" in err


def test_module_entry_point(files):
    proc = subprocess.run([sys.executable, "-m", "innabs", "validate", files["net"]], capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["ok"]
