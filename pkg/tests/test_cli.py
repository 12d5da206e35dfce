import json
import subprocess
import sys
from importlib import resources

import numpy as np
import pytest

from relu_approx import network as nw
from relu_approx.cli import main

EXAMPLE = str(resources.files("relu_approx") / "data" / "example_net.json")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_eval_example_matches_realize(capsys):
    code, out, _ = run(capsys, "eval", "--net", EXAMPLE, "--point", "0,0")
    assert code == 0
    assert json.loads(out) == nw.realize(nw.load(EXAMPLE), [0.0, 0.0]).tolist()


def test_inspect_echoes_quantization(capsys):
    code, out, _ = run(capsys, "inspect", "--net", EXAMPLE, "--s", "5", "--eps", "0.125")
    data = json.loads(out)
    assert code == 0 and data["quantized"] and data["quantized_for"] == [5, 0.125]
    assert data["weights"] == nw.complexity(nw.load(EXAMPLE)).weights
    code, out, _ = run(capsys, "inspect", "--net", EXAMPLE, "--s", "1", "--eps", "0.4")
    assert json.loads(out)["quantized_for"] is None


def test_build_eval_round_trip(capsys, tmp_path):
    out_dir = tmp_path / "b"
    code, out, _ = run(capsys, "--threads", "1", "build", "--function", "trig-product(1)", "--beta", "2",
                       "--bound", "10", "--d", "2", "--eps", "0.125", "--seed", "4", "--lp-samples", "1000",
                       "--out", str(out_dir))
    assert code == 0
    info = json.loads(out)
    report = json.loads(open(info["report"]).read())
    assert report["quantization"]["s"] >= 1
    net = nw.load(info["network"])
    rng = np.random.default_rng(0)
    for x in rng.uniform(-0.5, 0.5, (5, 2)):
        code, out, _ = run(capsys, "eval", "--net", info["network"], "--point", ",".join(repr(float(v)) for v in x))
        assert abs(json.loads(out)[0] - nw.realize(net, x)[0]) <= 1e-12
    code, out, _ = run(capsys, "error", "--net", info["network"], "--function", "trig-product(1)",
                       "--samples", "2000", "--seed", "4")
    assert code == 0 and json.loads(out)["value"] >= 0
    # Same seed, same artifacts.
    run(capsys, "build", "--function", "trig-product(1)", "--beta", "2", "--bound", "10", "--d", "2",
        "--eps", "0.125", "--seed", "4", "--lp-samples", "1000", "--out", str(tmp_path / "c"))
    assert (tmp_path / "c" / "network.json").read_text() == (out_dir / "network.json").read_text()


def test_rate_writes_four_rows(capsys, tmp_path):
    code, out, _ = run(capsys, "rate", "--function", "trig-product(1)", "--beta", "1", "--bound", "4",
                       "--eps-list", "0.25,0.125,0.0625,0.03125", "--lp-samples", "1000", "--out", str(tmp_path))
    assert code == 0
    data = json.loads(out)
    assert len(open(data["csv"]).read().strip().splitlines()) == 5
    assert data["depth"]["within_cap"]


def test_quantize_then_inspect(capsys, tmp_path):
    target = tmp_path / "q.json"
    code, _, _ = run(capsys, "quantize", "--net", EXAMPLE, "--s", "8", "--eps", "0.25", "--out", str(target))
    assert code == 0
    code, out, _ = run(capsys, "inspect", "--net", str(target), "--s", "8", "--eps", "0.25")
    assert json.loads(out)["quantized"]


def test_partition_diagnose(capsys):
    code, out, _ = run(capsys, "partition-diagnose", "--d", "1", "--level", "5", "--beta", "1", "--samples", "20000")
    data = json.loads(out)
    assert code == 0 and [r["level"] for r in data["table"]] == [1, 2, 3, 4, 5]


@pytest.mark.parametrize("argv", [
    [],
    ["frobnicate"],
    ["eval", "--net", EXAMPLE, "--point", "0"],
    ["eval", "--net", EXAMPLE, "--point", "a,b"],
    ["eval", "--net", "/no/such/file.json", "--point", "0,0"],
    ["inspect", "--net", EXAMPLE, "--s", "3"],
    ["build", "--function", "nope", "--beta", "1", "--bound", "1", "--eps", "0.1", "--out", "/tmp/x"],
    ["partition-diagnose", "--d", "1", "--level", "1", "--beta", "1"],
])
def test_usage_errors_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert json.loads(err)["exit_code"] == 2


def test_build_failure_exit_1(capsys, tmp_path):
    code, _, err = run(capsys, "build", "--function", "polynomial(0,0,0,0,1)", "--beta", "5", "--bound", "1",
                       "--eps", "0.125", "--max-depth", "4", "--out", str(tmp_path))
    data = json.loads(err)
    assert code == 1 and data["error"] == "BudgetError"


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "relu_approx", "eval", "--net", EXAMPLE, "--point", "0,0"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout) == nw.realize(nw.load(EXAMPLE), [0.0, 0.0]).tolist()
