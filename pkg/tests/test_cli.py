import csv
import json
import subprocess
import sys

import pytest

from hypercollapse.beta import tangent_series
from hypercollapse.cli import main


def run_json(capsys, *argv):
    assert main(list(argv)) == 0
    return json.loads(capsys.readouterr().out)


def test_threshold_subcritical(capsys):
    out = run_json(capsys, "threshold", "--preset", "example22:1185")
    assert 0.015 < out["report"]["z_star"] < 0.03
    assert out["report"]["status"] == "GENERIC"
    assert out["seed"] == 0 and out["config"]["series"][0] == pytest.approx(1185 * 0.1**7)


def test_threshold_pure_debris(capsys):
    out = run_json(capsys, "threshold", "--beta", "[1.0]")
    assert out["report"]["z_star"] == 0.0 and out["report"]["zeros"] == []
    assert out["report"]["pure_debris"]


def test_threshold_tangent_series(capsys):
    beta = json.dumps(list(tangent_series().coeffs))
    out = run_json(capsys, "threshold", "--beta", beta)
    assert out["report"]["status"] == "CRITICAL"
    assert out["report"]["zeros"] == [pytest.approx(0.5, abs=1e-6)]


def test_threshold_csv_file(tmp_path):
    out = tmp_path / "f.csv"
    assert main(["threshold", "--beta", "[0, 0.2, 0.3]", "--out", str(out)]) == 0
    rows = list(csv.reader(out.open(newline="")))
    assert rows[0] == ["t", "f"] and float(rows[1][1]) == pytest.approx(0.2)
    manifest = json.loads((tmp_path / "f.manifest.json").read_text())
    assert manifest["report"]["status"] == "GENERIC"


def test_fluid_csv(tmp_path):
    sub, sup = tmp_path / "sub.csv", tmp_path / "sup.csv"
    assert main(["fluid", "--preset", "example22:1185", "--out", str(sub)]) == 0
    assert main(["fluid", "--preset", "example22:1200", "--t-max", "0.5", "--out", str(sup)]) == 0
    rows = list(csv.DictReader(sub.open(newline="")))
    assert list(rows[0]) == ["t", "x1", "x2", "x3", "sigma_sq"]
    manifest = json.loads((tmp_path / "sub.manifest.json").read_text())
    assert float(rows[0]["x2"]) == pytest.approx(manifest["config"]["series"][1])
    assert float(rows[-1]["x3"]) == pytest.approx(manifest["edge_limit"], rel=1e-9)
    up = [float(r["x2"]) for r in csv.DictReader(sup.open(newline=""))]
    assert min(up) > 0 and up[-1] > up[len(up) // 25]


def test_sample_and_collapse_round_trip(tmp_path, capsys):
    g = tmp_path / "g.txt"
    assert main(["sample", "--beta", "[0, 0.3, 0.5]", "--n", "50", "--seed", "4", "--out", str(g)]) == 0
    assert g.read_text().startswith("N=50\n")
    out = run_json(capsys, "collapse", "--graph", str(g), "--format", "json", "--order", "lowest")
    assert out["summary"]["debris_final"] == out["summary"]["lambda_star"]
    assert len(out["trace"]) == out["summary"]["v_star"]
    info = run_json(capsys, "sample", "--beta", "[0, 0.3, 0.5]", "--n", "50", "--seed", "4", "--format", "json")
    assert info["edge_count"] == len(info["edges"])


def test_chain_rerun_identical(tmp_path):
    a = tmp_path / "a.csv"
    snapshots = []
    for _ in range(2):
        assert main(["chain", "--preset", "example21:0.1,2", "--n", "5000", "--seed", "17", "--out", str(a)]) == 0
        snapshots.append((a.read_bytes(), (tmp_path / "a.manifest.json").read_bytes()))
    assert snapshots[0] == snapshots[1]
    header = a.read_bytes().split(b"\r\n")[0]
    assert header == b"n,Y,Z"
    manifest = json.loads((tmp_path / "a.manifest.json").read_text())
    assert manifest["seed"] == 17 and manifest["summary"]["seed"] == 17


def test_experiment_with_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"beta": [0, 0.2, 0.3], "n": 2000, "trials": 5, "seed": 3, "tol": 0.5}))
    out = tmp_path / "exp.csv"
    assert main(["experiment", "--config", str(cfg), "--trials", "6", "--out", str(out)]) == 0
    rows = list(csv.reader(out.open(newline="")))
    assert rows[0] == ["trial", "seed", "v_frac", "edge_frac", "steps"] and len(rows) == 7
    manifest = json.loads((tmp_path / "exp.manifest.json").read_text())
    assert manifest["config"]["trials"] == 6 and manifest["config"]["n"] == 2000
    assert manifest["outcomes"]["v_within_tol"]
    assert manifest["predictions"]["v_limit"] == pytest.approx(0.327214, abs=1e-5)


def test_zlaw_tangent(capsys):
    out = run_json(capsys, "zlaw", "--preset", "tangent", "--trials", "400", "--seed", "1", "--format", "json")
    masses = list(out["masses"].values())
    assert len(masses) == 2 and all(0.4 < m < 0.6 for m in masses)
    assert sorted(out["exact_law"].values()) == [0.5, 0.5]


def test_config_errors(capsys, tmp_path):
    assert main(["threshold"]) == 2
    assert main(["threshold", "--beta", "[1]", "--preset", "example22:1185"]) == 2
    assert main(["threshold", "--beta", "[-1, 2]"]) == 2
    assert main(["fluid", "--beta", "[0, 0.2]", "--t-max", "2"]) == 0  # capped below 1
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]")
    assert main(["chain", "--config", str(bad)]) == 2
    assert main(["zlaw", "--beta", "[0, 0, 1]"]) == 2  # tangency at t = 0
    capsys.readouterr()


def test_runtime_error_exit_code(capsys):
    assert main(["experiment", "--beta", "[0, 0.1, 0, 1]", "--n", "2", "--engine", "full"]) == 3
    assert "trial 0" in capsys.readouterr().err


def test_no_partial_file_on_error(tmp_path):
    out = tmp_path / "x.csv"
    assert main(["experiment", "--beta", "[0, 0.1, 0, 1]", "--n", "2", "--engine", "full", "--out", str(out)]) == 3
    assert list(tmp_path.iterdir()) == []


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "hypercollapse", "threshold", "--beta", "[0, 0.2]"],
        capture_output=True,
        text=True,
        check=True,
    )
    assert json.loads(proc.stdout)["report"]["z_star"] == pytest.approx(0.181269, abs=1e-6)
