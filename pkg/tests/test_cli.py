import csv
import json
import subprocess
import sys

import pytest

from auxval.circuit import Kind, parse_circuit
from auxval.cli import main


@pytest.fixture
def circuit_file(tmp_path):
    path = tmp_path / "c.txt"
    rc = main([
        "generate", "--blocks", "3", "--data", "6", "--aux", "3", "--half-gates", "5",
        "--reuse", "fresh", "--aux-per-block", "1", "--data-per-block", "2", "--seed", "4",
        "--out", str(path),
    ])
    assert rc == 0
    return path


def jsonl(path):
    return [json.loads(line) for line in path.read_text().splitlines() if line]


def test_generate_and_check(circuit_file, tmp_path):
    c = parse_circuit(circuit_file.read_text())
    assert c.n_gates == 30
    out = tmp_path / "check.json"
    assert main(["check", "--circuit", str(circuit_file), "--out", str(out)]) == 0
    assert json.loads(out.read_text()) == {"0": "pass", "1": "pass", "2": "pass"}


def test_lightcone(circuit_file, capsys):
    assert main(["lightcone", "--circuit", str(circuit_file)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert len(doc["measurements"]) == 3
    assert len(doc["overlap"]) == 3


def test_place_then_pipeline(circuit_file, tmp_path):
    placed = tmp_path / "placed.txt"
    assert main(["place", "--circuit", str(circuit_file), "--budget", "6", "--out", str(placed)]) == 0
    c = parse_circuit(placed.read_text())
    assert any(mp.kind is Kind.MID for mp in c.measurements)

    shots = tmp_path / "shots.jsonl"
    noise = ["--p", "0.01", "--r", "0.5", "--q", "0.05"]
    assert main(["simulate", "--circuit", str(placed), *noise, "--shots", "400", "--seed", "2", "--out", str(shots)]) == 0
    recs = jsonl(shots)
    assert len(recs) == 400 and [r["shot"] for r in recs] == list(range(400))
    assert all(len(r["m"]) == len(c.measurements) for r in recs)

    decisions = tmp_path / "dec.jsonl"
    assert main([
        "filter", "--shots", str(shots), "--circuit", str(placed), *noise,
        "--threshold", "0.5", "--strategy", "all", "--out", str(decisions),
    ]) == 0
    dec = jsonl(decisions)
    assert len(dec) == 400
    assert all(0 <= d["likelihood"] <= 1 for d in dec)
    assert all(d["accept"] == (d["likelihood"] >= 0.5) for d in dec)

    stats = tmp_path / "stats.json"
    assert main(["stats", "--shots", str(shots), "--decisions", str(decisions), "--out", str(stats)]) == 0
    doc = json.loads(stats.read_text())
    assert doc["stats"]["n_shots"] == 400
    assert doc["stats"]["f_retain"] == pytest.approx(sum(d["accept"] for d in dec) / 400)

    abort = tmp_path / "abort.json"
    assert main([
        "abort-sim", "--circuit", str(placed), *noise, "--threshold", "0.9",
        "--shots", "500", "--seed", "1", "--out", str(abort),
    ]) == 0
    rep = json.loads(abort.read_text())
    assert rep["decisions_consistent"] is True
    assert rep["mean_gates_executed"] + rep["mean_gates_saved"] == pytest.approx(rep["total_gates"])


def test_simulate_workers_identical(circuit_file, tmp_path):
    outs = []
    for w in ("1", "4"):
        path = tmp_path / f"s{w}.jsonl"
        main(["simulate", "--circuit", str(circuit_file), "--p", "0.02", "--q", "0.05",
              "--shots", "9000", "--seed", "5", "--workers", w, "--out", str(path)])
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_run_csv_and_seed_override(tmp_path):
    cfg = tmp_path / "exp.toml"
    cfg.write_text(
        'blocks = 2\ndata = 4\naux = 2\nhalf_gates = 5\nreuse = "fresh"\naux_per_block = 1\n'
        "p = 0.002\nq = 0.05\nthresholds = [0.5, 0.9]\nshots = 2000\nseed = 1\n"
    )
    a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    assert main(["run", "--config", str(cfg), "--out", str(a)]) == 0
    assert main(["run", "--config", str(cfg), "--out", str(b), "--workers", "3"]) == 0
    assert main(["run", "--config", str(cfg), "--out", str(c), "--seed", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()
    rows = list(csv.DictReader(a.open()))
    assert [r["strategy"] for r in rows] == ["none", "none", "final", "final", "all", "all"]

    j = tmp_path / "r.json"
    assert main(["run", "--config", str(cfg), "--out", str(j)]) == 0
    assert json.loads(j.read_text())["metadata"]["config"]["seed"] == 1


def test_calibrate_writes_config(tmp_path):
    cfg = tmp_path / "exp.toml"
    cfg.write_text('blocks = 2\ndata = 4\naux = 2\nhalf_gates = 5\nreuse = "fresh"\naux_per_block = 1\np = 0.001\nq = 0.05\nshots = 500\n')
    out, found = tmp_path / "cal.json", tmp_path / "found.toml"
    assert main([
        "calibrate", "--config", str(cfg), "--p-grid", "0.001", "--q-grid", "0.05", "0.1",
        "--thresholds", "0.5", "0.9", "--out", str(out), "--write-config", str(found),
    ]) == 0
    doc = json.loads(out.read_text())
    assert len(doc["top"]) == 4
    assert main(["run", "--config", str(found), "--out", str(tmp_path / "x.csv")]) == 0


def test_errors_exit_nonzero(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("qubits 2\ngate 0 cx 0 9\n")
    assert main(["lightcone", "--circuit", str(bad)]) == 2
    assert "error" in capsys.readouterr().err
    assert main(["check", "--circuit", str(tmp_path / "missing.txt")]) == 2
    cfg = tmp_path / "bad.toml"
    cfg.write_text("p = 0.1\nq = 0.1\nthresholds = [0.9, 0.1]\n")
    assert main(["run", "--config", str(cfg)]) == 2
    with pytest.raises(SystemExit):
        main(["simulate", "--circuit", "x"])


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "auxval", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("auxval ")
