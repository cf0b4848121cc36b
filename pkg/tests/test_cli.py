import subprocess
import sys

import numpy as np

from flagqec import harness
from flagqec.cli import EXIT_ERROR, EXIT_INDISTINGUISHABLE, EXIT_OK, main
from flagqec.harness import ResultPoint, write_csv
from test_harness import _mutating_builder


def test_verify_ok(capsys):
    assert main(["verify", "-d", "3"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "distinguishable: True" in out and "columns: 28" in out


def test_verify_large_is_gated(capsys):
    assert main(["verify", "-d", "9"]) == EXIT_ERROR
    assert "--allow-large" in capsys.readouterr().err


def test_verify_indistinguishable(monkeypatch, capsys):
    monkeypatch.setattr(harness, "build_fault_check_matrix", _mutating_builder(harness.build_fault_check_matrix))
    assert main(["verify", "-d", "3"]) == EXIT_INDISTINGUISHABLE
    assert "witness:" in capsys.readouterr().out


def test_verify_bad_distance(capsys):
    assert main(["verify", "-d", "4"]) == EXIT_ERROR
    assert main(["verify", "-d", "3", "--ordering", "/nonexistent/order.txt"]) == EXIT_ERROR


def test_simulate_and_pseudothreshold(tmp_path, capsys):
    out = tmp_path / "r.csv"
    cfg = tmp_path / "c.cfg"
    cfg.write_text("distances = 3\nshots = 500\np_grid = 1e-2\n")
    assert main(["simulate", "--config", str(cfg), "--shots", "400", "--seed", "3", "-o", str(out)]) == EXIT_OK
    text = capsys.readouterr().out
    assert "shots=400" in text and out.exists()
    assert main(["pseudothreshold", "-i", str(out)]) == EXIT_ERROR  # one point cannot bracket
    grid = np.geomspace(1e-4, 1e-2, 5)
    pts = [ResultPoint(p, 10**8, round(1e3 * p * p * 10**8), 2.0, 3, "shor", "joint") for p in grid]
    write_csv(pts, out)
    assert main(["pseudothreshold", "-i", str(out)]) == EXIT_OK
    assert "p_th=6.66" in capsys.readouterr().out


def test_simulate_rejects_bad_config(tmp_path, capsys):
    assert main(["simulate", "--distances", "3", "--p-grid", "2"]) == EXIT_ERROR
    assert main(["simulate", "--config", str(tmp_path / "missing.cfg")]) == EXIT_ERROR
    assert main(["simulate", "--decoder", "shor", "--strategy", "XZ"]) == EXIT_ERROR


def test_footprint(capsys):
    assert main(["footprint", "-d", "3", "--T", "7"]) == EXIT_OK
    assert "bits: 56" in capsys.readouterr().out
    assert main(["footprint", "-d", "3", "--mode", "stab", "--T", "7"]) == EXIT_ERROR
    assert main(["footprint", "-d", "3", "--mode", "stab", "--T", "7", "--t-xz", "49"]) == EXIT_OK
    assert "bits: 1664" in capsys.readouterr().out
    assert main(["footprint", "-d", "9"]) == EXIT_ERROR


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "flagqec", "footprint", "-d", "3", "--T", "7"], capture_output=True, text=True)
    assert res.returncode == 0 and "bits: 56" in res.stdout
