import csv
import json
import logging
import subprocess
import sys

import pytest

from ergoid.cli import configure_logging, main
from ergoid.trigpoly import TrigPoly, save_trigpoly

SMALL = 'nmax = 5\nsample_counts = [80]\nnoise = [0.02]\ndensity_length = 20000\n'
GRID = ('nmax = 5\ntrials = 3\nsample_counts = [60, 120]\nnoise = [0.0, 0.05]\n'
        'density_length = 20000\n')


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text(SMALL)
    return path


def read_bytes(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


def test_certify_uniform(tmp_path, capsys):
    assert main(["certify", "--density", "uniform", "--nmax", "5", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "certificate.json").read_text())
    assert report["lambda_min"] == 1.0 and report["kappa_bound"] == 1.0
    assert report["N"] == 11 and report["passed"]
    assert "certificate.json" in capsys.readouterr().out


def test_certify_from_map_and_density(tmp_path):
    save_trigpoly(TrigPoly(2, {0: 0.5, 2: 0.24, -2: 0.24}, real_valued=True), tmp_path / "m.json")
    assert main(["simulate", "--map", str(tmp_path / "m.json"), "--x0", "0.1", "--length", "20000",
                 "--out", str(tmp_path / "sim")]) == 0
    assert main(["certify", "--density", str(tmp_path / "sim" / "density.csv"), "--nmax", "3",
                 "--sparsities", "1,2", "--re-samples", "100", "--out", str(tmp_path / "c1")]) == 0
    a = json.loads((tmp_path / "c1" / "certificate.json").read_text())
    assert a["lemma1_holds"] and set(a["rho_min"]) == {"1", "2"}
    assert "V_sqrt_monte_carlo" in a["kappa_estimates"]
    assert main(["certify", "--map", str(tmp_path / "m.json"), "--nmax", "3", "--out", str(tmp_path / "c2")]) == 0


def test_identify_byte_identical(tmp_path, small_config):
    for name in ("a", "b"):
        assert main(["identify", "--config", str(small_config), "--seed", "42", "--out", str(tmp_path / name)]) == 0
    first, second = read_bytes(tmp_path / "a"), read_bytes(tmp_path / "b")
    assert first == second
    assert set(first) == {"solution.json", "metrics.json", "map.json", "observations.csv"}
    main(["identify", "--config", str(small_config), "--seed", "43", "--out", str(tmp_path / "c")])
    assert read_bytes(tmp_path / "c") != first


def test_identify_from_observations(tmp_path, small_config):
    main(["identify", "--config", str(small_config), "--out", str(tmp_path / "run")])
    obs = tmp_path / "run" / "observations.csv"
    assert main(["identify", "--observations", str(obs), "--nmax", "5", "--sigma", "0.02",
                 "--out", str(tmp_path / "refit")]) == 0
    metrics = json.loads((tmp_path / "refit" / "metrics.json").read_text())
    truth = json.loads((tmp_path / "run" / "map.json").read_text())
    assert metrics["support"] == [row[0] for row in truth["coeffs"]]
    assert metrics["M"] == 80 and metrics["converged"]


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_phase_diagram_rows(tmp_path, fmt):
    cfg = tmp_path / "grid.toml"
    cfg.write_text(GRID)
    out = tmp_path / "pd"
    assert main(["phase-diagram", "--config", str(cfg), "--out", str(out), "--format", fmt]) == 0
    if fmt == "csv":
        with open(out / "phase_diagram.csv") as fh:
            rows = list(csv.DictReader(fh))
    else:
        rows = json.loads((out / "phase_diagram.json").read_text())
    assert len(rows) == 3 * 4


def test_phase_diagram_byte_identical(tmp_path):
    cfg = tmp_path / "grid.toml"
    cfg.write_text(GRID)
    for name, threads in (("a", "1"), ("b", "0")):
        main(["phase-diagram", "--config", str(cfg), "--seed", "7", "--threads", threads, "--out", str(tmp_path / name)])
    assert read_bytes(tmp_path / "a") == read_bytes(tmp_path / "b")


def test_simulate_outputs(tmp_path):
    assert main(["simulate", "--length", "500", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "trajectory.csv").read_text().startswith("step,x\n")
    assert (tmp_path / "density.csv").read_text().startswith("bin_left,bin_right,density\n")
    assert main(["simulate", "--length", "500", "--format", "json", "--out", str(tmp_path / "j")]) == 0
    assert len(json.loads((tmp_path / "j" / "simulation.json").read_text())["states"]) == 500


@pytest.mark.parametrize("argv", [
    ["identify", "--bogus"],
    ["nonsense"],
    [],
    ["phase-diagram", "--seed", "-3"],
    ["phase-diagram", "--threads", "x"],
    ["certify", "--nmax", "3"],
])
def test_usage_errors(argv, capsys):
    assert main(argv) == 1
    assert capsys.readouterr().err


def test_malformed_config(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("trials = 3\nsparsity_levels = [3]\n")
    assert main(["phase-diagram", "--config", str(bad)]) == 1
    assert "sparsity_levels" in capsys.readouterr().err
    bad.write_text("trials = [\n")
    assert main(["phase-diagram", "--config", str(bad)]) == 1
    assert main(["phase-diagram", "--config", str(tmp_path / "missing.toml")]) == 1


def test_experiment_failure_exit_code(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text("nmax = 5\nsparsity = [1]\nmax_retries = 2\ndensity_length = 2000\n")
    assert main(["identify", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "ExperimentError" in capsys.readouterr().err


def test_numerical_failure_exit_code(tmp_path):
    bad = tmp_path / "d.csv"
    bad.write_text("bin_left,bin_right,density\n0.0,0.5,1.0\n0.5,1.0,3.0\n")
    assert main(["certify", "--density", str(bad), "--out", str(tmp_path)]) == 2


def test_log_levels():
    assert configure_logging({"ERGOID_LOG": "debug"}) == logging.DEBUG
    assert configure_logging({"ERGOID_LOG": "error"}) == logging.ERROR
    assert configure_logging({"ERGOID_LOG": "info"}) == logging.INFO
    assert configure_logging({}) == logging.WARNING
    assert configure_logging({"ERGOID_LOG": "loud"}) == logging.WARNING


def test_entry_point_and_env(tmp_path):
    env = {"ERGOID_LOG": "info", "PATH": "/usr/bin:/bin"}
    proc = subprocess.run([sys.executable, "-m", "ergoid", "certify", "--density", "uniform", "--nmax", "2",
                           "--out", str(tmp_path)], capture_output=True, text=True, env=env)
    assert proc.returncode == 0
    assert "lambda_min" in proc.stderr
    quiet = subprocess.run([sys.executable, "-m", "ergoid", "certify", "--density", "uniform", "--nmax", "2",
                            "--out", str(tmp_path)], capture_output=True, text=True,
                           env={"ERGOID_LOG": "error", "PATH": "/usr/bin:/bin"})
    assert quiet.returncode == 0 and quiet.stderr == ""
