"""End-to-end CLI runs: exit codes, output files, determinism."""

import csv
import subprocess
import sys

import numpy as np
import pytest

import hvisolve as hv
from hvisolve.config import parse_config_lines

from conftest import config_text

# a shallow truncation keeps each subprocess run under half a minute
SMALL = {"solver.n_trunc": 10}


def run_cli(*args):
    return subprocess.run([sys.executable, "-m", "hvisolve.cli", *args],
                          capture_output=True, text=True)


@pytest.fixture(scope="module")
def cli_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "run.cfg"
    cfg.write_text(config_text(**SMALL))
    out = root / "out"
    proc = run_cli("--config", str(cfg), "--out", str(out))
    return cfg, out, proc


def test_success_exit_and_message(cli_run):
    _, out, proc = cli_run
    assert proc.returncode == 0, proc.stderr
    assert "2 certified solutions" in proc.stdout


def test_output_files_exist(cli_run):
    _, out, _ = cli_run
    for name in ("report.txt", "solution_1.csv", "solution_2.csv",
                 "timings.txt"):
        assert (out / name).is_file(), name
    figures = list(out.glob("*.png"))
    assert len(figures) >= 2


def test_csv_shape_and_interval_order(cli_run):
    _, out, _ = cli_run
    with open(out / "solution_1.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["z", "x", "r", "dj_lower", "dj_upper"]
    data = np.array(rows[1:], dtype=float)
    assert data.shape[0] > 100
    assert np.all(data[:, 3] <= data[:, 4] + 1e-15)
    # 17 significant digits survive a parse round trip
    assert any("." in cell and len(cell.replace("-", "").replace(".", "")
                                   .split("e")[0]) >= 16
               for cell in rows[2] if cell)


def test_report_config_echo_reparses(cli_run):
    _, out, _ = cli_run
    lines = (out / "report.txt").read_text().splitlines()
    start = lines.index("[config]") + 1
    end = next(i for i in range(start, len(lines)) if lines[i].startswith("["))
    echoed = [l for l in lines[start:end] if l.strip()]
    cfg = parse_config_lines(echoed)
    assert cfg.k == 2 and cfg.n_trunc == 10
    assert cfg.potential_params["mu"] == 1.5


def test_determinism_same_out_dir(cli_run):
    cfg, out, _ = cli_run
    first = (out / "report.txt").read_bytes()
    proc = run_cli("--config", str(cfg), "--out", str(out))
    assert proc.returncode == 0
    assert (out / "report.txt").read_bytes() == first


def test_check_only(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(config_text(**SMALL))
    proc = run_cli("--config", str(cfg), "--check-only")
    assert proc.returncode == 0, proc.stderr
    assert "all hypotheses pass" in proc.stdout
    assert proc.stdout.count("check ") >= 5


def test_hypothesis_failure_exit_two(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(config_text(**{"potential.mu": 6.0, **SMALL}))
    out = tmp_path / "out"
    proc = run_cli("--config", str(cfg), "--out", str(out))
    assert proc.returncode == 2
    assert "hypotheses failed" in proc.stderr
    report = (out / "report.txt").read_text()
    assert "stage = hypotheses" in report


def test_check_only_failure_exit_two(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(config_text(**{"potential.mu": 6.0, **SMALL}))
    proc = run_cli("--config", str(cfg), "--check-only")
    assert proc.returncode == 2


def test_missing_config_file(tmp_path):
    proc = run_cli("--config", str(tmp_path / "absent.cfg"))
    assert proc.returncode == 3
    assert "error" in proc.stderr


def test_bad_config_value(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(config_text() + "solver.k = 3\n")
    proc = run_cli("--config", str(cfg))
    assert proc.returncode == 3


def test_seed_override_changes_echo(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(config_text(**SMALL))
    out = tmp_path / "out"
    proc = run_cli("--config", str(cfg), "--out", str(out), "--seed", "7",
                   "--check-only")
    assert proc.returncode == 0
