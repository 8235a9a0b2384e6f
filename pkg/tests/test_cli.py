import json
import subprocess
import sys
from pathlib import Path

import pytest

from nurgg.cli import run
from nurgg.experiments import COLUMNS, load

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SMALL = """
density: {kind: uniform_cube, dimension: 2}
norm: inf
n_list: [200, 400]
replicates: 2
base_seed: 3
params: {c: 1.5, beta: 0.0, epsilon: 0.2, alpha: 0.25}
"""


@pytest.fixture
def small(tmp_path):
    p = tmp_path / "small.yaml"
    p.write_text(SMALL)
    return p


@pytest.mark.parametrize("cmd,stem", [("sweep-cutoff", "cutoff"), ("poisson-limit", "poisson"),
                                      ("degree-sweep", "degree"), ("connectivity", "connectivity")])
def test_sweeps_write_outputs(cmd, stem, small, tmp_path, capsys):
    out = tmp_path / "out"
    assert run([cmd, "--config", str(small), "--output-dir", str(out), "-q"]) == 0
    assert (out / f"{stem}.csv").read_text().splitlines()[0] == ",".join(COLUMNS)
    side = json.loads((out / f"{stem}.json").read_text())
    assert side["base_seed"] == 3
    assert (out / f"{stem}.long.csv").exists()
    assert (out / f"{stem}.timing.json").exists()
    assert "wrote" in capsys.readouterr().out


def test_overrides_are_applied_and_echoed(small, tmp_path):
    out = tmp_path / "o"
    argv = ["poisson-limit", "--config", str(small), "--output-dir", str(out), "--seed", "11",
            "--n", "300", "-R", "4", "--beta", "0.5", "-q"]
    assert run(argv) == 0
    res = load(out / "poisson")
    assert res.metadata["base_seed"] == 11
    assert res.metadata["config"]["n_list"] == [300.0]
    assert res.metadata["config"]["beta"] == 0.5
    assert len(res.rows) == 4
    assert res.metadata["overrides"]["seed"] == 11
    assert res.metadata["overrides"]["beta"] == 0.5


def test_output_dir_env(small, tmp_path, monkeypatch):
    monkeypatch.setenv("NURGG_OUTPUT_DIR", str(tmp_path / "env"))
    assert run(["degree-sweep", "--config", str(small), "-R", "1", "-q"]) == 0
    assert (tmp_path / "env" / "degree.csv").exists()


def test_same_seed_same_bytes(small, tmp_path):
    for d in ("a", "b"):
        assert run(["sweep-cutoff", "--config", str(small), "--output-dir", str(tmp_path / d), "-q"]) == 0
    assert (tmp_path / "a" / "cutoff.csv").read_bytes() == (tmp_path / "b" / "cutoff.csv").read_bytes()
    a, b = (json.loads((tmp_path / d / "cutoff.json").read_text()) for d in ("a", "b"))
    # only the echoed output directory differs
    assert a.pop("overrides") != b.pop("overrides")
    assert a == b


def test_config_errors_exit_1(tmp_path, capsys):
    assert run(["sweep-cutoff", "--config", str(tmp_path / "missing.yaml")]) == 1
    bad = tmp_path / "bad.yaml"
    bad.write_text("density: {kind: uniform_cube, dimension: 2}\nbogus: 1\n")
    assert run(["sweep-cutoff", "--config", str(bad)]) == 1
    bad.write_text("density: {kind: gaussian}\n")
    assert run(["sweep-cutoff", "--config", str(bad)]) == 1
    bad.write_text("density: {kind: uniform_cube, dimension: 2}\nn_list: [10]\nparams: {beta: -5}\n")
    assert run(["poisson-limit", "--config", str(bad)]) == 1
    bad.write_text("density: {kind: radial_interior, dimension: 2, p: 1}\nnorm: 2\n")
    assert run(["connectivity", "--config", str(bad)]) == 1
    bad.write_text("density: [1, 2\n")
    assert run(["sweep-cutoff", "--config", str(bad)]) == 1
    assert "config error" in capsys.readouterr().err


def test_runtime_error_exits_2(small, tmp_path, monkeypatch):
    import nurgg.experiments as ex

    def broken(cfg, overrides=None):
        raise RuntimeError("disk on fire")

    monkeypatch.setitem(ex.RUNNERS, "cutoff", broken)
    assert run(["sweep-cutoff", "--config", str(small), "--output-dir", str(tmp_path)]) == 2


def test_help_lists_flags():
    out = subprocess.run([sys.executable, "-m", "nurgg.cli", "poisson-limit", "--help"],
                         capture_output=True, text=True, check=True).stdout
    for flag in ("--config", "--seed", "--n", "--replicates", "--output-dir", "--workers",
                 "--verbose", "--quiet", "--beta"):
        assert flag in out
    top = subprocess.run([sys.executable, "-m", "nurgg.cli", "--help"], capture_output=True, text=True).stdout
    for cmd in ("sweep-cutoff", "poisson-limit", "degree-sweep", "connectivity", "verify-conditions", "build-one"):
        assert cmd in top


def test_missing_subcommand_is_usage_error():
    proc = subprocess.run([sys.executable, "-m", "nurgg.cli"], capture_output=True, text=True)
    assert proc.returncode == 2
    assert "usage" in proc.stderr


def test_verify_conditions_c_int(tmp_path):
    out = tmp_path / "v"
    argv = ["verify-conditions", "--config", str(CONFIGS / "radial_interior2d.yaml"), "--output-dir", str(out),
            "--n", "1000", "10000", "--grid-size", "4", "-q"]
    assert run(argv) == 0
    rep = json.loads((out / "radial_interior2d.json").read_text())
    assert rep["alpha"] == 0.5
    assert rep["overrides"]["grid_size"] == 4
    assert rep["k_condition_holds"] is True
    assert rep["ball_condition_decreasing"] is True


def test_verify_conditions_bad_alpha(tmp_path):
    argv = ["verify-conditions", "--config", str(CONFIGS / "radial_interior2d.yaml"),
            "--output-dir", str(tmp_path), "--alpha", "1.5"]
    assert run(argv) == 1


def test_build_one(small, tmp_path):
    out = tmp_path / "b"
    assert run(["build-one", "--config", str(small), "--output-dir", str(out), "--n", "300", "-q"]) == 0
    for suffix in ("points.csv", "edges.csv", "enhanced_edges.csv", "row.csv", "summary.json"):
        assert (out / f"build_one.{suffix}").exists()
    row = (out / "build_one.row.csv").read_text().splitlines()
    assert row[0] == ",".join(COLUMNS)
    summary = json.loads((out / "build_one.summary.json").read_text())
    assert summary["directed"]["N"] == summary["enhanced"]["N"]
    assert summary["seed"] == 3
