import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from predcons import cli, csvio, verify
from predcons import simulator as sim
from predcons.errors import NumericalError

POLY_YAML = """\
kind: regression_toy
seeds: [0, 1]
rounds: 4
lambda: 1.0
trust: {scheme: naive}
shared: {lo: -4.0, hi: 4.0, n: 20}
agents:
  - {model: poly, degree: 4, x_mean: -2.0, n: 30}
  - {model: poly, degree: 4, x_mean: 0.0, n: 30}
  - {model: poly, degree: 4, x_mean: 2.0, n: 30}
"""

MLP_YAML = """\
kind: classification_toy
seeds: [0]
rounds: 2
warmup_rounds: 1
lambda: 0.5
trust: {scheme: dynamic}
shared: {n_per_class: 5}
training: {init_epochs: 5, local_epochs: 1}
agents:
  - {model: mlp, hidden: [5], n: 30, mixture: [0.7, 0.1, 0.1, 0.1]}
  - {model: mlp, hidden: [5], n: 30, mixture: [0.1, 0.7, 0.1, 0.1], flip_fraction: 1.0}
"""


@pytest.fixture
def poly_config(tmp_path):
    path = tmp_path / "poly.yaml"
    path.write_text(POLY_YAML)
    return path


def run(*argv):
    return cli.main([str(a) for a in argv])


class TestRun:
    def test_writes_artifacts_per_seed(self, poly_config, tmp_path):
        out = tmp_path / "out"
        assert run("run", "--config", poly_config, "--out", out) == 0
        for seed in (0, 1):
            d = out / f"seed_{seed}"
            manifest = json.loads((d / "manifest.json").read_text())
            assert manifest["status"] == "ok" and manifest["seed"] == seed
            assert manifest["kind"] == "regression_toy"
            for name in manifest["files"]:
                assert (d / name).is_file()
            for t in range(5):
                assert (d / f"fit_round_{t}.svg").is_file()
                assert (d / f"predictions_round_{t}.csv").is_file()
            assert (d / "trust_round_4.csv").is_file() and (d / "trust_heatmap.svg").is_file()
            lines = (d / "metrics.csv").read_text().splitlines()
            assert lines[0] == "round,agent,metric,value" and len(lines) == 1 + 5 * 4
            assert manifest["metrics_sha256"] == cli.sha256_file(d / "metrics.csv")

    def test_metrics_match_simulation(self, poly_config, tmp_path):
        run("run", "--config", poly_config, "--out", tmp_path / "o", "--seed", 1)
        manifest = json.loads((tmp_path / "o" / "seed_1" / "manifest.json").read_text())
        hist = sim.run_simulation(cli.config_from_dict({**manifest["config"], "seed": 1}))
        rows = [l.split(",") for l in (tmp_path / "o" / "seed_1" / "metrics.csv").read_text().splitlines()[1:]]
        final = [r for r in rows if r[0] == "4" and r[2] == "disagreement"]
        assert float(final[0][3]) == hist.final.disagreement == manifest["final_disagreement"]
        w = csvio.read_matrix_csv(tmp_path / "o" / "seed_1" / "trust_round_4.csv")
        assert np.array_equal(w, hist.final.trust)

    def test_overrides(self, poly_config, tmp_path):
        out = tmp_path / "o"
        args = ("run", "--config", poly_config, "--out", out, "--seed", 0)
        assert run(*args, "--scheme", "dynamic", "--lambda", 0.5, "--rounds", 2) == 0
        cfg = json.loads((out / "seed_0" / "manifest.json").read_text())["config"]
        assert cfg["trust"]["scheme"] == "dynamic" and cfg["lambda"] == 0.5 and cfg["rounds"] == 2
        assert not (out / "seed_0" / "trust_round_3.csv").exists()

    def test_rerun_clears_stale_artifacts(self, poly_config, tmp_path):
        out = tmp_path / "o"
        run("run", "--config", poly_config, "--out", out, "--seed", 0)
        run("run", "--config", poly_config, "--out", out, "--seed", 0, "--rounds", 2)
        assert not (out / "seed_0" / "trust_round_4.csv").exists()

    def test_csv_is_stable_across_runs(self, poly_config, tmp_path):
        for name in ("a", "b"):
            run("run", "--config", poly_config, "--out", tmp_path / name, "--seed", 0)
        for f in ("metrics.csv", "trust_round_4.csv", "predictions_round_4.csv", "shared_set.csv"):
            assert (tmp_path / "a/seed_0" / f).read_bytes() == (tmp_path / "b/seed_0" / f).read_bytes()

    def test_classification_outputs(self, tmp_path):
        path = tmp_path / "mlp.yaml"
        path.write_text(MLP_YAML)
        assert run("run", "--config", path, "--out", tmp_path / "o") == 0
        d = tmp_path / "o" / "seed_0"
        grid = (d / "decision_grid.csv").read_text().splitlines()
        assert grid[0] == "x0,x1,agent_0,agent_1" and len(grid) == 1 + cli.GRID_RES**2
        assert (d / "decision_boundary_agent_1.svg").read_text().startswith("<svg")
        assert not list(d.glob("fit_round_*.svg"))
        header = (d / "predictions_round_2.csv").read_text().splitlines()[0]
        assert header == "agent,sample,p0,p1,p2,p3"

    def test_missing_config(self, tmp_path):
        assert run("run", "--config", tmp_path / "nope.yaml", "--out", tmp_path / "o") == 2
        assert not (tmp_path / "o").exists()

    def test_invalid_config(self, tmp_path, capsys):
        path = tmp_path / "bad.yaml"
        path.write_text(POLY_YAML.replace("rounds: 4", "rounds: -4"))
        assert run("run", "--config", path, "--out", tmp_path / "o") == 2
        assert "line 3:" in capsys.readouterr().err
        assert not (tmp_path / "o").exists()

    def test_mid_run_failure_leaves_error_manifest(self, poly_config, tmp_path, monkeypatch):
        real = sim.poly_fit_collaborative
        calls = []

        def flaky(*a, **kw):
            calls.append(1)
            if len(calls) > 9:  # three fits at init, three per round
                raise NumericalError("singular system")
            return real(*a, **kw)

        monkeypatch.setattr(sim, "poly_fit_collaborative", flaky)
        out = tmp_path / "o"
        assert run("run", "--config", poly_config, "--out", out, "--seed", 0) == 1
        manifest = json.loads((out / "seed_0" / "manifest.json").read_text())
        assert manifest["status"] == "error" and "agent 0" in manifest["error"]
        assert manifest["completed_rounds"] == 2
        assert (out / "seed_0" / "trust_round_2.csv").is_file()
        assert not (out / "seed_0" / "trust_round_3.csv").exists()
        assert cli.main(["replay", str(out / "seed_0")]) == 2


class TestVerify:
    def test_single_suite(self, capsys):
        assert run("verify", "--suite", "metropolis", "--trials", 10) == 0
        assert "metropolis: " in capsys.readouterr().out

    def test_all(self, capsys):
        assert run("verify", "--trials", 3) == 0
        out = capsys.readouterr().out
        assert all(f"{name}: " in out for name in cli.SUITES)

    def test_zero_trials_is_usage_error(self):
        assert run("verify", "--suite", "sia", "--trials", 0) == 2

    def test_unknown_suite(self):
        with pytest.raises(SystemExit) as info:
            run("verify", "--suite", "bogus")
        assert info.value.code == 2

    def test_failure_exits_nonzero_with_counterexample(self, monkeypatch, capsys):
        def broken(trials, rng):
            res = verify.SuiteResult("sia")
            res.record(False, matrices=[np.array([[0.0, 1.0], [1.0, 0.0]])])
            return res

        monkeypatch.setitem(verify.SUITE_FUNCS, "sia", broken)
        assert run("verify", "--suite", "sia", "--trials", 1) == 1
        out = capsys.readouterr().out
        assert "1 failed" in out and "0.0,1.0" in out


class TestReplay:
    def test_identical(self, poly_config, tmp_path):
        run("run", "--config", poly_config, "--out", tmp_path / "o", "--seed", 0)
        assert run("replay", tmp_path / "o" / "seed_0" / "manifest.json") == 0
        assert run("replay", "--config", tmp_path / "o" / "seed_0") == 0

    def test_edited_seed_mismatch(self, poly_config, tmp_path, capsys):
        run("run", "--config", poly_config, "--out", tmp_path / "o", "--seed", 0)
        path = tmp_path / "o" / "seed_0" / "manifest.json"
        manifest = json.loads(path.read_text())
        manifest["seed"] = 9
        path.write_text(json.dumps(manifest))
        assert run("replay", path) == 1
        assert "mismatch" in capsys.readouterr().err

    def test_missing_artifacts(self, poly_config, tmp_path):
        assert run("replay", tmp_path / "nothing") == 2
        run("run", "--config", poly_config, "--out", tmp_path / "o", "--seed", 0)
        (tmp_path / "o" / "seed_0" / "metrics.csv").unlink()
        assert run("replay", tmp_path / "o" / "seed_0") == 2

    def test_no_path(self):
        assert run("replay") == 2

    def test_across_working_directories(self, poly_config, tmp_path):
        env = {**os.environ, "PYTHONHASHSEED": "random"}
        a, b = tmp_path / "wd_a", tmp_path / "wd_b"
        a.mkdir()
        b.mkdir()
        cmd = [sys.executable, "-m", "predcons"]
        subprocess.run(cmd + ["run", "--config", str(poly_config), "--out", "runs", "--seed", "1"],
                       cwd=a, env=env, check=True, capture_output=True)
        res = subprocess.run(cmd + ["replay", str(a / "runs" / "seed_1")], cwd=b, env=env, capture_output=True)
        assert res.returncode == 0, res.stderr
        subprocess.run(cmd + ["run", "--config", str(poly_config), "--out", "runs", "--seed", "1"],
                       cwd=b, env=env, check=True, capture_output=True)
        assert (a / "runs/seed_1/metrics.csv").read_bytes() == (b / "runs/seed_1/metrics.csv").read_bytes()


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "predcons", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip()


def test_bundled_configs_listed():
    names = sorted(p.name for p in (Path(cli.__file__).parent / "configs").glob("*.yaml"))
    assert names == ["classification_toy.yaml", "regression_toy.yaml", "weak_node.yaml"]
