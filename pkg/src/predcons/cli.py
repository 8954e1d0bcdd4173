"""Command-line entry point: ``predcons run | verify | replay``."""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, charts, csvio
from .config import ConfigError, config_from_dict, config_to_dict, load_experiment
from .datagen import true_cubic
from .errors import InvalidInputError, PredconsError
from .models import predict
from .simulator import History, RoundRecord, SimState, run_simulation
from .trust import SCHEMES
from .verify import SUITES, format_counterexample, run_suite

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
MANIFEST = "manifest.json"
GRID_RES = 200
CURVE_POINTS = 200
ARTIFACT_PATTERNS = ("metrics.csv", "trust_round_*.csv", "predictions_round_*.csv", "fit_round_*.svg",
                     "decision_*", "local_data_agent_*.csv", "shared_set.csv", "trust_heatmap.svg",
                     "history.json", MANIFEST)


class UsageError(Exception):
    pass


def sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def metrics_csv_text(history: History) -> str:
    """Full metrics.csv contents; round 0 holds the locally fit initial models."""
    rows = csvio.metrics_rows(0, history.initial_metrics, history.initial_disagreement)
    for rec in history.records:
        rows += csvio.metrics_rows(rec.round, rec.metrics, rec.disagreement)
    lines = [",".join(csvio.METRICS_HEADER)] + [",".join(r) for r in rows]
    return "\n".join(lines) + "\n"


class RunWriter:
    """Writes per-round artifacts as rounds complete so a failed run leaves partial output."""

    def __init__(self, out: Path, config):
        self.out = out
        self.config = config
        self.curves: list[tuple[int, np.ndarray]] = []
        out.mkdir(parents=True, exist_ok=True)
        # artifacts from an earlier run in the same directory would be mixed in otherwise
        for pattern in ARTIFACT_PATTERNS:
            for stale in out.glob(pattern):
                stale.unlink()
        self.files: list[str] = []

    def _note(self, name: str) -> Path:
        self.files.append(name)
        return self.out / name

    def begin(self, state: SimState, preds0: np.ndarray, metrics0, disagreement0: float) -> None:
        csvio.append_metrics(self._note("metrics.csv"), csvio.metrics_rows(0, metrics0, disagreement0))
        csvio.write_predictions_csv(self._note("predictions_round_0.csv"), preds0)
        csvio.write_dataset_csv(self._note("shared_set.csv"), state.shared_x)
        for i, (x, y) in enumerate(state.local_data):
            csvio.write_dataset_csv(self._note(f"local_data_agent_{i}.csv"), x, y)
        self._curve(state, 0)

    def round(self, state: SimState, rec: RoundRecord) -> None:
        t = rec.round
        csvio.append_metrics(self.out / "metrics.csv", csvio.metrics_rows(t, rec.metrics, rec.disagreement))
        csvio.write_matrix_csv(self._note(f"trust_round_{t}.csv"), rec.trust)
        csvio.write_predictions_csv(self._note(f"predictions_round_{t}.csv"), rec.predictions)
        self._curve(state, t)

    def _curve(self, state: SimState, t: int) -> None:
        if state.task != "regression":
            return
        xs = np.linspace(self.config.shared_lo, self.config.shared_hi, CURVE_POINTS)
        ys = np.vstack([predict(m, xs) for m in state.models])
        series = [("truth", xs, true_cubic(xs))] + [(f"agent {i}", xs, y) for i, y in enumerate(ys)]
        truth = true_cubic(xs)
        pad = 0.25 * (truth.max() - truth.min())
        points = [(f"agent {i}", x, y) for i, (x, y) in enumerate(state.local_data)]
        svg = charts.line_chart(series, f"fits after round {t}", points=points,
                                y_range=(truth.min() - pad, truth.max() + pad))
        self._note(f"fit_round_{t}.svg").write_text(svg)

    def finish(self, state: SimState, history: History) -> None:
        final = history.final
        self._note("trust_heatmap.svg").write_text(charts.heatmap(final.trust, f"trust after round {final.round}"))
        if state.task == "classification":
            self._decision_grid(state)
        self._note("history.json").write_text(json.dumps(history.to_dict()))

    def _decision_grid(self, state: SimState) -> None:
        pts = np.vstack([state.shared_x] + [x for x, _ in state.local_data])
        lo, hi = float(pts.min()) - 0.5, float(pts.max()) + 0.5
        axis = np.linspace(lo, hi, GRID_RES)
        gx, gy = np.meshgrid(axis, axis)
        grid = np.column_stack([gx.ravel(), gy.ravel()])
        labels = [predict(m, grid).argmax(axis=1) for m in state.models]
        rows = ([csvio.fmt(p[0]), csvio.fmt(p[1])] + [str(int(lab[k])) for lab in labels]
                for k, p in enumerate(grid))
        csvio.write_rows(self._note("decision_grid.csv"),
                          ["x0", "x1"] + [f"agent_{i}" for i in range(len(labels))], rows)
        for i, lab in enumerate(labels):
            x, y = state.local_data[i]
            svg = charts.class_raster(lab.reshape(GRID_RES, GRID_RES), (lo, hi, lo, hi),
                                      f"agent {i} decision regions", points=(x[:, 0], x[:, 1], y))
            self._note(f"decision_boundary_agent_{i}.svg").write_text(svg)


def _write_manifest(out: Path, payload: dict) -> None:
    (out / MANIFEST).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def run_one(config, out: Path, kind: str = "custom") -> bool:
    """Run one seed into ``out``; returns False (after writing an error manifest) on failure."""
    writer = RunWriter(out, config)
    manifest = {"version": __version__, "kind": kind, "seed": config.seed, "config": config_to_dict(config)}
    latest: list[SimState] = []

    def on_start(state, history):
        writer.begin(state, history.initial_predictions, history.initial_metrics, history.initial_disagreement)
        latest[:] = [state]

    def on_round(state, rec):
        writer.round(state, rec)
        latest[:] = [state]

    t0 = time.perf_counter()
    try:
        history = run_simulation(config, on_round=on_round, on_start=on_start)
        writer.finish(latest[0], history)
    except PredconsError as exc:
        manifest.update(status="error", error=f"{type(exc).__name__}: {exc}",
                        completed_rounds=latest[0].round if latest else 0,
                        files=sorted(writer.files))
        _write_manifest(out, manifest)
        print(f"run failed ({out}): {exc}", file=sys.stderr)
        return False
    manifest.update(
        status="ok",
        files=sorted(writer.files),
        metrics_sha256=sha256_file(out / "metrics.csv"),
        consensus_time=history.consensus_time,
        final_disagreement=history.final.disagreement,
        runtime_seconds=round(time.perf_counter() - t0, 3),
    )
    _write_manifest(out, manifest)
    return True


def cmd_run(args) -> int:
    if not args.config:
        raise UsageError("run needs --config")
    path = Path(args.config)
    if not path.is_file():
        print(f"config not found: {path}", file=sys.stderr)
        return EXIT_USAGE
    exp = load_experiment(path)
    seeds = (args.seed,) if args.seed is not None else exp.seeds
    overrides = {}
    if args.scheme is not None:
        overrides["trust"] = {**config_to_dict(exp.simulation)["trust"], "scheme": args.scheme}
    if args.lam is not None:
        overrides["lambda"] = args.lam
    if args.rounds is not None:
        overrides["rounds"] = args.rounds
    base = exp.simulation.replace(**overrides) if overrides else exp.simulation
    out_root = Path(args.out or exp.out)
    status = EXIT_OK
    for seed in seeds:
        config = base.replace(seed=seed)
        out = out_root / f"seed_{seed}"
        ok = run_one(config, out, exp.kind)
        summary = json.loads((out / MANIFEST).read_text())
        if ok:
            print(f"seed {seed}: final disagreement {summary['final_disagreement']:.6g}, "
                  f"consensus round {summary['consensus_time']} -> {out}")
        else:
            status = EXIT_FAIL
    return status


def cmd_verify(args) -> int:
    if args.trials is None:
        args.trials = 1000
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    failed = 0
    for res in run_suite(args.suite, args.trials, args.seed or 0):
        print(f"{res.name}: {res.passed} passed, {res.failed} failed")
        for k, ex in enumerate(res.counterexamples):
            print(f"counterexample {k}:")
            print(format_counterexample(ex))
        failed += res.failed
    return EXIT_OK if failed == 0 else EXIT_FAIL


def cmd_replay(args) -> int:
    if not args.manifest:
        raise UsageError("replay needs a manifest path")
    path = Path(args.manifest)
    if path.is_dir():
        path = path / MANIFEST
    if not path.is_file():
        raise UsageError(f"manifest not found: {path}")
    recorded = path.parent / "metrics.csv"
    if not recorded.is_file():
        raise UsageError(f"recorded metrics missing: {recorded}")
    manifest = json.loads(path.read_text())
    if manifest.get("status") != "ok":
        raise UsageError("manifest records a failed run")
    config = config_from_dict({**manifest["config"], "seed": manifest["seed"]})
    history = run_simulation(config)
    fresh = metrics_csv_text(history).encode()
    if fresh == recorded.read_bytes():
        print(f"replay identical: {recorded}")
        return EXIT_OK
    old = recorded.read_text().splitlines()
    new = fresh.decode().splitlines()
    first = next((k for k, (a, b) in enumerate(zip(old, new)) if a != b), min(len(old), len(new)))
    print(f"replay mismatch at metrics.csv line {first + 1}", file=sys.stderr)
    if first < len(old):
        print(f"  recorded: {old[first]}", file=sys.stderr)
    if first < len(new):
        print(f"  replayed: {new[first]}", file=sys.stderr)
    return EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="predcons", description="Trust-weighted prediction consensus experiments")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int)
    run.add_argument("--out")
    run.add_argument("--scheme", choices=SCHEMES)
    run.add_argument("--lambda", dest="lam", type=float)
    run.add_argument("--rounds", type=int)
    run.set_defaults(func=cmd_run)

    ver = sub.add_parser("verify", help="run randomized property suites")
    ver.add_argument("--suite", choices=SUITES + ("all",), default="all")
    ver.add_argument("--trials", type=int)
    ver.add_argument("--seed", type=int, default=0)
    ver.set_defaults(func=cmd_verify)

    rep = sub.add_parser("replay", help="re-run a recorded experiment and compare metrics.csv")
    rep.add_argument("manifest", nargs="?")
    rep.add_argument("--config", dest="manifest_flag", help="alias for the manifest path")
    rep.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "replay" and args.manifest is None:
        args.manifest = args.manifest_flag
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, InvalidInputError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PredconsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
