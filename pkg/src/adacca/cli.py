"""Command-line driver: track, detect, bench, gen.

Each command takes one resolved ExperimentConfig and writes CSV/JSON
artifacts into the output directory.  Exit codes: 0 success, 1 bad
configuration, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from functools import partial
from pathlib import Path

import numpy as np

from . import adaptive, batch, datagen, detect
from .config import (ConfigError, CsvStream, ExperimentConfig, GenerateStream,
                     PRESETS, resolve_config)
from .metrics import (TrackingReport, orthonormality_error, projector_distance,
                      write_aggregate_csv)

_INIT_SEED_OFFSET = 2**32  # decorrelates init draws from stream draws


def _load_stream(config: ExperimentConfig, seed: int):
    """Materialize the sample stream: (X, Y, change_points)."""
    s = config.stream
    if isinstance(s, GenerateStream):
        spec = datagen.StreamSpec(n=s.n, m=s.m, p_true=s.p_true, T=s.T,
                                  noise_sigma=s.noise_sigma,
                                  change_points=s.change_points, seed=seed)
        X, Y = datagen.generate(spec)
        return X, Y, list(s.change_points)
    split = datagen.ViewSplit(s.x_columns, s.y_columns)
    X, Y = datagen.ingest_csv(s.path, split, header=s.header)
    changes = datagen.read_labels(s.labels) if s.labels else []
    return X, Y, changes


def _init_engine(config: ExperimentConfig, X: np.ndarray, Y: np.ndarray, seed: int):
    """Build the starting (state, subspaces); returns the first streamed index."""
    e = config.engine
    if e.p > min(X.shape[1], Y.shape[1]):
        raise ConfigError("rank p exceeds the stream dimensions")
    if e.init.kind == "window":
        W = e.init.length
        if W >= X.shape[0]:
            raise ConfigError(f"init window {W} not shorter than stream {X.shape[0]}")
        state, subs = adaptive.init_from_window(X[:W], Y[:W], e.p, e.beta,
                                                e.weights(), e.mean_mode)
        return state, subs, W
    rng = np.random.default_rng(seed)
    state, subs = adaptive.init_random(X.shape[1], Y.shape[1], e.p, e.beta,
                                       rng, e.init.scale)
    return state, subs, 0


def run_track_trial(config: ExperimentConfig, trial: int) -> TrackingReport:
    """Track one stream, scoring each step against the batch reference."""
    stream_seed = config.base_seed + trial
    X, Y, _ = _load_stream(config, stream_seed)
    state, subs, start = _init_engine(config, X, Y, stream_seed + _INIT_SEED_OFFSET)
    step_cfg = config.engine.step_config()
    N = step_cfg.weights
    p = config.engine.p
    k = config.metrics_every
    report = TrackingReport()
    ref = None
    for i in range(start, X.shape[0]):
        t0 = time.perf_counter()
        state, subs = adaptive.step(state, subs, X[i], Y[i], step_cfg)
        wall = time.perf_counter() - t0
        if ref is None or (i - start) % k == 0:
            ref = batch.solve_batch(state.Cx, state.Cy, state.Cxy, p)
        cost_a = batch.brockett_cost(subs.U, subs.V, state.Cxy, N)
        cost_b = batch.brockett_cost(ref.U, ref.V, state.Cxy, N)
        report.append(
            e_o_x=orthonormality_error(subs.U, state.Cx),
            e_o_y=orthonormality_error(subs.V, state.Cy),
            e_a_x=projector_distance(subs.U, ref.U, state.Cx),
            e_a_y=projector_distance(subs.V, ref.V, state.Cy),
            e_c=(cost_a / cost_b) if cost_b != 0 else float("nan"),
            wall_time_s=wall,
        )
    return report


def cmd_track(config: ExperimentConfig) -> int:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(config.to_json() + "\n")
    indices = range(config.trials)
    if config.jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=config.jobs) as ex:
            reports = list(ex.map(partial(run_track_trial, config), indices))
    else:
        reports = [run_track_trial(config, t) for t in indices]
    for t, rep in enumerate(reports):
        rep.write_csv(out / f"trial_{t:03d}_metrics.csv")
    write_aggregate_csv(out / "aggregate_metrics.csv", reports)
    return 0


def run_criterion_series(config: ExperimentConfig, stream_seed: int):
    """Score every post-init sample with the pre-update residual criterion.

    Returns (criterion series, change indices relative to the series,
    series start offset in the raw stream).
    """
    X, Y, changes = _load_stream(config, stream_seed)
    state, subs, start = _init_engine(config, X, Y, stream_seed + _INIT_SEED_OFFSET)
    step_cfg = config.engine.step_config()
    n_x, n_y = X.shape[1], Y.shape[1]
    values = np.empty(X.shape[0] - start)
    for i in range(start, X.shape[0]):
        xc = X[i] - state.mu_x
        yc = Y[i] - state.mu_y
        values[i - start] = detect.criterion(state, subs, xc, yc, n_x, n_y)
        state, subs = adaptive.step(state, subs, X[i], Y[i], step_cfg)
    dropped = [cp for cp in changes if cp < start]
    if dropped:
        print(f"warning: change labels {dropped} fall inside the init window",
              file=sys.stderr)
    scored = [cp - start for cp in changes if cp >= start]
    return values, scored, start


def cmd_detect(config: ExperimentConfig) -> int:
    if config.detect is None:
        raise ConfigError("detect command needs a 'detect' config section")
    d = config.detect
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(config.to_json() + "\n")

    if d.tau is not None:
        tau = d.tau
    else:
        if isinstance(config.stream, CsvStream) and not config.stream.labels:
            raise ConfigError("threshold calibration needs labels or an explicit tau")
        runs = []
        for r in range(d.train_runs):
            series, scored, _ = run_criterion_series(config, config.base_seed + 1 + r)
            if not scored:
                raise ConfigError("training run has no usable change labels")
            runs.append((series, scored))
        tau = detect.calibrate_threshold(runs)

    series, scored, start = run_criterion_series(config, config.base_seed)
    dcfg = detect.DetectionConfig(tau=tau, debounce=d.debounce, eval_window=d.eval_window)
    events = detect.decide(series, dcfg)
    evaluation = detect.evaluate(events, scored, dcfg, series.shape[0],
                                 series if scored else None)

    with open(out / "criterion.csv", "w", newline="") as fh:
        fh.write("t,criterion\n")
        for i, c in enumerate(series):
            fh.write(f"{start + i},{float(c)!r}\n")
    with open(out / "events.csv", "w", newline="") as fh:
        fh.write("t,c_value,threshold\n")
        for e in events:
            fh.write(f"{start + e.t},{e.c_value!r},{e.threshold!r}\n")
    evaluation_out = {
        "schema_version": config.schema_version,
        "threshold": tau,
        "init_offset": start,
        "events": [start + e.t for e in events],
        "true_changes": [start + cp for cp in scored],
        **evaluation,
    }
    (out / "evaluation.json").write_text(json.dumps(evaluation_out, indent=2,
                                                    sort_keys=True) + "\n")
    return 0


def _percentiles(samples) -> dict:
    arr = np.asarray(samples)
    return {
        "mean": float(arr.mean()),
        "p50": float(np.percentile(arr, 50)),
        "p90": float(np.percentile(arr, 90)),
        "p99": float(np.percentile(arr, 99)),
    }


def cmd_bench(config: ExperimentConfig) -> int:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    X, Y, _ = _load_stream(config, config.base_seed)
    state, subs, start = _init_engine(config, X, Y,
                                      config.base_seed + _INIT_SEED_OFFSET)
    step_cfg = config.engine.step_config()
    p = config.engine.p
    adaptive_s, batch_s = [], []
    for i in range(start, X.shape[0]):
        t0 = time.perf_counter()
        state, subs = adaptive.step(state, subs, X[i], Y[i], step_cfg)
        adaptive_s.append(time.perf_counter() - t0)
        t0 = time.perf_counter()
        batch.solve_batch(state.Cx, state.Cy, state.Cxy, p)
        batch_s.append(time.perf_counter() - t0)
    result = {
        "schema_version": config.schema_version,
        "n": X.shape[1],
        "m": Y.shape[1],
        "p": p,
        "beta": config.engine.beta,
        "samples": len(adaptive_s),
        "adaptive_step_s": _percentiles(adaptive_s),
        "batch_solve_s": _percentiles(batch_s),
    }
    (out / "bench.json").write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_gen(config: ExperimentConfig) -> int:
    if not isinstance(config.stream, GenerateStream):
        raise ConfigError("gen requires a generator stream config")
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    X, Y, changes = _load_stream(config, config.base_seed)
    datagen.write_stream_csv(out / "data.csv", X, Y)
    datagen.write_labels(out / "labels.csv", changes)
    return 0


_COMMANDS = {
    "track": cmd_track,
    "detect": cmd_detect,
    "bench": cmd_bench,
    "gen": cmd_gen,
}


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="path to a JSON experiment config")
    p.add_argument("--preset", choices=sorted(PRESETS),
                   help="start from a named parameter preset")
    p.add_argument("--seed", type=int, help="base RNG seed")
    p.add_argument("--trials", type=int, help="number of independent trials")
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adacca",
        description="Streaming canonical-correlation tracking and change detection.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("track", help="run tracking trials, write metric CSVs")
    sub.add_parser("detect", help="calibrate/apply the change detector")
    sub.add_parser("bench", help="time adaptive steps against batch solves")
    sub.add_parser("gen", help="write a generated stream to CSV")
    for sp in sub.choices.values():
        _add_common_flags(sp)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config_data = None
        if args.config:
            try:
                config_data = json.loads(Path(args.config).read_text())
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}") from None
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config is not valid JSON: {exc}") from None
        config = resolve_config(
            preset=args.preset,
            config_data=config_data,
            base_seed=args.seed,
            trials=args.trials,
            out_dir=args.out,
        )
        return _COMMANDS[args.command](config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
