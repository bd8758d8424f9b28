"""Command-line entry point: ``gen``, ``run``, ``eval`` and ``bench``.

Exit codes: 0 on success, 1 on an internal error, 2 on bad usage or input.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import tempfile
import time
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from .baseline import static_causal_estimate
from .config import KEYS, ConfigError, RunConfig, build_config, load_config_file
from .metrics import mae, rmse, sid, shd
from .pipeline import Normalizer, fit_normalizer, resolve_tau_unit, run_engine
from .synth import GenConfig, generate_stream

log = logging.getLogger("causalstream")

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad arguments or unusable input; maps to exit code 2."""


# --------------------------------------------------------------- parsing


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key = value config file")
    grp = p.add_argument_group("configuration keys (override the config file)")
    for f in fields(RunConfig):
        if f.name == "baseline_static":
            continue
        grp.add_argument("--" + f.name.replace("_", "-"), dest=f.name, default=None, metavar="VALUE")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="causalstream", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a synthetic stream and its ground truth")
    g.add_argument("--out", required=True, help="output prefix")
    _add_config_flags(g)

    r = sub.add_parser("run", help="run the streaming engine over a CSV file")
    r.add_argument("input", help="CSV with header t,x1,...,xd")
    r.add_argument("--out", required=True, help="output prefix")
    r.add_argument("--baseline-static", dest="baseline_static", action="store_const", const="true", default=None,
                   help="write one full-stream ICA estimate instead of running the engine")
    _add_config_flags(r)

    e = sub.add_parser("eval", help="score run outputs against ground truth")
    e.add_argument("truth", help="<prefix>.truth.json from gen")
    e.add_argument("run", help="output prefix given to run")
    e.add_argument("--l-s", dest="l_s", type=int, default=None, help="forecast horizon (default: the run's)")

    b = sub.add_parser("bench", help="per-tick latency on a stationary synthetic stream")
    b.add_argument("--length", type=int, default=10000)
    b.add_argument("--repeats", type=int, default=3, help="passes over the stream; per-tick minimum is reported")
    _add_config_flags(b)
    return p


def _config_from(args) -> RunConfig:
    file_values = load_config_file(args.config) if getattr(args, "config", None) else {}
    cli_values = {k: getattr(args, k, None) for k in KEYS}
    return build_config(file_values, cli_values)


# ------------------------------------------------------------------- I/O


def _fmt(v: float) -> str:
    return "%.17g" % v


def _atomic_write(files: dict):
    """Write ``{path: text}`` so either every file appears or none does."""
    staged = []
    try:
        for path, text in files.items():
            path = Path(path)
            fd, tmp = tempfile.mkstemp(dir=path.parent if str(path.parent) else ".", prefix=".tmp-", suffix=path.name)
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            staged.append((tmp, path))
    except OSError:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise
    for tmp, path in staged:
        os.replace(tmp, path)


def write_csv_text(x, ticks=None) -> str:
    d, n = x.shape
    ticks = range(1, n + 1) if ticks is None else ticks
    lines = [",".join(["t"] + [f"x{i + 1}" for i in range(d)])]
    for t, col in zip(ticks, x.T):
        lines.append(",".join([str(t)] + [_fmt(v) for v in col]))
    return "\n".join(lines) + "\n"


def read_csv(path):
    """Return ``(ticks, x)``; rows that do not parse become NaN columns so
    the engine can reject them tick by tick."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise UsageError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2 or header[0] != "t":
        raise UsageError(f"{path}: header must be t,x1,...,xd")
    d = len(header) - 1
    ticks, cols = [], []
    for lineno, row in enumerate(rows[1:], 2):
        if not row:
            continue
        try:
            t = int(row[0])
        except ValueError:
            log.warning("%s:%d: bad tick %r, row skipped", path, lineno, row[0])
            continue
        vals = np.full(d, np.nan)
        if len(row) != d + 1:
            log.warning("%s:%d: expected %d columns, got %d", path, lineno, d + 1, len(row))
        else:
            try:
                vals = np.array([float(v) for v in row[1:]])
            except ValueError:
                log.warning("%s:%d: non-numeric value", path, lineno)
        ticks.append(t)
        cols.append(vals)
    if not cols:
        raise UsageError(f"{path}: no data rows")
    return ticks, np.array(cols).T


def truth_json(truth, cfg: GenConfig) -> str:
    return json.dumps(
        {
            "seed": cfg.seed,
            "d": cfg.d,
            "b": {str(c): truth.b[c].tolist() for c in sorted(truth.b)},
            "segments": [{"start": s, "end": e, "cluster": c} for s, e, c in truth.segments],
            "config": {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(cfg).items()},
        },
        indent=1,
    )


def load_truth(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    b = {int(c): np.array(m, dtype=float) for c, m in doc["b"].items()}
    segments = [(s["start"], s["end"], s["cluster"]) for s in doc["segments"]]
    return b, segments


def _b_at(b, segments, t):
    for s, e, c in segments:
        if s <= t <= e:
            return b[c]
    return None


def _read_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _pairs(lam):
    return [[float(z.real), float(z.imag)] for z in lam]


# -------------------------------------------------------------- commands


def cmd_gen(cfg: RunConfig, out_prefix: str) -> int:
    gcfg = cfg.gen_config()
    x, truth = generate_stream(gcfg)
    try:
        _atomic_write({out_prefix + ".csv": write_csv_text(x), out_prefix + ".truth.json": truth_json(truth, gcfg)})
    except OSError as exc:
        raise UsageError(f"cannot write {out_prefix}.*: {exc}") from exc
    print(f"wrote {out_prefix}.csv ({x.shape[1]} rows, d={x.shape[0]}) and {out_prefix}.truth.json")
    return EXIT_OK


def cmd_run(cfg: RunConfig, in_csv: str, out_prefix: str) -> int:
    ticks, x = read_csv(in_csv)
    try:
        norm = fit_normalizer(x) if cfg.normalize else Normalizer.identity(x.shape[0])
    except ConfigError as exc:
        raise UsageError(str(exc)) from exc
    meta = {
        "input": os.path.abspath(in_csv),
        "d": int(x.shape[0]),
        "rows": len(ticks),
        "l_s": cfg.l_s,
        "n_window": cfg.n_window,
        "eval_every": cfg.eval_every,
        "edge_threshold": cfg.edge_threshold,
        "norm_mean": norm.mean.tolist(),
        "norm_std": norm.std.tolist(),
        "baseline_static": cfg.baseline_static,
    }
    try:
        if cfg.baseline_static:
            return _run_static(cfg, ticks, x, norm, out_prefix, meta)
        return _run_stream(cfg, ticks, x, out_prefix, meta)
    except OSError as exc:
        raise UsageError(f"cannot write {out_prefix}.*: {exc}") from exc


def _run_static(cfg, ticks, x, norm, out_prefix, meta):
    ok = np.all(np.isfinite(x), axis=0)
    est = static_causal_estimate(norm.forward(x[:, ok]), cfg.edge_threshold, cfg.seed)
    lines = []
    for idx, t in enumerate(ticks):
        if idx + 1 >= cfg.n_window and (idx + 1 - cfg.n_window) % cfg.eval_every == 0:
            lines.append(json.dumps({"t": t, "regime": 0, "b": est.b.tolist()}))
    _atomic_write({
        out_prefix + ".causal.jsonl": "".join(line + "\n" for line in lines),
        out_prefix + ".meta.json": json.dumps(meta, indent=1),
    })
    print(f"static estimate written to {out_prefix}.causal.jsonl ({len(lines)} evaluation ticks)")
    return EXIT_OK


def _run_stream(cfg, ticks, x, out_prefix, meta):
    paths = {k: out_prefix + f".{k}.jsonl" for k in ("steps", "regimes", "causal")}
    handles = {}
    try:
        for k, p in paths.items():
            handles[k] = open(p, "w", encoding="utf-8")
    except OSError:
        for k, fh in handles.items():
            fh.close()
            os.unlink(paths[k])
        raise
    counter = {"n": 0}

    def emit(kind, obj):
        handles[kind].write(json.dumps(obj) + "\n")
        handles[kind].flush()

    def on_step(tick, step, result):
        fc = result.normalizer.inverse(step.forecast)
        emit("steps", {
            "t": tick,
            "regime": step.regime_id,
            "created": step.created_new,
            "switched": step.switched,
            "fit_error": step.fit_error,
            "forecast": fc.tolist(),
        })
        if step.created_new:
            regime = result.engine.regime_set.regimes[step.regime_id]
            emit("regimes", {
                "t": tick,
                "regime": step.regime_id,
                "w": regime.w.tolist(),
                "b": step.causal.b.tolist(),
                "eigenvalues": [_pairs(f.lam) for f in regime.factors],
            })
        if counter["n"] % cfg.eval_every == 0:
            emit("causal", {"t": tick, "regime": step.regime_id, "b": step.causal.b.tolist()})
        counter["n"] += 1

    try:
        try:
            result = run_engine(x, cfg, ticks=ticks, on_step=on_step)
        except ConfigError as exc:
            raise UsageError(str(exc)) from exc
    finally:
        for fh in handles.values():
            fh.close()
    meta.update(tau_unit=result.tau_unit, skipped=result.skipped, regimes=result.engine.n_regimes)
    _atomic_write({out_prefix + ".meta.json": json.dumps(meta, indent=1)})
    print(f"{len(result.steps)} steps, {result.engine.n_regimes} regimes, {len(result.skipped)} skipped rows; "
          f"tau_unit={result.tau_unit:.6g}")
    return EXIT_OK


def evaluate(truth_path, run_prefix, l_s=None) -> dict:
    """Mean SHD/SID over the evaluation ticks and pooled RMSE/MAE of the
    forecasts, all in z-normalised units."""
    b, segments = load_truth(truth_path)
    total = max(e for _, e, _ in segments)
    try:
        with open(run_prefix + ".meta.json", encoding="utf-8") as fh:
            meta = json.load(fh)
    except OSError as exc:
        raise UsageError(f"missing run outputs for {run_prefix}: {exc}") from exc
    if meta["rows"] != total:
        raise UsageError(f"run covers {meta['rows']} rows but the truth has {total} ticks")
    l_s = meta["l_s"] if l_s is None else l_s
    if l_s < 1:
        raise UsageError("l_s must be >= 1")

    shds, sids = [], []
    for rec in _read_jsonl(run_prefix + ".causal.jsonl"):
        true_b = _b_at(b, segments, rec["t"])
        if true_b is None:
            raise UsageError(f"causal record at t={rec['t']} is outside the truth's segments")
        est = np.abs(np.array(rec["b"])) > meta["edge_threshold"]
        if est.shape != true_b.shape:
            raise UsageError(f"causal record at t={rec['t']} has shape {est.shape}, truth {true_b.shape}")
        shds.append(shd(true_b != 0, est))
        sids.append(sid(true_b != 0, est))
    report = {
        "shd": float(np.mean(shds)) if shds else math.nan,
        "sid": float(np.mean(sids)) if sids else math.nan,
        "n_causal": len(shds),
        "rmse": math.nan,
        "mae": math.nan,
        "n_forecast": 0,
        "l_s": l_s,
    }
    steps_path = run_prefix + ".steps.jsonl"
    if os.path.exists(steps_path) and not meta.get("baseline_static"):
        ticks, x = read_csv(meta["input"])
        norm = Normalizer(np.array(meta["norm_mean"]), np.array(meta["norm_std"]))
        row_of = {t: i for i, t in enumerate(ticks)}
        pred, actual = [], []
        for rec in _read_jsonl(steps_path):
            target = row_of.get(rec["t"] + l_s)
            if target is None or not np.all(np.isfinite(x[:, target])):
                continue
            pred.append(norm.forward(np.array(rec["forecast"])))
            actual.append(norm.forward(x[:, target]))
        if pred:
            report.update(rmse=rmse(pred, actual), mae=mae(pred, actual), n_forecast=len(pred))
    return report


def cmd_eval(truth_path, run_prefix, l_s=None) -> int:
    report = evaluate(truth_path, run_prefix, l_s)
    print(f"{'metric':<8}{'value':>12}")
    for key in ("shd", "sid", "rmse", "mae"):
        print(f"{key:<8}{report[key]:>12.4f}")
    for key, val in report.items():
        print(f"{key}={val}")
    return EXIT_OK


def cmd_bench(cfg: RunConfig, length: int, repeats: int = 3) -> int:
    if length < 2000:
        raise UsageError("bench needs --length >= 2000")
    if repeats < 1:
        raise UsageError("bench needs --repeats >= 1")
    report = bench(cfg, length, repeats)
    for third in ("early", "middle", "late"):
        print(f"{third}_p50_ms={report[third + '_p50'] * 1e3:.4f} {third}_p95_ms={report[third + '_p95'] * 1e3:.4f}")
    print(f"late_over_early={report['late_over_early']:.4f}")
    print(f"slope_ms_per_tick={report['slope'] * 1e3:.3e}")
    print(f"slope_span_over_median={report['slope_span_over_median']:.4f}")
    print(f"regimes={report['regimes']}")
    return EXIT_OK


def bench(cfg: RunConfig, length: int, repeats: int = 1) -> dict:
    """Per-tick wall time of the engine on a single-regime stream.

    Each of ``repeats`` passes runs a fresh engine over the same stream and
    the per-tick minimum is kept, which filters out stretches where the
    host slowed down for reasons unrelated to the engine.
    """
    from dataclasses import replace

    from .engine import RegimeEngine

    gcfg = replace(cfg.gen_config(), sequence=(1,), segment_len=length)
    x, _ = generate_stream(gcfg)
    z = fit_normalizer(x).forward(x)
    ecfg = cfg.engine_config(resolve_tau_unit(z, cfg))
    times = np.full(length, np.inf)
    clock = time.perf_counter
    for _ in range(repeats):
        engine = RegimeEngine(x.shape[0], ecfg)
        for i, col in enumerate(z.T):
            t0 = clock()
            engine.process_tick(col)
            times[i] = min(times[i], clock() - t0)
    live = times[cfg.n_window :]
    ticks = np.arange(cfg.n_window + 1, length + 1)
    out = {"regimes": engine.n_regimes}
    thirds = np.array_split(live, 3)
    for name, part in zip(("early", "middle", "late"), thirds):
        out[name + "_p50"] = float(np.median(part))
        out[name + "_p95"] = float(np.percentile(part, 95))
    out["late_over_early"] = out["late_p50"] / out["early_p50"]
    slope = float(np.polyfit(ticks, live, 1)[0])
    out["slope"] = slope
    out["slope_span_over_median"] = abs(slope) * length / float(np.median(live))
    return out


# ------------------------------------------------------------------ main


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        if args.command == "eval":
            return cmd_eval(args.truth, args.run, args.l_s)
        cfg = _config_from(args)
        if args.command == "gen":
            return cmd_gen(cfg, args.out)
        if args.command == "run":
            return cmd_run(cfg, args.input, args.out)
        return cmd_bench(cfg, args.length, args.repeats)
    except (UsageError, ConfigError, FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
