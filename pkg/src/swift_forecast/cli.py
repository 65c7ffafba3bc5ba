"""Command-line entry points: train, eval, predict, analyze, synth, count,
grid.  Every failure exits nonzero with a single ``error[code]: message``
line on stderr (config problems exit 2, everything else 1)."""

from __future__ import annotations

import argparse
import itertools
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import analysis, checkpoint, data, runconfig, training
from .errors import ConfigError, DataError, SwiftError
from .model import forward, init_model, count_macs, count_params


def _load_runconfig(path, sections=("data", "model", "train", "out")) -> runconfig.RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config '{path}': {exc}") from exc
    return runconfig.parse_runconfig(text, sections)


def _prepare_data(rc: runconfig.RunConfig):
    raw = data.load_csv(rc.data_path)
    if raw.channels != rc.model.channels:
        raise ConfigError(
            f"model.channels={rc.model.channels} but '{rc.data_path}' has {raw.channels} channels"
        )
    spec = data.split(raw, rc.split_scheme)
    scaled, scaler = data.standardize(raw, spec.train)
    return raw, data.SplitData(values=scaled.values, spec=spec), scaler


def _run_training(rc: runconfig.RunConfig) -> dict:
    raw, split_data, scaler = _prepare_data(rc)
    best, history = training.train(rc.model, rc.train, split_data)
    out_dir = Path(rc.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data.write_scaler(scaler, raw.channel_names, out_dir / "scaler.csv")
    training.write_history(history, out_dir / "history.csv")
    test = training.evaluate(best, split_data, "test")
    meta = {
        "data.path": rc.data_path,
        "data.split_scheme": rc.split_scheme,
        "state.best_epoch": history.best_epoch,
        "state.best_val_mse": repr(history.best_val_mse),
    }
    for key in ("epochs", "batch_size", "max_lr", "adam_beta1", "adam_beta2", "adam_eps",
                "pct_start", "div_factor", "final_div_factor", "seed", "patience"):
        meta[f"train.{key}"] = runconfig._fmt(getattr(rc.train, key))
    ckpt = out_dir / "checkpoint.swft"
    checkpoint.save_model(ckpt, best, scaler, meta)
    summary = f"test mse={test['mse']!r} mae={test['mae']!r}"
    (out_dir / "summary.txt").write_text(summary + "\n", encoding="utf-8")
    return {"checkpoint": str(ckpt), "summary": summary, **test}


def cmd_train(args) -> int:
    rc = _load_runconfig(args.config)
    result = _run_training(rc)
    print(result["summary"])
    return 0


def _apply_overrides(meta: dict, overrides) -> dict:
    allowed = {"data.path", "data.split_scheme"}
    out = dict(meta)
    for item in overrides:
        key, sep, val = item.partition("=")
        if not sep or key not in allowed:
            raise ConfigError(f"override must be one of {sorted(allowed)}, got '{item}'")
        out[key] = val
    return out


def cmd_eval(args) -> int:
    model, scaler, meta = checkpoint.load_model(args.checkpoint)
    meta = _apply_overrides(meta, args.override)
    for key in ("data.path", "data.split_scheme"):
        if key not in meta:
            raise ConfigError(f"checkpoint carries no {key}; pass {key}=... as an override")
    if scaler is None:
        raise ConfigError("checkpoint carries no standardization stats; cannot evaluate")
    raw = data.load_csv(meta["data.path"])
    if raw.channels != model.config.channels:
        raise DataError(
            f"checkpoint expects {model.config.channels} channels, "
            f"'{meta['data.path']}' has {raw.channels}"
        )
    spec = data.split(raw, meta["data.split_scheme"])
    split_data = data.SplitData(values=scaler.transform(raw.values), spec=spec)
    for part in ("val", "test"):
        m = training.evaluate(model, split_data, part)
        print(f"{part} mse={m['mse']!r} mae={m['mae']!r}")
    return 0


def cmd_predict(args) -> int:
    model, scaler, _ = checkpoint.load_model(args.checkpoint)
    if scaler is None:
        raise ConfigError("checkpoint carries no standardization stats; cannot predict")
    cfg = model.config
    raw = data.load_csv(args.csv_in)
    if raw.channels != cfg.channels:
        raise DataError(f"checkpoint expects {cfg.channels} channels, input has {raw.channels}")
    if raw.length < cfg.lookback:
        raise DataError(f"input has {raw.length} rows, lookback needs {cfg.lookback}")
    x = scaler.transform(raw.values)[:, -cfg.lookback :]
    pred, _ = forward(x, model)
    out = data.RawSeries(values=scaler.inverse(pred), channel_names=list(raw.channel_names))
    data.write_csv(out, args.csv_out)
    print(f"wrote {cfg.horizon} forecast rows to {args.csv_out}")
    return 0


def cmd_analyze(args) -> int:
    share_model, _, _ = checkpoint.load_model(args.share_checkpoint)
    split_model, _, _ = checkpoint.load_model(args.split_checkpoint)
    report = analysis.analyze_pair(share_model, split_model, args.out_dir)
    for key in sorted(report):
        print(f"{key}={report[key]!r}")
    return 0


def cmd_synth(args) -> int:
    params = data.SynthParams(
        f0=args.f0,
        f1=args.f1,
        amp_slope=args.amp_slope,
        level_shift=args.level_shift,
        noise=args.noise,
        channels=args.channels,
    )
    raw = data.synth_nonstationary(args.length, args.seed, params)
    data.write_csv(raw, args.csv_out)
    print(f"wrote {raw.channels} x {raw.length} synthetic series to {args.csv_out}")
    return 0


def cmd_count(args) -> int:
    rc = _load_runconfig(args.config, sections=("model",))
    model = init_model(rc.model, seed=0)
    macs = count_macs(model)
    print(f"parameters={count_params(model)}")
    for key in ("head", "conv", "norm", "total"):
        print(f"macs.{key}={macs[key]}")
    return 0


def _grid_worker(text: str) -> dict:
    return _run_training(runconfig.parse_runconfig(text))


def cmd_grid(args) -> int:
    base_text = Path(args.config).read_text(encoding="utf-8")
    base = runconfig.parse_entries(base_text)
    axes = []
    for item in args.vary:
        key, sep, vals = item.partition("=")
        if not sep or key not in runconfig._SCHEMA:
            raise ConfigError(f"--vary needs <known-key>=v1,v2,..., got '{item}'")
        axes.append((key, vals.split(",")))
    runconfig.parse_runconfig(base_text)  # validate the base eagerly
    base_out = base.get("out.dir", "grid_out")

    combos, texts = [], []
    for values in itertools.product(*(vals for _, vals in axes)):
        combo = dict(zip((k for k, _ in axes), values))
        entries = dict(base)
        entries.update(combo)
        tag = "-".join(f"{k.split('.')[-1]}{v}" for k, v in combo.items()) or "base"
        entries["out.dir"] = str(Path(base_out) / tag)
        combos.append((tag, combo))
        texts.append("".join(f"{k}={v}\n" for k, v in entries.items()))

    workers = args.workers
    cap = os.environ.get("SWIFT_THREADS")
    if cap is not None:
        workers = min(workers, max(1, int(cap)))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_grid_worker, texts))
    else:
        results = [_grid_worker(t) for t in texts]

    Path(base_out).mkdir(parents=True, exist_ok=True)
    grid_csv = Path(base_out) / "grid.csv"
    with open(grid_csv, "w", encoding="utf-8") as fh:
        fh.write("tag,overrides,test_mse,test_mae,checkpoint\n")
        for (tag, combo), res in zip(combos, results):
            ov = " ".join(f"{k}={v}" for k, v in combo.items())
            fh.write(f"{tag},{ov},{res['mse']!r},{res['mae']!r},{res['checkpoint']}\n")
            print(f"{tag}: test mse={res['mse']!r} mae={res['mae']!r}")
    print(f"wrote {grid_csv}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swift-forecast",
        description="Wavelet-domain forecaster: training, evaluation and weight analysis.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a key=value config file")
    p.add_argument("config")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="re-evaluate a checkpoint on its dataset")
    p.add_argument("checkpoint")
    p.add_argument("override", nargs="*", help="data.path=... data.split_scheme=...")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="forecast the horizon after the last input rows")
    p.add_argument("checkpoint")
    p.add_argument("csv_in")
    p.add_argument("csv_out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("analyze", help="compare shared-head vs split-head weights")
    p.add_argument("share_checkpoint")
    p.add_argument("split_checkpoint")
    p.add_argument("out_dir")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("synth", help="generate a synthetic non-stationary CSV")
    p.add_argument("csv_out")
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--channels", type=int, default=1)
    p.add_argument("--f0", type=float, default=0.002)
    p.add_argument("--f1", type=float, default=0.02)
    p.add_argument("--amp-slope", type=float, default=0.5)
    p.add_argument("--level-shift", type=float, default=2.0)
    p.add_argument("--noise", type=float, default=0.1)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("count", help="print parameter and MAC counts for a config")
    p.add_argument("config")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("grid", help="train the cartesian product of config overrides")
    p.add_argument("config")
    p.add_argument("--vary", action="append", default=[], help="key=v1,v2,...")
    p.add_argument("--workers", type=int, default=1,
                   help="concurrent runs (capped by SWIFT_THREADS)")
    p.set_defaults(func=cmd_grid)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        return 2
    except SwiftError as exc:
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error[io]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
