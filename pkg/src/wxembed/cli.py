"""Command-line interface: the whole pipeline as subcommands.

Exit codes: 0 success, 1 runtime failure (I/O, divergence, parity violation),
2 usage or config error. Every run lands its artifacts in a run directory
named by the hash of (command, config) and writes a manifest of outputs with
checksums; run directories are write-once.

Heavy imports happen inside the command handlers so `--deterministic`
(default on) can pin the BLAS thread pools before numpy loads.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

USAGE_ERROR = 2
RUNTIME_ERROR = 1


class UsageError(Exception):
    pass


def _set_deterministic() -> None:
    if "numpy" in sys.modules:
        try:
            import threadpoolctl
            threadpoolctl.ThreadpoolController().limit(limits=1)
        except ImportError:
            pass
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS"):
        os.environ.setdefault(var, "1")


def _load_cfg(args) -> dict:
    from .runconfig import validate_config, load_config
    if getattr(args, "config", None):
        return load_config(args.config)
    return validate_config({})


def _run_dir(command: str, cfg: dict, args):
    from .runconfig import RunDir
    root = getattr(args, "run_root", None) or cfg.get("paths", {}).get("run_root", "runs")
    return RunDir(command, cfg, root)


def _parse_grid(text: str):
    from .catalog import GridSpec
    try:
        h, w = text.lower().split("x")
        return GridSpec(int(h), int(w))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected HxW, got {text!r}") from None


# ---------------------------------------------------------------------------
# command handlers

def cmd_synth(args) -> int:
    from .runconfig import catalog_from_config, grid_from_config
    from .synth import synth_dataset
    from . import wxd

    cfg = _load_cfg(args)
    data = dict(cfg.get("data", {}))
    if args.grid:
        data["grid"] = [args.grid.n_lat, args.grid.n_lon]
    if args.seed is not None:
        data["seed"] = args.seed
    if args.times is not None:
        data["n_times"] = args.times
    if args.start_time:
        data["start_time"] = args.start_time
    cfg["data"] = data
    run = _run_dir("synth", cfg, args)

    grid = grid_from_config(data)
    catalog = catalog_from_config(data)
    result = synth_dataset(grid, int(data.get("n_times", 1)), int(data.get("seed", 0)),
                           start_time=data.get("start_time", "2020-01-01T00:00"),
                           step_hours=int(data.get("step_hours", 1)), catalog=catalog)
    out = Path(args.out) if args.out else run.file("dataset.wxd")
    wxd.write_synth(out, result)
    run.record(out)
    manifest = run.finalize()
    print(f"wrote {out} ({out.stat().st_size} bytes); manifest {manifest}")
    return 0


def cmd_stats(args) -> int:
    from . import wxd
    from .schedule import build_schedule, complement_indices
    from .stats import compute_clim_stats

    cfg = _load_cfg(args)
    run = _run_dir("stats", cfg, args)
    with wxd.DatasetReader(args.data) as reader:
        indices = None
        if args.split == "train":
            indices = complement_indices(reader.n_times, build_schedule(reader.timestamps))
        channels = args.channels.split(",") if args.channels else None
        stats = compute_clim_stats(reader, channels=channels, time_indices=indices)
    out = Path(args.out) if args.out else run.file("stats.json")
    stats.save(out)
    run.record(out)
    run.finalize()
    print(f"wrote {out} ({len(stats.names)} channels)")
    return 0


def _open_training_data(args, cfg):
    from . import wxd
    from .schedule import build_schedule, complement_indices
    from .stats import ClimStats, compute_clim_stats

    data_path = args.data or cfg.get("paths", {}).get("data")
    if not data_path:
        raise UsageError("no dataset (use --data or paths.data)")
    reader = wxd.DatasetReader(data_path)
    split = cfg.get("data", {}).get("split", "train")
    if split == "train":
        indices = complement_indices(reader.n_times, build_schedule(reader.timestamps))
    elif split == "all":
        indices = list(range(reader.n_times))
    else:
        raise UsageError(f"unknown data.split {split!r}")
    stats_path = cfg.get("paths", {}).get("stats")
    stats = ClimStats.load(stats_path) if stats_path else compute_clim_stats(reader, time_indices=indices)
    return reader, indices, stats


def cmd_train_ae(args) -> int:
    from .checkpoint import save_checkpoint
    from .runconfig import model_config, train_config
    from .train import prognostic_inputs, train_autoencoder, write_loss_curve

    cfg = _load_cfg(args)
    run = _run_dir("train-ae", cfg, args)
    reader, indices, stats = _open_training_data(args, cfg)
    n_prog = len(reader.catalog.prognostic_indices())
    mcfg = model_config(cfg, "autoencoder", n_prog, n_prog)
    tcfg, _ = train_config(cfg, "autoencoder")
    x = prognostic_inputs(reader, stats, indices)
    result = train_autoencoder(x, reader.grid, mcfg, tcfg,
                               snapshot_dir=run.path if tcfg.snapshot_every else None)
    out = Path(args.out) if args.out else run.file("autoencoder.wxc")
    save_checkpoint(out, result.checkpoint)
    curve = run.file("loss_curve.csv")
    write_loss_curve(curve, result.curve)
    stats.save(run.file("stats.json"))
    for p in (out, curve, run.file("stats.json")):
        run.record(p)
    run.finalize()
    reader.close()
    print(f"trained autoencoder: final epoch loss {result.epoch_losses[-1]:.6f}; wrote {out}")
    return 0


def _cmd_train_head(args, kind: str) -> int:
    from .checkpoint import save_checkpoint
    from .runconfig import model_config, train_config
    from .train import (diagnostic_target, prognostic_inputs, train_bespoke,
                        train_downstream, write_loss_curve)

    cfg = _load_cfg(args)
    run = _run_dir(f"train-{kind}", cfg, args)
    reader, indices, stats = _open_training_data(args, cfg)
    n_prog = len(reader.catalog.prognostic_indices())
    tcfg, target = train_config(cfg, kind)
    target = args.target or target
    if not target:
        raise UsageError(f"no target variable (use --target or train.{kind}.target)")
    mcfg = model_config(cfg, kind, n_prog, 1)
    x = prognostic_inputs(reader, stats, indices)
    targets, mask, entry = diagnostic_target(reader, stats, indices, target)

    if kind == "downstream":
        enc = args.encoder or cfg.get("paths", {}).get("encoder_checkpoint")
        if not enc:
            raise UsageError("downstream training needs --encoder or paths.encoder_checkpoint")
        result = train_downstream(x, targets, reader.grid, enc, mcfg, tcfg, target,
                                  entry.activation, loss_mask=mask,
                                  snapshot_dir=run.path if tcfg.snapshot_every else None)
    else:
        result = train_bespoke(x, targets, reader.grid, mcfg, tcfg, target,
                               entry.activation, loss_mask=mask,
                               snapshot_dir=run.path if tcfg.snapshot_every else None)

    out = Path(args.out) if args.out else run.file(f"{kind}_{target}.wxc")
    save_checkpoint(out, result.checkpoint)
    curve = run.file("loss_curve.csv")
    write_loss_curve(curve, result.curve)
    for p in (out, curve):
        run.record(p)
    run.finalize()
    reader.close()
    print(f"trained {kind} head for {target!r}: final epoch loss "
          f"{result.epoch_losses[-1]:.6f}; wrote {out}")
    return 0


def cmd_train_downstream(args) -> int:
    return _cmd_train_head(args, "downstream")


def cmd_train_bespoke(args) -> int:
    return _cmd_train_head(args, "bespoke")


def cmd_eval(args) -> int:
    from . import wxd
    from .evaluate import EvalModel, evaluate
    from .report import emit_report
    from .schedule import build_schedule
    from .stats import ClimStats, compute_clim_stats

    cfg = _load_cfg(args)
    models = cfg.get("eval", {}).get("models")
    if not models:
        raise UsageError("eval.models is required")
    run = _run_dir("eval", cfg, args)
    data_path = args.data or cfg.get("paths", {}).get("data")
    with wxd.DatasetReader(data_path) as reader:
        schedule = build_schedule(reader.timestamps, year=cfg.get("eval", {}).get("year"))
        stats_path = cfg.get("paths", {}).get("stats")
        if stats_path:
            stats = ClimStats.load(stats_path)
        else:
            from .schedule import complement_indices
            stats = compute_clim_stats(reader, time_indices=complement_indices(reader.n_times, schedule))
        ems = [EvalModel(m["tag"], m["variable"], m["checkpoint"],
                         m.get("encoder_checkpoint")) for m in models]
        report = evaluate(ems, reader, schedule, stats,
                          batch_size=int(cfg.get("eval", {}).get("batch_size", 16)),
                          ssim_win=int(cfg.get("eval", {}).get("ssim_window", 11)))
    fmt = args.format or cfg.get("paths", {}).get("format", "json")
    out = Path(args.report) if args.report else run.file(f"report.{fmt}")
    for p in emit_report(report, fmt, out):
        run.record(p)
    run.finalize()
    for a in report.aggregates:
        print(f"{a.model_tag} {a.variable}: rmse {a.rmse_mean:.6g} +- {a.rmse_sigma:.3g} "
              f"ssim {a.ssim_mean:.4f} +- {a.ssim_sigma:.3g} (n={a.n})")
    print(f"wrote {out}")
    return 0


def cmd_params(args) -> int:
    from .nn.models import count_params_breakdown
    from .runconfig import grid_from_config, model_config

    cfg = _load_cfg(args)
    roles = list(cfg.get("model", {}))
    role = args.role or (roles[0] if len(roles) == 1 else None)
    if role is None:
        raise UsageError(f"config defines {roles}; pick one with --role")
    grid = _parse_grid(args.grid) if args.grid else grid_from_config(cfg.get("data", {}))
    section = cfg.get("model", {}).get(role, {})
    mcfg = model_config(cfg, role, section.get("in_channels", 54), section.get("out_channels", 54))
    breakdown = count_params_breakdown(mcfg, grid)
    total = sum(breakdown.values())
    print(f"{role} on {grid.n_lat}x{grid.n_lon} (patch {mcfg.patch_size}, dim {mcfg.embed_dim}):")
    for part, n in breakdown.items():
        print(f"  {part:12s} {n:>12,}")
    print(f"  {'total':12s} {total:>12,}")
    return 0


def cmd_ablate(args) -> int:
    from .bench import run_ablation

    cfg = _load_cfg(args)
    run = _run_dir("ablate", cfg, args)
    data_path = args.data or cfg.get("paths", {}).get("data")
    rows, artifacts = run_ablation(cfg, run.path, data_path=Path(data_path) if data_path else None)
    for p in artifacts:
        run.record(p)
    run.finalize()
    print(f"ablation grid complete: {len(rows)} rows; see {artifacts[0]}")
    return 0


def cmd_bench_parity(args) -> int:
    from .bench import run_parity

    cfg = _load_cfg(args)
    run = _run_dir("bench-parity", cfg, args)
    data_path = args.data or cfg.get("paths", {}).get("data")
    result = run_parity(cfg, run.path, data_path=Path(data_path) if data_path else None)
    for p in result.artifacts:
        run.record(p)
    run.finalize()
    print(f"param audit: downstream {result.param_counts['downstream']:,} "
          f"< 0.5 x bespoke {result.param_counts['bespoke']:,}: "
          f"{result.param_counts['downstream'] < 0.5 * result.param_counts['bespoke']}")
    if not result.passed:
        for var, ratio in result.ratios.items():
            d = next(a for a in result.report.aggregates
                     if a.model_tag == "downstream" and a.variable == var)
            b = next(a for a in result.report.aggregates
                     if a.model_tag == "bespoke" and a.variable == var)
            print(f"PARITY VIOLATION [{var}]: downstream rmse {d.rmse_mean:.6g} vs "
                  f"bespoke rmse {b.rmse_mean:.6g} (ratio {ratio:.4f} > {result.max_ratio_allowed})",
                  file=sys.stderr)
        return RUNTIME_ERROR
    for var, ratio in result.ratios.items():
        print(f"parity ok [{var}]: rmse ratio {ratio:.4f} <= {result.max_ratio_allowed}")
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wxembed",
                                 description="Weather-state embedding pipeline at desk scale")
    ap.add_argument("--deterministic", action=argparse.BooleanOptionalAction, default=True,
                    help="pin BLAS thread pools to 1 for bit-reproducible runs (default on)")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(fn=fn)
        p.add_argument("--config", help="RunConfig JSON file")
        p.add_argument("--run-root", help="directory for run artifacts (default: runs)")
        return p

    p = add("synth", cmd_synth, "generate a seeded synthetic dataset")
    p.add_argument("--seed", type=int)
    p.add_argument("--grid", type=_parse_grid, help="HxW, e.g. 32x64")
    p.add_argument("--times", type=int)
    p.add_argument("--start-time")
    p.add_argument("--out")

    p = add("stats", cmd_stats, "compute climatological stats -> JSON sidecar")
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    p.add_argument("--channels", help="comma-separated channel names (default: all)")
    p.add_argument("--split", choices=["all", "train"], default="all",
                   help="climatology window: all timesteps or the non-evaluation split")

    p = add("train-ae", cmd_train_ae, "stage 1: train the autoencoder")
    p.add_argument("--data")
    p.add_argument("--out")

    p = add("train-downstream", cmd_train_downstream, "stage 2: train a frozen-encoder head")
    p.add_argument("--data")
    p.add_argument("--encoder", help="autoencoder checkpoint holding the frozen phi")
    p.add_argument("--target", help="diagnostic variable name")
    p.add_argument("--out")

    p = add("train-bespoke", cmd_train_bespoke, "train the full-depth bespoke baseline")
    p.add_argument("--data")
    p.add_argument("--target")
    p.add_argument("--out")

    p = add("eval", cmd_eval, "evaluate checkpoints over the day-{1,2,15,16} schedule")
    p.add_argument("--data")
    p.add_argument("--report")
    p.add_argument("--format", choices=["csv", "json"])

    p = add("params", cmd_params, "parameter-count audit for a model config")
    p.add_argument("--role", choices=["autoencoder", "downstream", "bespoke"])
    p.add_argument("--grid", help="HxW override")

    p = add("ablate", cmd_ablate, "patch x layers autoencoder ablation grid")
    p.add_argument("--data")

    p = add("bench-parity", cmd_bench_parity, "two-stage vs bespoke parity benchmark")
    p.add_argument("--data")

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.deterministic:
        _set_deterministic()
    from .ioutil import FormatError
    from .losses import LossError
    from .optim import OptimError
    from .runconfig import ConfigError
    try:
        return args.fn(args)
    except (ConfigError, UsageError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return USAGE_ERROR
    except (FormatError, LossError, OptimError, OSError, ValueError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
