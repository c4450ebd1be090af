"""End-to-end benchmark drivers: the parity experiment and the ablation grid.

These are library functions so both the CLI and the acceptance suite drive
the exact same code paths.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

from . import wxd
from .evaluate import EvalModel, evaluate, evaluate_reconstruction
from .nn.models import count_params
from .report import MetricReport, aggregate_rows, emit_report
from .runconfig import (ConfigError, catalog_from_config, grid_from_config,
                        model_config, train_config)
from .schedule import build_schedule, complement_indices
from .stats import ClimStats, compute_clim_stats
from .synth import synth_dataset
from .train import (diagnostic_target, prognostic_inputs, train_autoencoder,
                    train_bespoke, train_downstream)


@dataclass
class BenchData:
    reader: wxd.DatasetReader
    schedule: object
    train_idx: list[int]
    stats: ClimStats
    generated: bool


def prepare_benchmark(cfg: dict, data_path: Path, log=print) -> BenchData:
    """Open (or synthesize) the benchmark dataset and derive splits + stats."""
    generated = False
    if not Path(data_path).exists():
        data = cfg.get("data", {})
        grid = grid_from_config(data)
        catalog = catalog_from_config(data)
        log(f"synthesizing benchmark dataset -> {data_path}")
        result = synth_dataset(grid, int(data.get("n_times", 608)), int(data.get("seed", 42)),
                               start_time=data.get("start_time", "2020-01-01T00:00"),
                               step_hours=int(data.get("step_hours", 1)), catalog=catalog)
        wxd.write_synth(data_path, result)
        generated = True
    reader = wxd.DatasetReader(data_path)
    schedule = build_schedule(reader.timestamps)
    train_idx = complement_indices(reader.n_times, schedule)
    stats = compute_clim_stats(reader, time_indices=train_idx)
    return BenchData(reader, schedule, train_idx, stats, generated)


@dataclass
class ParityResult:
    report: MetricReport
    ratios: dict[str, float]
    param_counts: dict[str, int]
    max_ratio_allowed: float
    passed: bool
    artifacts: list[Path] = field(default_factory=list)


def run_parity(cfg: dict, out_dir: Path, data_path: Path | None = None, log=print) -> ParityResult:
    """Two-stage pipeline vs bespoke baseline on the seeded benchmark."""
    t_start = time.time()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    bench = prepare_benchmark(cfg, data_path or out_dir / "benchmark.wxd", log=log)
    reader, stats = bench.reader, bench.stats
    grid = reader.grid
    n_prog = len(reader.catalog.prognostic_indices())
    variables = cfg.get("eval", {}).get("variables", ["tcc", "stl1"])
    max_ratio = float(cfg.get("eval", {}).get("max_rmse_ratio", 1.15))

    ae_cfg = model_config(cfg, "autoencoder", n_prog, n_prog)
    ds_cfg = model_config(cfg, "downstream", n_prog, 1)
    bs_cfg = model_config(cfg, "bespoke", n_prog, 1)
    param_counts = {"downstream": count_params(ds_cfg, grid),
                    "bespoke": count_params(bs_cfg, grid),
                    "autoencoder": count_params(ae_cfg, grid)}
    log(f"params: downstream {param_counts['downstream']} "
        f"bespoke {param_counts['bespoke']} "
        f"(ratio {param_counts['downstream'] / param_counts['bespoke']:.3f})")

    x_train = prognostic_inputs(reader, stats, bench.train_idx)

    ae_tcfg, _ = train_config(cfg, "autoencoder")
    t0 = time.time()
    ae = train_autoencoder(x_train, grid, ae_cfg, ae_tcfg)
    log(f"autoencoder: {ae_tcfg.n_epochs} epochs, "
        f"loss {ae.epoch_losses[0]:.4f} -> {ae.epoch_losses[-1]:.5f} ({time.time() - t0:.0f}s)")

    eval_models = []
    artifacts = []
    from .checkpoint import save_checkpoint
    ae_path = out_dir / "autoencoder.wxc"
    save_checkpoint(ae_path, ae.checkpoint)
    artifacts.append(ae_path)

    ds_tcfg, _ = train_config(cfg, "downstream")
    bs_tcfg, _ = train_config(cfg, "bespoke")
    for var in variables:
        targets, mask, entry = diagnostic_target(reader, stats, bench.train_idx, var)
        t0 = time.time()
        ds = train_downstream(x_train, targets, grid, ae.checkpoint, ds_cfg, ds_tcfg,
                              var, entry.activation, loss_mask=mask)
        log(f"downstream[{var}]: loss -> {ds.epoch_losses[-1]:.5f} ({time.time() - t0:.0f}s)")
        t0 = time.time()
        bs = train_bespoke(x_train, targets, grid, bs_cfg, bs_tcfg,
                           var, entry.activation, loss_mask=mask)
        log(f"bespoke[{var}]: loss -> {bs.epoch_losses[-1]:.5f} ({time.time() - t0:.0f}s)")
        for tag, result in (("downstream", ds), ("bespoke", bs)):
            p = out_dir / f"{tag}_{var}.wxc"
            save_checkpoint(p, result.checkpoint)
            artifacts.append(p)
            eval_models.append(EvalModel(tag, var, result.checkpoint,
                                         encoder_checkpoint=ae.checkpoint if tag == "downstream" else None))

    report = evaluate(eval_models, reader, bench.schedule, stats,
                      batch_size=int(cfg.get("eval", {}).get("batch_size", 16)),
                      ssim_win=int(cfg.get("eval", {}).get("ssim_window", 11)))

    ratios = {}
    for var in variables:
        d = next(a for a in report.aggregates if a.model_tag == "downstream" and a.variable == var)
        b = next(a for a in report.aggregates if a.model_tag == "bespoke" and a.variable == var)
        ratios[var] = d.rmse_mean / b.rmse_mean
    passed = all(r <= max_ratio for r in ratios.values()) and \
        param_counts["downstream"] < 0.5 * param_counts["bespoke"]

    report.metadata["parity"] = {
        "rmse_ratios": ratios,
        "max_ratio_allowed": max_ratio,
        "param_counts": param_counts,
        "passed": passed,
        "wall_seconds": round(time.time() - t_start, 1),
    }
    artifacts += emit_report(report, "json", out_dir / "parity_report.json")
    artifacts += emit_report(report, "csv", out_dir / "parity_report.csv")
    for var in variables:
        log(f"parity[{var}]: downstream/bespoke rmse ratio {ratios[var]:.4f} "
            f"(allowed {max_ratio})")
    bench.reader.close()
    return ParityResult(report, ratios, param_counts, max_ratio, passed, artifacts)


PATCH_GRID = (4, 8)
LAYERS_GRID = (4, 8)


def run_ablation(cfg: dict, out_dir: Path, data_path: Path | None = None, log=print):
    """Patch x layers autoencoder grid; emits one row per combination."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    bench = prepare_benchmark(cfg, data_path or out_dir / "ablation.wxd", log=log)
    reader, stats = bench.reader, bench.stats
    grid = reader.grid
    n_prog = len(reader.catalog.prognostic_indices())
    variable = cfg.get("eval", {}).get("variable", "u10")
    ae_tcfg, _ = train_config(cfg, "autoencoder")

    rows = []
    all_rows = []
    for patch in PATCH_GRID:
        for layers in LAYERS_GRID:
            section = dict(cfg.get("model", {}).get("autoencoder", {}))
            section.update(patch_size=patch, n_encoder_layers=layers // 2,
                           n_decoder_layers=layers - layers // 2)
            mcfg = model_config({"model": {"autoencoder": section}}, "autoencoder", n_prog, n_prog)
            x_train = prognostic_inputs(reader, stats, bench.train_idx)
            t0 = time.time()
            result = train_autoencoder(x_train, grid, mcfg, ae_tcfg)
            rep = evaluate_reconstruction(result.checkpoint, reader, bench.schedule, stats,
                                          variable,
                                          ssim_win=int(cfg.get("eval", {}).get("ssim_window", 11)))
            agg = aggregate_rows(rep.rows)[0]
            rows.append({"patch": patch, "layers": layers, "variable": variable,
                         "rmse_mean": agg.rmse_mean, "rmse_sigma": agg.rmse_sigma,
                         "ssim_mean": agg.ssim_mean, "ssim_sigma": agg.ssim_sigma})
            all_rows.extend(rep.rows)
            log(f"ablate patch={patch} layers={layers}: rmse {agg.rmse_mean:.4f} "
                f"ssim {agg.ssim_mean:.4f} ({time.time() - t0:.0f}s)")

    import csv as _csv
    import json as _json
    table = out_dir / "ablation.csv"
    with open(table, "w", newline="") as f:
        w = _csv.writer(f)
        w.writerow(["patch", "layers", "variable", "rmse_mean", "rmse_sigma",
                    "ssim_mean", "ssim_sigma"])
        for row in rows:
            w.writerow([row["patch"], row["layers"], row["variable"],
                        repr(row["rmse_mean"]), repr(row["rmse_sigma"]),
                        repr(row["ssim_mean"]), repr(row["ssim_sigma"])])
    (out_dir / "ablation.json").write_text(_json.dumps(rows, indent=2) + "\n")
    bench.reader.close()
    return rows, [table, out_dir / "ablation.json"]
