"""Evaluation harness: run checkpoints over a schedule, score, aggregate."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .checkpoint import Checkpoint, load_checkpoint
from .metrics import rmse, ssim
from .nn import models
from .report import FULL_SCALE_REFERENCE, MetricReport, MetricRow
from .schedule import EvalSchedule
from .stats import ClimStats, denormalize_channel
from .train import load_frozen_encoder, prognostic_inputs


@dataclass
class EvalModel:
    tag: str
    variable: str
    checkpoint: str | Path | Checkpoint
    encoder_checkpoint: str | Path | Checkpoint | None = None


def _as_ckpt(c) -> Checkpoint:
    return c if isinstance(c, Checkpoint) else load_checkpoint(c)


def evaluate(eval_models: list[EvalModel], reader, schedule: EvalSchedule,
             stats: ClimStats, batch_size: int = 16, ssim_win: int = 11) -> MetricReport:
    """Score every (model, variable) pair at every scheduled timestep.

    Predictions and truths are compared in physical units; land-masked
    variables are scored over land cells only; SSIM's dynamic range comes
    from the variable's catalog data_range.
    """
    catalog = reader.catalog
    land = reader.mask.mask.astype(np.float64) if reader.mask is not None else None

    loaded = []
    encoders: dict[str, tuple] = {}
    for em in eval_models:
        ck = _as_ckpt(em.checkpoint)
        ck.model_config.bind(reader.grid)
        entry = catalog.entry(em.variable)
        enc_key = None
        if ck.params.role == "downstream":
            if em.encoder_checkpoint is None:
                raise ValueError(f"model {em.tag!r} is a downstream head and needs an encoder checkpoint")
            enc_ck = _as_ckpt(em.encoder_checkpoint)
            enc_key = f"{enc_ck.params.fingerprint():016x}"
            if enc_key not in encoders:
                encoders[enc_key] = load_frozen_encoder(enc_ck)
        elif ck.params.role != "bespoke":
            raise ValueError(f"cannot evaluate role {ck.params.role!r} as a diagnostic model")
        loaded.append((em, ck, entry, enc_key))

    indices = schedule.indices
    stamps = {i: t for i, t in schedule.entries}
    rows: list[MetricRow] = []

    for lo in range(0, len(indices), batch_size):
        batch_idx = indices[lo:lo + batch_size]
        x = prognostic_inputs(reader, stats, batch_idx)
        truth_raw = {em.variable: np.stack([reader.read_raw(t)[catalog.index(em.variable)]
                                            for t in batch_idx])
                     for em, *_ in loaded}
        latents = {}
        for key, (enc_params, enc_cfg) in encoders.items():
            z, _ = models.encoder_forward(enc_params, x, enc_cfg)
            latents[key] = z

        for em, ck, entry, enc_key in loaded:
            if ck.params.role == "downstream":
                y, _ = models.downstream_forward(ck.params, latents[enc_key],
                                                 ck.model_config, entry.activation)
            else:
                y, _ = models.bespoke_forward(ck.params, x, ck.model_config, entry.activation)
            pred = y[:, 0]
            if entry.activation == "none":
                pred = denormalize_channel(pred, stats, entry.name)
            lo_r, hi_r = entry.data_range
            span = hi_r - lo_r
            mask = land if entry.mask == "land-sea" else None
            truth = truth_raw[em.variable]
            for b, t in enumerate(batch_idx):
                rows.append(MetricRow(
                    timestamp=stamps[t].isoformat(),
                    variable=em.variable,
                    model_tag=em.tag,
                    rmse=rmse(pred[b], truth[b], mask=mask),
                    ssim=ssim(pred[b], truth[b], data_range=span, win_size=ssim_win, mask=mask),
                ))

    metadata = {
        "mask_policy": {em.variable: ("land-only" if catalog.entry(em.variable).mask == "land-sea" else "unmasked")
                        for em, *_ in loaded},
        "units": "physical",
        "ssim": {"window": ssim_win, "sigma": 1.5, "k1": 0.01, "k2": 0.03},
        "n_scheduled": len(indices),
        "schedule_warnings": schedule.warning_count,
        "full_scale_reference": FULL_SCALE_REFERENCE,
    }
    return MetricReport(rows=rows, metadata=metadata)


def evaluate_reconstruction(ae_ckpt, reader, schedule: EvalSchedule, stats: ClimStats,
                            variable: str, batch_size: int = 16, ssim_win: int = 11) -> MetricReport:
    """Autoencoder round-trip quality for one prognostic variable, physical units."""
    ck = _as_ckpt(ae_ckpt)
    ck.model_config.bind(reader.grid)
    catalog = reader.catalog
    entry = catalog.entry(variable)
    if entry.data_range is None:
        raise ValueError(f"variable {variable!r} has no data_range for the SSIM dynamic range")
    span = entry.data_range[1] - entry.data_range[0]
    prog_names = [catalog.entries[i].name for i in catalog.prognostic_indices()]
    var_pos = prog_names.index(variable)

    indices = schedule.indices
    stamps = {i: t for i, t in schedule.entries}
    rows = []
    for lo in range(0, len(indices), batch_size):
        batch_idx = indices[lo:lo + batch_size]
        x = prognostic_inputs(reader, stats, batch_idx)
        xhat, _ = models.autoencoder_forward(ck.params, x, ck.model_config)
        pred = denormalize_channel(xhat[:, var_pos], stats, variable)
        truth = np.stack([reader.read_raw(t)[catalog.index(variable)] for t in batch_idx])
        for b, t in enumerate(batch_idx):
            rows.append(MetricRow(
                timestamp=stamps[t].isoformat(), variable=variable, model_tag="autoencoder",
                rmse=rmse(pred[b], truth[b]),
                ssim=ssim(pred[b], truth[b], data_range=span, win_size=ssim_win),
            ))
    return MetricReport(rows=rows, metadata={"kind": "reconstruction", "variable": variable})
