"""Stage-1 autoencoder training, stage-2 frozen-encoder heads, bespoke baseline.

Determinism contract: every checkpoint byte is a function of (data, configs,
seed) on one platform. Shuffles are drawn from counter-derived streams keyed
by (seed, epoch), so resuming from an epoch-k snapshot replays the exact
remainder of the uninterrupted run.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng
from .catalog import GridSpec, VariableCatalog
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .losses import mse_loss
from .nn import models
from .nn.params import ParamSet
from .optim import AdamState, TrainConfig, adam_step, lr_at
from .stats import ClimStats, normalize_channel


class TrainingDiverged(RuntimeError):
    """Loss went non-finite; carries the last finite-loss checkpoint."""

    def __init__(self, message: str, last_good: Checkpoint):
        super().__init__(message)
        self.last_good = last_good


class FreezeViolation(RuntimeError):
    """The frozen encoder changed during downstream training."""


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    epoch_losses: list[float]
    curve: list[tuple[int, int, float, float]] = field(default_factory=list)  # epoch, step, lr, loss


def write_loss_curve(path: str | Path, curve: list[tuple[int, int, float, float]]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["epoch", "step", "lr", "loss"])
        for row in curve:
            w.writerow([row[0], row[1], repr(row[2]), repr(row[3])])


# ---------------------------------------------------------------------------
# data preparation

def prognostic_inputs(reader, stats: ClimStats, indices) -> np.ndarray:
    """Normalized prognostic channels [N, 54, H, W] for the given timesteps."""
    prog = reader.catalog.prognostic_indices()
    names = [reader.catalog.entries[i].name for i in prog]
    sub = stats.subset(names)
    mean = sub.mean.reshape(-1, 1, 1).astype(np.float32)
    sigma = sub.sigma.reshape(-1, 1, 1).astype(np.float32)
    out = np.empty((len(indices), len(prog), reader.grid.n_lat, reader.grid.n_lon), dtype=np.float32)
    for row, t in enumerate(indices):
        out[row] = (reader.read_raw(t)[prog] - mean) / sigma
    return out


def diagnostic_target(reader, stats: ClimStats, indices, name: str):
    """Training target [N, 1, H, W] plus loss mask for one diagnostic entry.

    Sigmoid-activated entries are learned in physical units (the activation
    realizes the range); unactivated entries are learned in z units.
    """
    entry = reader.catalog.entry(name)
    ci = reader.catalog.index(name)
    raw = np.stack([reader.read_raw(t)[ci] for t in indices])[:, None]
    if entry.activation == "none":
        raw = normalize_channel(raw, stats, name)
    mask = None
    if entry.mask == "land-sea":
        if reader.mask is None:
            raise ValueError(f"target {name!r} needs a land-sea mask but the dataset has none")
        mask = reader.mask.mask.astype(np.float32)
    return raw, mask, entry


# ---------------------------------------------------------------------------
# generic epoch loop

def _loop(params: ParamSet, opt: AdamState, n: int, tcfg: TrainConfig,
          batch_fn, start_epoch: int, start_step: int, make_ckpt, snapshot_dir):
    curve = []
    epoch_losses = []
    step = start_step
    last_good = make_ckpt(params.copy(), None, start_epoch, step)
    for epoch in range(start_epoch, tcfg.n_epochs):
        order = rng.stream(tcfg.seed, rng.SHUFFLE, epoch).permutation(n)
        lr = lr_at(epoch, tcfg)
        losses = []
        for lo in range(0, n, tcfg.batch_size):
            idx = order[lo:lo + tcfg.batch_size]
            loss, grads = batch_fn(idx, epoch)
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss {loss} at epoch {epoch} step {step}", last_good)
            adam_step(params, grads, opt, lr, tcfg)
            step += 1
            losses.append(loss)
            curve.append((epoch, step, lr, loss))
        epoch_losses.append(float(np.mean(losses)))
        last_good = make_ckpt(params.copy(), None, epoch + 1, step)
        if snapshot_dir and tcfg.snapshot_every and (epoch + 1) % tcfg.snapshot_every == 0:
            snap = make_ckpt(params, opt, epoch + 1, step)
            save_checkpoint(Path(snapshot_dir) / f"epoch{epoch + 1:04d}.wxc", snap)
    final = make_ckpt(params, opt, tcfg.n_epochs, step)
    return final, epoch_losses, curve


def _start_point(mcfg, grid, tcfg, resume: Checkpoint | None):
    if resume is None:
        params = models.init_params(mcfg, grid, tcfg.seed)
        return params, AdamState.for_params(params), 0, 0
    if resume.opt is None:
        raise ValueError("checkpoint carries no optimizer state; cannot resume from it")
    return resume.params.copy(), resume.opt, resume.epoch, resume.step


# ---------------------------------------------------------------------------
# stage 1: autoencoder

def train_autoencoder(inputs: np.ndarray, grid: GridSpec, mcfg: models.ModelConfig,
                      tcfg: TrainConfig, resume: Checkpoint | None = None,
                      snapshot_dir=None) -> TrainResult:
    """Minimize reconstruction MSE of normalized prognostics; phi and psi update together.

    With augment_rolls, every sample in a batch is cyclically shifted by a
    seeded random offset (fields are periodic and advected, so a roll is a
    valid state); this stops the position embedding from memorizing
    individual timesteps and measurably improves held-out reconstruction.
    """
    mcfg.bind(grid)
    params, opt, start_epoch, start_step = _start_point(mcfg, grid, tcfg, resume)
    aug_state = {"epoch": -1, "gen": None}

    def make_ckpt(p, o, epoch, step):
        return Checkpoint(p, mcfg, tcfg, opt=o, epoch=epoch, step=step,
                          extra={"stage": "autoencoder"})

    def batch_fn(idx, epoch):
        x = inputs[idx]
        if tcfg.augment_rolls:
            if aug_state["epoch"] != epoch:
                aug_state["epoch"] = epoch
                aug_state["gen"] = rng.stream(tcfg.seed, rng.AUGMENT, epoch)
            x = np.stack([
                np.roll(x[i], shift=tuple(aug_state["gen"].integers(0, (x.shape[2], x.shape[3]))),
                        axis=(1, 2))
                for i in range(x.shape[0])])
        xhat, cache = models.autoencoder_forward(params, x, mcfg)
        loss, g = mse_loss(xhat, x)
        return loss, models.autoencoder_backward(g, cache)

    final, epoch_losses, curve = _loop(params, opt, inputs.shape[0], tcfg, batch_fn,
                                       start_epoch, start_step, make_ckpt, snapshot_dir)
    return TrainResult(final, epoch_losses, curve)


# ---------------------------------------------------------------------------
# stage 2: frozen-encoder downstream heads, and the bespoke baseline

def load_frozen_encoder(encoder_ckpt: str | Path | Checkpoint):
    """Extract phi from an autoencoder checkpoint and freeze it."""
    ckpt = encoder_ckpt if isinstance(encoder_ckpt, Checkpoint) else load_checkpoint(encoder_ckpt)
    if ckpt.params.role != "autoencoder":
        raise ValueError(f"expected an autoencoder checkpoint, got role {ckpt.params.role!r}")
    enc = ckpt.params.subset("enc", role="encoder").freeze()
    return enc, ckpt.model_config


def train_downstream(inputs: np.ndarray, targets: np.ndarray, grid: GridSpec,
                     encoder_ckpt, mcfg: models.ModelConfig, tcfg: TrainConfig,
                     target_name: str, activation: str, loss_mask: np.ndarray | None = None,
                     resume: Checkpoint | None = None, snapshot_dir=None) -> TrainResult:
    """Train M on phi(x) with phi loaded, frozen, and byte-verified afterwards."""
    if encoder_ckpt is None:
        raise ValueError("downstream training requires an encoder checkpoint")
    if mcfg.role != "downstream":
        raise ValueError(f"config role must be 'downstream', got {mcfg.role!r}")
    mcfg.bind(grid)
    enc_params, enc_cfg = load_frozen_encoder(encoder_ckpt)
    if enc_cfg.latent_dim != mcfg.latent_dim or enc_cfg.patch_size != mcfg.patch_size:
        raise ValueError("downstream config does not match the encoder's latent geometry")
    fp_before = enc_params.fingerprint()

    def encode_canonical(x: np.ndarray) -> np.ndarray:
        # Fixed GEMM shapes regardless of batch composition: partial batches
        # are zero-padded to batch_size, so cached and on-the-fly latents are
        # bit-identical (BLAS kernels differ between M sizes, not row content).
        outs = []
        b = tcfg.batch_size
        for lo in range(0, x.shape[0], b):
            chunk = x[lo:lo + b]
            short = b - chunk.shape[0]
            if short:
                chunk = np.concatenate([chunk, np.zeros((short, *chunk.shape[1:]), chunk.dtype)])
            z, _ = models.encoder_forward(enc_params, chunk, enc_cfg)
            outs.append(z if not short else z[:b - short])
        return np.concatenate(outs, axis=0)

    cached = encode_canonical(inputs) if tcfg.cache_latents else None
    params, opt, start_epoch, start_step = _start_point(mcfg, grid, tcfg, resume)

    def make_ckpt(p, o, epoch, step):
        return Checkpoint(p, mcfg, tcfg, opt=o, epoch=epoch, step=step,
                          extra={"stage": "downstream", "target": target_name,
                                 "activation": activation,
                                 "encoder_fingerprint": f"{fp_before:016x}"})

    def batch_fn(idx, epoch):
        z = cached[idx] if cached is not None else encode_canonical(inputs[idx])
        y, cache = models.downstream_forward(params, z, mcfg, activation)
        loss, g = mse_loss(y, targets[idx], loss_mask)
        _, grads = models.head_backward(g, cache)
        return loss, grads

    final, epoch_losses, curve = _loop(params, opt, inputs.shape[0], tcfg, batch_fn,
                                       start_epoch, start_step, make_ckpt, snapshot_dir)

    fp_after = enc_params.fingerprint()
    if fp_after != fp_before:
        raise FreezeViolation(
            f"encoder fingerprint changed during downstream training: "
            f"{fp_before:016x} -> {fp_after:016x}")
    return TrainResult(final, epoch_losses, curve)


def train_bespoke(inputs: np.ndarray, targets: np.ndarray, grid: GridSpec,
                  mcfg: models.ModelConfig, tcfg: TrainConfig, target_name: str,
                  activation: str, loss_mask: np.ndarray | None = None,
                  resume: Checkpoint | None = None, snapshot_dir=None) -> TrainResult:
    """End-to-end full-depth baseline on the same inputs, targets, and loss."""
    if mcfg.role != "bespoke":
        raise ValueError(f"config role must be 'bespoke', got {mcfg.role!r}")
    mcfg.bind(grid)
    params, opt, start_epoch, start_step = _start_point(mcfg, grid, tcfg, resume)

    def make_ckpt(p, o, epoch, step):
        return Checkpoint(p, mcfg, tcfg, opt=o, epoch=epoch, step=step,
                          extra={"stage": "bespoke", "target": target_name,
                                 "activation": activation})

    def batch_fn(idx, epoch):
        y, cache = models.bespoke_forward(params, inputs[idx], mcfg, activation)
        loss, g = mse_loss(y, targets[idx], loss_mask)
        _, grads = models.head_backward(g, cache)
        return loss, grads

    final, epoch_losses, curve = _loop(params, opt, inputs.shape[0], tcfg, batch_fn,
                                       start_epoch, start_step, make_ckpt, snapshot_dir)
    return TrainResult(final, epoch_losses, curve)
