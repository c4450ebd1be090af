"""Central finite-difference validation of the hand-written backward passes.

Intended for tiny 64-bit configs (<= ~1e4 parameters): every parameter
element is perturbed by +-h and the two-sided slope is compared against the
analytic gradient. The report carries the worst offender so a broken layer
is named, not just detected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import rng
from ..catalog import GridSpec
from . import models
from .params import ParamSet

H_DEFAULT = 1e-5


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_param: str
    per_param: dict[str, float]

    def __str__(self):
        return f"max relative error {self.max_rel_error:.3e} at {self.worst_param!r}"


def relative_errors(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> np.ndarray:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def finite_diff_check(tensors: dict[str, np.ndarray], loss_fn, analytic: dict[str, np.ndarray],
                      h: float = H_DEFAULT) -> GradCheckReport:
    """Compare `analytic` grads against central differences of `loss_fn`.

    `loss_fn` must recompute the scalar loss from the live arrays in
    `tensors`; elements are perturbed in place and restored.
    """
    per_param: dict[str, float] = {}
    worst, worst_name = 0.0, "<none>"
    for name, arr in tensors.items():
        num = np.empty_like(arr, dtype=np.float64)
        flat = arr.reshape(-1)
        nflat = num.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp = loss_fn()
            flat[i] = orig - h
            lm = loss_fn()
            flat[i] = orig
            nflat[i] = (lp - lm) / (2.0 * h)
        rel = relative_errors(analytic[name].astype(np.float64), num)
        per_param[name] = float(rel.max()) if rel.size else 0.0
        if per_param[name] >= worst:
            worst, worst_name = per_param[name], name
    return GradCheckReport(worst, worst_name, per_param)


def _probe_loss(out: np.ndarray, probe: np.ndarray) -> float:
    return float(np.sum(out * probe) / out.size)


def grad_check(role: str, cfg: models.ModelConfig, grid: GridSpec, seed: int,
               h: float = H_DEFAULT, corrupt_scale: float = 1.0,
               activation: str = "none") -> GradCheckReport:
    """Check a full model role against finite differences on a random probe loss.

    `corrupt_scale` != 1 multiplies the analytic gradients before comparison;
    it exists so tests can prove the checker itself catches wrong gradients.
    """
    params = models.init_params(cfg, grid, seed, dtype=np.float64)
    gen = rng.stream(seed, rng.PROBE)

    if role == "downstream":
        hh, ww = cfg.bind(grid)
        x = gen.standard_normal((1, cfg.latent_dim, hh, ww))
        fwd = lambda: models.downstream_forward(params, x, cfg, activation)
        bwd = models.head_backward
    elif role == "bespoke":
        x = gen.standard_normal((1, cfg.in_channels, grid.n_lat, grid.n_lon))
        fwd = lambda: models.bespoke_forward(params, x, cfg, activation)
        bwd = models.head_backward
    elif role == "autoencoder":
        x = gen.standard_normal((1, cfg.in_channels, grid.n_lat, grid.n_lon))
        fwd = lambda: models.autoencoder_forward(params, x, cfg)
        bwd = None
    elif role == "encoder":
        x = gen.standard_normal((1, cfg.in_channels, grid.n_lat, grid.n_lon))
        fwd = lambda: models.encoder_forward(params, x, cfg, prefix="enc/")
        bwd = models.encoder_backward
    elif role == "decoder":
        hh, ww = cfg.bind(grid)
        x = gen.standard_normal((1, cfg.latent_dim, hh, ww))
        fwd = lambda: models.decoder_forward(params, x, cfg, prefix="dec/")
        bwd = models.decoder_backward
    else:
        raise ValueError(f"unknown role {role!r}")

    out0, cache0 = fwd()
    probe = gen.standard_normal(out0.shape)

    if role == "autoencoder":
        analytic = models.autoencoder_backward(probe / out0.size, cache0)
    else:
        _, analytic = bwd(probe / out0.size, cache0)
    if corrupt_scale != 1.0:
        analytic = {n: v * corrupt_scale for n, v in analytic.items()}

    # encoder/decoder sub-checks only perturb the tensors their backward reaches
    tensors = {n: params[n] for n in params.names if n in analytic}
    return finite_diff_check(tensors, lambda: _probe_loss(fwd()[0], probe), analytic, h=h)


def tiny_config(role: str, **overrides) -> tuple[models.ModelConfig, GridSpec]:
    """A <=1e4-parameter config for gradient checks."""
    base = dict(role=role, patch_size=2, embed_dim=8, latent_dim=6, n_encoder_layers=1,
                n_decoder_layers=1, n_layers=1, n_blocks=2, mlp_ratio=2,
                shrink_lambda=0.01, mode_keep_fraction=1.0, in_channels=3, out_channels=2)
    base.update(overrides)
    return models.ModelConfig(**base), GridSpec(8, 8)
