"""Adam with bias correction, and the exponential learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nn.params import ParamSet


class OptimError(ValueError):
    pass


@dataclass
class TrainConfig:
    lr0: float = 2e-4
    decay_gamma: float = 0.98
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 16
    n_epochs: int = 10
    seed: int = 0
    loss_mask: str = "none"        # "none" | "land-sea"
    snapshot_every: int = 0        # epochs; 0 disables
    cache_latents: bool = False    # stage-2 only
    augment_rolls: bool = False    # stage-1 only: random cyclic shifts per batch

    def __post_init__(self):
        if self.lr0 <= 0:
            raise OptimError("lr0 must be positive")
        if not 0.0 < self.decay_gamma <= 1.0:
            raise OptimError("decay_gamma must be in (0, 1]")
        if self.batch_size < 1:
            raise OptimError("batch_size must be >= 1")
        if self.loss_mask not in ("none", "land-sea"):
            raise OptimError(f"unknown loss_mask {self.loss_mask!r}")

    def to_json_obj(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_json_obj(cls, obj: dict) -> "TrainConfig":
        return cls(**obj)


def lr_at(epoch: int, cfg: TrainConfig) -> float:
    """lr0 * gamma^epoch; monotonically non-increasing for gamma <= 1."""
    if epoch < 0:
        raise OptimError("epoch must be >= 0")
    return cfg.lr0 * cfg.decay_gamma ** epoch


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0

    @classmethod
    def for_params(cls, params: ParamSet) -> "AdamState":
        return cls(m={n: np.zeros_like(a) for n, a in params.items()},
                   v={n: np.zeros_like(a) for n, a in params.items()},
                   t=0)


def adam_step(params: ParamSet, grads: dict[str, np.ndarray], state: AdamState,
              lr: float, cfg: TrainConfig) -> None:
    """One bias-corrected Adam update, in place. Aborts on non-finite gradients."""
    for name in params.names:
        if name not in grads:
            raise OptimError(f"missing gradient for {name!r}")
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise OptimError(f"non-finite gradient for parameter {name!r}")
    state.t += 1
    b1, b2 = cfg.beta1, cfg.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for name in params.names:
        g = grads[name].astype(params[name].dtype, copy=False)
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        mhat = m / bc1
        vhat = v / bc2
        params[name] = params[name] - (lr * mhat / (np.sqrt(vhat) + cfg.eps)).astype(params[name].dtype)
