"""Model assembly: encoder, decoder, downstream heads, bespoke baseline.

All four roles share the same trunk (a stack of spectral-mixing transformer
blocks over a patch-token grid); they differ only in stem and head:

    encoder     patchify -> patch embed -> +pos -> blocks -> proj d->L
    decoder     proj L->d -> blocks -> head d->C*p^2 -> depatchify
    downstream  proj L->d -> blocks -> head d->C_out*p^2 -> depatchify -> act
    bespoke     patchify -> patch embed -> +pos -> blocks -> head -> act

Parameters live in a flat ParamSet with '/'-separated names; the autoencoder
holds the encoder under 'enc/' and the decoder under 'dec/'.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .. import rng
from ..catalog import GridSpec
from ..state import LatentState, StateError, WeatherState
from . import functional as F
from .params import ParamSet

ROLES = ("autoencoder", "downstream", "bespoke")

BLOCK_TENSORS = ("ln1_g", "ln1_b",
                 "w1r", "w1i", "b1r", "b1i", "w2r", "w2i", "b2r", "b2i",
                 "ln2_g", "ln2_b",
                 "fc1_w", "fc1_b", "fc2_w", "fc2_b")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    role: str
    patch_size: int = 8
    embed_dim: int = 768
    latent_dim: int = 768
    n_encoder_layers: int = 4
    n_decoder_layers: int = 4
    n_layers: int = 6
    n_blocks: int = 8
    mlp_ratio: int = 4
    shrink_lambda: float = 0.01
    mode_keep_fraction: float = 1.0
    in_channels: int = 54
    out_channels: int = 54

    def __post_init__(self):
        if self.role not in ROLES:
            raise ConfigError(f"unknown role {self.role!r}")
        if self.embed_dim % self.n_blocks:
            raise ConfigError(f"embed_dim {self.embed_dim} not divisible by n_blocks {self.n_blocks}")
        if not 0.0 < self.mode_keep_fraction <= 1.0:
            raise ConfigError("mode_keep_fraction must be in (0, 1]")
        if self.shrink_lambda < 0.0:
            raise ConfigError("shrink_lambda must be >= 0")

    def bind(self, grid: GridSpec) -> tuple[int, int]:
        """Token grid dims; raises if the grid does not fit the patch size."""
        p = self.patch_size
        if grid.n_lat % p:
            raise ConfigError(f"n_lat={grid.n_lat} not divisible by patch size {p}")
        if grid.n_lon % p:
            raise ConfigError(f"n_lon={grid.n_lon} not divisible by patch size {p}")
        h, w = grid.n_lat // p, grid.n_lon // p
        if h < 2 or w < 2:
            raise ConfigError(f"token grid {h}x{w} too small (need >= 2 per axis)")
        return h, w

    def to_json_obj(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ModelConfig":
        return cls(**obj)


# ---------------------------------------------------------------------------
# parameter layout

def _block_spec(d: int, k: int, r: int) -> list[tuple[str, tuple]]:
    bs = d // k
    return [("ln1_g", (d,)), ("ln1_b", (d,)),
            ("w1r", (k, bs, bs)), ("w1i", (k, bs, bs)), ("b1r", (k, bs)), ("b1i", (k, bs)),
            ("w2r", (k, bs, bs)), ("w2i", (k, bs, bs)), ("b2r", (k, bs)), ("b2i", (k, bs)),
            ("ln2_g", (d,)), ("ln2_b", (d,)),
            ("fc1_w", (d, r * d)), ("fc1_b", (r * d,)),
            ("fc2_w", (r * d, d)), ("fc2_b", (d,))]


def param_spec(cfg: ModelConfig, grid: GridSpec) -> list[tuple[str, tuple]]:
    """Ordered (name, shape) of every tensor the role allocates on this grid."""
    h, w = cfg.bind(grid)
    p, d, lat = cfg.patch_size, cfg.embed_dim, cfg.latent_dim
    k, r = cfg.n_blocks, cfg.mlp_ratio

    def blocks(n, prefix):
        out = []
        for i in range(n):
            out += [(f"{prefix}block{i:02d}/{name}", shape) for name, shape in _block_spec(d, k, r)]
        return out

    if cfg.role == "autoencoder":
        spec = [("enc/patch_w", (cfg.in_channels * p * p, d)), ("enc/patch_b", (d,)),
                ("enc/pos", (h, w, d))]
        spec += blocks(cfg.n_encoder_layers, "enc/")
        spec += [("enc/out_w", (d, lat)), ("enc/out_b", (lat,))]
        spec += [("dec/in_w", (lat, d)), ("dec/in_b", (d,))]
        spec += blocks(cfg.n_decoder_layers, "dec/")
        spec += [("dec/head_w", (d, cfg.out_channels * p * p)), ("dec/head_b", (cfg.out_channels * p * p,))]
        return spec
    if cfg.role == "downstream":
        spec = [("in_w", (lat, d)), ("in_b", (d,))]
        spec += blocks(cfg.n_layers, "")
        spec += [("head_w", (d, cfg.out_channels * p * p)), ("head_b", (cfg.out_channels * p * p,))]
        return spec
    if cfg.role == "bespoke":
        spec = [("patch_w", (cfg.in_channels * p * p, d)), ("patch_b", (d,)), ("pos", (h, w, d))]
        spec += blocks(cfg.n_layers, "")
        spec += [("head_w", (d, cfg.out_channels * p * p)), ("head_b", (cfg.out_channels * p * p,))]
        return spec
    raise ConfigError(cfg.role)


def init_params(cfg: ModelConfig, grid: GridSpec, seed: int, dtype=np.float32) -> ParamSet:
    """Truncated normal (sigma 0.02) weights, zero biases, unit layernorm scales.

    The spectral mixer's complex biases are also drawn trunc-normal 0.02:
    with zero biases the soft-shrinkage threshold puts the whole branch in
    its zero-gradient region at init and it can never learn.
    """
    ps = ParamSet(cfg.role)
    for i, (name, shape) in enumerate(param_spec(cfg, grid)):
        leaf = name.rsplit("/", 1)[-1]
        if leaf.endswith("_g"):
            arr = np.ones(shape, dtype=dtype)
        elif leaf.endswith("_b"):
            arr = np.zeros(shape, dtype=dtype)
        else:
            # weights plus the spectral b1*/b2* biases
            arr = rng.truncated_normal(rng.stream(seed, rng.PARAM_INIT, i), shape, 0.02).astype(dtype)
        ps.add(name, arr)
    return ps


# ---------------------------------------------------------------------------
# parameter counting (closed form; must equal allocation exactly)

def _linear_count(n_in: int, n_out: int) -> int:
    return n_in * n_out + n_out


def _block_count(d: int, k: int, r: int) -> int:
    layernorms = 4 * d
    spectral = 2 * 2 * k * (d // k) ** 2 + 2 * 2 * d
    mlp = 2 * r * d * d + (r + 1) * d
    return layernorms + spectral + mlp


def patch_embed_count(channels: int, p: int, d: int) -> int:
    return channels * p * p * d + d


def count_params(cfg: ModelConfig, grid: GridSpec) -> int:
    return sum(count_params_breakdown(cfg, grid).values())


def count_params_breakdown(cfg: ModelConfig, grid: GridSpec) -> dict[str, int]:
    h, w = cfg.bind(grid)
    p, d, lat = cfg.patch_size, cfg.embed_dim, cfg.latent_dim
    block = _block_count(d, cfg.n_blocks, cfg.mlp_ratio)
    if cfg.role == "autoencoder":
        return {
            "patch_embed": patch_embed_count(cfg.in_channels, p, d),
            "pos_embed": d * h * w,
            "blocks": (cfg.n_encoder_layers + cfg.n_decoder_layers) * block,
            "latent_proj": _linear_count(d, lat) + _linear_count(lat, d),
            "head": _linear_count(d, cfg.out_channels * p * p),
        }
    if cfg.role == "downstream":
        return {
            "latent_proj": _linear_count(lat, d),
            "blocks": cfg.n_layers * block,
            "head": _linear_count(d, cfg.out_channels * p * p),
        }
    if cfg.role == "bespoke":
        return {
            "patch_embed": patch_embed_count(cfg.in_channels, p, d),
            "pos_embed": d * h * w,
            "blocks": cfg.n_layers * block,
            "head": _linear_count(d, cfg.out_channels * p * p),
        }
    raise ConfigError(cfg.role)


# ---------------------------------------------------------------------------
# forward / backward drivers (array in, array out; caches carry everything)

def _blocks_forward(params: ParamSet, tokens: np.ndarray, cfg: ModelConfig, n: int, prefix: str):
    caches = []
    for i in range(n):
        bp = {s: params[f"{prefix}block{i:02d}/{s}"] for s in BLOCK_TENSORS}
        tokens, c = F.afno_block_forward(tokens, bp, cfg.shrink_lambda,
                                         cfg.mode_keep_fraction, cfg.n_blocks)
        caches.append(c)
    return tokens, caches


def _blocks_backward(caches: list, g: np.ndarray, prefix: str):
    grads: dict[str, np.ndarray] = {}
    for i in reversed(range(len(caches))):
        g, bg = F.afno_block_backward(g, caches[i])
        for s, v in bg.items():
            grads[f"{prefix}block{i:02d}/{s}"] = v
    return g, grads


def encoder_forward(params: ParamSet, x: np.ndarray, cfg: ModelConfig, prefix: str = ""):
    """[B, C, H, W] -> latent [B, L, H/p, W/p]."""
    tok = F.patchify(x, cfg.patch_size)
    emb, c_pe = F.linear_forward(tok, params[f"{prefix}patch_w"], params[f"{prefix}patch_b"])
    emb = emb + params[f"{prefix}pos"]
    tokens, c_blocks = _blocks_forward(params, emb, cfg, cfg.n_encoder_layers, prefix)
    lat, c_out = F.linear_forward(tokens, params[f"{prefix}out_w"], params[f"{prefix}out_b"])
    latent = np.ascontiguousarray(lat.transpose(0, 3, 1, 2))
    return latent, (c_pe, c_blocks, c_out, cfg, prefix)


def encoder_backward(g_latent: np.ndarray, cache):
    c_pe, c_blocks, c_out, cfg, prefix = cache
    g = np.ascontiguousarray(g_latent.transpose(0, 2, 3, 1))
    g, gw, gb = F.linear_backward(g, c_out)
    grads = {f"{prefix}out_w": gw, f"{prefix}out_b": gb}
    g, bg = _blocks_backward(c_blocks, g, prefix)
    grads.update(bg)
    grads[f"{prefix}pos"] = g.sum(axis=0)
    g, gw, gb = F.linear_backward(g, c_pe)
    grads[f"{prefix}patch_w"] = gw
    grads[f"{prefix}patch_b"] = gb
    gx = F.depatchify(g, cfg.patch_size, cfg.in_channels)
    return gx, grads


def decoder_forward(params: ParamSet, latent: np.ndarray, cfg: ModelConfig, prefix: str = ""):
    """latent [B, L, h, w] -> reconstruction [B, C, H, W] (normalized units)."""
    z = np.ascontiguousarray(latent.transpose(0, 2, 3, 1))
    emb, c_in = F.linear_forward(z, params[f"{prefix}in_w"], params[f"{prefix}in_b"])
    tokens, c_blocks = _blocks_forward(params, emb, cfg, cfg.n_decoder_layers, prefix)
    out, c_head = F.linear_forward(tokens, params[f"{prefix}head_w"], params[f"{prefix}head_b"])
    x = F.depatchify(out, cfg.patch_size, cfg.out_channels)
    return x, (c_in, c_blocks, c_head, cfg, prefix)


def decoder_backward(g_x: np.ndarray, cache):
    c_in, c_blocks, c_head, cfg, prefix = cache
    g = F.patchify(g_x, cfg.patch_size)
    g, gw, gb = F.linear_backward(g, c_head)
    grads = {f"{prefix}head_w": gw, f"{prefix}head_b": gb}
    g, bg = _blocks_backward(c_blocks, g, prefix)
    grads.update(bg)
    g, gw, gb = F.linear_backward(g, c_in)
    grads[f"{prefix}in_w"] = gw
    grads[f"{prefix}in_b"] = gb
    g_latent = np.ascontiguousarray(g.transpose(0, 3, 1, 2))
    return g_latent, grads


def autoencoder_forward(params: ParamSet, x: np.ndarray, cfg: ModelConfig):
    latent, c_enc = encoder_forward(params, x, cfg, prefix="enc/")
    xhat, c_dec = decoder_forward(params, latent, cfg, prefix="dec/")
    return xhat, (c_enc, c_dec)


def autoencoder_backward(g: np.ndarray, cache):
    c_enc, c_dec = cache
    g_latent, grads = decoder_backward(g, c_dec)
    _, enc_grads = encoder_backward(g_latent, c_enc)
    grads.update(enc_grads)
    return grads


def _head_forward(params: ParamSet, cfg: ModelConfig, activation: str,
                  stem_cache, tokens: np.ndarray, n_layers: int):
    tokens, c_blocks = _blocks_forward(params, tokens, cfg, n_layers, "")
    out, c_head = F.linear_forward(tokens, params["head_w"], params["head_b"])
    y = F.depatchify(out, cfg.patch_size, cfg.out_channels)
    c_act = None
    if activation == "sigmoid":
        y, c_act = F.sigmoid_forward(y)
    elif activation != "none":
        raise ConfigError(f"unknown activation {activation!r}")
    return y, (stem_cache, c_blocks, c_head, c_act, cfg)


def downstream_forward(params: ParamSet, latent: np.ndarray, cfg: ModelConfig,
                       activation: str = "none"):
    """Frozen-encoder latent [B, L, h, w] -> diagnostic field [B, C_out, H, W]."""
    z = np.ascontiguousarray(latent.transpose(0, 2, 3, 1))
    emb, c_in = F.linear_forward(z, params["in_w"], params["in_b"])
    return _head_forward(params, cfg, activation, ("downstream", c_in), emb, cfg.n_layers)


def bespoke_forward(params: ParamSet, x: np.ndarray, cfg: ModelConfig,
                    activation: str = "none"):
    """Full-depth baseline: normalized prognostics -> diagnostic field."""
    tok = F.patchify(x, cfg.patch_size)
    emb, c_pe = F.linear_forward(tok, params["patch_w"], params["patch_b"])
    emb = emb + params["pos"]
    return _head_forward(params, cfg, activation, ("bespoke", c_pe), emb, cfg.n_layers)


def head_backward(g: np.ndarray, cache):
    """Shared backward for downstream and bespoke forwards."""
    (kind, c_stem), c_blocks, c_head, c_act, cfg = cache
    if c_act is not None:
        g = F.sigmoid_backward(g, c_act)
    g = F.patchify(g, cfg.patch_size)
    g, gw, gb = F.linear_backward(g, c_head)
    grads = {"head_w": gw, "head_b": gb}
    g, bg = _blocks_backward(c_blocks, g, "")
    grads.update(bg)
    if kind == "downstream":
        g, gw, gb = F.linear_backward(g, c_stem)
        grads["in_w"] = gw
        grads["in_b"] = gb
        g_in = np.ascontiguousarray(g.transpose(0, 3, 1, 2))
    else:
        grads["pos"] = g.sum(axis=0)
        g, gw, gb = F.linear_backward(g, c_stem)
        grads["patch_w"] = gw
        grads["patch_b"] = gb
        g_in = F.depatchify(g, cfg.patch_size, cfg.in_channels)
    return g_in, grads


# ---------------------------------------------------------------------------
# state-level wrappers enforcing the domain-type contracts

def encode(params: ParamSet, state: WeatherState, cfg: ModelConfig) -> LatentState:
    if not state.normalized:
        raise StateError("encoder input must be normalized")
    latent, _ = encoder_forward(params, state.data, cfg,
                                prefix="enc/" if "enc/patch_w" in params else "")
    return LatentState(latent)
