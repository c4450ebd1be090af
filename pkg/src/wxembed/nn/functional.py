"""Layer primitives: forward passes and hand-written backward passes.

Every `*_forward` returns (output, cache); the matching `*_backward` takes
the upstream gradient plus that cache and returns gradients for its inputs
and parameters. Gradients follow the real inner product throughout; complex
tensors carry paired real gradients (dL/dRe + i dL/dIm), for which the
adjoint of the orthonormal FFT is the inverse FFT.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.fft

# scipy's pocketfft keeps single precision single (numpy's always widens),
# so the spectral branch runs in the parameters' own precision
_fft2 = scipy.fft.fft2
_ifft2 = scipy.fft.ifft2


class ShapeError(ValueError):
    pass


# ---------------------------------------------------------------------------
# patch rearrangement

def patchify(x: np.ndarray, p: int) -> np.ndarray:
    """[B, C, H, W] -> [B, H/p, W/p, C*p*p], a lossless rearrangement."""
    b, c, h, w = x.shape
    if h % p:
        raise ShapeError(f"H={h} not divisible by patch size {p}")
    if w % p:
        raise ShapeError(f"W={w} not divisible by patch size {p}")
    t = x.reshape(b, c, h // p, p, w // p, p)
    return np.ascontiguousarray(t.transpose(0, 2, 4, 1, 3, 5)).reshape(b, h // p, w // p, c * p * p)


def depatchify(tokens: np.ndarray, p: int, channels: int) -> np.ndarray:
    """Exact inverse of `patchify`."""
    b, hp, wp, d = tokens.shape
    if d != channels * p * p:
        raise ShapeError(f"token dim {d} != C*p*p = {channels * p * p}")
    t = tokens.reshape(b, hp, wp, channels, p, p)
    return np.ascontiguousarray(t.transpose(0, 3, 1, 4, 2, 5)).reshape(b, channels, hp * p, wp * p)


# ---------------------------------------------------------------------------
# dense layers

def linear_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    return x @ w + b, (x, w)


def linear_backward(g: np.ndarray, cache):
    x, w = cache
    gx = g @ w.T
    x2 = x.reshape(-1, x.shape[-1])
    g2 = g.reshape(-1, g.shape[-1])
    return gx, x2.T @ g2, g2.sum(axis=0)


def layernorm_forward(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, eps: float = 1e-5):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = np.mean(xc * xc, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    return xhat * gamma + beta, (xhat, inv, gamma)


def layernorm_backward(g: np.ndarray, cache):
    xhat, inv, gamma = cache
    gh = g * gamma
    gx = inv * (gh - gh.mean(axis=-1, keepdims=True)
                - xhat * np.mean(gh * xhat, axis=-1, keepdims=True))
    d = xhat.shape[-1]
    ggamma = (g * xhat).reshape(-1, d).sum(axis=0)
    gbeta = g.reshape(-1, d).sum(axis=0)
    return gx, ggamma, gbeta


_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_A = 0.044715


def gelu_forward(x: np.ndarray):
    t = np.tanh(_GELU_C * x * (1.0 + _GELU_A * (x * x)))
    return 0.5 * x * (1.0 + t), (x, t)


def gelu_backward(g: np.ndarray, cache):
    x, t = cache
    du = _GELU_C * (1.0 + 3.0 * _GELU_A * (x * x))
    return g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du)


def sigmoid_forward(x: np.ndarray):
    s = 1.0 / (1.0 + np.exp(-x))
    # keep strictly inside (0, 1) so the range contract survives float32 rounding
    tiny = np.finfo(s.dtype).tiny
    one_below = np.nextafter(s.dtype.type(1.0), s.dtype.type(0.0))
    s = np.clip(s, tiny, one_below)
    return s, (s,)


def sigmoid_backward(g: np.ndarray, cache):
    (s,) = cache
    return g * s * (1.0 - s)


# ---------------------------------------------------------------------------
# spectral token mixing

def mode_mask(h: int, w: int, kappa: float) -> np.ndarray:
    """Boolean [h, w] keep-mask of the lowest ceil(kappa*modes) frequencies per axis."""
    mh = math.ceil(kappa * (h // 2 + 1))
    mw = math.ceil(kappa * (w // 2 + 1))
    fh = np.minimum(np.arange(h), h - np.arange(h))
    fw = np.minimum(np.arange(w), w - np.arange(w))
    return (fh[:, None] < mh) & (fw[None, :] < mw)


def token_fft2(x: np.ndarray, kappa: float = 1.0) -> np.ndarray:
    """Orthonormal 2-D DFT over the token grid axes of [B, h, w, d], masked."""
    spec = _fft2(x, axes=(1, 2), norm="ortho")
    if kappa < 1.0:
        spec = spec * mode_mask(x.shape[1], x.shape[2], kappa)[None, :, :, None]
    return spec


def token_ifft2(spec: np.ndarray) -> np.ndarray:
    """Inverse orthonormal 2-D DFT, real part."""
    return _ifft2(spec, axes=(1, 2), norm="ortho").real


def _softshrink(v: np.ndarray, lam: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - lam, 0.0)


def _block_matmul(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """einsum('bhwki,kio->bhwko') via BLAS batched matmul."""
    b, h, ww, k, bs = x.shape
    xt = np.ascontiguousarray(x.transpose(3, 0, 1, 2, 4)).reshape(k, b * h * ww, bs)
    out = xt @ w
    return np.ascontiguousarray(
        out.reshape(k, b, h, ww, w.shape[-1]).transpose(1, 2, 3, 0, 4))


def _block_matmul_grad_w(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    """einsum('bhwki,bhwko->kio'): per-block weight gradient."""
    k, bs = x.shape[3], x.shape[4]
    xt = np.ascontiguousarray(x.transpose(3, 0, 1, 2, 4)).reshape(k, -1, bs)
    gt = np.ascontiguousarray(g.transpose(3, 0, 1, 2, 4)).reshape(k, -1, g.shape[-1])
    return np.conj(xt).transpose(0, 2, 1) @ gt


def spectral_mix_forward(x: np.ndarray, p: dict[str, np.ndarray], lam: float, kappa: float,
                         n_blocks: int):
    """Per-frequency block-diagonal complex 2-layer MLP in the token spectrum.

    FFT over the token grid, kept modes through a shared complex MLP with a
    ReLU on real/imag parts, soft-shrinkage with threshold `lam`, remaining
    modes zeroed, inverse FFT. The residual add is the caller's job.
    """
    b, h, w, d = x.shape
    if h < 2 or w < 2:
        raise ShapeError(f"token grid {h}x{w} too small for spectral mixing")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input to spectral mixer")
    k = n_blocks
    bs = d // k
    w1 = p["w1r"] + 1j * p["w1i"]
    b1 = p["b1r"] + 1j * p["b1i"]
    w2 = p["w2r"] + 1j * p["w2i"]
    b2 = p["b2r"] + 1j * p["b2i"]

    spec = _fft2(x, axes=(1, 2), norm="ortho").reshape(b, h, w, k, bs)
    a1 = _block_matmul(spec, w1) + b1
    z1 = np.maximum(a1.real, 0.0) + 1j * np.maximum(a1.imag, 0.0)
    a2 = _block_matmul(z1, w2) + b2
    s = _softshrink(a2.real, lam) + 1j * _softshrink(a2.imag, lam)
    mask = mode_mask(h, w, kappa)
    kept = s * mask[None, :, :, None, None]
    out = _ifft2(kept.reshape(b, h, w, d), axes=(1, 2), norm="ortho").real
    cache = (spec, a1, z1, a2, mask, w1, w2, lam, kept)
    return np.ascontiguousarray(out, dtype=x.dtype), cache


def spectral_mix_backward(g: np.ndarray, cache):
    spec, a1, z1, a2, mask, w1, w2, lam, _ = cache
    b, h, w, k, bs = spec.shape
    gk = _fft2(g, axes=(1, 2), norm="ortho").reshape(b, h, w, k, bs)
    gk = gk * mask[None, :, :, None, None]
    gs = (gk.real * (np.abs(a2.real) > lam)) + 1j * (gk.imag * (np.abs(a2.imag) > lam))

    gz1 = _block_matmul(gs, np.conj(w2).transpose(0, 2, 1))
    gw2 = _block_matmul_grad_w(z1, gs)
    gb2 = gs.sum(axis=(0, 1, 2))

    ga1 = (gz1.real * (a1.real > 0)) + 1j * (gz1.imag * (a1.imag > 0))
    gspec = _block_matmul(ga1, np.conj(w1).transpose(0, 2, 1))
    gw1 = _block_matmul_grad_w(spec, ga1)
    gb1 = ga1.sum(axis=(0, 1, 2))

    gx = _ifft2(gspec.reshape(b, h, w, k * bs), axes=(1, 2), norm="ortho").real.astype(g.dtype)
    grads = {"w1r": gw1.real, "w1i": gw1.imag, "b1r": gb1.real, "b1i": gb1.imag,
             "w2r": gw2.real, "w2i": gw2.imag, "b2r": gb2.real, "b2i": gb2.imag}
    grads = {n: v.astype(g.dtype) for n, v in grads.items()}
    return gx, grads


# ---------------------------------------------------------------------------
# transformer block: pre-norm residual spectral mixing + channel MLP

def afno_block_forward(x: np.ndarray, p: dict[str, np.ndarray], lam: float, kappa: float,
                       n_blocks: int):
    h1, c_ln1 = layernorm_forward(x, p["ln1_g"], p["ln1_b"])
    mix, c_mix = spectral_mix_forward(h1, p, lam, kappa, n_blocks)
    x1 = x + mix
    h2, c_ln2 = layernorm_forward(x1, p["ln2_g"], p["ln2_b"])
    f1, c_fc1 = linear_forward(h2, p["fc1_w"], p["fc1_b"])
    a, c_act = gelu_forward(f1)
    f2, c_fc2 = linear_forward(a, p["fc2_w"], p["fc2_b"])
    return x1 + f2, (c_ln1, c_mix, c_ln2, c_fc1, c_act, c_fc2)


def afno_block_backward(g: np.ndarray, cache):
    c_ln1, c_mix, c_ln2, c_fc1, c_act, c_fc2 = cache
    grads: dict[str, np.ndarray] = {}

    ga, grads["fc2_w"], grads["fc2_b"] = linear_backward(g, c_fc2)
    gf1 = gelu_backward(ga, c_act)
    gh2, grads["fc1_w"], grads["fc1_b"] = linear_backward(gf1, c_fc1)
    gx1, grads["ln2_g"], grads["ln2_b"] = layernorm_backward(gh2, c_ln2)
    gx1 = gx1 + g

    gh1, mix_grads = spectral_mix_backward(gx1, c_mix)
    grads.update(mix_grads)
    gx, grads["ln1_g"], grads["ln1_b"] = layernorm_backward(gh1, c_ln1)
    return gx + gx1, grads
