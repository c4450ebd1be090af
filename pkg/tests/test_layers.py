import numpy as np
import pytest

from wxembed.nn import functional as F
from wxembed.nn.gradcheck import finite_diff_check


def test_patchify_shape_example():
    x = np.arange(1 * 2 * 4 * 4, dtype=np.float64).reshape(1, 2, 4, 4)
    tok = F.patchify(x, 2)
    assert tok.shape == (1, 2, 2, 8)


def test_patchify_round_trip_bit_exact(rng):
    x = rng.standard_normal((3, 5, 8, 12)).astype(np.float32)
    assert np.array_equal(F.depatchify(F.patchify(x, 4), 4, 5), x)
    assert np.array_equal(F.depatchify(F.patchify(x, 2), 2, 5), x)


def test_patchify_divisibility_error():
    x = np.zeros((1, 1, 10, 16))
    with pytest.raises(F.ShapeError, match="H=10"):
        F.patchify(x, 8)
    with pytest.raises(F.ShapeError, match="W=10"):
        F.patchify(np.zeros((1, 1, 16, 10)), 8)


def test_token_fft_round_trip_and_parseval(rng):
    x = rng.standard_normal((2, 4, 4, 3))
    spec = F.token_fft2(x, kappa=1.0)
    back = F.token_ifft2(spec)
    assert np.abs(back - x).max() < 1e-6
    energy_x = np.sum(x * x)
    energy_s = np.sum(np.abs(spec) ** 2)
    assert abs(energy_x - energy_s) / energy_x < 1e-6


def test_mode_mask_kappa_one_keeps_all():
    assert F.mode_mask(6, 8, 1.0).all()


def test_mode_mask_partial():
    m = F.mode_mask(8, 8, 0.5)
    assert m[0, 0]           # DC always kept
    assert not m[4, 0]       # Nyquist dropped at kappa=0.5
    assert m.sum() < 64


def _spectral_params(rng, d, k, scale=0.05):
    bs = d // k
    p = {}
    for n, shape in [("w1r", (k, bs, bs)), ("w1i", (k, bs, bs)), ("b1r", (k, bs)), ("b1i", (k, bs)),
                     ("w2r", (k, bs, bs)), ("w2i", (k, bs, bs)), ("b2r", (k, bs)), ("b2i", (k, bs))]:
        p[n] = (rng.standard_normal(shape) * scale)
    return p


def test_spectral_zero_weights_zero_output(rng):
    x = rng.standard_normal((2, 4, 4, 8))
    p = {n: np.zeros_like(v) for n, v in _spectral_params(rng, 8, 2).items()}
    out, _ = F.spectral_mix_forward(x, p, lam=0.01, kappa=1.0, n_blocks=2)
    assert np.all(out == 0.0)


def test_spectral_huge_lambda_zero_output(rng):
    x = rng.standard_normal((2, 4, 4, 8))
    p = _spectral_params(rng, 8, 2)
    out, _ = F.spectral_mix_forward(x, p, lam=1e12, kappa=1.0, n_blocks=2)
    assert np.all(out == 0.0)


def test_spectral_energy_never_grows_past_spectrum(rng):
    x = rng.standard_normal((1, 4, 8, 8))
    p = _spectral_params(rng, 8, 4)
    out, cache = F.spectral_mix_forward(x, p, lam=0.01, kappa=0.5, n_blocks=4)
    kept = cache[-1]
    assert np.sum(out * out) <= np.sum(np.abs(kept) ** 2) * (1 + 1e-9)


def test_spectral_rejects_nonfinite(rng):
    x = rng.standard_normal((1, 4, 4, 8))
    x[0, 0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        F.spectral_mix_forward(x, _spectral_params(rng, 8, 2), 0.01, 1.0, 2)


def test_spectral_rejects_tiny_token_grid(rng):
    x = rng.standard_normal((1, 1, 4, 8))
    with pytest.raises(F.ShapeError):
        F.spectral_mix_forward(x, _spectral_params(rng, 8, 2), 0.01, 1.0, 2)


def _block_params(rng, d, k, r):
    p = _spectral_params(rng, d, k)
    p.update({"ln1_g": np.ones(d), "ln1_b": np.zeros(d),
              "ln2_g": np.ones(d), "ln2_b": np.zeros(d),
              "fc1_w": rng.standard_normal((d, r * d)) * 0.05, "fc1_b": np.zeros(r * d),
              "fc2_w": rng.standard_normal((r * d, d)) * 0.05, "fc2_b": np.zeros(d)})
    return p


def test_block_zeroed_submodules_is_identity(rng):
    d, k, r = 8, 2, 2
    p = _block_params(rng, d, k, r)
    for name in ("w1r", "w1i", "b1r", "b1i", "w2r", "w2i", "b2r", "b2i",
                 "fc1_w", "fc1_b", "fc2_w", "fc2_b"):
        p[name] = np.zeros_like(p[name])
    x = rng.standard_normal((2, 4, 4, d))
    out, _ = F.afno_block_forward(x, p, lam=0.01, kappa=1.0, n_blocks=k)
    assert np.array_equal(out, x)


def test_block_preserves_shape(rng):
    p = _block_params(rng, 8, 2, 2)
    x = rng.standard_normal((3, 2, 6, 8))
    out, _ = F.afno_block_forward(x, p, lam=0.01, kappa=1.0, n_blocks=2)
    assert out.shape == x.shape


# ---------------------------------------------------------------------------
# per-layer finite-difference checks (64-bit)

def _probe_check(tensors, forward, rng, h=1e-5):
    out0 = forward()
    probe = rng.standard_normal(out0.shape)

    def loss():
        return float(np.sum(forward() * probe) / out0.size)

    return tensors, loss, probe, out0.size


def test_linear_gradients_near_exact(rng):
    x = rng.standard_normal((4, 6))
    w = rng.standard_normal((6, 5))
    b = rng.standard_normal(5)
    tensors = {"w": w, "b": b, "x": x}
    tensors, loss, probe, size = _probe_check(tensors, lambda: F.linear_forward(x, w, b)[0], rng)
    out, cache = F.linear_forward(x, w, b)
    gx, gw, gb = F.linear_backward(probe / size, cache)
    rep = finite_diff_check(tensors, loss, {"w": gw, "b": gb, "x": gx})
    assert rep.max_rel_error < 1e-8, str(rep)


def test_layernorm_gradients(rng):
    x = rng.standard_normal((3, 4, 8))
    g = rng.standard_normal(8) * 0.5 + 1.0
    b = rng.standard_normal(8) * 0.1
    tensors = {"x": x, "g": g, "b": b}
    tensors, loss, probe, size = _probe_check(tensors, lambda: F.layernorm_forward(x, g, b)[0], rng)
    _, cache = F.layernorm_forward(x, g, b)
    gx, gg, gb = F.layernorm_backward(probe / size, cache)
    rep = finite_diff_check(tensors, loss, {"x": gx, "g": gg, "b": gb})
    assert rep.max_rel_error < 1e-3, str(rep)


def test_gelu_gradients(rng):
    x = rng.standard_normal((5, 7))
    tensors = {"x": x}
    tensors, loss, probe, size = _probe_check(tensors, lambda: F.gelu_forward(x)[0], rng)
    _, cache = F.gelu_forward(x)
    gx = F.gelu_backward(probe / size, cache)
    rep = finite_diff_check(tensors, loss, {"x": gx})
    assert rep.max_rel_error < 1e-3, str(rep)


def test_sigmoid_gradients(rng):
    x = rng.standard_normal((5, 7))
    tensors = {"x": x}
    tensors, loss, probe, size = _probe_check(tensors, lambda: F.sigmoid_forward(x)[0], rng)
    _, cache = F.sigmoid_forward(x)
    gx = F.sigmoid_backward(probe / size, cache)
    rep = finite_diff_check(tensors, loss, {"x": gx})
    assert rep.max_rel_error < 1e-3, str(rep)


def test_sigmoid_range_strict(rng):
    s, _ = F.sigmoid_forward(np.array([-100.0, 0.0, 100.0], dtype=np.float32))
    assert s.min() > 0.0 and s.max() < 1.0


def test_spectral_mix_gradients(rng):
    d, k = 8, 2
    x = rng.standard_normal((2, 4, 4, d))
    p = _spectral_params(rng, d, k)

    def fwd():
        return F.spectral_mix_forward(x, p, lam=0.01, kappa=1.0, n_blocks=k)[0]

    tensors = dict(p)
    tensors["x"] = x
    _, loss, probe, size = _probe_check(tensors, fwd, rng)
    _, cache = F.spectral_mix_forward(x, p, 0.01, 1.0, k)
    gx, grads = F.spectral_mix_backward(probe / size, cache)
    grads["x"] = gx
    rep = finite_diff_check(tensors, loss, grads)
    assert rep.max_rel_error < 1e-3, str(rep)


def test_afno_block_gradients(rng):
    d, k, r = 8, 2, 2
    p = _block_params(rng, d, k, r)
    x = rng.standard_normal((1, 2, 3, d))  # 2x3-token toy grid

    def fwd():
        return F.afno_block_forward(x, p, lam=0.01, kappa=1.0, n_blocks=k)[0]

    tensors = dict(p)
    tensors["x"] = x
    _, loss, probe, size = _probe_check(tensors, fwd, rng)
    _, cache = F.afno_block_forward(x, p, 0.01, 1.0, k)
    gx, grads = F.afno_block_backward(probe / size, cache)
    grads["x"] = gx
    rep = finite_diff_check(tensors, loss, grads)
    assert rep.max_rel_error < 1e-3, str(rep)
