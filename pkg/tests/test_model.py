"""VAE core tests: forward anchors, loss identities, gradient checks."""

from __future__ import annotations

import dataclasses
import math

import numpy as np
import pytest

from vaecomposer.errors import DimensionMismatch, StaleCache
from vaecomposer.model import (
    PARAM_FIELDS,
    ForwardCache,
    LatentCode,
    ModelDims,
    ModelParameters,
    backward,
    bce,
    decode,
    elbo_loss,
    encode,
    init_params,
    kl_divergence,
    reparameterize,
)

DIMS = ModelDims(input_dim=4, hidden_dim=8, latent_dim=3)


def zero_params(dims=DIMS):
    d, h, z = dims.input_dim, dims.hidden_dim, dims.latent_dim
    return ModelParameters(
        W1=np.zeros((d, h)),
        b1=np.zeros(h),
        W_mu=np.zeros((h, z)),
        b_mu=np.zeros(z),
        W_logvar=np.zeros((h, z)),
        b_logvar=np.zeros(z),
        V1=np.zeros((z, h)),
        c1=np.zeros(h),
        V_out=np.zeros((h, d)),
        c_out=np.zeros(d),
    )


# --- ModelDims / ModelParameters ---


def test_dims_reject_non_positive():
    with pytest.raises(ValueError):
        ModelDims(input_dim=0, hidden_dim=1, latent_dim=1)


def test_parameters_reject_shape_mismatch():
    p = zero_params()
    with pytest.raises(DimensionMismatch):
        dataclasses.replace(p, b1=np.zeros(5))


def test_parameters_reject_nan():
    p = zero_params()
    w = p.W1.copy()
    w[0, 0] = np.nan
    with pytest.raises(ValueError):
        dataclasses.replace(p, W1=w)


# --- init_params ---


def test_init_deterministic():
    a = init_params(DIMS, seed=11)
    b = init_params(DIMS, seed=11)
    for name in PARAM_FIELDS:
        assert np.array_equal(getattr(a, name), getattr(b, name))
    c = init_params(DIMS, seed=12)
    assert not np.array_equal(a.W1, c.W1)


def test_parameter_count():
    # 32+8 + 24+3 + 24+3 + 24+8 + 32+4 for D=4, H=8, Z=3
    assert init_params(DIMS, seed=0).n_parameters == 162


def test_init_biases_zero_and_weights_bounded():
    p = init_params(DIMS, seed=3)
    for name in ("b1", "b_mu", "b_logvar", "c1", "c_out"):
        assert not getattr(p, name).any()
    bounds = {
        "W1": math.sqrt(6 / (4 + 8)),
        "W_mu": math.sqrt(6 / (8 + 3)),
        "W_logvar": math.sqrt(6 / (8 + 3)),
        "V1": math.sqrt(6 / (3 + 8)),
        "V_out": math.sqrt(6 / (8 + 4)),
    }
    for name, bound in bounds.items():
        w = getattr(p, name)
        assert np.abs(w).max() <= bound
        assert np.abs(w).max() > 0.5 * bound  # actually spread over the range


def test_init_default_dtype_is_float32():
    p = init_params(DIMS, seed=0)
    assert all(getattr(p, name).dtype == np.float32 for name in PARAM_FIELDS)
    p64 = init_params(DIMS, seed=0, dtype=np.float64)
    assert p64.W1.dtype == np.float64


# --- encode ---


def test_encode_zero_params():
    code = encode(zero_params(), np.ones(4))
    assert np.array_equal(code.mu, np.zeros(3))
    assert np.array_equal(code.logvar, np.zeros(3))


def test_encode_hand_arithmetic():
    dims = ModelDims(input_dim=2, hidden_dim=1, latent_dim=1)
    p = zero_params(dims)
    p.W1[:, 0] = [1.0, 1.0]
    p.W_mu[0, 0] = 1.0
    code = encode(p, np.array([1.0, 1.0]))
    assert code.mu[0] == pytest.approx(math.tanh(2.0), abs=1e-12)
    assert code.mu[0] == pytest.approx(0.96403, abs=5e-6)


def test_encode_rejects_wrong_length():
    with pytest.raises(DimensionMismatch):
        encode(zero_params(), np.ones(5))


def test_encode_batch_matches_loop():
    p = init_params(DIMS, seed=5)
    rng = np.random.default_rng(0)
    xs = (rng.random((6, 4)) < 0.5).astype(float)
    batch = encode(p, xs)
    for i, x in enumerate(xs):
        # gemm vs gemv summation order: equal to rounding, not bit-exact
        single = encode(p, x)
        assert np.allclose(batch.mu[i], single.mu, rtol=1e-12, atol=1e-14)
        assert np.allclose(batch.logvar[i], single.logvar, rtol=1e-12, atol=1e-14)


# --- reparameterize ---


def test_reparameterize_zero_noise_returns_mu():
    code = LatentCode(mu=np.array([0.3, -1.2]), logvar=np.array([0.5, 2.0]))
    assert np.array_equal(reparameterize(code, np.zeros(2)), code.mu)


def test_reparameterize_hand_cases():
    z = reparameterize(LatentCode(np.array([1.0]), np.array([0.0])), np.array([2.0]))
    assert z[0] == pytest.approx(3.0, abs=1e-12)
    z = reparameterize(
        LatentCode(np.array([0.0]), np.array([2.0 * math.log(2.0)])), np.array([1.0])
    )
    assert z[0] == pytest.approx(2.0, abs=1e-12)


def test_reparameterize_rejects_wrong_noise_shape():
    with pytest.raises(DimensionMismatch):
        reparameterize(LatentCode(np.zeros(3), np.zeros(3)), np.zeros(2))


# --- decode ---


def test_decode_zero_params_gives_half():
    probs = decode(zero_params(), np.zeros(3))
    assert np.array_equal(probs, np.full(4, 0.5))


def test_decode_monotone_in_output_bias():
    p = zero_params()
    prev = 0.5
    for c in (1.0, 5.0, 10.0):
        q = dataclasses.replace(p, c_out=np.full(4, c))
        prob = decode(q, np.zeros(3))[0]
        assert prob > prev
        prev = prob
    assert prev > 0.9999


def test_decode_strictly_interior_for_finite_inputs():
    rng = np.random.default_rng(8)
    p = init_params(DIMS, seed=2)
    for _ in range(100):
        probs = decode(p, rng.normal(size=3) * 10)
        assert ((probs > 0) & (probs < 1)).all()


def test_decode_rejects_wrong_length():
    with pytest.raises(DimensionMismatch):
        decode(zero_params(), np.zeros(4))


# --- kl_divergence ---


def test_kl_zero_at_prior():
    assert kl_divergence(LatentCode(np.zeros(3), np.zeros(3))) == 0.0


def test_kl_hand_values():
    assert kl_divergence(LatentCode(np.array([1.0]), np.array([0.0]))) == pytest.approx(0.5)
    code = LatentCode(np.array([0.0, 0.0]), np.array([math.log(4.0), 0.0]))
    assert kl_divergence(code) == pytest.approx(0.5 * (4.0 - math.log(4.0) - 1.0))
    assert kl_divergence(code) == pytest.approx(0.80685, abs=5e-6)


def test_kl_nonnegative_with_equality_only_at_prior():
    rng = np.random.default_rng(77)
    for _ in range(1000):
        mu = rng.normal(size=4) * rng.choice([0.0, 1.0])
        logvar = rng.normal(size=4) * rng.choice([0.0, 1.0])
        kl = kl_divergence(LatentCode(mu, logvar))
        assert kl >= 0.0
        if kl <= 1e-12:
            assert np.abs(mu).max() < 1e-6 and np.abs(logvar).max() < 1e-6


# --- bce ---


def test_bce_perfect_prediction_is_tiny():
    y = np.array([0.0, 1.0, 1.0, 0.0])
    assert bce(y, y) <= 4 * 1.1e-7


def test_bce_uniform_half_is_d_ln2():
    for d in (1, 4, 7920):
        y = np.zeros(d)
        y[: d // 2] = 1.0
        assert bce(np.full(d, 0.5), y) == pytest.approx(d * math.log(2.0), rel=1e-12)


def test_bce_hand_value():
    assert bce(np.array([0.9]), np.array([0.0])) == pytest.approx(-math.log(0.1), rel=1e-12)
    assert bce(np.array([0.9]), np.array([0.0])) == pytest.approx(2.30259, abs=5e-6)


def test_bce_rejects_mismatched_shapes():
    with pytest.raises(DimensionMismatch):
        bce(np.full(3, 0.5), np.zeros(4))


# --- elbo_loss ---


def rand_instance(seed, dims=DIMS, dtype=np.float64):
    rng = np.random.default_rng(seed)
    params = init_params(dims, seed=seed + 1000, dtype=dtype)
    x = (rng.random(dims.input_dim) < 0.5).astype(float)
    y = (rng.random(dims.input_dim) < 0.5).astype(float)
    noise = rng.normal(size=dims.latent_dim)
    return params, x, y, noise


def test_elbo_zero_params_anchor():
    p = zero_params()
    x = np.array([1.0, 0.0, 1.0, 1.0])
    loss, _ = elbo_loss(p, x, x[::-1].copy(), beta=0.5, noise=np.zeros(3))
    assert loss.total == pytest.approx(4 * math.log(2.0), rel=1e-9)
    assert loss.kl == 0.0


def test_elbo_beta_zero_is_pure_reconstruction():
    params, x, y, noise = rand_instance(1)
    loss, _ = elbo_loss(params, x, y, beta=0.0, noise=noise)
    assert loss.total == loss.recon_bce


def test_elbo_breakdown_identity():
    params, x, y, noise = rand_instance(2)
    loss, _ = elbo_loss(params, x, y, beta=0.5, noise=noise)
    assert loss.total == loss.recon_bce + 0.5 * loss.kl
    assert loss.kl >= 0


def test_elbo_monotone_in_beta():
    params, x, y, noise = rand_instance(3)
    totals = [elbo_loss(params, x, y, beta=b, noise=noise)[0].total for b in (0.0, 0.25, 0.5, 1.0)]
    assert totals == sorted(totals)


def test_elbo_deterministic_bit_exact():
    params, x, y, _ = rand_instance(4)
    a, _ = elbo_loss(params, x, y, beta=0.5, noise=np.zeros(3))
    b, _ = elbo_loss(params, x, y, beta=0.5, noise=np.zeros(3))
    assert a.total == b.total and a.recon_bce == b.recon_bce and a.kl == b.kl


def test_elbo_uses_target_not_input():
    # the loss must score against y; swapping y changes it, swapping x's role does not
    params, x, _, noise = rand_instance(5)
    y_easy = (decode(params, reparameterize(encode(params, x), noise)) > 0.5).astype(float)
    y_hard = 1.0 - y_easy
    easy, _ = elbo_loss(params, x, y_easy, beta=0.0, noise=noise)
    hard, _ = elbo_loss(params, x, y_hard, beta=0.0, noise=noise)
    assert easy.total < hard.total


def test_elbo_batch_is_mean_of_singles():
    params, _, _, _ = rand_instance(6)
    rng = np.random.default_rng(60)
    xs = (rng.random((5, 4)) < 0.5).astype(float)
    ys = (rng.random((5, 4)) < 0.5).astype(float)
    noises = rng.normal(size=(5, 3))
    batch, _ = elbo_loss(params, xs, ys, beta=0.5, noise=noises)
    singles = [elbo_loss(params, xs[i], ys[i], beta=0.5, noise=noises[i])[0] for i in range(5)]
    assert batch.total == pytest.approx(np.mean([s.total for s in singles]), rel=1e-12)
    assert batch.kl == pytest.approx(np.mean([s.kl for s in singles]), rel=1e-12)


# --- backward ---


def flatten_grads(grads):
    return np.concatenate([getattr(grads, name).ravel() for name in PARAM_FIELDS])


def numeric_gradient(params, x, y, beta, noise, step=1e-4):
    out = []
    for name in PARAM_FIELDS:
        tensor = getattr(params, name)
        grad = np.zeros_like(tensor)
        it = np.nditer(tensor, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = tensor[idx]
            tensor[idx] = orig + step
            hi, _ = elbo_loss(params, x, y, beta, noise)
            tensor[idx] = orig - step
            lo, _ = elbo_loss(params, x, y, beta, noise)
            tensor[idx] = orig
            grad[idx] = (hi.total - lo.total) / (2 * step)
        out.append(grad.ravel())
    return np.concatenate(out)


def test_gradients_match_finite_differences():
    for seed in range(10):
        params, x, y, noise = rand_instance(seed)
        _, cache = elbo_loss(params, x, y, 0.5, noise)
        analytic = flatten_grads(backward(params, x, y, 0.5, noise, cache))
        numeric = numeric_gradient(params, x, y, 0.5, noise)
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-6)
        rel = np.abs(analytic - numeric) / denom
        assert rel.max() <= 1e-4, f"seed {seed}: max rel err {rel.max():.3e}"


def test_input_weight_gradient_zero_for_zero_input():
    params, _, y, noise = rand_instance(20)
    x = np.zeros(4)
    _, cache = elbo_loss(params, x, y, 0.5, noise)
    grads = backward(params, x, y, 0.5, noise, cache)
    assert not grads.W1.any()


def test_kl_bias_gradient_linear_in_beta():
    params, x, y, noise = rand_instance(21)

    def b_mu_grad(beta):
        _, cache = elbo_loss(params, x, y, beta, noise)
        return backward(params, x, y, beta, noise, cache).b_mu

    base = b_mu_grad(0.0)
    one = b_mu_grad(1.0) - base
    two = b_mu_grad(2.0) - base
    assert np.allclose(two, 2.0 * one, rtol=1e-10, atol=1e-12)


def test_backward_rejects_stale_cache():
    params, x, y, noise = rand_instance(22)
    other = ModelDims(input_dim=5, hidden_dim=8, latent_dim=3)
    params5, x5, y5, noise5 = rand_instance(22, dims=other)
    _, cache5 = elbo_loss(params5, x5, y5, 0.5, noise5)
    with pytest.raises(StaleCache):
        backward(params, x, y, 0.5, noise, cache5)
    _, cache = elbo_loss(params, x, y, 0.5, noise)
    with pytest.raises(StaleCache):
        backward(params, x, y, 0.25, noise, cache)  # beta changed


def test_batch_gradient_is_mean_of_singles():
    params, _, _, _ = rand_instance(23)
    rng = np.random.default_rng(23)
    xs = (rng.random((4, 4)) < 0.5).astype(float)
    ys = (rng.random((4, 4)) < 0.5).astype(float)
    noises = rng.normal(size=(4, 3))
    _, cache = elbo_loss(params, xs, ys, 0.5, noises)
    batch = flatten_grads(backward(params, xs, ys, 0.5, noises, cache))
    singles = []
    for i in range(4):
        _, c = elbo_loss(params, xs[i], ys[i], 0.5, noises[i])
        singles.append(flatten_grads(backward(params, xs[i], ys[i], 0.5, noises[i], c)))
    assert np.allclose(batch, np.mean(singles, axis=0), rtol=1e-12, atol=1e-15)


def test_forward_backward_at_full_scale_dims():
    # D = 88 * 90 = 7920, H = 750, Z = 200 must run one step comfortably
    dims = ModelDims(input_dim=7920, hidden_dim=750, latent_dim=200)
    params = init_params(dims, seed=0)
    rng = np.random.default_rng(0)
    x = (rng.random(7920) < 0.1).astype(float)
    y = (rng.random(7920) < 0.1).astype(float)
    noise = rng.normal(size=200)
    loss, cache = elbo_loss(params, x, y, 0.5, noise)
    grads = backward(params, x, y, 0.5, noise, cache)
    assert np.isfinite(loss.total)
    assert grads.W1.shape == (7920, 750)
