"""Variational autoencoder core: forward passes, loss, and analytic gradients.

The model maps a flattened binary window x through a one-hidden-layer
encoder to a Gaussian posterior (mu, logvar), samples z by the
reparameterization trick, and decodes z through a symmetric one-hidden-layer
MLP to per-cell Bernoulli probabilities for the TARGET window y (the input
advanced by the prediction stride, not x itself). Training minimizes
BCE(probs, y) + beta * KL(posterior || standard normal).

All arithmetic runs in float64 regardless of the stored parameter dtype.
Every operation accepts a single example (1-d x) or a batch (2-d x, rows
are examples); batch losses are means over the batch.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .errors import DimensionMismatch, StaleCache

PROB_EPS = 1e-7  # clamp before logs so BCE never hits -inf

PARAM_FIELDS = (
    "W1",
    "b1",
    "W_mu",
    "b_mu",
    "W_logvar",
    "b_logvar",
    "V1",
    "c1",
    "V_out",
    "c_out",
)


@dataclass(frozen=True)
class ModelDims:
    input_dim: int
    hidden_dim: int
    latent_dim: int

    def __post_init__(self) -> None:
        for name in ("input_dim", "hidden_dim", "latent_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass
class ModelParameters:
    """Ten tensors: encoder (W1, b1, W_mu, b_mu, W_logvar, b_logvar),
    decoder (V1, c1, V_out, c_out). Also used as the gradient container."""

    W1: np.ndarray  # (D, H)
    b1: np.ndarray  # (H,)
    W_mu: np.ndarray  # (H, Z)
    b_mu: np.ndarray  # (Z,)
    W_logvar: np.ndarray  # (H, Z)
    b_logvar: np.ndarray  # (Z,)
    V1: np.ndarray  # (Z, H)
    c1: np.ndarray  # (H,)
    V_out: np.ndarray  # (H, D)
    c_out: np.ndarray  # (D,)

    def __post_init__(self) -> None:
        d, h = self.W1.shape
        z = self.W_mu.shape[1]
        expected = {
            "W1": (d, h),
            "b1": (h,),
            "W_mu": (h, z),
            "b_mu": (z,),
            "W_logvar": (h, z),
            "b_logvar": (z,),
            "V1": (z, h),
            "c1": (h,),
            "V_out": (h, d),
            "c_out": (d,),
        }
        for name in PARAM_FIELDS:
            tensor = getattr(self, name)
            if tensor.shape != expected[name]:
                raise DimensionMismatch(
                    f"{name} has shape {tensor.shape}, expected {expected[name]}"
                )
            if not np.isfinite(tensor).all():
                raise ValueError(f"{name} contains non-finite entries")

    @property
    def dims(self) -> ModelDims:
        return ModelDims(
            input_dim=self.W1.shape[0],
            hidden_dim=self.W1.shape[1],
            latent_dim=self.W_mu.shape[1],
        )

    @property
    def n_parameters(self) -> int:
        return sum(getattr(self, f.name).size for f in fields(self))

    def astype(self, dtype) -> "ModelParameters":
        return ModelParameters(
            **{name: getattr(self, name).astype(dtype) for name in PARAM_FIELDS}
        )

    def copy(self) -> "ModelParameters":
        return ModelParameters(
            **{name: getattr(self, name).copy() for name in PARAM_FIELDS}
        )


@dataclass
class LatentCode:
    mu: np.ndarray
    logvar: np.ndarray  # log of sigma^2


@dataclass
class LossBreakdown:
    total: float
    recon_bce: float
    kl: float
    beta: float


@dataclass
class ForwardCache:
    """Intermediate activations elbo_loss saves for the backward pass."""

    x: np.ndarray
    y: np.ndarray
    noise: np.ndarray
    h: np.ndarray
    mu: np.ndarray
    logvar: np.ndarray
    z: np.ndarray
    g: np.ndarray
    probs: np.ndarray  # clamped to [PROB_EPS, 1 - PROB_EPS]
    clamped: np.ndarray  # bool mask where the clamp was active
    beta: float
    batched: bool


def init_params(dims: ModelDims, seed: int, dtype=np.float32) -> ModelParameters:
    """Glorot-uniform weights (bound sqrt(6 / (fan_in + fan_out))), zero biases."""
    rng = np.random.default_rng(seed)
    d, h, z = dims.input_dim, dims.hidden_dim, dims.latent_dim

    def glorot(fan_in: int, fan_out: int) -> np.ndarray:
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype)

    return ModelParameters(
        W1=glorot(d, h),
        b1=np.zeros(h, dtype=dtype),
        W_mu=glorot(h, z),
        b_mu=np.zeros(z, dtype=dtype),
        W_logvar=glorot(h, z),
        b_logvar=np.zeros(z, dtype=dtype),
        V1=glorot(z, h),
        c1=np.zeros(h, dtype=dtype),
        V_out=glorot(h, d),
        c_out=np.zeros(d, dtype=dtype),
    )


def _f64(a) -> np.ndarray:
    return np.asarray(a, dtype=np.float64)


def _check_last_dim(v: np.ndarray, expected: int, what: str) -> None:
    if v.ndim not in (1, 2) or v.shape[-1] != expected:
        raise DimensionMismatch(f"{what} has shape {v.shape}, expected last dim {expected}")


def encode(params: ModelParameters, x: np.ndarray) -> LatentCode:
    """h = tanh(x W1 + b1); mu = h W_mu + b_mu; logvar = h W_logvar + b_logvar."""
    x = _f64(x)
    _check_last_dim(x, params.W1.shape[0], "x")
    h = np.tanh(x @ _f64(params.W1) + _f64(params.b1))
    mu = h @ _f64(params.W_mu) + _f64(params.b_mu)
    logvar = h @ _f64(params.W_logvar) + _f64(params.b_logvar)
    return LatentCode(mu=mu, logvar=logvar)


def reparameterize(code: LatentCode, noise: np.ndarray) -> np.ndarray:
    """z = mu + exp(logvar / 2) * noise; deterministic given the noise draw."""
    noise = _f64(noise)
    mu = _f64(code.mu)
    logvar = _f64(code.logvar)
    if noise.shape != mu.shape:
        raise DimensionMismatch(f"noise shape {noise.shape} != mu shape {mu.shape}")
    return mu + np.exp(logvar / 2.0) * noise


def decode(params: ModelParameters, z: np.ndarray) -> np.ndarray:
    """g = tanh(z V1 + c1); probs = sigmoid(g V_out + c_out)."""
    z = _f64(z)
    _check_last_dim(z, params.V1.shape[0], "z")
    g = np.tanh(z @ _f64(params.V1) + _f64(params.c1))
    logits = g @ _f64(params.V_out) + _f64(params.c_out)
    return _sigmoid(logits)


def _sigmoid(t: np.ndarray) -> np.ndarray:
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def kl_divergence(code: LatentCode) -> float | np.ndarray:
    """0.5 * sum(mu^2 + exp(logvar) - logvar - 1); per example when batched."""
    mu = _f64(code.mu)
    logvar = _f64(code.logvar)
    per_dim = 0.5 * (mu**2 + np.exp(logvar) - logvar - 1.0)
    total = per_dim.sum(axis=-1)
    return float(total) if total.ndim == 0 else total


def bce(probs: np.ndarray, y: np.ndarray) -> float | np.ndarray:
    """-sum(y ln p + (1-y) ln(1-p)) with p clamped to [1e-7, 1 - 1e-7]."""
    probs = _f64(probs)
    y = _f64(y)
    if probs.shape != y.shape:
        raise DimensionMismatch(f"probs shape {probs.shape} != y shape {y.shape}")
    p = np.clip(probs, PROB_EPS, 1.0 - PROB_EPS)
    per_cell = -(y * np.log(p) + (1.0 - y) * np.log1p(-p))
    total = per_cell.sum(axis=-1)
    return float(total) if total.ndim == 0 else total


def elbo_loss(
    params: ModelParameters,
    x: np.ndarray,
    y: np.ndarray,
    beta: float,
    noise: np.ndarray,
) -> tuple[LossBreakdown, ForwardCache]:
    """Negative ELBO with target y: BCE(decode(z), y) + beta * KL.

    Batched inputs yield the mean loss over the batch.
    """
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    x = _f64(x)
    y = _f64(y)
    noise = _f64(noise)
    d = params.W1.shape[0]
    _check_last_dim(x, d, "x")
    if y.shape != x.shape:
        raise DimensionMismatch(f"y shape {y.shape} != x shape {x.shape}")
    batched = x.ndim == 2

    h = np.tanh(x @ _f64(params.W1) + _f64(params.b1))
    mu = h @ _f64(params.W_mu) + _f64(params.b_mu)
    logvar = h @ _f64(params.W_logvar) + _f64(params.b_logvar)
    if noise.shape != mu.shape:
        raise DimensionMismatch(f"noise shape {noise.shape} != mu shape {mu.shape}")
    z = mu + np.exp(logvar / 2.0) * noise
    g = np.tanh(z @ _f64(params.V1) + _f64(params.c1))
    raw = _sigmoid(g @ _f64(params.V_out) + _f64(params.c_out))
    clamped = (raw < PROB_EPS) | (raw > 1.0 - PROB_EPS)
    probs = np.clip(raw, PROB_EPS, 1.0 - PROB_EPS)

    recon = -(y * np.log(probs) + (1.0 - y) * np.log1p(-probs)).sum(axis=-1)
    kl = 0.5 * (mu**2 + np.exp(logvar) - logvar - 1.0).sum(axis=-1)
    if batched:
        recon = recon.mean()
        kl = kl.mean()
    recon_f = float(recon)
    kl_f = float(kl)
    breakdown = LossBreakdown(
        total=recon_f + beta * kl_f, recon_bce=recon_f, kl=kl_f, beta=beta
    )
    cache = ForwardCache(
        x=x, y=y, noise=noise, h=h, mu=mu, logvar=logvar, z=z, g=g,
        probs=probs, clamped=clamped, beta=beta, batched=batched,
    )
    return breakdown, cache


def backward(
    params: ModelParameters,
    x: np.ndarray,
    y: np.ndarray,
    beta: float,
    noise: np.ndarray,
    cache: ForwardCache,
) -> ModelParameters:
    """Exact gradients of the elbo_loss total for every parameter tensor.

    The cache must come from elbo_loss on the same arguments; a stale cache
    whose shapes disagree with params raises StaleCache.
    """
    d, hid = params.W1.shape
    lat = params.W_mu.shape[1]
    if (
        cache.x.shape[-1] != d
        or cache.h.shape[-1] != hid
        or cache.mu.shape[-1] != lat
        or cache.x.shape != np.shape(x)
        or cache.beta != beta
    ):
        raise StaleCache("forward cache does not match params and arguments")

    x64 = cache.x if cache.batched else cache.x[None, :]
    y64 = (cache.y if cache.batched else cache.y[None, :])
    noise64 = cache.noise if cache.batched else cache.noise[None, :]
    h = cache.h if cache.batched else cache.h[None, :]
    mu = cache.mu if cache.batched else cache.mu[None, :]
    logvar = cache.logvar if cache.batched else cache.logvar[None, :]
    z = cache.z if cache.batched else cache.z[None, :]
    g = cache.g if cache.batched else cache.g[None, :]
    probs = cache.probs if cache.batched else cache.probs[None, :]
    clamp = cache.clamped if cache.batched else cache.clamped[None, :]
    n = x64.shape[0]

    # reconstruction path; clamp freezes the probability, so its grad is 0
    d_logits = np.where(clamp, 0.0, probs - y64) / n
    grad_V_out = g.T @ d_logits
    grad_c_out = d_logits.sum(axis=0)
    d_g = d_logits @ _f64(params.V_out).T
    d_a2 = d_g * (1.0 - g**2)
    grad_V1 = z.T @ d_a2
    grad_c1 = d_a2.sum(axis=0)
    d_z = d_a2 @ _f64(params.V1).T

    # through the reparameterization, plus the KL term's own gradients
    sigma = np.exp(logvar / 2.0)
    d_mu = d_z + beta * mu / n
    d_logvar = d_z * noise64 * sigma * 0.5 + beta * (np.exp(logvar) - 1.0) * 0.5 / n
    grad_W_mu = h.T @ d_mu
    grad_b_mu = d_mu.sum(axis=0)
    grad_W_logvar = h.T @ d_logvar
    grad_b_logvar = d_logvar.sum(axis=0)

    d_h = d_mu @ _f64(params.W_mu).T + d_logvar @ _f64(params.W_logvar).T
    d_a1 = d_h * (1.0 - h**2)
    grad_W1 = x64.T @ d_a1
    grad_b1 = d_a1.sum(axis=0)

    return ModelParameters(
        W1=grad_W1,
        b1=grad_b1,
        W_mu=grad_W_mu,
        b_mu=grad_b_mu,
        W_logvar=grad_W_logvar,
        b_logvar=grad_b_logvar,
        V1=grad_V1,
        c1=grad_c1,
        V_out=grad_V_out,
        c_out=grad_c_out,
    )
