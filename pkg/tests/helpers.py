"""Shared builders for synthetic rolls and analytic models."""

from __future__ import annotations

import numpy as np

from vaecomposer.model import ModelParameters
from vaecomposer.pianoroll import PianoRoll, WindowSpec


def repeating_roll(n_pitches, n_cols, period, seed, density=0.4, pitch_lo=60):
    """A song that repeats one random block, so every window recurs."""
    rng = np.random.default_rng(seed)
    block = (rng.random((n_pitches, period)) < density).astype(np.uint8)
    reps = -(-n_cols // period)
    return PianoRoll(
        pitch_lo=pitch_lo,
        pitch_hi=pitch_lo + n_pitches - 1,
        cells=np.tile(block, (1, reps))[:, :n_cols],
    )


def shift_model(n_pitches: int, spec: WindowSpec) -> ModelParameters:
    """Exact analytic model: output columns j < W-stride reproduce input
    columns j+stride; the final stride columns decode to probability ~0.

    Needs Z = H = D, so keep the dimensions tiny.
    """
    w = spec.window_cols
    stride = spec.stride_cols
    d = n_pitches * w
    alpha, beta_act, gamma = 3.0, 3.0, 40.0
    w1 = np.zeros((d, d))
    for p in range(n_pitches):
        for j in range(w - stride):
            w1[p * w + j + stride, p * w + j] = alpha
    return ModelParameters(
        W1=w1,
        b1=np.zeros(d),
        W_mu=np.eye(d) / np.tanh(alpha),
        b_mu=np.zeros(d),
        W_logvar=np.zeros((d, d)),
        b_logvar=np.zeros(d),
        V1=beta_act * np.eye(d),
        c1=np.zeros(d),
        V_out=gamma * np.eye(d),
        c_out=np.full(d, -gamma * np.tanh(beta_act) / 2.0),
    )
