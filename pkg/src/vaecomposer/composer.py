"""Autoregressive generation: extend a window stride columns at a time.

Each step encodes the current window to mu, adds an optional steering delta,
decodes, thresholds, and appends the final stride columns as new music. The
next input window slides forward over (seed and generated columns), so its
first W - stride columns always re-state music already committed to the
roll. Generation is deterministic: z = mu, no sampling, explicit deltas.

An experimental feedback mode re-feeds raw decoder probabilities instead of
thresholded cells; the accumulated roll itself stays binary either way.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, IndexOutOfRange
from .model import LatentCode, ModelParameters, decode, encode
from .pianoroll import PianoRoll, WindowSpec

FEEDBACK_MODES = ("binary", "probs")


@dataclass
class CompositionState:
    """Single-owner loop state; the current window is derived, never stored."""

    spec: WindowSpec
    pitch_lo: int
    pitch_hi: int
    seed_cols: np.ndarray  # (n_pitches, W) uint8
    roll_cols: np.ndarray  # (n_pitches, k) uint8, thresholded new columns
    feed_cols: np.ndarray  # (n_pitches, k) float64, feedback signal
    last_latent: LatentCode | None = None
    step_count: int = 0
    feedback: str = "binary"

    @property
    def n_pitches(self) -> int:
        return self.pitch_hi - self.pitch_lo + 1

    @property
    def current_window(self) -> np.ndarray:
        """Last W columns of (seed || generated), flattened pitch-major."""
        w = self.spec.window_cols
        joined = np.concatenate([self.seed_cols.astype(np.float64), self.feed_cols], axis=1)
        return joined[:, -w:].reshape(-1)

    @property
    def generated_roll(self) -> PianoRoll | None:
        if self.roll_cols.shape[1] == 0:
            return None
        return PianoRoll(
            pitch_lo=self.pitch_lo, pitch_hi=self.pitch_hi, cells=self.roll_cols.copy()
        )

    def full_roll(self) -> PianoRoll:
        """Seed columns followed by every generated column."""
        cells = np.concatenate([self.seed_cols, self.roll_cols], axis=1)
        return PianoRoll(pitch_lo=self.pitch_lo, pitch_hi=self.pitch_hi, cells=cells)


def new_state(
    spec: WindowSpec,
    pitch_lo: int,
    pitch_hi: int,
    seed_window: np.ndarray,
    feedback: str = "binary",
) -> CompositionState:
    if feedback not in FEEDBACK_MODES:
        raise ValueError(f"feedback must be one of {FEEDBACK_MODES}")
    n_pitches = pitch_hi - pitch_lo + 1
    w = spec.window_cols
    seed_window = np.asarray(seed_window)
    if seed_window.size != n_pitches * w:
        raise DimensionMismatch(
            f"seed window has {seed_window.size} cells, expected {n_pitches}x{w}"
        )
    if not np.isin(seed_window, (0, 1)).all():
        raise ValueError("seed window cells must all be 0 or 1")
    return CompositionState(
        spec=spec,
        pitch_lo=pitch_lo,
        pitch_hi=pitch_hi,
        seed_cols=seed_window.reshape(n_pitches, w).astype(np.uint8),
        roll_cols=np.zeros((n_pitches, 0), dtype=np.uint8),
        feed_cols=np.zeros((n_pitches, 0), dtype=np.float64),
        feedback=feedback,
    )


def _window_probs(
    params: ModelParameters, window: np.ndarray, latent_delta: np.ndarray | None
) -> tuple[np.ndarray, LatentCode]:
    """Decoder probabilities for one window with z = mu + delta."""
    code = encode(params, window)
    z = code.mu
    if latent_delta is not None:
        latent_delta = np.asarray(latent_delta, dtype=np.float64)
        if latent_delta.shape != z.shape:
            raise DimensionMismatch(
                f"latent delta shape {latent_delta.shape} != latent shape {z.shape}"
            )
        z = z + latent_delta
    return decode(params, z), LatentCode(mu=z, logvar=code.logvar)


def continue_window(
    params: ModelParameters,
    spec: WindowSpec,
    window: np.ndarray,
    theta: float,
    latent_delta: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, LatentCode]:
    """One loop step: returns (thresholded output window, its last stride
    columns as an n_pitches x stride matrix, the latent code used)."""
    window = np.asarray(window, dtype=np.float64)
    w = spec.window_cols
    if window.ndim != 1 or window.size != params.W1.shape[0] or window.size % w != 0:
        raise DimensionMismatch(
            f"window has {window.size} cells, model expects {params.W1.shape[0]}"
        )
    probs, latent = _window_probs(params, window, latent_delta)
    next_window = (probs > theta).astype(np.uint8)
    n_pitches = window.size // w
    new_cols = next_window.reshape(n_pitches, w)[:, w - spec.stride_cols :]
    return next_window, new_cols.copy(), latent


def step_state(
    params: ModelParameters,
    state: CompositionState,
    theta: float,
    latent_delta: np.ndarray | None = None,
) -> np.ndarray:
    """Advance the state by one step; returns the new binary columns."""
    probs, latent = _window_probs(params, state.current_window, latent_delta)
    w = state.spec.window_cols
    stride = state.spec.stride_cols
    probs2 = probs.reshape(state.n_pitches, w)
    new_bin = (probs2[:, w - stride :] > theta).astype(np.uint8)
    new_feed = new_bin.astype(np.float64) if state.feedback == "binary" else probs2[:, w - stride :]
    state.roll_cols = np.concatenate([state.roll_cols, new_bin], axis=1)
    state.feed_cols = np.concatenate([state.feed_cols, new_feed], axis=1)
    state.last_latent = latent
    state.step_count += 1
    return new_bin


def generate(
    params: ModelParameters,
    spec: WindowSpec,
    seed_window: np.ndarray,
    seconds: int,
    theta: float,
    pitch_lo: int,
    pitch_hi: int,
    deltas: list[np.ndarray | None] | None = None,
    feedback: str = "binary",
) -> PianoRoll:
    """Run the loop until seconds * 10 new columns exist; returns seed + new."""
    if seconds < 1:
        raise ValueError("seconds must be >= 1")
    n_steps = seconds * 10 // spec.stride_cols
    if deltas is not None and len(deltas) != n_steps:
        raise ValueError(f"need {n_steps} per-step deltas, got {len(deltas)}")
    state = new_state(spec, pitch_lo, pitch_hi, seed_window, feedback=feedback)
    for i in range(n_steps):
        step_state(params, state, theta, None if deltas is None else deltas[i])
    return state.full_roll()


def random_seed_window(
    params: ModelParameters, seed: int | None, theta: float
) -> np.ndarray:
    """Threshold the decoding of a seeded standard-normal latent draw.

    seed=None decodes the latent-space origin z = 0 instead of a draw.
    """
    z_dim = params.V1.shape[0]
    if seed is None:
        z = np.zeros(z_dim)
    else:
        z = np.random.default_rng(seed).standard_normal(z_dim)
    return (decode(params, z) > theta).astype(np.uint8)


def perturb_latent(latent: LatentCode, dim: int, delta: float) -> np.ndarray:
    """One-hot steering delta; combine several by adding the vectors."""
    z_dim = np.asarray(latent.mu).shape[-1]
    if not 0 <= dim < z_dim:
        raise IndexOutOfRange(f"latent dim {dim} outside [0, {z_dim})")
    out = np.zeros(z_dim)
    out[dim] = delta
    return out
