"""Session fixtures: the two synthetic training runs the acceptance suite scores.

Both corpora are built from 1-second blocks of random cells so that window
boundaries line up with block boundaries and every next-window target is a
function of the current window content (plus one deliberately ambiguous
transition in the overfit corpus).
"""

from __future__ import annotations

import time

import numpy as np
import pytest

from vaecomposer.metrics import sweep
from vaecomposer.model import ModelDims
from vaecomposer.pianoroll import PianoRoll, WindowSpec
from vaecomposer.training import TrainingConfig, split_by_song, train

PITCH_LO = 60
PITCH_HI = 71
N_PITCHES = PITCH_HI - PITCH_LO + 1
BLOCK_COLS = 10  # one second per block


def _block(rng: np.random.Generator, density: float = 0.35) -> np.ndarray:
    return (rng.random((N_PITCHES, BLOCK_COLS)) < density).astype(np.uint8)


def _song(cycle: list[np.ndarray], n_blocks: int) -> PianoRoll:
    cells = np.concatenate([cycle[i % len(cycle)] for i in range(n_blocks)], axis=1)
    return PianoRoll(pitch_lo=PITCH_LO, pitch_hi=PITCH_HI, cells=cells)


@pytest.fixture(scope="session")
def overfit_run():
    """Two 20 s songs built from blocks P, Q, R and S where S is R with six
    cells flipped. The context (P, Q) precedes R half the time and S the
    other half, so those six cells stay genuinely uncertain while everything
    else is memorizable."""
    rng = np.random.default_rng(42)
    p, q, r = _block(rng), _block(rng), _block(rng)
    s = r.copy()
    flat = rng.choice(r.size, size=6, replace=False)
    s.ravel()[flat] ^= 1

    songs = [
        ("a", _song([p, q, r, p, q, s], 20)),
        ("b", _song([p, q, s, p, q, r], 20)),
    ]
    spec = WindowSpec(2)
    dataset = split_by_song(songs, spec, test_fraction=0.2, seed=0)
    config = TrainingConfig(
        window_spec=spec,
        dims=ModelDims(N_PITCHES * spec.window_cols, 64, 16),
        max_steps=2000,
        seed=0,
        beta=0.5,
        learning_rate=1e-3,
        batch_size=64,
    )
    t0 = time.perf_counter()
    params, history = train(config, dataset)
    elapsed = time.perf_counter() - t0
    result = sweep(params, dataset.train_pairs, dataset.test_pairs)
    return {
        "params": params,
        "history": history,
        "dataset": dataset,
        "sweep": result,
        "config": config,
        "spec": spec,
        "train_seconds": elapsed,
    }


@pytest.fixture(scope="session")
def heldout_run():
    """Six songs, each a rotation of the same six-block cycle, one song held
    out. Every block transition is unambiguous and appears in training, so
    both reconstruction and prediction are learnable on the held-out song."""
    rng = np.random.default_rng(7)
    blocks = [_block(rng) for _ in range(6)]
    songs = [
        (f"rot{k}", _song(blocks[k:] + blocks[:k], 20)) for k in range(len(blocks))
    ]
    spec = WindowSpec(2)
    dataset = split_by_song(songs, spec, test_fraction=0.15, seed=1)
    config = TrainingConfig(
        window_spec=spec,
        dims=ModelDims(N_PITCHES * spec.window_cols, 64, 16),
        max_steps=1500,
        seed=1,
        beta=0.5,
        learning_rate=1e-3,
        batch_size=64,
    )
    params, _ = train(config, dataset)
    result = sweep(params, dataset.train_pairs, dataset.test_pairs)
    return {
        "params": params,
        "dataset": dataset,
        "sweep": result,
        "config": config,
        "spec": spec,
    }
