"""Train a small checkpoint on a memorizable block corpus for the UI tests.

Two 20-second songs built from four 1-second blocks; the model overfits them
in a couple of seconds, so generated continuations have real structure.

Usage: python3 scripts/make_demo_checkpoint.py OUT.vaec [STEPS]
"""

import sys

import numpy as np

from vaecomposer.metrics import sweep
from vaecomposer.model import ModelDims
from vaecomposer.pianoroll import PianoRoll, WindowSpec
from vaecomposer.training import Checkpoint, TrainingConfig, save_checkpoint, split_by_song, train

PITCH_LO, PITCH_HI = 60, 71
N_PITCHES = PITCH_HI - PITCH_LO + 1


def block(rng):
    return (rng.random((N_PITCHES, 10)) < 0.35).astype(np.uint8)


def song(cycle, n_blocks):
    cells = np.concatenate([cycle[i % len(cycle)] for i in range(n_blocks)], axis=1)
    return PianoRoll(pitch_lo=PITCH_LO, pitch_hi=PITCH_HI, cells=cells)


def main() -> int:
    out = sys.argv[1]
    steps = int(sys.argv[2]) if len(sys.argv) > 2 else 2000

    rng = np.random.default_rng(42)
    p, q, r = block(rng), block(rng), block(rng)
    s = r.copy()
    s.ravel()[rng.choice(r.size, size=6, replace=False)] ^= 1
    songs = [
        ("a", song([p, q, r, p, q, s], 20)),
        ("b", song([p, q, s, p, q, r], 20)),
    ]

    spec = WindowSpec(2)
    dataset = split_by_song(songs, spec, test_fraction=0.2, seed=0)
    config = TrainingConfig(
        window_spec=spec,
        dims=ModelDims(N_PITCHES * spec.window_cols, 64, 16),
        max_steps=steps,
        seed=0,
        beta=0.5,
        learning_rate=1e-3,
        batch_size=64,
    )
    params, _ = train(config, dataset)
    result = sweep(params, dataset.train_pairs, dataset.test_pairs)
    save_checkpoint(
        out,
        Checkpoint(
            params=params,
            window_spec=spec,
            pitch_lo=PITCH_LO,
            pitch_hi=PITCH_HI,
            beta=0.5,
            threshold=result.best_threshold,
            meta={"steps": steps, "corpus": "demo blocks"},
        ),
    )
    print(f"checkpoint -> {out} (threshold {result.best_threshold})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
