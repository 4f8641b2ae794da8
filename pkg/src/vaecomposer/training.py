"""Dataset splitting, Adam training of the negative ELBO, and checkpoints.

Splits hold out whole songs (never windows of a training song), so test
metrics measure generalization to unseen music. Training keeps float64
master weights for numerical headroom and returns the canonical float32
parameters that the checkpoint format stores.
"""

from __future__ import annotations

import csv
import json
import os
import struct
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    FormatError,
    NonFiniteLoss,
    TooFewSongs,
)
from .model import (
    PARAM_FIELDS,
    ModelDims,
    ModelParameters,
    backward,
    elbo_loss,
    init_params,
)
from .pianoroll import PianoRoll, WindowPair, WindowSpec, make_windows

CHECKPOINT_MAGIC = b"VAEC"
CHECKPOINT_VERSION = 1
FLATTEN_ORDER = "pitch-major"


@dataclass
class TrainingConfig:
    window_spec: WindowSpec
    dims: ModelDims
    max_steps: int
    seed: int
    beta: float = 0.5
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 64
    test_fraction: float = 0.2
    early_stop: bool = False  # stop when test loss stops improving
    patience: int = 10  # evaluations without improvement before stopping

    def __post_init__(self) -> None:
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError(f"test_fraction {self.test_fraction} not in (0, 1)")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_steps < 0:
            raise ValueError("max_steps must be >= 0")


@dataclass
class SplitDataset:
    train_pairs: list[WindowPair]
    test_pairs: list[WindowPair]
    train_songs: set[str]
    test_songs: set[str]

    def __post_init__(self) -> None:
        overlap = self.train_songs & self.test_songs
        if overlap:
            raise ValueError(f"songs on both sides of the split: {sorted(overlap)}")
        for pairs, songs, side in (
            (self.train_pairs, self.train_songs, "train"),
            (self.test_pairs, self.test_songs, "test"),
        ):
            for pair in pairs:
                if pair.source_song not in songs:
                    raise ValueError(
                        f"{side} pair from {pair.source_song!r} not in {side}_songs"
                    )


@dataclass
class StepRecord:
    step: int
    total: float
    recon_bce: float
    kl: float


@dataclass
class TestRecord:
    step: int
    total: float


@dataclass
class TrainingHistory:
    step_records: list[StepRecord] = field(default_factory=list)
    test_records: list[TestRecord] = field(default_factory=list)


@dataclass
class Checkpoint:
    params: ModelParameters
    window_spec: WindowSpec
    pitch_lo: int
    pitch_hi: int
    beta: float
    threshold: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        n_pitches = self.pitch_hi - self.pitch_lo + 1
        expected = n_pitches * self.window_spec.window_cols
        if self.params.dims.input_dim != expected:
            raise DimensionMismatch(
                f"input_dim {self.params.dims.input_dim} != "
                f"{n_pitches} pitches x {self.window_spec.window_cols} columns"
            )


def split_by_song(
    songs: list[tuple[str, PianoRoll]],
    spec: WindowSpec,
    test_fraction: float,
    seed: int,
) -> SplitDataset:
    """Hold out whole songs: after a seeded shuffle, the smallest suffix whose
    column count reaches test_fraction of the total becomes the test side.
    Both sides keep at least one song."""
    if len(songs) < 2:
        raise TooFewSongs(f"need at least 2 songs to split, got {len(songs)}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(songs))
    shuffled = [songs[i] for i in order]
    total_cols = sum(roll.n_cols for _, roll in shuffled)
    target = test_fraction * total_cols

    n_test = 0
    cols = 0
    while n_test < len(shuffled) - 1 and cols < target:
        n_test += 1
        cols += shuffled[len(shuffled) - n_test][1].n_cols
    n_test = max(n_test, 1)

    test_side = shuffled[len(shuffled) - n_test :]
    train_side = shuffled[: len(shuffled) - n_test]
    return SplitDataset(
        train_pairs=[p for sid, roll in train_side for p in make_windows(roll, spec, song=sid)],
        test_pairs=[p for sid, roll in test_side for p in make_windows(roll, spec, song=sid)],
        train_songs={sid for sid, _ in train_side},
        test_songs={sid for sid, _ in test_side},
    )


class Adam:
    """Adam with bias correction; all state kept in float64."""

    def __init__(self, lr: float, beta1: float, beta2: float, eps: float) -> None:
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def update(self, params: ModelParameters, grads: ModelParameters) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name in PARAM_FIELDS:
            g = np.asarray(getattr(grads, name), dtype=np.float64)
            if name not in self.m:
                self.m[name] = np.zeros_like(g)
                self.v[name] = np.zeros_like(g)
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g**2
            p = getattr(params, name)
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def _stack_pairs(pairs: list[WindowPair], input_dim: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.stack([p.x for p in pairs]).astype(np.float64)
    y = np.stack([p.y for p in pairs]).astype(np.float64)
    if x.shape[1] != input_dim:
        raise DimensionMismatch(
            f"window vectors have length {x.shape[1]}, model expects {input_dim}"
        )
    return x, y


def train(
    config: TrainingConfig, dataset: SplitDataset
) -> tuple[ModelParameters, TrainingHistory]:
    """Minibatch Adam on the negative ELBO; deterministic for a fixed seed.

    Test loss is evaluated once per nominal epoch (ceil(n_train/batch) steps)
    with zero noise so evaluations never consume the training RNG stream.
    """
    if not dataset.train_pairs:
        raise ValueError("empty training side")
    x_train, y_train = _stack_pairs(dataset.train_pairs, config.dims.input_dim)
    has_test = bool(dataset.test_pairs)
    if has_test:
        x_test, y_test = _stack_pairs(dataset.test_pairs, config.dims.input_dim)
        zero_noise = np.zeros((x_test.shape[0], config.dims.latent_dim))

    params = init_params(config.dims, config.seed, dtype=np.float64)
    opt = Adam(config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps)
    rng = np.random.default_rng(config.seed)
    history = TrainingHistory()

    n_train = x_train.shape[0]
    steps_per_epoch = max(1, -(-n_train // config.batch_size))
    best_test = np.inf
    stale_evals = 0

    for step in range(1, config.max_steps + 1):
        idx = rng.integers(0, n_train, size=config.batch_size)
        noise = rng.standard_normal((config.batch_size, config.dims.latent_dim))
        loss, cache = elbo_loss(params, x_train[idx], y_train[idx], config.beta, noise)
        if not np.isfinite(loss.total):
            raise NonFiniteLoss(
                f"step {step}: total={loss.total} recon={loss.recon_bce} kl={loss.kl}"
            )
        history.step_records.append(
            StepRecord(step=step, total=loss.total, recon_bce=loss.recon_bce, kl=loss.kl)
        )
        grads = backward(params, x_train[idx], y_train[idx], config.beta, noise, cache)
        opt.update(params, grads)

        if has_test and step % steps_per_epoch == 0:
            test_loss, _ = elbo_loss(params, x_test, y_test, config.beta, zero_noise)
            history.test_records.append(TestRecord(step=step, total=test_loss.total))
            if config.early_stop:
                if test_loss.total < best_test - 1e-9:
                    best_test = test_loss.total
                    stale_evals = 0
                else:
                    stale_evals += 1
                    if stale_evals >= config.patience:
                        break

    return params.astype(np.float32), history


def export_history_csv(history: TrainingHistory, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "total", "recon_bce", "kl"])
        for rec in history.step_records:
            writer.writerow([rec.step, repr(rec.total), repr(rec.recon_bce), repr(rec.kl)])


def export_test_csv(history: TrainingHistory, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "test_total"])
        for rec in history.test_records:
            writer.writerow([rec.step, repr(rec.total)])


def save_checkpoint(path: str, ckpt: Checkpoint) -> None:
    """Atomic write: magic + version + JSON header + float32 tensors."""
    dims = ckpt.params.dims
    header = {
        "dims": {
            "input_dim": dims.input_dim,
            "hidden_dim": dims.hidden_dim,
            "latent_dim": dims.latent_dim,
        },
        "window_seconds": ckpt.window_spec.window_seconds,
        "grid_ms": ckpt.window_spec.grid_ms,
        "stride_cols": ckpt.window_spec.stride_cols,
        "pitch_lo": ckpt.pitch_lo,
        "pitch_hi": ckpt.pitch_hi,
        "beta": ckpt.beta,
        "threshold": ckpt.threshold,
        "flatten_order": FLATTEN_ORDER,
        "tensor_order": list(PARAM_FIELDS),
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "meta": ckpt.meta,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    parts = [CHECKPOINT_MAGIC, bytes([CHECKPOINT_VERSION]), struct.pack("<I", len(blob)), blob]
    params32 = ckpt.params if ckpt.params.W1.dtype == np.float32 else ckpt.params.astype(np.float32)
    for name in PARAM_FIELDS:
        tensor = np.ascontiguousarray(getattr(params32, name), dtype="<f4")
        parts.append(tensor.tobytes())

    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(b"".join(parts))
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def _tensor_shapes(dims: ModelDims) -> dict[str, tuple[int, ...]]:
    d, h, z = dims.input_dim, dims.hidden_dim, dims.latent_dim
    return {
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


def load_checkpoint(path: str) -> Checkpoint:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 9 or data[:4] != CHECKPOINT_MAGIC:
        raise FormatError("not a model checkpoint (bad magic)")
    if data[4] != CHECKPOINT_VERSION:
        raise FormatError(f"unsupported checkpoint version {data[4]}")
    (header_len,) = struct.unpack("<I", data[5:9])
    if len(data) < 9 + header_len:
        raise FormatError("truncated checkpoint header")
    try:
        header = json.loads(data[9 : 9 + header_len].decode("utf-8"))
        dims = ModelDims(
            input_dim=int(header["dims"]["input_dim"]),
            hidden_dim=int(header["dims"]["hidden_dim"]),
            latent_dim=int(header["dims"]["latent_dim"]),
        )
        spec = WindowSpec(
            window_seconds=int(header["window_seconds"]),
            grid_ms=int(header["grid_ms"]),
            stride_cols=int(header["stride_cols"]),
        )
        pitch_lo = int(header["pitch_lo"])
        pitch_hi = int(header["pitch_hi"])
        beta = float(header["beta"])
        threshold = header.get("threshold")
        meta = header.get("meta", {})
        tensor_order = header.get("tensor_order", list(PARAM_FIELDS))
    except (KeyError, TypeError, ValueError, UnicodeDecodeError) as exc:
        raise FormatError(f"bad checkpoint header: {exc}") from exc
    if tensor_order != list(PARAM_FIELDS):
        raise FormatError(f"unknown tensor order {tensor_order}")

    shapes = _tensor_shapes(dims)
    expected_floats = sum(int(np.prod(s)) for s in shapes.values())
    payload = data[9 + header_len :]
    if len(payload) != expected_floats * 4:
        raise FormatError(
            f"payload holds {len(payload)} bytes, header dims require {expected_floats * 4}"
        )
    flat = np.frombuffer(payload, dtype="<f4")
    tensors = {}
    pos = 0
    for name in PARAM_FIELDS:
        size = int(np.prod(shapes[name]))
        tensors[name] = flat[pos : pos + size].reshape(shapes[name]).astype(np.float32)
        pos += size
    try:
        params = ModelParameters(**tensors)
    except ValueError as exc:
        raise FormatError(f"checkpoint tensors invalid: {exc}") from exc
    return Checkpoint(
        params=params,
        window_spec=spec,
        pitch_lo=pitch_lo,
        pitch_hi=pitch_hi,
        beta=beta,
        threshold=None if threshold is None else float(threshold),
        meta=meta,
    )
