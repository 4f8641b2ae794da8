"""Operator commands: ingest corpora, train, sweep, grid-search, evaluate, generate, serve.

Every command writes a `<command>_config.txt` snapshot next to its outputs, so
any run can be reproduced with `--config <snapshot>`. Flags override config
values. Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .composer import generate, random_seed_window
from .errors import (
    DimensionMismatch,
    EmptyAfterQuantization,
    FormatError,
    MalformedFile,
    NonFiniteLoss,
    TooFewSongs,
    TooShort,
    VaecomposerError,
)
from .metrics import (
    apply_threshold,
    confusion,
    metrics,
    per_step_metrics,
    predict_probs,
    split_metrics,
    stack_targets,
    sweep,
    write_metrics_csv,
)
from .midi import parse_midi, write_midi
from .model import ModelDims
from .pianoroll import (
    PianoRoll,
    WindowSpec,
    notes_to_roll,
    roll_from_text,
    roll_to_notes,
    roll_to_text,
)
from .training import (
    Checkpoint,
    TrainingConfig,
    export_history_csv,
    export_test_csv,
    load_checkpoint,
    save_checkpoint,
    split_by_song,
    train,
)

FALLBACK_THRESHOLD = 0.41
GRID_DEFAULT_WINDOW_SEC = "1,2,3,4,5,6,7,8,9,10"
GRID_DEFAULT_HIDDEN = "500,750"
GRID_DEFAULT_LATENT = "100,200"


class UsageError(VaecomposerError):
    """Bad invocation: unknown key, malformed value, missing required flag."""


@dataclass
class RunConfig:
    """Everything a command needs, serializable as key = value lines.

    window_sec, hidden, and latent are kept as strings because the grid
    command reads them as comma lists while the others need one integer.
    """

    corpus: str = ""
    out: str = "runs"
    checkpoint: str = ""
    pitch_lo: int = 21
    pitch_hi: int = 108
    window_sec: str = "2"
    hidden: str = "500"
    latent: str = "100"
    beta: float = 0.5
    threshold: float | None = None
    threshold_grid: str = ""
    steps: int = 2000
    batch: int = 64
    test_fraction: float = 0.2
    seed: int = 0
    jobs: int = 1
    seconds: int = 10
    port: int = 8000
    deterministic: bool = True


def _parse_bool(value: str) -> bool:
    lowered = value.lower()
    if lowered in ("1", "true", "yes"):
        return True
    if lowered in ("0", "false", "no", ""):
        return False
    raise ValueError(value)


_CONVERTERS = {
    "corpus": str,
    "out": str,
    "checkpoint": str,
    "pitch_lo": int,
    "pitch_hi": int,
    "window_sec": str,
    "hidden": str,
    "latent": str,
    "beta": float,
    "threshold": lambda s: None if s == "" else float(s),
    "threshold_grid": str,
    "steps": int,
    "batch": int,
    "test_fraction": float,
    "seed": int,
    "jobs": int,
    "seconds": int,
    "port": int,
    "deterministic": _parse_bool,
}


def config_to_text(cfg: RunConfig, command: str = "") -> str:
    lines = [f"# vaecomposer {command}".rstrip()]
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        lines.append(f"{f.name} = {'' if value is None else value}")
    return "\n".join(lines) + "\n"


def config_from_text(text: str) -> tuple[RunConfig, set[str]]:
    """Parse key = value lines; '#' comments and blank lines are skipped."""
    cfg = RunConfig()
    explicit: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, eq, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not eq or not key:
            raise UsageError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        converter = _CONVERTERS.get(key)
        if converter is None:
            raise UsageError(f"config line {lineno}: unknown key {key!r}")
        try:
            setattr(cfg, key, converter(value))
        except ValueError:
            raise UsageError(f"config line {lineno}: bad value {value!r} for {key!r}")
        explicit.add(key)
    return cfg, explicit


def _int_field(cfg_value: str, flag: str) -> int:
    try:
        return int(cfg_value)
    except ValueError:
        raise UsageError(f"--{flag} expects one integer, got {cfg_value!r}")


def _int_list(cfg_value: str, flag: str) -> list[int]:
    try:
        items = [int(tok) for tok in cfg_value.split(",") if tok.strip()]
    except ValueError:
        raise UsageError(f"--{flag} expects comma-separated integers, got {cfg_value!r}")
    if not items:
        raise UsageError(f"--{flag} list is empty")
    return items


def _threshold_grid(cfg: RunConfig) -> np.ndarray | None:
    if not cfg.threshold_grid:
        return None
    try:
        values = [float(tok) for tok in cfg.threshold_grid.split(",") if tok.strip()]
    except ValueError:
        raise UsageError(f"--threshold-grid expects comma-separated floats, got {cfg.threshold_grid!r}")
    if not values:
        raise UsageError("--threshold-grid list is empty")
    return np.asarray(values, dtype=np.float64)


def _require(cfg: RunConfig, name: str) -> str:
    value = getattr(cfg, name)
    if not value:
        raise UsageError(f"--{name} is required for this command")
    return value


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _snapshot(out: Path, command: str, cfg: RunConfig) -> None:
    (out / f"{command}_config.txt").write_text(config_to_text(cfg, command), encoding="utf-8")


# --- corpus loading ---


def load_corpus(
    cfg: RunConfig, band: tuple[int, int] | None = None
) -> tuple[list[tuple[str, PianoRoll]], tuple[int, int]]:
    """Songs from a directory of .mid/.midi files or ingested .txt rolls.

    Unreadable files are skipped with a note on stderr. Returns the songs and
    the single pitch band they share; mixed bands are a data error.
    """
    root = Path(_require(cfg, "corpus"))
    if not root.is_dir():
        raise NotADirectoryError(f"corpus directory {root} not found")
    lo, hi = band if band is not None else (cfg.pitch_lo, cfg.pitch_hi)
    songs: list[tuple[str, PianoRoll]] = []
    for path in sorted(root.iterdir()):
        suffix = path.suffix.lower()
        try:
            if suffix in (".mid", ".midi"):
                roll = notes_to_roll(parse_midi(path.read_bytes()), lo, hi)
            elif suffix == ".txt":
                roll = roll_from_text(path.read_text(encoding="utf-8"))
            else:
                continue
        except (MalformedFile, EmptyAfterQuantization) as exc:
            print(f"skipped {path.name}: {exc}", file=sys.stderr)
            continue
        songs.append((path.stem, roll))
    if not songs:
        raise TooFewSongs(f"no usable songs in {root}")
    bands = {(roll.pitch_lo, roll.pitch_hi) for _, roll in songs}
    if len(bands) > 1:
        raise DimensionMismatch(f"corpus mixes pitch bands {sorted(bands)}")
    return songs, bands.pop()


# --- shared train/sweep pipeline ---


def _train_once(
    songs: list[tuple[str, PianoRoll]],
    band: tuple[int, int],
    window_sec: int,
    hidden: int,
    latent: int,
    cfg: RunConfig,
):
    spec = WindowSpec(window_seconds=window_sec)
    dataset = split_by_song(songs, spec, cfg.test_fraction, cfg.seed)
    n_pitches = band[1] - band[0] + 1
    training = TrainingConfig(
        window_spec=spec,
        dims=ModelDims(n_pitches * spec.window_cols, hidden, latent),
        max_steps=cfg.steps,
        seed=cfg.seed,
        beta=cfg.beta,
        batch_size=cfg.batch,
        test_fraction=cfg.test_fraction,
    )
    params, history = train(training, dataset)
    result = sweep(params, dataset.train_pairs, dataset.test_pairs, _threshold_grid(cfg))
    checkpoint = Checkpoint(
        params=params,
        window_spec=spec,
        pitch_lo=band[0],
        pitch_hi=band[1],
        beta=cfg.beta,
        threshold=result.best_threshold,
        meta={"seed": cfg.seed, "steps": cfg.steps},
    )
    return checkpoint, history, result, dataset


def _best_entry(result):
    return next(e for e in result.entries if e.threshold == result.best_threshold)


def _write_sweep_csv(path: Path, result) -> None:
    rows = []
    for entry in result.entries:
        rows.append(("train", "full", entry.train))
        rows.append(("test", "full", entry.test))
    write_metrics_csv(str(path), rows)


def _full_report(params, pairs, theta):
    pred = apply_threshold(predict_probs(params, pairs), theta)
    return metrics(confusion(pred, stack_targets(pairs)), theta)


def _resolve_theta(cfg: RunConfig, checkpoint: Checkpoint, result=None) -> float:
    if cfg.threshold is not None:
        return cfg.threshold
    if checkpoint.threshold is not None:
        return checkpoint.threshold
    if result is not None:
        return result.best_threshold
    return FALLBACK_THRESHOLD


# --- plotting (SVG, lazy import) ---


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _plot_sweep(path: Path, result) -> None:
    plt = _plt()
    thetas = [e.threshold for e in result.entries]
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
    for ax, side in zip(axes, ("train", "test")):
        for name in ("acc", "sen", "ppv", "f1"):
            ax.plot(thetas, [getattr(getattr(e, side), name) for e in result.entries], label=name)
        ax.axvline(result.best_threshold, color="gray", linestyle=":", linewidth=1)
        ax.set_title(side)
        ax.set_xlabel("threshold")
        ax.set_ylim(0, 1.02)
    axes[0].set_ylabel("metric")
    axes[0].legend(loc="lower left", fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _plot_segments(path: Path, rows) -> None:
    plt = _plt()
    labels = [f"{side}/{segment}" for side, segment, _ in rows]
    values = [report.f1 for _, _, report in rows]
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.bar(range(len(rows)), values, color="#4878a8")
    ax.set_xticks(range(len(rows)), labels, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("F1")
    ax.set_ylim(0, 1.02)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _plot_per_step(path: Path, step_rows) -> None:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(7, 4))
    sides = sorted({side for side, _, _ in step_rows})
    for side in sides:
        ys = [report.f1 for s, _, report in step_rows if s == side]
        ax.plot(range(1, len(ys) + 1), ys, marker="o", label=side)
    ax.set_xlabel("predicted column (100 ms steps ahead)")
    ax.set_ylabel("F1")
    ax.set_ylim(0, 1.02)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


# --- commands ---


def cmd_ingest(cfg: RunConfig, explicit: set[str]) -> int:
    root = Path(_require(cfg, "corpus"))
    if not root.is_dir():
        raise NotADirectoryError(f"corpus directory {root} not found")
    out = _out_dir(cfg)
    rolls_dir = out / "rolls"
    rolls_dir.mkdir(exist_ok=True)
    entries = []
    skipped = 0
    for path in sorted(root.iterdir()):
        if path.suffix.lower() not in (".mid", ".midi"):
            continue
        try:
            roll = notes_to_roll(parse_midi(path.read_bytes()), cfg.pitch_lo, cfg.pitch_hi)
        except (MalformedFile, EmptyAfterQuantization) as exc:
            print(f"skipped {path.name}: {exc}", file=sys.stderr)
            skipped += 1
            continue
        (rolls_dir / f"{path.stem}.txt").write_text(roll_to_text(roll), encoding="utf-8")
        entries.append((path.stem, roll.n_cols, roll.dropped_notes))
    with open(out / "manifest.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["song", "columns", "dropped_notes"])
        writer.writerows(entries)
    _snapshot(out, "ingest", cfg)
    if not entries:
        raise TooFewSongs(f"no ingestable .mid files in {root}")
    print(f"ingested {len(entries)} songs ({skipped} skipped) -> {rolls_dir}")
    return 0


def cmd_train(cfg: RunConfig, explicit: set[str]) -> int:
    songs, band = load_corpus(cfg)
    window_sec = _int_field(cfg.window_sec, "window-sec")
    hidden = _int_field(cfg.hidden, "hidden")
    latent = _int_field(cfg.latent, "latent")
    checkpoint, history, result, _ = _train_once(songs, band, window_sec, hidden, latent, cfg)
    out = _out_dir(cfg)
    ckpt_path = out / "checkpoint.vaec"
    save_checkpoint(str(ckpt_path), checkpoint)
    export_history_csv(history, str(out / "history.csv"))
    export_test_csv(history, str(out / "test_history.csv"))
    _write_sweep_csv(out / "sweep.csv", result)
    _snapshot(out, "train", cfg)
    best = _best_entry(result)
    print(
        f"trained T={window_sec} H={hidden} Z={latent}: "
        f"best threshold {result.best_threshold:g}, "
        f"train F1 {best.train.f1:.4f}, test F1 {best.test.f1:.4f}"
    )
    print(f"checkpoint -> {ckpt_path}")
    return 0


def cmd_sweep(cfg: RunConfig, explicit: set[str]) -> int:
    checkpoint = load_checkpoint(_require(cfg, "checkpoint"))
    songs, _ = load_corpus(cfg, band=(checkpoint.pitch_lo, checkpoint.pitch_hi))
    dataset = split_by_song(songs, checkpoint.window_spec, cfg.test_fraction, cfg.seed)
    result = sweep(
        checkpoint.params, dataset.train_pairs, dataset.test_pairs, _threshold_grid(cfg)
    )
    out = _out_dir(cfg)
    _write_sweep_csv(out / "sweep.csv", result)
    _snapshot(out, "sweep", cfg)
    best = _best_entry(result)
    print(
        f"swept {len(result.entries)} thresholds: best {result.best_threshold:g} "
        f"(train F1 {best.train.f1:.4f}, test F1 {best.test.f1:.4f}) -> {out / 'sweep.csv'}"
    )
    return 0


def cmd_eval(cfg: RunConfig, explicit: set[str]) -> int:
    checkpoint = load_checkpoint(_require(cfg, "checkpoint"))
    spec = checkpoint.window_spec
    songs, _ = load_corpus(cfg, band=(checkpoint.pitch_lo, checkpoint.pitch_hi))
    dataset = split_by_song(songs, spec, cfg.test_fraction, cfg.seed)
    result = sweep(
        checkpoint.params, dataset.train_pairs, dataset.test_pairs, _threshold_grid(cfg)
    )
    theta = _resolve_theta(cfg, checkpoint, result)
    out = _out_dir(cfg)

    _write_sweep_csv(out / "sweep.csv", result)
    _plot_sweep(out / "fig2_threshold_sweep.svg", result)

    segment_rows = []
    step_rows = []
    for side, pairs in (("train", dataset.train_pairs), ("test", dataset.test_pairs)):
        recon, pred = split_metrics(checkpoint.params, pairs, theta, spec)
        full = _full_report(checkpoint.params, pairs, theta)
        segment_rows += [(side, "reconstruction", recon), (side, "prediction", pred), (side, "full", full)]
        for j, report in enumerate(per_step_metrics(checkpoint.params, pairs, theta, spec)):
            step_rows.append((side, f"col+{j + 1}", report))
    write_metrics_csv(str(out / "segments.csv"), segment_rows)
    _plot_segments(out / "fig3_recon_vs_pred.svg", segment_rows)
    write_metrics_csv(str(out / "per_step.csv"), step_rows)
    _plot_per_step(out / "fig4_per_step.svg", step_rows)
    _snapshot(out, "eval", cfg)

    by_key = {(side, seg): rep for side, seg, rep in segment_rows}
    print(
        f"evaluated at threshold {theta:g}: "
        f"train full F1 {by_key[('train', 'full')].f1:.4f}, "
        f"test full F1 {by_key[('test', 'full')].f1:.4f} -> {out}"
    )
    return 0


def _grid_cell(task) -> dict:
    songs, band, window_sec, hidden, latent, cfg = task
    row = {
        "window_sec": window_sec,
        "hidden": hidden,
        "latent": latent,
        "beta": cfg.beta,
        "steps": cfg.steps,
        "best_threshold": "",
        "train_f1": "",
        "train_acc": "",
        "test_f1": "",
        "test_acc": "",
        "status": "ok",
        "error": "",
    }
    try:
        _, _, result, _ = _train_once(songs, band, window_sec, hidden, latent, cfg)
        best = _best_entry(result)
        row.update(
            best_threshold=repr(result.best_threshold),
            train_f1=repr(best.train.f1),
            train_acc=repr(best.train.acc),
            test_f1=repr(best.test.f1),
            test_acc=repr(best.test.acc),
        )
    except Exception as exc:  # a failed cell must not sink the grid
        row.update(status="error", error=f"{type(exc).__name__}: {exc}")
    return row


def cmd_grid(cfg: RunConfig, explicit: set[str]) -> int:
    songs, band = load_corpus(cfg)
    window_secs = _int_list(
        cfg.window_sec if "window_sec" in explicit else GRID_DEFAULT_WINDOW_SEC, "window-sec"
    )
    hiddens = _int_list(cfg.hidden if "hidden" in explicit else GRID_DEFAULT_HIDDEN, "hidden")
    latents = _int_list(cfg.latent if "latent" in explicit else GRID_DEFAULT_LATENT, "latent")
    tasks = [
        (songs, band, t, h, z, cfg) for t in window_secs for h in hiddens for z in latents
    ]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            rows = list(pool.map(_grid_cell, tasks))
    else:
        rows = [_grid_cell(task) for task in tasks]
    out = _out_dir(cfg)
    grid_path = out / "grid.csv"
    with open(grid_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    _snapshot(out, "grid", cfg)
    failed = sum(1 for r in rows if r["status"] != "ok")
    print(f"grid: {len(rows)} cells, {len(rows) - failed} ok, {failed} failed -> {grid_path}")
    if failed:
        for r in rows:
            if r["status"] != "ok":
                print(
                    f"  cell T={r['window_sec']} H={r['hidden']} Z={r['latent']}: {r['error']}",
                    file=sys.stderr,
                )
    return 0


def cmd_generate(cfg: RunConfig, explicit: set[str]) -> int:
    checkpoint = load_checkpoint(_require(cfg, "checkpoint"))
    theta = _resolve_theta(cfg, checkpoint)
    seed_window = random_seed_window(checkpoint.params, cfg.seed, theta)
    roll = generate(
        checkpoint.params,
        checkpoint.window_spec,
        seed_window,
        cfg.seconds,
        theta,
        checkpoint.pitch_lo,
        checkpoint.pitch_hi,
    )
    out = _out_dir(cfg)
    midi_path = out / "generated.mid"
    midi_path.write_bytes(write_midi(roll_to_notes(roll)))
    (out / "generated_roll.txt").write_text(roll_to_text(roll), encoding="utf-8")
    _snapshot(out, "generate", cfg)
    print(
        f"generated {cfg.seconds} s ({roll.n_cols} columns incl. "
        f"{checkpoint.window_spec.window_cols}-column seed) -> {midi_path}"
    )
    return 0


def cmd_serve(cfg: RunConfig, explicit: set[str]) -> int:
    from .service import run_server

    _require(cfg, "checkpoint")
    print(f"serving {cfg.checkpoint} on http://127.0.0.1:{cfg.port}")
    run_server(cfg.checkpoint, port=cfg.port)
    return 0


# --- argument parsing ---


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits 2 by default; the contract wants 1
        raise UsageError(message)


_COMMANDS = [
    ("ingest", cmd_ingest, "quantize a directory of MIDI files into text rolls + manifest"),
    ("train", cmd_train, "train a model on a corpus and save a checkpoint"),
    ("eval", cmd_eval, "evaluate a checkpoint: threshold sweep, segment and per-column CSVs/SVGs"),
    ("sweep", cmd_sweep, "score a checkpoint over a threshold grid"),
    ("grid", cmd_grid, "train every (window, hidden, latent) combination and tabulate results"),
    ("generate", cmd_generate, "extend a random seed window and write an SMF file"),
    ("serve", cmd_serve, "serve a checkpoint over HTTP with the browser studio"),
]


def _build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file; explicit flags override it")
    common.add_argument("--corpus", help="directory of .mid/.midi files or ingested .txt rolls")
    common.add_argument("--out", help="output directory (default: runs)")
    common.add_argument("--seed", type=int, help="RNG seed for split, init, batches, generation")
    common.add_argument("--window-sec", dest="window_sec", help="input window T in seconds (grid: comma list)")
    common.add_argument("--hidden", help="hidden layer width (grid: comma list)")
    common.add_argument("--latent", help="latent dimensions (grid: comma list)")
    common.add_argument("--beta", type=float, help="KL weight")
    common.add_argument("--threshold", type=float, help="decoding threshold (default: checkpoint's)")
    common.add_argument("--threshold-grid", dest="threshold_grid", help="comma-separated sweep thresholds")
    common.add_argument("--steps", type=int, help="Adam steps")
    common.add_argument("--batch", type=int, help="minibatch size")
    common.add_argument("--jobs", type=int, help="parallel grid cells")
    common.add_argument("--seconds", type=int, help="seconds of music to generate")
    common.add_argument("--checkpoint", help="checkpoint file to load")
    common.add_argument("--port", type=int, help="HTTP port for serve")
    common.add_argument(
        "--deterministic",
        action="store_const",
        const=True,
        help="accepted for interface stability; execution is always deterministic",
    )
    parser = _Parser(prog="vaecomposer", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command")
    for name, func, help_text in _COMMANDS:
        cmd = sub.add_parser(name, parents=[common], help=help_text)
        cmd.set_defaults(func=func)
    return parser


def _merge_config(args: argparse.Namespace) -> tuple[RunConfig, set[str]]:
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config!r}: {exc}")
        cfg, explicit = config_from_text(text)
    else:
        cfg, explicit = RunConfig(), set()
    for key in _CONVERTERS:
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
            explicit.add(key)
    return cfg, explicit


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "func", None) is None:
            parser.print_usage(sys.stderr)
            return 1
        cfg, explicit = _merge_config(args)
        return args.func(cfg, explicit)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (
        MalformedFile,
        FormatError,
        EmptyAfterQuantization,
        TooShort,
        TooFewSongs,
        DimensionMismatch,
        OSError,
    ) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NonFiniteLoss as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
