"""Binary piano-roll representation and window-pair slicing.

A roll is a pitch-by-time binary matrix on a 100 ms grid: cell (i, j) = 1
means pitch ``pitch_lo + i`` sounds during time step j. Consecutive
same-pitch notes stay distinguishable because the column just before the
second note's onset is zeroed (the separation rule). Window pairs feed the
predictive model: the target is the input window advanced by the
prediction stride.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptyAfterQuantization, MalformedFile, TooShort
from .midi import NoteEvent, NoteList

GRID_MS = 100
COLS_PER_SECOND = 1000 // GRID_MS


@dataclass
class PianoRoll:
    """Binary matrix of shape (pitch_hi - pitch_lo + 1, n_cols); row 0 is pitch_lo."""

    pitch_lo: int
    pitch_hi: int
    cells: np.ndarray
    dropped_notes: int = 0  # out-of-band notes discarded during quantization

    def __post_init__(self) -> None:
        if self.pitch_lo > self.pitch_hi:
            raise ValueError(f"pitch_lo {self.pitch_lo} > pitch_hi {self.pitch_hi}")
        self.cells = np.ascontiguousarray(self.cells, dtype=np.uint8)
        if self.cells.ndim != 2 or self.cells.shape[0] != self.n_pitches:
            raise DimensionMismatch(
                f"cells shape {self.cells.shape} does not match pitch band "
                f"[{self.pitch_lo}, {self.pitch_hi}]"
            )
        if self.cells.shape[1] < 1:
            raise ValueError("a roll needs at least one column")
        if not np.isin(self.cells, (0, 1)).all():
            raise ValueError("roll cells must all be 0 or 1")

    @property
    def n_pitches(self) -> int:
        return self.pitch_hi - self.pitch_lo + 1

    @property
    def n_cols(self) -> int:
        return int(self.cells.shape[1])

    def __eq__(self, other) -> bool:
        if not isinstance(other, PianoRoll):
            return NotImplemented
        return (
            self.pitch_lo == other.pitch_lo
            and self.pitch_hi == other.pitch_hi
            and np.array_equal(self.cells, other.cells)
        )


@dataclass(frozen=True)
class WindowSpec:
    """Window geometry: T seconds of input, target advanced by the stride.

    The stride is 10 columns (1 s) for T >= 2 and 5 columns (0.5 s) for T = 1.
    """

    window_seconds: int
    grid_ms: int = GRID_MS
    stride_cols: int = field(default=0)

    def __post_init__(self) -> None:
        if self.window_seconds < 1:
            raise ValueError(f"window_seconds {self.window_seconds} < 1")
        if self.grid_ms != GRID_MS:
            raise ValueError(f"grid_ms is fixed at {GRID_MS}")
        default = 5 if self.window_seconds == 1 else 10
        if self.stride_cols == 0:
            object.__setattr__(self, "stride_cols", default)
        elif self.stride_cols != default:
            raise ValueError(
                f"stride_cols {self.stride_cols} invalid for T={self.window_seconds}"
            )

    @property
    def window_cols(self) -> int:
        return self.window_seconds * COLS_PER_SECOND


@dataclass
class WindowPair:
    """Flattened (input, target) vectors plus their provenance in the source roll.

    Both vectors are flattened pitch-major: all time steps of the lowest
    pitch first, then the next pitch, and so on (C-order of the
    (n_pitches, W) block).
    """

    x: np.ndarray
    y: np.ndarray
    source_song: str
    source_offset_cols: int


def notes_to_roll(
    notes: NoteList | list[NoteEvent],
    pitch_lo: int,
    pitch_hi: int,
    grid_ms: int = GRID_MS,
) -> PianoRoll:
    """Quantize note events onto the binary grid, applying the separation rule.

    A note over real time [s, e) fills columns floor(s/grid) through
    ceil(e/grid) - 1 (at least one column). When a later same-pitch note
    starts at column c with no silent column since the previous note, the
    cell at c - 1 is zeroed so the two notes stay distinct -- unless that
    would erase a one-column note entirely, in which case the notes merge.

    Out-of-band notes are dropped and counted in the result's
    ``dropped_notes``. Raises EmptyAfterQuantization when nothing remains.
    """
    items = sorted(notes, key=lambda n: (n.onset_ms, n.pitch))
    in_band = [n for n in items if pitch_lo <= n.pitch <= pitch_hi]
    dropped = len(items) - len(in_band)
    if not in_band:
        raise EmptyAfterQuantization(
            f"no notes within pitch band [{pitch_lo}, {pitch_hi}] "
            f"({dropped} dropped)"
        )

    spans: dict[int, list[tuple[int, int]]] = {}
    for note in in_band:
        start = note.onset_ms // grid_ms
        end = max(start, -(-note.end_ms // grid_ms) - 1)  # ceil division
        spans.setdefault(note.pitch, []).append((start, end))

    n_cols = max(end for pitch_spans in spans.values() for _, end in pitch_spans) + 1
    cells = np.zeros((pitch_hi - pitch_lo + 1, n_cols), dtype=np.uint8)
    for pitch, pitch_spans in spans.items():
        row = pitch - pitch_lo
        for start, end in pitch_spans:
            cells[row, start : end + 1] = 1
        one_column = {s for s, e in pitch_spans if s == e}
        prev_end = None
        for start, end in pitch_spans:
            if prev_end is not None and start <= prev_end + 1 and start >= 1:
                if start - 1 not in one_column:
                    cells[row, start - 1] = 0
            prev_end = end if prev_end is None else max(prev_end, end)

    return PianoRoll(pitch_lo=pitch_lo, pitch_hi=pitch_hi, cells=cells, dropped_notes=dropped)


def roll_to_notes(roll: PianoRoll, grid_ms: int = GRID_MS) -> NoteList:
    """Turn each maximal horizontal run of 1s into one note event."""
    notes = []
    for row in range(roll.n_pitches):
        pitch = roll.pitch_lo + row
        cells = roll.cells[row]
        edges = np.flatnonzero(np.diff(np.concatenate(([0], cells, [0]))))
        for start, stop in zip(edges[0::2], edges[1::2]):
            notes.append(
                NoteEvent(
                    pitch=pitch,
                    onset_ms=int(start) * grid_ms,
                    duration_ms=int(stop - start) * grid_ms,
                )
            )
    notes.sort(key=lambda n: (n.onset_ms, n.pitch))
    return NoteList(notes=notes)


def make_windows(roll: PianoRoll, spec: WindowSpec, song: str = "") -> list[WindowPair]:
    """Slice a roll into (input, target) pairs one second apart.

    Inputs start at columns 0, 10, 20, ...; the target covers the input's
    columns advanced by the stride. The last pair is the largest offset t
    with t + stride + W <= n_cols.
    """
    w = spec.window_cols
    stride = spec.stride_cols
    if roll.n_cols < w + stride:
        raise TooShort(
            f"roll has {roll.n_cols} columns, need at least {w + stride} "
            f"for one window pair at T={spec.window_seconds}"
        )
    pairs = []
    for offset in range(0, roll.n_cols - w - stride + 1, COLS_PER_SECOND):
        x = roll.cells[:, offset : offset + w].reshape(-1)
        y = roll.cells[:, offset + stride : offset + stride + w].reshape(-1)
        pairs.append(
            WindowPair(
                x=x.copy(),
                y=y.copy(),
                source_song=song,
                source_offset_cols=offset,
            )
        )
    return pairs


def unflatten_window(vector: np.ndarray, n_pitches: int, window_cols: int) -> np.ndarray:
    """Reshape a flat window vector back to its (n_pitches, W) block."""
    vector = np.asarray(vector)
    if vector.size != n_pitches * window_cols:
        raise DimensionMismatch(
            f"vector of length {vector.size} is not {n_pitches} x {window_cols}"
        )
    return vector.reshape(n_pitches, window_cols)


def roll_to_text(roll: PianoRoll) -> str:
    """Portable text form: header 'pitch_lo pitch_hi n_cols', then 0/1 rows."""
    lines = [f"{roll.pitch_lo} {roll.pitch_hi} {roll.n_cols}"]
    for row in roll.cells:
        lines.append("".join("1" if cell else "0" for cell in row))
    return "\n".join(lines) + "\n"


def roll_from_text(text: str) -> PianoRoll:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise MalformedFile("empty roll text")
    try:
        pitch_lo, pitch_hi, n_cols = (int(tok) for tok in lines[0].split())
    except ValueError as exc:
        raise MalformedFile(f"bad roll header line {lines[0]!r}") from exc
    rows = lines[1:]
    if len(rows) != pitch_hi - pitch_lo + 1:
        raise MalformedFile(f"expected {pitch_hi - pitch_lo + 1} rows, found {len(rows)}")
    cells = np.zeros((len(rows), n_cols), dtype=np.uint8)
    for i, row in enumerate(rows):
        if len(row) != n_cols or set(row) - {"0", "1"}:
            raise MalformedFile(f"row {i} is not {n_cols} characters of 0/1")
        cells[i] = np.frombuffer(row.encode("ascii"), dtype=np.uint8) - ord("0")
    return PianoRoll(pitch_lo=pitch_lo, pitch_hi=pitch_hi, cells=cells)
