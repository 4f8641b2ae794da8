"""Predictive beta-VAE for polyphonic music.

MIDI files become binary piano rolls on a 100 ms grid; a small VAE is trained
to map each T-second window to the window one stride later; the trained model
scores reconstructions against thresholds and composes by sliding its own
predictions. The HTTP service and CLI live in `vaecomposer.service` and
`vaecomposer.cli` (imported lazily to keep library imports light).
"""

from .composer import generate, new_state, random_seed_window, step_state
from .errors import VaecomposerError
from .metrics import metrics, per_step_metrics, split_metrics, sweep
from .midi import NoteEvent, NoteList, parse_midi, write_midi
from .model import LatentCode, ModelDims, ModelParameters, decode, encode, init_params
from .pianoroll import PianoRoll, WindowSpec, make_windows, notes_to_roll, roll_to_notes
from .training import Checkpoint, TrainingConfig, load_checkpoint, save_checkpoint, split_by_song, train

__version__ = "0.1.0"

__all__ = [
    "Checkpoint",
    "LatentCode",
    "ModelDims",
    "ModelParameters",
    "NoteEvent",
    "NoteList",
    "PianoRoll",
    "TrainingConfig",
    "VaecomposerError",
    "WindowSpec",
    "__version__",
    "decode",
    "encode",
    "generate",
    "init_params",
    "load_checkpoint",
    "make_windows",
    "metrics",
    "new_state",
    "notes_to_roll",
    "parse_midi",
    "per_step_metrics",
    "random_seed_window",
    "roll_to_notes",
    "save_checkpoint",
    "split_by_song",
    "split_metrics",
    "step_state",
    "sweep",
    "train",
    "write_midi",
]
