"""HTTP facade over a loaded checkpoint.

Endpoints (JSON unless noted):
  GET  /api/model                  model dimensions, window geometry, pitch band, threshold
  POST /api/encode                 {window} -> {mu, logvar}
  POST /api/decode                 {z, threshold?} -> {probs, window}
  POST /api/continue               {session? | window?, threshold, latent_delta?}
                                   -> {next_window, new_cols, latent}
  POST /api/session                {window?, seed?, threshold?, feedback?} -> {id, window, ...}
  POST /api/session/{id}/step      {latent_delta?, threshold?} -> {new_cols, latent, step}
  POST /api/midi                   multipart SMF upload -> quantized roll
  GET  /api/session/{id}/export    SMF bytes of seed + generated columns

Binary windows and rolls travel as run-length triples [pitch_row, start, len]
over the (n_pitches, n_cols) grid. Error mapping: 400 for payloads that do not
parse (bad JSON, wrong types, non-positive run lengths, corrupt MIDI), 404 for
unknown sessions, 422 for values that do not fit the model's grid (runs outside
the window, wrong vector lengths, uploads with no in-band notes). The model is
never mutated; sessions mutate only under their own lock.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
from fastapi import FastAPI, HTTPException, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .composer import CompositionState, continue_window, new_state, random_seed_window, step_state
from .errors import DimensionMismatch, EmptyAfterQuantization, VaecomposerError
from .midi import parse_midi, write_midi
from .model import LatentCode, decode, encode
from .pianoroll import notes_to_roll, roll_to_notes
from .training import Checkpoint, load_checkpoint

DEFAULT_THRESHOLD = 0.41
STATIC_DIR = Path(__file__).parent / "static"


class BadPayload(VaecomposerError):
    """Request body parsed as JSON but is structurally unusable."""


def cells_to_rle(cells: np.ndarray) -> list[list[int]]:
    """Maximal runs of ones per pitch row as [row, start, length] triples."""
    triples: list[list[int]] = []
    for row in range(cells.shape[0]):
        padded = np.concatenate([[0], cells[row] != 0, [0]])
        edges = np.flatnonzero(np.diff(padded))
        for start, end in zip(edges[::2], edges[1::2]):
            triples.append([int(row), int(start), int(end - start)])
    return triples


def rle_to_cells(triples, n_pitches: int, n_cols: int) -> np.ndarray:
    cells = np.zeros((n_pitches, n_cols), dtype=np.uint8)
    for triple in triples:
        row, start, length = (int(v) for v in triple)
        if length < 1:
            raise BadPayload(f"run length {length} < 1")
        if not 0 <= row < n_pitches or start < 0 or start + length > n_cols:
            raise DimensionMismatch(
                f"run [{row}, {start}, {length}] outside {n_pitches}x{n_cols} grid"
            )
        cells[row, start : start + length] = 1
    return cells


Triple = tuple[int, int, int]


class EncodeRequest(BaseModel):
    window: list[Triple]


class DecodeRequest(BaseModel):
    z: list[float]
    threshold: float | None = Field(default=None, ge=0.0, le=1.0)


class ContinueRequest(BaseModel):
    session: str | None = None
    window: list[Triple] | None = None
    threshold: float = Field(ge=0.0, le=1.0)
    latent_delta: list[float] | None = None


class SessionRequest(BaseModel):
    window: list[Triple] | None = None
    seed: int | None = None
    threshold: float | None = Field(default=None, ge=0.0, le=1.0)
    feedback: Literal["binary", "probs"] = "binary"


class StepRequest(BaseModel):
    latent_delta: list[float] | None = None
    threshold: float | None = Field(default=None, ge=0.0, le=1.0)


@dataclass
class SessionState:
    session_id: str
    composition: CompositionState
    threshold: float
    deltas: list[list[float] | None] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)


def _latent_json(latent: LatentCode) -> dict:
    return {"mu": latent.mu.tolist(), "logvar": latent.logvar.tolist()}


def create_app(checkpoint: Checkpoint, static_dir: str | Path | None = None) -> FastAPI:
    params = checkpoint.params
    spec = checkpoint.window_spec
    dims = params.dims
    pitch_lo, pitch_hi = checkpoint.pitch_lo, checkpoint.pitch_hi
    n_pitches = pitch_hi - pitch_lo + 1
    w = spec.window_cols
    default_threshold = (
        checkpoint.threshold if checkpoint.threshold is not None else DEFAULT_THRESHOLD
    )

    sessions: dict[str, SessionState] = {}
    registry_lock = threading.Lock()

    app = FastAPI(title="vaecomposer", docs_url=None, redoc_url=None)

    def get_session(session_id: str) -> SessionState:
        with registry_lock:
            state = sessions.get(session_id)
        if state is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        return state

    def parse_window(triples) -> np.ndarray:
        return rle_to_cells(triples, n_pitches, w).reshape(-1)

    def parse_delta(values: list[float] | None) -> np.ndarray | None:
        if values is None:
            return None
        delta = np.asarray(values, dtype=np.float64)
        if delta.shape != (dims.latent_dim,):
            raise DimensionMismatch(
                f"latent_delta has {delta.size} entries, expected {dims.latent_dim}"
            )
        return delta

    async def _status(request: Request, exc: Exception, code: int) -> JSONResponse:
        return JSONResponse(status_code=code, content={"error": str(exc)})

    @app.exception_handler(RequestValidationError)
    async def _on_validation(request: Request, exc: RequestValidationError):
        return await _status(request, exc, 400)

    @app.exception_handler(VaecomposerError)
    async def _on_domain(request: Request, exc: VaecomposerError):
        return await _status(request, exc, 400)

    @app.exception_handler(DimensionMismatch)
    async def _on_mismatch(request: Request, exc: DimensionMismatch):
        return await _status(request, exc, 422)

    @app.exception_handler(EmptyAfterQuantization)
    async def _on_empty(request: Request, exc: EmptyAfterQuantization):
        return await _status(request, exc, 422)

    @app.get("/api/model")
    def model_info():
        return {
            "input_dim": dims.input_dim,
            "hidden_dim": dims.hidden_dim,
            "latent_dim": dims.latent_dim,
            "window_seconds": spec.window_seconds,
            "window_cols": w,
            "stride_cols": spec.stride_cols,
            "grid_ms": spec.grid_ms,
            "pitch_lo": pitch_lo,
            "pitch_hi": pitch_hi,
            "n_pitches": n_pitches,
            "beta": checkpoint.beta,
            "threshold": default_threshold,
        }

    @app.post("/api/encode")
    def encode_endpoint(req: EncodeRequest):
        window = parse_window(req.window)
        latent = encode(params, window.astype(np.float64))
        return _latent_json(latent)

    @app.post("/api/decode")
    def decode_endpoint(req: DecodeRequest):
        z = np.asarray(req.z, dtype=np.float64)
        if z.shape != (dims.latent_dim,):
            raise DimensionMismatch(f"z has {z.size} entries, expected {dims.latent_dim}")
        probs = decode(params, z)
        theta = req.threshold if req.threshold is not None else default_threshold
        window = (probs > theta).astype(np.uint8).reshape(n_pitches, w)
        return {"probs": probs.tolist(), "window": cells_to_rle(window)}

    @app.post("/api/continue")
    def continue_endpoint(req: ContinueRequest):
        if (req.session is None) == (req.window is None):
            raise BadPayload("provide exactly one of 'session' or 'window'")
        if req.session is not None:
            state = get_session(req.session)
            with state.lock:
                window = np.asarray(state.composition.current_window, dtype=np.float64)
        else:
            window = parse_window(req.window).astype(np.float64)
        next_window, new_cols, latent = continue_window(
            params, spec, window, req.threshold, parse_delta(req.latent_delta)
        )
        return {
            "next_window": cells_to_rle(next_window.reshape(n_pitches, w)),
            "new_cols": cells_to_rle(new_cols),
            "latent": _latent_json(latent),
        }

    @app.post("/api/session")
    def session_endpoint(req: SessionRequest | None = None):
        req = req if req is not None else SessionRequest()
        theta = req.threshold if req.threshold is not None else default_threshold
        if req.window is not None:
            window = parse_window(req.window)
        else:
            window = random_seed_window(params, req.seed, theta)
        composition = new_state(spec, pitch_lo, pitch_hi, window, feedback=req.feedback)
        state = SessionState(uuid.uuid4().hex, composition, theta)
        with registry_lock:
            sessions[state.session_id] = state
        return {
            "id": state.session_id,
            "window": cells_to_rle(window.reshape(n_pitches, w)),
            "threshold": theta,
            "step": 0,
        }

    @app.post("/api/session/{session_id}/step")
    def step_endpoint(session_id: str, req: StepRequest | None = None):
        req = req if req is not None else StepRequest()
        state = get_session(session_id)
        delta = parse_delta(req.latent_delta)
        with state.lock:
            if req.threshold is not None:
                state.threshold = req.threshold
            new_bin = step_state(params, state.composition, state.threshold, delta)
            state.deltas.append(list(req.latent_delta) if req.latent_delta else None)
            step_no = state.composition.step_count
            latent = state.composition.last_latent
            threshold = state.threshold
        return {
            "new_cols": cells_to_rle(new_bin),
            "latent": _latent_json(latent),
            "step": step_no,
            "threshold": threshold,
        }

    @app.get("/api/session/{session_id}/export")
    def export_endpoint(session_id: str):
        state = get_session(session_id)
        with state.lock:
            roll = state.composition.full_roll()
        data = write_midi(roll_to_notes(roll))
        return Response(
            content=data,
            media_type="audio/midi",
            headers={"Content-Disposition": 'attachment; filename="composition.mid"'},
        )

    @app.post("/api/midi")
    async def midi_endpoint(file: UploadFile):
        data = await file.read()
        notes = parse_midi(data)
        roll = notes_to_roll(notes, pitch_lo, pitch_hi, spec.grid_ms)
        return {
            "pitch_lo": roll.pitch_lo,
            "pitch_hi": roll.pitch_hi,
            "n_cols": roll.n_cols,
            "cells": cells_to_rle(roll.cells),
            "dropped_notes": roll.dropped_notes,
            "warnings": notes.warnings,
        }

    mount_dir = Path(static_dir) if static_dir is not None else STATIC_DIR
    if mount_dir.is_dir():
        app.mount("/", StaticFiles(directory=mount_dir, html=True), name="static")

    return app


def run_server(
    checkpoint_path: str | Path,
    port: int = 8000,
    host: str = "127.0.0.1",
    static_dir: str | Path | None = None,
) -> None:
    """Load a checkpoint and serve it until interrupted."""
    import uvicorn

    app = create_app(load_checkpoint(checkpoint_path), static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
