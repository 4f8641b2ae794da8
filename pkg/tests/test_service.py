"""HTTP API contract tests over an in-process TestClient."""

from __future__ import annotations

import re

import numpy as np
import pytest
from fastapi.testclient import TestClient
from helpers import repeating_roll

from vaecomposer.composer import continue_window, new_state, random_seed_window, step_state
from vaecomposer.midi import NoteEvent, parse_midi, write_midi
from vaecomposer.model import ModelDims, decode, encode, init_params
from vaecomposer.pianoroll import WindowSpec, notes_to_roll
from vaecomposer.service import cells_to_rle, create_app, rle_to_cells
from vaecomposer.training import Checkpoint

SPEC = WindowSpec(window_seconds=2)
PITCH_LO, PITCH_HI = 60, 62
N_PITCHES = 3
W = SPEC.window_cols  # 20
D = N_PITCHES * W  # 60
Z = 4


@pytest.fixture(scope="module")
def checkpoint():
    params = init_params(ModelDims(D, 16, Z), seed=7)
    return Checkpoint(
        params=params,
        window_spec=SPEC,
        pitch_lo=PITCH_LO,
        pitch_hi=PITCH_HI,
        beta=0.5,
        threshold=0.35,
    )


@pytest.fixture(scope="module")
def client(checkpoint):
    with TestClient(create_app(checkpoint), raise_server_exceptions=False) as c:
        yield c


def seed_cells(seed=1):
    return repeating_roll(N_PITCHES, W, 7, seed).cells


def seed_rle(seed=1):
    return cells_to_rle(seed_cells(seed))


# --- RLE codec ---


def test_rle_round_trip_random_grids():
    rng = np.random.default_rng(0)
    for _ in range(50):
        cells = (rng.random((N_PITCHES, W)) < 0.3).astype(np.uint8)
        assert np.array_equal(rle_to_cells(cells_to_rle(cells), N_PITCHES, W), cells)


def test_rle_merges_runs_and_orders_triples():
    cells = np.zeros((2, 6), dtype=np.uint8)
    cells[0, 1:4] = 1
    cells[1, 0] = 1
    cells[1, 5] = 1
    assert cells_to_rle(cells) == [[0, 1, 3], [1, 0, 1], [1, 5, 1]]


# --- metadata ---


def test_model_info(client, checkpoint):
    body = client.get("/api/model").json()
    assert body == {
        "input_dim": D,
        "hidden_dim": 16,
        "latent_dim": Z,
        "window_seconds": 2,
        "window_cols": W,
        "stride_cols": 10,
        "grid_ms": 100,
        "pitch_lo": PITCH_LO,
        "pitch_hi": PITCH_HI,
        "n_pitches": N_PITCHES,
        "beta": 0.5,
        "threshold": 0.35,
    }


def test_threshold_falls_back_when_checkpoint_has_none(checkpoint):
    import dataclasses

    bare = dataclasses.replace(checkpoint, threshold=None)
    with TestClient(create_app(bare)) as c:
        assert c.get("/api/model").json()["threshold"] == 0.41


# --- encode / decode ---


def test_encode_zero_window_finite_vectors(client):
    body = client.post("/api/encode", json={"window": []}).json()
    assert len(body["mu"]) == Z and len(body["logvar"]) == Z
    assert np.isfinite(body["mu"]).all() and np.isfinite(body["logvar"]).all()


def test_encode_matches_direct_call(client, checkpoint):
    body = client.post("/api/encode", json={"window": seed_rle()}).json()
    latent = encode(checkpoint.params, seed_cells().reshape(-1).astype(np.float64))
    assert np.allclose(body["mu"], latent.mu)
    assert np.allclose(body["logvar"], latent.logvar)


def test_decode_origin_matches_direct_call(client, checkpoint):
    body = client.post("/api/decode", json={"z": [0.0] * Z}).json()
    probs = decode(checkpoint.params, np.zeros(Z))
    assert np.allclose(body["probs"], probs)
    expected = (probs > 0.35).astype(np.uint8).reshape(N_PITCHES, W)
    assert rle_to_cells(body["window"], N_PITCHES, W).tolist() == expected.tolist()


def test_decode_threshold_override(client):
    low = client.post("/api/decode", json={"z": [0.0] * Z, "threshold": 0.0}).json()
    high = client.post("/api/decode", json={"z": [0.0] * Z, "threshold": 1.0}).json()
    assert rle_to_cells(low["window"], N_PITCHES, W).all()
    assert not rle_to_cells(high["window"], N_PITCHES, W).any()


def test_decode_rejects_wrong_z_length(client):
    assert client.post("/api/decode", json={"z": [0.0] * (Z + 1)}).status_code == 422


# --- continue ---


def test_continue_is_deterministic(client):
    payload = {"window": seed_rle(), "threshold": 0.35, "latent_delta": [0.2] * Z}
    a = client.post("/api/continue", json=payload).json()
    b = client.post("/api/continue", json=payload).json()
    assert a == b


def test_continue_matches_direct_call(client, checkpoint):
    body = client.post("/api/continue", json={"window": seed_rle(), "threshold": 0.35}).json()
    nxt, new_cols, latent = continue_window(
        checkpoint.params, SPEC, seed_cells().reshape(-1), 0.35
    )
    assert rle_to_cells(body["next_window"], N_PITCHES, W).reshape(-1).tolist() == nxt.tolist()
    assert rle_to_cells(body["new_cols"], N_PITCHES, 10).tolist() == new_cols.tolist()
    assert np.allclose(body["latent"]["mu"], latent.mu)


def test_continue_requires_exactly_one_source(client):
    assert client.post("/api/continue", json={"threshold": 0.35}).status_code == 400
    both = {"session": "x", "window": seed_rle(), "threshold": 0.35}
    assert client.post("/api/continue", json=both).status_code == 400


def test_continue_unknown_session_is_404(client):
    body = {"session": "nope", "threshold": 0.35}
    assert client.post("/api/continue", json=body).status_code == 404


def test_continue_rejects_bad_delta_and_grid(client):
    bad_delta = {"window": seed_rle(), "threshold": 0.35, "latent_delta": [0.0] * (Z + 2)}
    assert client.post("/api/continue", json=bad_delta).status_code == 422
    outside = {"window": [[N_PITCHES, 0, 1]], "threshold": 0.35}
    assert client.post("/api/continue", json=outside).status_code == 422
    overrun = {"window": [[0, W - 1, 2]], "threshold": 0.35}
    assert client.post("/api/continue", json=overrun).status_code == 422
    zero_len = {"window": [[0, 0, 0]], "threshold": 0.35}
    assert client.post("/api/continue", json=zero_len).status_code == 400


# --- sessions ---


def test_session_default_body_and_seeded_reproducibility(client, checkpoint):
    plain = client.post("/api/session").json()
    assert plain["step"] == 0 and plain["threshold"] == 0.35
    origin = random_seed_window(checkpoint.params, None, 0.35).reshape(N_PITCHES, W)
    assert rle_to_cells(plain["window"], N_PITCHES, W).tolist() == origin.tolist()

    a = client.post("/api/session", json={"seed": 9}).json()
    b = client.post("/api/session", json={"seed": 9}).json()
    assert a["window"] == b["window"]
    assert a["id"] != b["id"]


def test_session_step_counts_and_shapes(client):
    sid = client.post("/api/session", json={"window": seed_rle()}).json()["id"]
    for expected_step in (1, 2, 3):
        body = client.post(f"/api/session/{sid}/step").json()
        assert body["step"] == expected_step
        assert len(body["latent"]["mu"]) == Z
        cols = rle_to_cells(body["new_cols"], N_PITCHES, 10)
        assert cols.shape == (N_PITCHES, 10)


def test_step_matches_local_composer(client, checkpoint):
    sid = client.post("/api/session", json={"window": seed_rle(3)}).json()["id"]
    state = new_state(SPEC, PITCH_LO, PITCH_HI, seed_cells(3).reshape(-1))
    for _ in range(2):
        remote = client.post(f"/api/session/{sid}/step", json={"latent_delta": [0.1] * Z}).json()
        local = step_state(checkpoint.params, state, 0.35, np.full(Z, 0.1))
        assert rle_to_cells(remote["new_cols"], N_PITCHES, 10).tolist() == local.tolist()


def test_step_threshold_persists(client):
    sid = client.post("/api/session", json={"window": seed_rle()}).json()["id"]
    body = client.post(f"/api/session/{sid}/step", json={"threshold": 0.9}).json()
    assert body["threshold"] == 0.9
    body = client.post(f"/api/session/{sid}/step").json()
    assert body["threshold"] == 0.9


def test_sessions_are_isolated(client):
    s1 = client.post("/api/session", json={"window": seed_rle(5)}).json()["id"]
    s2 = client.post("/api/session", json={"window": seed_rle(5)}).json()["id"]
    client.post(f"/api/session/{s1}/step", json={"latent_delta": [2.0] * Z})
    client.post(f"/api/session/{s1}/step")
    body2 = client.post(f"/api/session/{s2}/step").json()
    assert body2["step"] == 1
    assert client.post(f"/api/session/{s1}/step").json()["step"] == 3


def test_continue_on_session_reads_current_window(client):
    created = client.post("/api/session", json={"window": seed_rle(2)}).json()
    via_session = client.post(
        "/api/continue", json={"session": created["id"], "threshold": 0.35}
    ).json()
    via_window = client.post(
        "/api/continue", json={"window": seed_rle(2), "threshold": 0.35}
    ).json()
    assert via_session == via_window
    # continue is read-only: the session still reports its next step as 1
    sid = created["id"]
    assert client.post(f"/api/session/{sid}/step").json()["step"] == 1


def test_unknown_session_step_and_export_are_404(client):
    assert client.post("/api/session/absent/step").status_code == 404
    assert client.get("/api/session/absent/export").status_code == 404


# --- midi upload / export ---


def make_smf():
    notes = [
        NoteEvent(pitch=60, onset_ms=0, duration_ms=300),
        NoteEvent(pitch=62, onset_ms=200, duration_ms=400),
    ]
    return write_midi(notes), notes


def test_midi_upload_round_trip(client):
    data, notes = make_smf()
    resp = client.post("/api/midi", files={"file": ("tune.mid", data, "audio/midi")})
    body = resp.json()
    local = notes_to_roll(notes, PITCH_LO, PITCH_HI)
    assert body["pitch_lo"] == PITCH_LO and body["pitch_hi"] == PITCH_HI
    assert body["n_cols"] == local.n_cols
    assert body["dropped_notes"] == 0
    got = rle_to_cells(body["cells"], N_PITCHES, body["n_cols"])
    assert np.array_equal(got, local.cells)


def test_midi_upload_corrupt_is_400(client):
    resp = client.post("/api/midi", files={"file": ("x.mid", b"MThd\x00\x00", "audio/midi")})
    assert resp.status_code == 400


def test_midi_upload_out_of_band_is_422(client):
    data = write_midi([NoteEvent(pitch=20, onset_ms=0, duration_ms=500)])
    resp = client.post("/api/midi", files={"file": ("low.mid", data, "audio/midi")})
    assert resp.status_code == 422


def test_export_is_valid_smf_matching_session_roll(client, checkpoint):
    created = client.post("/api/session", json={"window": seed_rle(4)}).json()
    sid = created["id"]
    client.post(f"/api/session/{sid}/step")
    client.post(f"/api/session/{sid}/step")
    resp = client.get(f"/api/session/{sid}/export")
    assert resp.status_code == 200
    assert resp.content.startswith(b"MThd")

    state = new_state(SPEC, PITCH_LO, PITCH_HI, seed_cells(4).reshape(-1))
    step_state(checkpoint.params, state, 0.35)
    step_state(checkpoint.params, state, 0.35)
    expected = state.full_roll().cells
    got = notes_to_roll(parse_midi(resp.content), PITCH_LO, PITCH_HI).cells
    # SMF cannot carry trailing silence; compare up to the last sounding column
    assert got.shape[1] <= expected.shape[1]
    assert np.array_equal(got, expected[:, : got.shape[1]])
    assert not expected[:, got.shape[1] :].any()


# --- hard error contract ---


def test_no_endpoint_returns_500_for_bad_payloads(client):
    attempts = [
        ("post", "/api/encode", {"json": {"window": "junk"}}),
        ("post", "/api/encode", {"json": {}}),
        ("post", "/api/encode", {"json": {"window": [[0, 0]]}}),
        ("post", "/api/encode", {"json": {"window": [[0, 0, -3]]}}),
        ("post", "/api/encode", {"content": b"{not json", "headers": {"content-type": "application/json"}}),
        ("post", "/api/decode", {"json": {"z": "zero"}}),
        ("post", "/api/decode", {"json": {"z": [0.0] * Z, "threshold": 7}}),
        ("post", "/api/continue", {"json": {"window": seed_rle(), "threshold": "mid"}}),
        ("post", "/api/continue", {"json": {"session": 3, "threshold": 0.5}}),
        ("post", "/api/session", {"json": {"feedback": "loud"}}),
        ("post", "/api/session", {"json": {"window": [[99, 0, 1]]}}),
        ("post", "/api/session/ghost/step", {"json": {"latent_delta": "no"}}),
        ("post", "/api/midi", {}),
        ("post", "/api/midi", {"files": {"file": ("a.mid", b"", "audio/midi")}}),
    ]
    for method, path, kwargs in attempts:
        resp = getattr(client, method)(path, **kwargs)
        assert 400 <= resp.status_code < 500, (path, kwargs, resp.status_code)


def test_model_parameters_never_mutate(client, checkpoint):
    before = {f: getattr(checkpoint.params, f).copy() for f in ("W1", "V_out", "b1", "c_out")}
    client.post("/api/encode", json={"window": seed_rle()})
    client.post("/api/decode", json={"z": [1.0] * Z})
    sid = client.post("/api/session").json()["id"]
    client.post(f"/api/session/{sid}/step", json={"latent_delta": [3.0] * Z})
    for name, arr in before.items():
        assert np.array_equal(arr, getattr(checkpoint.params, name))


def test_studio_page_served_at_root(client):
    resp = client.get("/")
    assert resp.status_code == 200
    assert resp.headers["content-type"].startswith("text/html")
    # the built studio shell: a module script plus its hashed bundle
    assert "<script type=\"module\"" in resp.text
    m = re.search(r'src="(/assets/index-[^"]+\.js)"', resp.text)
    assert m, "root page must reference the built bundle"
    asset = client.get(m.group(1))
    assert asset.status_code == 200
    assert len(asset.content) > 0
