"""Standard MIDI File reading and writing.

Reads SMF format 0 and 1 byte streams into note events on one absolute
millisecond timeline, honoring mid-song tempo changes and running status.
Writes format 0 files (division 480, tempo 500000, fixed velocity 80) so
generated rolls can be listened to.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import MalformedFile

PERCUSSION_CHANNEL = 9  # MIDI channel 10, zero-indexed

DEFAULT_TEMPO_US = 500_000  # microseconds per quarter note
WRITE_DIVISION = 480
WRITE_VELOCITY = 80


@dataclass(frozen=True)
class NoteEvent:
    """One note: MIDI pitch, onset and duration in milliseconds."""

    pitch: int
    onset_ms: int
    duration_ms: int

    def __post_init__(self) -> None:
        if not 0 <= self.pitch <= 127:
            raise ValueError(f"pitch {self.pitch} outside [0, 127]")
        if self.onset_ms < 0:
            raise ValueError(f"onset_ms {self.onset_ms} is negative")
        if self.duration_ms < 1:
            raise ValueError(f"duration_ms {self.duration_ms} < 1")

    @property
    def end_ms(self) -> int:
        return self.onset_ms + self.duration_ms


@dataclass
class NoteList:
    """Note events sorted by (onset, pitch), plus parser warnings."""

    notes: list[NoteEvent] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def __iter__(self):
        return iter(self.notes)

    def __len__(self) -> int:
        return len(self.notes)

    def __getitem__(self, i):
        return self.notes[i]


class _Reader:
    """Cursor over a byte buffer; every overrun becomes MalformedFile."""

    def __init__(self, data: bytes, offset: int = 0, end: int | None = None):
        self.data = data
        self.pos = offset
        self.end = len(data) if end is None else end

    def remaining(self) -> int:
        return self.end - self.pos

    def read(self, n: int) -> bytes:
        if self.remaining() < n:
            raise MalformedFile(
                f"truncated data: wanted {n} bytes at offset {self.pos}, "
                f"have {self.remaining()}"
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def read_u8(self) -> int:
        return self.read(1)[0]

    def read_u16(self) -> int:
        return int.from_bytes(self.read(2), "big")

    def read_u32(self) -> int:
        return int.from_bytes(self.read(4), "big")

    def read_vlq(self) -> int:
        """Read a variable-length quantity (7 bits per byte, MSB = continue)."""
        value = 0
        for _ in range(4):  # spec caps VLQs at 4 bytes
            b = self.read_u8()
            value = (value << 7) | (b & 0x7F)
            if not b & 0x80:
                return value
        raise MalformedFile(f"variable-length quantity longer than 4 bytes at {self.pos}")


# (status high nibble) -> number of data bytes
_CHANNEL_DATA_LEN = {0x8: 2, 0x9: 2, 0xA: 2, 0xB: 2, 0xC: 1, 0xD: 1, 0xE: 2}


def _parse_track(reader: _Reader, track_index: int):
    """Parse one MTrk chunk body into raw (tick, kind, payload) events.

    kind is 'on'/'off' with payload (channel, pitch, velocity), or 'tempo'
    with payload microseconds-per-quarter.
    """
    events = []
    tick = 0
    running_status = None
    saw_end = False
    while reader.remaining() > 0:
        tick += reader.read_vlq()
        first = reader.read_u8()
        if first == 0xFF:  # meta event
            meta_type = reader.read_u8()
            length = reader.read_vlq()
            payload = reader.read(length)
            running_status = None
            if meta_type == 0x2F:
                saw_end = True
                break
            if meta_type == 0x51:
                if length != 3:
                    raise MalformedFile(f"tempo meta event with length {length}, expected 3")
                events.append((tick, "tempo", int.from_bytes(payload, "big")))
            continue
        if first in (0xF0, 0xF7):  # sysex: skip payload
            length = reader.read_vlq()
            reader.read(length)
            running_status = None
            continue
        if first & 0x80:
            status = first
            running_status = status
            data0 = reader.read_u8()
        else:
            if running_status is None:
                raise MalformedFile(
                    f"data byte 0x{first:02x} with no running status in track {track_index}"
                )
            status = running_status
            data0 = first
        kind = status >> 4
        n_data = _CHANNEL_DATA_LEN.get(kind)
        if n_data is None:
            raise MalformedFile(f"unexpected status byte 0x{status:02x} in track {track_index}")
        data = [data0] + [reader.read_u8() for _ in range(n_data - 1)]
        if any(b & 0x80 for b in data):
            raise MalformedFile(f"data byte with high bit set in track {track_index}")
        channel = status & 0x0F
        if kind == 0x9 and data[1] > 0:
            events.append((tick, "on", (channel, data[0], data[1])))
        elif kind == 0x8 or (kind == 0x9 and data[1] == 0):
            events.append((tick, "off", (channel, data[0])))
        # other channel messages (aftertouch, CC, program, pitch bend) are skipped
    if not saw_end:
        raise MalformedFile(f"track {track_index} ended without end-of-track meta event")
    return events, tick


class _TempoMap:
    """Piecewise-constant tempo over absolute ticks -> milliseconds."""

    def __init__(self, tempo_events, division: int):
        # (tick, us_per_quarter), deduped and sorted; default tempo from tick 0
        points = sorted(tempo_events)
        self.division = division
        self.segments = []  # (start_tick, start_ms, us_per_quarter)
        tempo = DEFAULT_TEMPO_US
        last_tick = 0
        last_ms = 0.0
        self.segments.append((0, 0.0, tempo))
        for tick, new_tempo in points:
            last_ms += (tick - last_tick) * tempo / (division * 1000.0)
            last_tick = tick
            tempo = new_tempo
            self.segments.append((tick, last_ms, tempo))

    def tick_to_ms(self, tick: int) -> float:
        seg = self.segments[0]
        for candidate in self.segments:
            if candidate[0] <= tick:
                seg = candidate
            else:
                break
        start_tick, start_ms, tempo = seg
        return start_ms + (tick - start_tick) * tempo / (self.division * 1000.0)


def parse_midi(data: bytes) -> NoteList:
    """Decode an SMF byte stream into a NoteList on one millisecond timeline.

    Format 0 and 1 files are supported. Tempo changes apply globally
    regardless of which track holds them. A note-on with velocity 0 counts
    as a note-off, running status is honored, and channel-10 (percussion)
    notes are dropped. A note still sounding at its track's end is closed
    there and recorded in ``warnings``.

    Raises MalformedFile for anything that is not a decodable format-0/1 file.
    """
    reader = _Reader(data)
    if reader.read(4) != b"MThd":
        raise MalformedFile("bad magic: file does not start with MThd")
    header_len = reader.read_u32()
    if header_len < 6:
        raise MalformedFile(f"MThd length {header_len} < 6")
    fmt = reader.read_u16()
    n_tracks = reader.read_u16()
    division = reader.read_u16()
    reader.read(header_len - 6)  # skip any header extension bytes
    if fmt not in (0, 1):
        raise MalformedFile(f"unsupported SMF format {fmt} (only 0 and 1)")
    if fmt == 0 and n_tracks != 1:
        raise MalformedFile(f"format 0 file declares {n_tracks} tracks")
    if n_tracks == 0:
        raise MalformedFile("file declares zero tracks")

    smpte = bool(division & 0x8000)
    if smpte:
        fps = 256 - (division >> 8)  # stored as negative two's complement
        ticks_per_frame = division & 0xFF
        ticks_per_second = fps * ticks_per_frame
        if ticks_per_second == 0:
            raise MalformedFile("SMPTE division with zero ticks per second")
    elif division == 0:
        raise MalformedFile("division of zero ticks per quarter note")

    tracks = []
    for i in range(n_tracks):
        while True:  # skip unknown chunk types, as the SMF spec requires
            chunk_type = reader.read(4)
            chunk_len = reader.read_u32()
            if reader.remaining() < chunk_len:
                raise MalformedFile(
                    f"chunk declares {chunk_len} bytes but only {reader.remaining()} remain"
                )
            if chunk_type == b"MTrk":
                break
            reader.pos += chunk_len
        body = _Reader(reader.data, reader.pos, reader.pos + chunk_len)
        tracks.append(_parse_track(body, i))
        reader.pos += chunk_len

    tempo_events = []
    for events, _end_tick in tracks:
        tempo_events.extend((t, v) for t, kind, v in events if kind == "tempo")
    if smpte:
        to_ms = lambda tick: tick * 1000.0 / ticks_per_second  # noqa: E731
    else:
        tempo_map = _TempoMap(tempo_events, division)
        to_ms = tempo_map.tick_to_ms

    notes: list[NoteEvent] = []
    warnings: list[str] = []
    for track_index, (events, end_tick) in enumerate(tracks):
        open_notes: dict[tuple[int, int], list[int]] = {}
        for tick, kind, payload in events:
            if kind == "on":
                channel, pitch, _velocity = payload
                if channel == PERCUSSION_CHANNEL:
                    continue
                open_notes.setdefault((channel, pitch), []).append(tick)
            elif kind == "off":
                channel, pitch = payload
                if channel == PERCUSSION_CHANNEL:
                    continue
                stack = open_notes.get((channel, pitch))
                if not stack:
                    continue  # unmatched note-off: ignore
                start = stack.pop(0)
                _append_note(notes, pitch, to_ms(start), to_ms(tick))
        for (channel, pitch), starts in sorted(open_notes.items()):
            for start in starts:
                warnings.append(
                    f"track {track_index}: note-on pitch {pitch} channel {channel} "
                    f"never closed, ended at track end"
                )
                _append_note(notes, pitch, to_ms(start), to_ms(end_tick))

    notes.sort(key=lambda n: (n.onset_ms, n.pitch))
    return NoteList(notes=notes, warnings=warnings)


def _append_note(notes: list[NoteEvent], pitch: int, start_ms: float, end_ms: float) -> None:
    onset = round(start_ms)
    duration = max(1, round(end_ms) - onset)
    notes.append(NoteEvent(pitch=pitch, onset_ms=onset, duration_ms=duration))


def _vlq(value: int) -> bytes:
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append((value & 0x7F) | 0x80)
        value >>= 7
    return bytes(reversed(out))


def write_midi(notes: NoteList | list[NoteEvent]) -> bytes:
    """Encode notes as a format-0 SMF (division 480, tempo 500000, velocity 80)."""
    items = list(notes)
    # 480 ticks per quarter at 500000 us/quarter -> 0.96 ticks per ms
    def ms_to_tick(ms: int) -> int:
        return round(ms * WRITE_DIVISION * 1000 / DEFAULT_TEMPO_US)

    moments: list[tuple[int, int, int, int]] = []  # (tick, order, pitch, on)
    for note in items:
        moments.append((ms_to_tick(note.onset_ms), 1, note.pitch, 1))
        moments.append((ms_to_tick(note.end_ms), 0, note.pitch, 0))
    moments.sort()  # offs before ons at the same tick, so repeats re-articulate

    body = bytearray()
    body += _vlq(0) + bytes([0xFF, 0x51, 0x03]) + DEFAULT_TEMPO_US.to_bytes(3, "big")
    last_tick = 0
    for tick, _order, pitch, on in moments:
        body += _vlq(tick - last_tick)
        last_tick = tick
        if on:
            body += bytes([0x90, pitch, WRITE_VELOCITY])
        else:
            body += bytes([0x80, pitch, 0])
    body += _vlq(0) + bytes([0xFF, 0x2F, 0x00])

    header = b"MThd" + (6).to_bytes(4, "big") + (0).to_bytes(2, "big")
    header += (1).to_bytes(2, "big") + WRITE_DIVISION.to_bytes(2, "big")
    return header + b"MTrk" + len(body).to_bytes(4, "big") + bytes(body)
