"""Wire format: 1-byte kind, u32 LE seq, u32 LE payload length, payload."""

from __future__ import annotations

import asyncio
import enum
import json
import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import IncompleteFrame, ProtocolError

HEADER = struct.Struct("<BII")
HEADER_SIZE = HEADER.size
MAX_PAYLOAD = 16 * 1024 * 1024
MAX_SEQ = 2**32 - 1


class FrameKind(enum.IntEnum):
    AUDIO = 0x01
    TRANSCRIPT = 0x02
    END = 0x03
    CONFIG = 0x04


@dataclass(frozen=True)
class Frame:
    kind: FrameKind
    seq: int
    payload: bytes = b""


def encode_frame(frame: Frame) -> bytes:
    if not 0 <= frame.seq <= MAX_SEQ:
        raise ValueError(f"seq {frame.seq} does not fit in 32 bits")
    if len(frame.payload) > MAX_PAYLOAD:
        raise ValueError(f"payload of {len(frame.payload)} bytes exceeds {MAX_PAYLOAD}")
    return HEADER.pack(int(frame.kind), frame.seq, len(frame.payload)) + bytes(frame.payload)


def _parse_header(header: bytes) -> tuple[FrameKind, int, int]:
    kind, seq, length = HEADER.unpack(header)
    try:
        kind = FrameKind(kind)
    except ValueError:
        raise ProtocolError(f"unknown frame kind 0x{kind:02x}") from None
    if length > MAX_PAYLOAD:
        raise ProtocolError(f"payload length {length} exceeds {MAX_PAYLOAD}")
    return kind, seq, length


def decode_prefix(data: bytes) -> tuple[Frame, int]:
    """Decode the first frame in ``data``; returns it with the bytes consumed."""
    if len(data) < HEADER_SIZE:
        raise IncompleteFrame(HEADER_SIZE - len(data))
    kind, seq, length = _parse_header(bytes(data[:HEADER_SIZE]))
    end = HEADER_SIZE + length
    if len(data) < end:
        raise IncompleteFrame(end - len(data))
    return Frame(kind, seq, bytes(data[HEADER_SIZE:end])), end


def decode_frame(data: bytes) -> Frame:
    frame, used = decode_prefix(data)
    if used != len(data):
        raise ProtocolError(f"{len(data) - used} trailing bytes after frame")
    return frame


class FrameDecoder:
    """Incremental decoder for a byte stream."""

    def __init__(self):
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[Frame]:
        self._buf.extend(data)
        out = []
        while True:
            try:
                frame, used = decode_prefix(self._buf)
            except IncompleteFrame:
                return out
            del self._buf[:used]
            out.append(frame)

    @property
    def pending(self) -> int:
        return len(self._buf)


async def read_frame(reader: asyncio.StreamReader) -> Optional[Frame]:
    """Next frame, or None on a clean EOF between frames."""
    try:
        header = await reader.readexactly(HEADER_SIZE)
    except asyncio.IncompleteReadError as exc:
        if not exc.partial:
            return None
        raise ProtocolError("connection closed inside a frame header") from exc
    kind, seq, length = _parse_header(header)
    try:
        payload = await reader.readexactly(length) if length else b""
    except asyncio.IncompleteReadError as exc:
        raise ProtocolError("connection closed inside a frame payload") from exc
    return Frame(kind, seq, payload)


def audio_frame(seq: int, samples) -> Frame:
    return Frame(FrameKind.AUDIO, seq, np.asarray(samples, dtype="<i2").tobytes())


def audio_samples(frame: Frame) -> np.ndarray:
    if len(frame.payload) % 2:
        raise ProtocolError("audio payload holds a partial sample")
    return np.frombuffer(frame.payload, dtype="<i2").astype(np.int16)


def transcript_frame(seq: int, text: str, server_ts_ms: int, error: Optional[str] = None) -> Frame:
    body = {"seq": seq, "text": text, "server_ts_ms": server_ts_ms}
    if error is not None:
        body["error"] = error
    return Frame(FrameKind.TRANSCRIPT, seq, json.dumps(body).encode("utf-8"))


def json_payload(frame: Frame) -> dict:
    try:
        return json.loads(frame.payload.decode("utf-8")) if frame.payload else {}
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"bad JSON payload in {frame.kind.name} frame") from exc


def config_frame(**options) -> Frame:
    return Frame(FrameKind.CONFIG, 0, json.dumps(options).encode("utf-8"))


def end_frame(seq: int = 0) -> Frame:
    return Frame(FrameKind.END, seq)
