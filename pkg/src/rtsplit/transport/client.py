"""Native client: paces a clip through a splitter and streams fragments to the server."""

from __future__ import annotations

import asyncio
import logging
from typing import Optional

from ..audio import AudioClip
from ..errors import ProtocolError
from ..merge import TranscriptEvent
from ..splitter import SplitterConfig
from ..stream import CHUNK_MS, MergeParams, StreamResult, assemble_events, paced_chunks
from .protocol import FrameKind, audio_frame, config_frame, encode_frame, end_frame, json_payload, read_frame
from .server import parse_addr

log = logging.getLogger(__name__)


async def stream_clip(
    clip: AudioClip,
    splitter_config: SplitterConfig,
    server_addr,
    time_scale: float = 1.0,
    *,
    merge: MergeParams = MergeParams(),
    chunk_ms: int = CHUNK_MS,
    connect_timeout_s: float = 10.0,
) -> StreamResult:
    """Play ``clip`` in real time (scaled by ``time_scale``) against a running server.

    Timestamps are stream-time milliseconds since playback started.
    """
    if time_scale <= 0:
        raise ValueError("time_scale must be positive")
    host, port = parse_addr(server_addr)
    try:
        reader, writer = await asyncio.wait_for(asyncio.open_connection(host, port), connect_timeout_s)
    except (OSError, asyncio.TimeoutError) as exc:
        raise ConnectionError(f"cannot reach server at {host}:{port}: {exc}") from exc

    loop = asyncio.get_running_loop()
    fb = splitter_config.feedback
    writer.write(
        encode_frame(
            config_frame(
                time_scale=time_scale,
                interval_s=splitter_config.interval_s,
                feedback_window_s=fb.feedback_window_s if fb else None,
            )
        )
    )
    t0 = loop.time()

    def now_ms() -> int:
        return int((loop.time() - t0) * 1000 * time_scale)

    sent: dict[int, object] = {}
    raw: list[TranscriptEvent] = []
    state = {"partial": False}

    async def send() -> None:
        splitter = splitter_config.build()
        last = 0
        for chunk, ts in paced_chunks(clip.samples, chunk_ms):
            delay = t0 + ts / 1000 / time_scale - loop.time()
            if delay > 0:
                await asyncio.sleep(delay)
            last = ts
            for frag in splitter.push(chunk, now_ms=now_ms()):
                sent[frag.seq] = frag
                writer.write(encode_frame(audio_frame(frag.seq, frag.samples)))
            await writer.drain()
        tail = splitter.flush(now_ms=max(now_ms(), last))
        if tail is not None:
            sent[tail.seq] = tail
            writer.write(encode_frame(audio_frame(tail.seq, tail.samples)))
        writer.write(encode_frame(end_frame()))
        await writer.drain()

    async def receive() -> None:
        while True:
            try:
                frame = await read_frame(reader)
            except (ProtocolError, ConnectionError) as exc:
                log.warning("stream dropped: %s", exc)
                state["partial"] = True
                return
            if frame is None:
                state["partial"] = True
                return
            if frame.kind is FrameKind.END:
                return
            if frame.kind is not FrameKind.TRANSCRIPT:
                continue
            body = json_payload(frame)
            frag = sent.get(frame.seq)
            raw.append(
                TranscriptEvent(
                    frame.seq,
                    body.get("text", ""),
                    now_ms(),
                    [],
                    frag.emit_ts_ms if frag is not None else None,
                    frag.duration_s if frag is not None else None,
                    body.get("error"),
                )
            )

    receiver = asyncio.create_task(receive())
    try:
        await send()
    except (ConnectionError, OSError) as exc:
        log.warning("send failed: %s", exc)
        state["partial"] = True
    await receiver
    writer.close()
    try:
        await writer.wait_closed()
    except (ConnectionError, OSError):
        pass

    events, transcript, rolling = assemble_events(raw, fb is not None, merge)
    frags = [sent[k] for k in sorted(sent)]
    return StreamResult(events, raw, transcript, frags, rolling, state["partial"])


def client_stream(
    clip: AudioClip,
    splitter_config: SplitterConfig,
    server_addr,
    time_scale: float = 1.0,
    **kwargs,
) -> StreamResult:
    """Blocking wrapper around :func:`stream_clip`."""
    return asyncio.run(stream_clip(clip, splitter_config, server_addr, time_scale, **kwargs))
