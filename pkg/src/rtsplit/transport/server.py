"""ASR cluster endpoint: one backend instance and one serial worker per connection."""

from __future__ import annotations

import asyncio
import itertools
import logging
from typing import Callable, Optional, Union

from .. import SAMPLE_RATE
from ..asr import LatencyModel, Transcriber, apply_latency
from ..audio import AudioFragment
from ..errors import ProtocolError
from ..splitter import FeedbackHistory, FeedbackSplitterConfig
from .protocol import (
    FrameKind,
    audio_samples,
    encode_frame,
    end_frame,
    json_payload,
    read_frame,
    transcript_frame,
)

log = logging.getLogger(__name__)

_conn_ids = itertools.count(1)


def parse_addr(addr: Union[str, tuple]) -> tuple[str, int]:
    if isinstance(addr, tuple):
        return addr[0], int(addr[1])
    host, _, port = addr.rpartition(":")
    return host or "127.0.0.1", int(port)


class _Connection:
    def __init__(self, reader, writer, backend: Transcriber, latency: Optional[LatencyModel], time_scale: float):
        self.id = next(_conn_ids)
        self.reader, self.writer = reader, writer
        self.backend = backend
        self.latency = latency
        self.time_scale = time_scale
        self.feedback: Optional[FeedbackSplitterConfig] = None
        self.queue: asyncio.Queue = asyncio.Queue()
        self.loop = asyncio.get_running_loop()
        self.t0 = self.loop.time()
        self.audio_seen = False

    def now_ms(self) -> int:
        return int((self.loop.time() - self.t0) * 1000 * self.time_scale)

    def configure(self, options: dict) -> None:
        if self.audio_seen:
            raise ProtocolError("Config frame after audio")
        if options.get("time_scale") is not None:
            if options["time_scale"] <= 0:
                raise ProtocolError("time_scale must be positive")
            self.time_scale = float(options["time_scale"])
            self.t0 = self.loop.time()
        if options.get("feedback_window_s") is not None:
            self.feedback = FeedbackSplitterConfig(
                float(options.get("interval_s", 2.0)), float(options["feedback_window_s"])
            )

    async def work(self) -> None:
        history = FeedbackHistory(self.feedback) if self.feedback else None
        offset = 0
        while True:
            frame = await self.queue.get()
            if frame is None:
                return
            samples = audio_samples(frame)
            fragment = AudioFragment(samples, frame.seq, offset / SAMPLE_RATE, self.now_ms())
            offset += len(samples)
            unit = history.window(fragment) if history else fragment
            started = self.loop.time()
            error = None
            try:
                text = await asyncio.to_thread(self.backend.transcribe, unit)
            except Exception as exc:  # reported to the client, stream goes on
                log.warning("conn %d: backend failed on seq %d: %s", self.id, frame.seq, exc)
                text, error = "", str(exc)
            if self.latency is not None:
                budget = apply_latency(self.latency, unit.duration_s) / 1000 / self.time_scale
                remaining = budget - (self.loop.time() - started)
                if remaining > 0:
                    await asyncio.sleep(remaining)
            self.writer.write(encode_frame(transcript_frame(frame.seq, text, self.now_ms(), error)))
            await self.writer.drain()

    async def run(self) -> None:
        worker = None
        clean = False
        try:
            while True:
                frame = await read_frame(self.reader)
                if frame is None:
                    break
                if frame.kind is FrameKind.CONFIG:
                    self.configure(json_payload(frame))
                elif frame.kind is FrameKind.AUDIO:
                    if worker is None:
                        worker = asyncio.create_task(self.work())
                    self.audio_seen = True
                    self.queue.put_nowait(frame)
                elif frame.kind is FrameKind.END:
                    clean = True
                    break
                else:
                    raise ProtocolError(f"unexpected {frame.kind.name} frame from client")
            if clean:
                if worker is not None:
                    self.queue.put_nowait(None)
                    await worker
                self.writer.write(encode_frame(end_frame()))
                await self.writer.drain()
            else:
                log.info("conn %d dropped by peer; discarding backend instance", self.id)
        except (ProtocolError, ValueError) as exc:
            log.warning("conn %d: protocol error: %s", self.id, exc)
        except (ConnectionError, asyncio.IncompleteReadError):
            log.info("conn %d: connection lost", self.id)
        finally:
            if worker is not None and not worker.done():
                worker.cancel()
            self.writer.close()
            try:
                await self.writer.wait_closed()
            except (ConnectionError, OSError):
                pass


async def serve(
    bind_addr,
    backend_factory: Callable[[], Transcriber],
    latency_model: Optional[LatencyModel] = None,
    *,
    time_scale: float = 1.0,
) -> asyncio.AbstractServer:
    """Start listening; every accepted connection gets ``backend_factory()``.

    ``latency_model=None`` adds no simulated processing delay (for live
    engines whose own runtime is the processing delay).
    """
    host, port = parse_addr(bind_addr)

    async def handle(reader, writer):
        await _Connection(reader, writer, backend_factory(), latency_model, time_scale).run()

    server = await asyncio.start_server(handle, host, port)
    log.info("listening on %s", ", ".join(str(s.getsockname()) for s in server.sockets))
    return server
