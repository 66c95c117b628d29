"""In-process streaming pipeline on a virtual clock.

Mirrors the socket path (client pacing, splitter, one serial backend per
stream, latency model) without sockets or sleeping, so whole experiment
grids run deterministically in seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import SAMPLE_RATE
from .asr import LatencyModel, Transcriber, apply_latency
from .audio import AudioClip, AudioFragment
from .merge import RollingTranscript, TranscriptEvent, dedup_repetition_artifact, merge_transcription
from .splitter import FeedbackHistory, SplitterConfig

CHUNK_MS = 100


@dataclass(frozen=True)
class MergeParams:
    n_words: int = 7
    words_checked: int = 2


class VirtualClock:
    """Logical milliseconds; advances only when told to."""

    def __init__(self, start_ms: float = 0.0):
        self.now_ms = start_ms

    def advance_to(self, t_ms: float) -> float:
        self.now_ms = max(self.now_ms, t_ms)
        return self.now_ms


@dataclass
class StreamResult:
    events: list[TranscriptEvent]
    raw_events: list[TranscriptEvent]
    transcript: str
    fragments: list[AudioFragment] = field(default_factory=list)
    rolling: Optional[RollingTranscript] = None
    partial: bool = False


def paced_chunks(samples, chunk_ms: int = CHUNK_MS):
    """Yield ``(chunk, ts_ms)`` where ``ts_ms`` is when the chunk's last sample exists."""
    step = SAMPLE_RATE * chunk_ms // 1000
    for start in range(0, len(samples), step):
        chunk = samples[start : start + step]
        yield chunk, math.ceil((start + len(chunk)) * 1000 / SAMPLE_RATE)


def split_stream(clip: AudioClip, cfg: SplitterConfig, chunk_ms: int = CHUNK_MS) -> list[AudioFragment]:
    """All fragments the client would send, stamped with their release time."""
    splitter = cfg.build()
    out = []
    end_ms = 0
    for chunk, ts in paced_chunks(clip.samples, chunk_ms):
        out.extend(splitter.push(chunk, now_ms=ts))
        end_ms = ts
    tail = splitter.flush(now_ms=end_ms)
    if tail is not None:
        out.append(tail)
    return out


def assemble_events(
    raw: Sequence[TranscriptEvent], feedback: bool, merge: MergeParams = MergeParams()
) -> tuple[list[TranscriptEvent], str, Optional[RollingTranscript]]:
    """Dedup raw responses, merge feedback windows, and build the final transcript."""
    kept = dedup_repetition_artifact(list(raw), key=lambda e: e.text)
    if not feedback:
        events = [TranscriptEvent.plain(e.seq, e.text, e.arrival_ts_ms, emit_ts_ms=e.emit_ts_ms,
                                        duration_s=e.duration_s, error=e.error) for e in kept]
        return events, " ".join(e.text for e in kept if e.text), None
    rolling = RollingTranscript(n_words=merge.n_words, words_checked=merge.words_checked)
    events = []
    for e in kept:
        res = merge_transcription(rolling, e.text, e.arrival_ts_ms)
        rolling = res.merged
        events.append(TranscriptEvent(e.seq, e.text, e.arrival_ts_ms, res.appended, e.emit_ts_ms, e.duration_s, e.error))
    return events, rolling.text, rolling


def simulate_stream(
    clip: AudioClip,
    cfg: SplitterConfig,
    backend: Transcriber,
    latency: LatencyModel,
    *,
    merge: MergeParams = MergeParams(),
    chunk_ms: int = CHUNK_MS,
    d_t_ms: float = 0.0,
) -> StreamResult:
    """Stream ``clip`` through the splitter and a serial backend on a virtual clock.

    A fragment reaches the backend ``d_t_ms`` after release, waits for the
    previous fragment to finish, then takes ``latency(duration)`` of the
    audio actually transcribed (the whole window in feedback mode).
    """
    history = FeedbackHistory(cfg.feedback) if cfg.kind == "feedback" else None
    server = VirtualClock()
    raw, sent = [], []
    for frag in split_stream(clip, cfg, chunk_ms):
        unit = history.window(frag) if history else frag
        server.advance_to(frag.emit_ts_ms + d_t_ms)
        finish = round(server.advance_to(server.now_ms + apply_latency(latency, unit.duration_s)))
        text = backend.transcribe(unit)
        raw.append(TranscriptEvent(frag.seq, text, finish, [], frag.emit_ts_ms, unit.duration_s))
        sent.append(unit)
    events, transcript, rolling = assemble_events(raw, history is not None, merge)
    return StreamResult(events, raw, transcript, sent, rolling)
