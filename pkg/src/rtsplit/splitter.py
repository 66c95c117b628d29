"""Audio splitting strategies: fixed interval, energy VAD and the feedback window."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import SAMPLE_RATE
from .audio import AudioFragment, as_pcm, concat, rms


def _stream_ms(n_samples: int) -> int:
    # time at which the last pushed sample exists, rounded up to a whole ms
    return -(-n_samples * 1000 // SAMPLE_RATE)


class FixedSplitter:
    """Cut the stream into fragments of exactly ``interval_s`` seconds.

    Samples may arrive in chunks of any size; whatever does not fill a whole
    interval stays buffered until more audio arrives or the stream is flushed.
    """

    def __init__(self, interval_s: float = 2.0):
        self.interval_s = interval_s
        self.max_samples = int(round(SAMPLE_RATE * interval_s))
        if self.max_samples <= 0:
            raise ValueError("interval_s must be positive")
        self.buffer = np.zeros(0, dtype=np.int16)
        self.next_seq = 0
        self.consumed_samples = 0
        self.pushed_samples = 0

    @property
    def consumed_s(self) -> float:
        return self.consumed_samples / SAMPLE_RATE

    def _emit(self, samples: np.ndarray, now_ms: int) -> AudioFragment:
        frag = AudioFragment(samples, self.next_seq, self.consumed_samples / SAMPLE_RATE, now_ms)
        self.next_seq += 1
        self.consumed_samples += len(samples)
        return frag

    def push(self, samples, now_ms: Optional[int] = None) -> list[AudioFragment]:
        samples = as_pcm(samples)
        self.pushed_samples += len(samples)
        if now_ms is None:
            now_ms = _stream_ms(self.pushed_samples)
        self.buffer = np.concatenate([self.buffer, samples])
        out = []
        while len(self.buffer) >= self.max_samples:
            out.append(self._emit(self.buffer[: self.max_samples], now_ms))
            self.buffer = self.buffer[self.max_samples :]
        return out

    def flush(self, now_ms: Optional[int] = None) -> Optional[AudioFragment]:
        if not len(self.buffer):
            return None
        if now_ms is None:
            now_ms = _stream_ms(self.pushed_samples)
        frag = self._emit(self.buffer, now_ms)
        self.buffer = np.zeros(0, dtype=np.int16)
        return frag


class Mode(enum.Enum):
    SILENCE = "silence"
    VOICE = "voice"


class VadSplitter:
    """Two-state RMS energy voice activity detector.

    Audio is stored in both states. The mode flips after ``hangover_frames``
    consecutive frames disagree with it; the Voice -> Silence flip releases
    everything stored so far as one fragment.

    With ``energy_threshold=None`` the threshold is calibrated as
    ``calibration_factor`` times the RMS of the first ``calibration_ms`` of audio.
    """

    def __init__(
        self,
        frame_ms: int = 10,
        hangover_frames: int = 30,
        energy_threshold: Optional[float] = None,
        calibration_ms: int = 100,
        calibration_factor: float = 4.0,
    ):
        if frame_ms <= 0 or hangover_frames <= 0:
            raise ValueError("frame_ms and hangover_frames must be positive")
        self.frame_ms = frame_ms
        self.frame_len = SAMPLE_RATE * frame_ms // 1000
        self.hangover_frames = hangover_frames
        self.energy_threshold = energy_threshold
        self.calibration_frames = max(1, math.ceil(calibration_ms / frame_ms))
        self.calibration_factor = calibration_factor
        self.mode = Mode.SILENCE
        self.next_seq = 0
        self.transitions: list[tuple[Mode, int]] = []
        self._stored: list[np.ndarray] = []
        self._pending = np.zeros(0, dtype=np.int16)
        self._uncalibrated: list[np.ndarray] = []
        self._opposing = 0
        self._emitted_samples = 0
        self._analyzed_samples = 0
        self.pushed_samples = 0

    @property
    def buffered_samples(self) -> int:
        stored = sum(len(s) for s in self._stored) + sum(len(s) for s in self._uncalibrated)
        return stored + len(self._pending)

    def _release(self, now_ms: int, include_pending: bool = False) -> Optional[AudioFragment]:
        parts = self._uncalibrated + self._stored
        if include_pending:
            parts.append(self._pending)
            self._pending = np.zeros(0, dtype=np.int16)
        self._stored, self._uncalibrated = [], []
        samples = concat(parts)
        if not len(samples):
            return None
        frag = AudioFragment(samples, self.next_seq, self._emitted_samples / SAMPLE_RATE, now_ms)
        self.next_seq += 1
        self._emitted_samples += len(samples)
        return frag

    def _classify(self, frame: np.ndarray, now_ms: int) -> Optional[AudioFragment]:
        self._stored.append(frame)
        self._analyzed_samples += len(frame)
        voiced = rms(frame) > self.energy_threshold
        opposing = voiced if self.mode is Mode.SILENCE else not voiced
        self._opposing = self._opposing + 1 if opposing else 0
        if self._opposing < self.hangover_frames:
            return None
        self._opposing = 0
        self.mode = Mode.VOICE if self.mode is Mode.SILENCE else Mode.SILENCE
        self.transitions.append((self.mode, self._analyzed_samples))
        if self.mode is Mode.SILENCE:
            return self._release(now_ms)
        return None

    def push(self, samples, now_ms: Optional[int] = None) -> list[AudioFragment]:
        samples = as_pcm(samples)
        self.pushed_samples += len(samples)
        if now_ms is None:
            now_ms = _stream_ms(self.pushed_samples)
        data = np.concatenate([self._pending, samples])
        n_frames = len(data) // self.frame_len
        self._pending = data[n_frames * self.frame_len :]
        out = []
        for i in range(n_frames):
            frame = data[i * self.frame_len : (i + 1) * self.frame_len]
            if self.energy_threshold is None:
                self._uncalibrated.append(frame)
                if len(self._uncalibrated) < self.calibration_frames:
                    continue
                self.energy_threshold = self.calibration_factor * rms(concat(self._uncalibrated))
                backlog, self._uncalibrated = self._uncalibrated, []
                for f in backlog:
                    frag = self._classify(f, now_ms)
                    if frag is not None:
                        out.append(frag)
                continue
            frag = self._classify(frame, now_ms)
            if frag is not None:
                out.append(frag)
        return out

    def flush(self, now_ms: Optional[int] = None) -> Optional[AudioFragment]:
        if now_ms is None:
            now_ms = _stream_ms(self.pushed_samples)
        return self._release(now_ms, include_pending=True)


@dataclass(frozen=True)
class FeedbackSplitterConfig:
    interval_s: float = 2.0
    feedback_window_s: float = 4.0

    def __post_init__(self):
        if self.interval_s <= 0:
            raise ValueError("interval_s must be positive")
        if self.feedback_window_s < self.interval_s:
            raise ValueError("feedback_window_s must be >= interval_s")


def feedback_window(previous, new_fragment: AudioFragment, cfg: FeedbackSplitterConfig) -> AudioFragment:
    """Extend ``new_fragment`` backwards with stream history up to the feedback window.

    ``previous`` holds the stream samples that precede ``new_fragment``; only
    its tail is used.
    """
    max_samples = int(round(SAMPLE_RATE * cfg.feedback_window_s))
    frag = new_fragment.samples
    keep = max(0, min(len(previous), max_samples - len(frag)))
    head = as_pcm(previous)[len(previous) - keep :] if keep else np.zeros(0, dtype=np.int16)
    return AudioFragment(
        np.concatenate([head, frag]),
        new_fragment.seq,
        max(0.0, (new_fragment.start_sample - keep) / SAMPLE_RATE),
        new_fragment.emit_ts_ms,
    )


class FeedbackHistory:
    """Keeps just enough stream history to build feedback windows for one stream."""

    def __init__(self, cfg: FeedbackSplitterConfig):
        self.cfg = cfg
        self.max_samples = int(round(SAMPLE_RATE * cfg.feedback_window_s))
        self.history = np.zeros(0, dtype=np.int16)

    def window(self, fragment: AudioFragment) -> AudioFragment:
        out = feedback_window(self.history, fragment, self.cfg)
        self.history = out.samples[-self.max_samples :]
        return out


@dataclass(frozen=True)
class SplitterConfig:
    """Which splitter to run and its parameters, as selected on the command line."""

    kind: str = "fixed"
    interval_s: float = 2.0
    feedback_window_s: float = 4.0
    vad_frame_ms: int = 10
    vad_hangover_frames: int = 30
    vad_threshold: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("fixed", "vad", "feedback"):
            raise ValueError(f"unknown splitter kind {self.kind!r}")
        if self.kind == "feedback":
            FeedbackSplitterConfig(self.interval_s, self.feedback_window_s)

    @classmethod
    def parse(cls, name: str, **overrides) -> "SplitterConfig":
        """Build from a short name: ``fixed2``, ``fixed3``, ``vad``, ``feedback``."""
        if name.startswith("fixed") and name != "fixed":
            return cls(kind="fixed", **{**overrides, "interval_s": float(name[len("fixed") :])})
        return cls(kind=name, **overrides)

    @property
    def label(self) -> str:
        if self.kind == "fixed":
            return f"fixed{self.interval_s:g}"
        return self.kind

    @property
    def feedback(self) -> Optional[FeedbackSplitterConfig]:
        if self.kind != "feedback":
            return None
        return FeedbackSplitterConfig(self.interval_s, self.feedback_window_s)

    def build(self):
        if self.kind == "vad":
            return VadSplitter(self.vad_frame_ms, self.vad_hangover_frames, self.vad_threshold)
        # the feedback front end fragments at a fixed interval; windows are built downstream
        return FixedSplitter(self.interval_s)
