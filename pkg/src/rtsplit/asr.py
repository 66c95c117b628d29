"""Transcription backends and the processing-delay model."""

from __future__ import annotations

import math
import os
import shlex
import subprocess
import tempfile
import time
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

from . import SAMPLE_RATE
from .audio import AudioClip, AudioFragment, Timeline, to_samples, wav_write
from .errors import BackendUnavailable, DegenerateFit


class Transcriber(Protocol):
    """One instance serves exactly one stream; fragments arrive in stream order."""

    def transcribe(self, fragment: AudioFragment) -> str: ...


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def mock_transcribe(fragment: AudioFragment, timeline: Timeline) -> str:
    """Deterministic stand-in for ASR that reads words off the ground truth.

    Words fully inside the fragment come out verbatim. A word cut by a
    fragment boundary keeps a share of its characters proportional to the
    overlap when at least half of it is inside (its head for a cut at the
    fragment end, its tail for a cut at the start); otherwise it is lost.
    """
    a = fragment.start_sample
    b = a + len(fragment.samples)
    out = []
    for w in timeline:
        ws, we = to_samples(w.start_s), to_samples(w.end_s)
        lo, hi = max(a, ws), min(b, we)
        if hi <= lo:
            continue
        if ws >= a and we <= b:
            out.append(w.word)
            continue
        f = (hi - lo) / (we - ws)
        if f < 0.5:
            continue
        n = _round_half_up(f * len(w.word))
        if n <= 0:
            continue
        out.append(w.word[-n:] if ws < a and we <= b else w.word[:n])
    return " ".join(out)


class MockTranscriber:
    def __init__(self, timeline: Timeline):
        self.timeline = timeline
        self.calls = 0

    def transcribe(self, fragment: AudioFragment) -> str:
        self.calls += 1
        return mock_transcribe(fragment, self.timeline)


@dataclass(frozen=True)
class LatencyModel:
    intercept_ms: float
    slope_ms_per_s: float
    residual_ss: float = 0.0

    def __post_init__(self):
        if self.intercept_ms < 0 or self.slope_ms_per_s < 0:
            raise ValueError("latency model coefficients must be non-negative")

    def __call__(self, duration_s: float) -> float:
        return apply_latency(self, duration_s)


def apply_latency(model: LatencyModel, fragment_duration_s: float) -> float:
    if fragment_duration_s < 0:
        raise ValueError("duration must be non-negative")
    return model.intercept_ms + model.slope_ms_per_s * fragment_duration_s


def fit_latency_model(points: Sequence[tuple[float, float]]) -> LatencyModel:
    """Least-squares affine fit of processing delay (ms) against duration (s)."""
    xs = [float(x) for x, _ in points]
    ys = [float(y) for _, y in points]
    if len(set(xs)) < 2:
        raise DegenerateFit("need at least two distinct durations")
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    slope = sxy / sxx
    intercept = my - slope * mx
    resid = sum((y - intercept - slope * x) ** 2 for x, y in zip(xs, ys))
    # a negative coefficient would mean faster processing for longer audio; clamp
    return LatencyModel(max(intercept, 0.0), max(slope, 0.0), resid)


# processing delay per segment duration, whisper.cpp on CPU
TABLE_III = {
    "tiny": [(2, 503), (3, 517), (5, 548), (10, 608)],
    "base": [(2, 1042), (3, 1072), (5, 1089), (10, 1132)],
}
LATENCY_PRESETS = {name: fit_latency_model(pts) for name, pts in TABLE_III.items()}


def latency_preset(name: str) -> LatencyModel:
    try:
        return LATENCY_PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown latency preset {name!r}; choose from {sorted(LATENCY_PRESETS)}") from None


@dataclass
class ExternalAdapterConfig:
    command: str
    timeout_s: float = 60.0


class ExternalTranscriber:
    """Runs an external engine per fragment: ``<command> <fragment.wav>`` -> text on stdout."""

    def __init__(self, config: ExternalAdapterConfig):
        self.config = config
        self.last_elapsed_ms: Optional[float] = None

    def transcribe(self, fragment: AudioFragment) -> str:
        return external_transcribe(fragment, self.config, self)


def external_transcribe(fragment: AudioFragment, adapter_config: ExternalAdapterConfig, _stats=None) -> str:
    argv = shlex.split(adapter_config.command)
    fd, path = tempfile.mkstemp(suffix=".wav")
    os.close(fd)
    try:
        wav_write(AudioClip(fragment.samples), path)
        t0 = time.perf_counter()
        try:
            proc = subprocess.run(
                argv + [path], capture_output=True, timeout=adapter_config.timeout_s, check=False
            )
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise BackendUnavailable(f"{argv[0] if argv else '<empty>'}: {exc}") from exc
        elapsed = (time.perf_counter() - t0) * 1000.0
        if _stats is not None:
            _stats.last_elapsed_ms = elapsed
        if proc.returncode != 0:
            err = proc.stderr.decode("utf-8", "replace").strip()
            raise BackendUnavailable(f"{argv[0]} exited with {proc.returncode}: {err}")
        return proc.stdout.decode("utf-8", "replace").strip()
    finally:
        os.unlink(path)


def whole_clip_fragment(clip: AudioClip) -> AudioFragment:
    return AudioFragment(clip.samples, 0, 0.0, int(math.ceil(len(clip.samples) * 1000 / SAMPLE_RATE)))
