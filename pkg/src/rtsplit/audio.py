"""PCM audio containers, WAV I/O, word timelines and the synthetic test corpus."""

from __future__ import annotations

import wave
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from . import SAMPLE_RATE
from .errors import InvalidTimeline, MalformedAudio, UnsupportedFormat

SAMPLE_WIDTH = 2
CHANNELS = 1
TONE_HZ = 440.0


def to_samples(seconds: float) -> int:
    """Nearest sample index for a time offset in seconds."""
    return int(round(seconds * SAMPLE_RATE))


def as_pcm(samples) -> np.ndarray:
    arr = np.asarray(samples)
    if arr.dtype != np.int16:
        if arr.size and (arr.min() < -32768 or arr.max() > 32767):
            raise MalformedAudio("sample value outside the signed 16-bit range")
        arr = arr.astype(np.int16)
    return arr.reshape(-1)


@dataclass(frozen=True, eq=False)
class AudioClip:
    samples: np.ndarray
    sample_rate_hz: int = SAMPLE_RATE
    channels: int = CHANNELS

    def __post_init__(self):
        if self.sample_rate_hz != SAMPLE_RATE:
            raise UnsupportedFormat("sample_rate_hz", self.sample_rate_hz, SAMPLE_RATE)
        if self.channels != CHANNELS:
            raise UnsupportedFormat("channels", self.channels, CHANNELS)
        object.__setattr__(self, "samples", as_pcm(self.samples))

    @property
    def duration_s(self) -> float:
        return len(self.samples) / SAMPLE_RATE

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True, eq=False)
class AudioFragment:
    samples: np.ndarray
    seq: int
    capture_start_s: float
    emit_ts_ms: int

    def __post_init__(self):
        object.__setattr__(self, "samples", as_pcm(self.samples))
        if self.capture_start_s < 0:
            raise ValueError("capture_start_s must be non-negative")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / SAMPLE_RATE

    @property
    def capture_end_s(self) -> float:
        return self.capture_start_s + self.duration_s

    @property
    def start_sample(self) -> int:
        return to_samples(self.capture_start_s)


def duration_from_size(byte_size: int) -> Fraction:
    """Seconds of 16 kHz, 16-bit mono audio held in ``byte_size`` bytes.

    Returned as a ``Fraction`` so that ``duration * 16000`` recovers the
    sample count exactly; call ``float()`` for display.
    """
    if byte_size < 0 or byte_size % SAMPLE_WIDTH:
        raise MalformedAudio(f"byte size {byte_size} is not a whole number of 16-bit samples")
    return Fraction(byte_size * 8, SAMPLE_RATE) / 16


def wav_read(path) -> AudioClip:
    try:
        with wave.open(str(path), "rb") as wf:
            if wf.getnchannels() != CHANNELS:
                raise UnsupportedFormat("channels", wf.getnchannels(), CHANNELS)
            if wf.getsampwidth() != SAMPLE_WIDTH:
                raise UnsupportedFormat("bits_per_sample", wf.getsampwidth() * 8, 16)
            if wf.getframerate() != SAMPLE_RATE:
                raise UnsupportedFormat("sample_rate_hz", wf.getframerate(), SAMPLE_RATE)
            raw = wf.readframes(wf.getnframes())
    except wave.Error as exc:
        # the stdlib reader only accepts format code 1 (PCM)
        if "unknown format" in str(exc):
            raise UnsupportedFormat("format_code", str(exc).split(":")[-1].strip(), 1) from exc
        raise MalformedAudio(str(exc)) from exc
    except EOFError as exc:
        raise MalformedAudio("truncated WAV header") from exc
    if len(raw) % SAMPLE_WIDTH:
        raise MalformedAudio("data chunk holds a partial sample")
    return AudioClip(np.frombuffer(raw, dtype="<i2").astype(np.int16))


def wav_write(clip: AudioClip, path) -> None:
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(CHANNELS)
        wf.setsampwidth(SAMPLE_WIDTH)
        wf.setframerate(SAMPLE_RATE)
        wf.writeframes(clip.samples.astype("<i2").tobytes())


@dataclass(frozen=True)
class WordTiming:
    word: str
    start_s: float
    end_s: float
    segment_id: int = 0

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclass(frozen=True)
class Timeline:
    entries: tuple[WordTiming, ...] = field(default_factory=tuple)

    def __post_init__(self):
        entries = tuple(self.entries)
        object.__setattr__(self, "entries", entries)
        last_end: dict[int, float] = {}
        prev_start = float("-inf")
        for w in entries:
            if not w.start_s < w.end_s:
                raise InvalidTimeline(f"word {w.word!r} has start {w.start_s} >= end {w.end_s}")
            if w.start_s < prev_start:
                raise InvalidTimeline(f"word {w.word!r} is out of start-time order")
            if w.start_s < last_end.get(w.segment_id, float("-inf")):
                raise InvalidTimeline(f"word {w.word!r} overlaps its predecessor in segment {w.segment_id}")
            prev_start = w.start_s
            last_end[w.segment_id] = w.end_s

    def __iter__(self) -> Iterator[WordTiming]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def end_s(self) -> float:
        return max((w.end_s for w in self.entries), default=0.0)

    def words(self) -> list[str]:
        return [w.word for w in self.entries]

    def segments(self) -> list[list[WordTiming]]:
        """Entries grouped by segment id, in order of first appearance."""
        groups: dict[int, list[WordTiming]] = {}
        for w in self.entries:
            groups.setdefault(w.segment_id, []).append(w)
        return list(groups.values())

    def shifted(self, offset_s: float) -> "Timeline":
        return Timeline(
            tuple(WordTiming(w.word, w.start_s + offset_s, w.end_s + offset_s, w.segment_id) for w in self.entries)
        )

    def check_disjoint(self) -> None:
        """Raise unless no two words overlap, regardless of segment."""
        for a, b in zip(self.entries, self.entries[1:]):
            if b.start_s < a.end_s:
                raise InvalidTimeline(f"words {a.word!r} and {b.word!r} overlap")


def read_timeline(path) -> Timeline:
    entries = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise InvalidTimeline(f"{path}:{lineno}: expected 4 tab-separated fields")
        seg, start, end, word = parts
        entries.append(WordTiming(word, float(start), float(end), int(seg)))
    return Timeline(tuple(entries))


def write_timeline(timeline: Timeline, path) -> None:
    lines = (f"{w.segment_id}\t{w.start_s:.3f}\t{w.end_s:.3f}\t{w.word}\n" for w in timeline)
    Path(path).write_text("".join(lines), encoding="utf-8")


def synth_corpus(
    timeline: Timeline,
    gap_profile: dict,
    *,
    tail_s: float = 0.0,
    seed: int = 0,
) -> AudioClip:
    """Render a timeline as tone bursts over a uniform noise floor.

    Every word span carries a 440 Hz sinusoid of peak ``amplitude``; all other
    samples are uniform noise in ``[-noise_floor, noise_floor]``.
    """
    amplitude = int(gap_profile["amplitude"])
    noise_floor = int(gap_profile.get("noise_floor", 0))
    if not amplitude > noise_floor >= 0:
        raise ValueError("need amplitude > noise_floor >= 0")
    if amplitude > 32767:
        raise ValueError("amplitude exceeds the 16-bit range")
    timeline.check_disjoint()

    n = int(np.ceil(round(timeline.end_s * SAMPLE_RATE, 6))) + to_samples(tail_s) if len(timeline) else 0
    rng = np.random.default_rng(seed)
    out = rng.integers(-noise_floor, noise_floor + 1, size=n).astype(np.int16)
    for w in timeline:
        a, b = to_samples(w.start_s), to_samples(w.end_s)
        t = np.arange(a, b) / SAMPLE_RATE
        tone = amplitude * np.sin(2 * np.pi * TONE_HZ * t)
        # quantize away from zero so a burst never carries less energy than the ideal sine
        out[a:b] = np.clip(np.sign(tone) * np.ceil(np.abs(tone)), -32768, 32767).astype(np.int16)
    return AudioClip(out)


def rms(samples) -> float:
    arr = np.asarray(samples, dtype=np.float64)
    if arr.size == 0:
        return 0.0
    return float(np.sqrt(np.mean(arr * arr)))


def concat(parts: Iterable[np.ndarray]) -> np.ndarray:
    parts = [np.asarray(p, dtype=np.int16) for p in parts]
    if not parts:
        return np.zeros(0, dtype=np.int16)
    return np.concatenate(parts)
