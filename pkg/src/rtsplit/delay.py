"""End-to-end delay measurement, summaries and quality/delay dominance."""

from __future__ import annotations

import enum
import string
from dataclasses import dataclass
from statistics import fmean
from typing import Optional, Sequence

from .audio import Timeline
from .merge import TranscriptEvent


class Classification(enum.Enum):
    FOUND = "found"
    WORD_NOT_FOUND = "word_not_found"
    CONTEXT_NOT_FOUND = "context_not_found"
    FALSE_POSITIVE = "false_positive"


@dataclass(frozen=True)
class DelayBreakdown:
    d_s: float
    d_p: float
    d_t: float

    @property
    def d_total(self) -> float:
        return self.d_s + self.d_p + self.d_t

    @classmethod
    def decompose(cls, ref_time_ms: float, emit_ts_ms: float, arrival_ts_ms: float, d_t: float = 0.0):
        """Split a word delay into buffering, processing (incl. queueing) and transmission."""
        return cls(emit_ts_ms - ref_time_ms, arrival_ts_ms - emit_ts_ms - d_t, d_t)


@dataclass(frozen=True)
class DelayMeasurement:
    word: str
    ref_time_s: float
    classification: Classification
    arrival_ts_ms: Optional[int] = None
    delay_ms: Optional[float] = None
    event_index: Optional[int] = None
    breakdown: Optional[DelayBreakdown] = None


@dataclass(frozen=True)
class SearchParams:
    search_width: int = 10
    widen_step: int = 5
    context_radius: int = 2

    def __post_init__(self):
        if min(self.search_width, self.widen_step, self.context_radius) < 1:
            raise ValueError("search parameters must all be >= 1")


def _norm(token: str) -> str:
    return token.casefold().strip(string.punctuation)


def _event_tokens(event: TranscriptEvent) -> list[tuple[str, int]]:
    out = []
    for w in event.stable_words():
        t = _norm(w.token)
        if t:
            out.append((t, w.arrival_ts_ms))
    return out


def _find_in_context(tokens: list[tuple[str, int]], pattern: list[str]) -> Optional[int]:
    """Arrival stamp of the first word of the first contiguous occurrence of ``pattern``."""
    words = [t for t, _ in tokens]
    k = len(pattern)
    for p in range(len(words) - k + 1):
        if words[p : p + k] == pattern:
            return tokens[p][1]
    return None


def measure_delays(
    ref: Timeline,
    events: Sequence[TranscriptEvent],
    params: SearchParams = SearchParams(),
    stream_start_ts_ms: float = 0,
    d_t_ms: float = 0.0,
) -> list[DelayMeasurement]:
    """Delay of the first word of every reference segment.

    Hypothesis segments are the events, searched in a sliding window that
    starts at the last matched event. A word only counts when it occurs
    together with its context: the next ``context_radius`` reference words
    of the same segment, contiguous after it. A miss widens the
    window for the following words until the next match resets it.
    Replaced words never take part in the search.
    """
    hyp = [_event_tokens(e) for e in events]
    measures = []
    search_index, width = 0, params.search_width
    r = params.context_radius
    for segment in ref.segments():
        target = segment[0]
        seg_words = [_norm(w.word) for w in segment]
        pattern = seg_words[: 1 + r]
        ref_ms = target.start_s * 1000.0

        result = None
        word_seen = False
        for e in range(search_index, min(len(hyp), search_index + width)):
            if seg_words[0] not in (t for t, _ in hyp[e]):
                continue
            word_seen = True
            arrival = _find_in_context(hyp[e], pattern)
            if arrival is None:
                continue
            delay = arrival - stream_start_ts_ms - ref_ms
            if delay < 0:
                result = DelayMeasurement(target.word, target.start_s, Classification.FALSE_POSITIVE, arrival, delay, e)
            else:
                emit = events[e].emit_ts_ms
                breakdown = None
                if emit is not None:
                    breakdown = DelayBreakdown.decompose(ref_ms, emit - stream_start_ts_ms, arrival - stream_start_ts_ms, d_t_ms)
                result = DelayMeasurement(target.word, target.start_s, Classification.FOUND, arrival, delay, e, breakdown)
                search_index, width = e, params.search_width
            break

        if result is None:
            cls = Classification.CONTEXT_NOT_FOUND if word_seen else Classification.WORD_NOT_FOUND
            result = DelayMeasurement(target.word, target.start_s, cls)
            width += params.widen_step
        measures.append(result)
    return measures


@dataclass(frozen=True)
class DelaySummary:
    mean_delay_ms: Optional[float]
    n_found: int
    n_word_not_found: int
    n_context_not_found: int
    n_false_positive: int

    @property
    def n_searched(self) -> int:
        return self.n_found + self.n_word_not_found + self.n_context_not_found + self.n_false_positive


def summarize_delays(measures: Sequence[DelayMeasurement]) -> DelaySummary:
    counts = {c: 0 for c in Classification}
    for m in measures:
        counts[m.classification] += 1
    found = [m.delay_ms for m in measures if m.classification is Classification.FOUND]
    return DelaySummary(
        fmean(found) if found else None,
        counts[Classification.FOUND],
        counts[Classification.WORD_NOT_FOUND],
        counts[Classification.CONTEXT_NOT_FOUND],
        counts[Classification.FALSE_POSITIVE],
    )


def _get(c, name: str):
    return c[name] if isinstance(c, dict) else getattr(c, name)


def dominates(c1, c2) -> bool:
    """True iff ``c1`` has strictly lower WER and strictly lower total delay than ``c2``.

    Both combinations must come from the same hardware and transmission
    setup; checking that is left to the caller.
    """
    w1, w2 = _get(c1, "quality_wer"), _get(c2, "quality_wer")
    d1, d2 = _get(c1, "delay_ms"), _get(c2, "delay_ms")
    if None in (w1, w2, d1, d2):
        return False
    return w1 < w2 and d1 < d2
