"""Stitching overlapping feedback transcriptions into one rolling transcript."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from .metrics import normalize


class Provenance(enum.Enum):
    STABLE = "stable"
    REPLACED = "replaced"


@dataclass(frozen=True)
class TranscriptWord:
    token: str
    arrival_ts_ms: int
    provenance: Provenance = Provenance.STABLE


@dataclass
class RollingTranscript:
    words: list[TranscriptWord] = field(default_factory=list)
    n_words: int = 7
    words_checked: int = 2

    def __post_init__(self):
        if not self.n_words >= self.words_checked >= 1:
            raise ValueError("need n_words >= words_checked >= 1")

    def __len__(self) -> int:
        return len(self.words)

    def tokens(self) -> list[str]:
        return [w.token for w in self.words]

    @property
    def text(self) -> str:
        return " ".join(self.tokens())

    @classmethod
    def from_text(cls, text: str, arrival_ts_ms: int = 0, **params) -> "RollingTranscript":
        return cls([TranscriptWord(t, arrival_ts_ms) for t in text.split()], **params)


@dataclass(frozen=True)
class MergeResult:
    merged: RollingTranscript
    appended: list[TranscriptWord]
    replaced_count: int
    removed_count: int
    match: Optional[tuple[int, int]]

    @property
    def net_new(self) -> list[str]:
        return [w.token for w in self.appended if w.provenance is Provenance.STABLE]


def _fold(tokens: Sequence[str]) -> list[str]:
    return [t.casefold() for t in tokens]


def find_match(tail: Sequence[str], new: Sequence[str], words_checked: int) -> Optional[tuple[int, int]]:
    """Locate a run of ``words_checked`` tokens shared by ``tail`` and ``new``.

    Returns ``(tail_pos, new_pos)`` for the run starting furthest right in
    ``new``; among those, the earliest position in ``tail``.
    """
    tail, new = _fold(tail), _fold(new)
    m = words_checked
    for i in range(len(new) - m, -1, -1):
        run = new[i : i + m]
        for j in range(len(tail) - m + 1):
            if tail[j : j + m] == run:
                return j, i
    return None


def merge_transcription(prev: RollingTranscript, new_words, arrival_ts_ms: int) -> MergeResult:
    """Merge a new overlapping transcription into ``prev``.

    If a run of ``words_checked`` tokens from the last ``n_words`` words of
    ``prev`` also occurs in the new transcription, ``prev`` is cut at that
    point and the new transcription continues from it. Otherwise the new
    words are appended whole.

    Appended words that take the place of removed ones keep the removed
    words' timestamps and are marked ``REPLACED``; only the surplus carries
    ``arrival_ts_ms``.
    """
    if isinstance(new_words, str):
        new_words = new_words.split()
    new_words = list(new_words)
    if not new_words:
        return MergeResult(replace(prev, words=list(prev.words)), [], 0, 0, None)

    k = min(prev.n_words, len(prev.words))
    tail_start = len(prev.words) - k
    tail = prev.tokens()[tail_start:]
    match = find_match(tail, new_words, prev.words_checked)

    if match is None:
        kept, removed, incoming = list(prev.words), [], new_words
    else:
        cut = tail_start + match[0]
        kept, removed, incoming = list(prev.words[:cut]), prev.words[cut:], new_words[match[1] :]

    replaced_count = min(len(removed), len(incoming))
    appended = [
        TranscriptWord(tok, removed[i].arrival_ts_ms, Provenance.REPLACED)
        if i < replaced_count
        else TranscriptWord(tok, arrival_ts_ms)
        for i, tok in enumerate(incoming)
    ]
    merged = replace(prev, words=kept + appended)
    return MergeResult(merged, appended, replaced_count, len(removed), match)


def dedup_repetition_artifact(events: Sequence, key=None) -> list:
    """Drop events whose normalized text repeats the previous kept event.

    ``key`` maps an event to its text; by default events are the texts.
    """
    key = key or (lambda e: e)
    kept: list = []
    last: Optional[str] = None
    for event in events:
        norm = normalize(key(event))
        if kept and norm == last:
            continue
        kept.append(event)
        last = norm
    return kept


@dataclass
class TranscriptEvent:
    """One ASR response as seen by the client.

    ``words`` carries per-word arrival stamps and provenance; for plain
    splitting every word is ``STABLE`` with the event's arrival time.
    """

    seq: int
    text: str
    arrival_ts_ms: int
    words: list[TranscriptWord] = field(default_factory=list)
    emit_ts_ms: Optional[int] = None
    duration_s: Optional[float] = None
    error: Optional[str] = None

    @classmethod
    def plain(cls, seq: int, text: str, arrival_ts_ms: int, **kw) -> "TranscriptEvent":
        return cls(seq, text, arrival_ts_ms, [TranscriptWord(t, arrival_ts_ms) for t in text.split()], **kw)

    def stable_words(self) -> list[TranscriptWord]:
        return [w for w in self.words if w.provenance is Provenance.STABLE]
