"""Transcript normalization and WER/MER/WIL scoring."""

from __future__ import annotations

import re
from dataclasses import dataclass, fields
from typing import Sequence

_ONES = (
    "zero one two three four five six seven eight nine ten eleven twelve thirteen "
    "fourteen fifteen sixteen seventeen eighteen nineteen"
).split()
_TENS = "_ _ twenty thirty forty fifty sixty seventy eighty ninety".split()
_SCALES = ((1_000_000, "million"), (1_000, "thousand"))
MAX_NUMBER = 999_999_999


def _below_thousand(n: int) -> list[str]:
    words = []
    if n >= 100:
        words += [_ONES[n // 100], "hundred"]
        n %= 100
        if not n:
            return words
    if n < 20:
        words.append(_ONES[n])
    else:
        words.append(_TENS[n // 10])
        if n % 10:
            words.append(_ONES[n % 10])
    return words


def number_to_words(n: int) -> str:
    """English words for an integer in [0, 999999999], e.g. 21 -> 'twenty one'."""
    if not 0 <= n <= MAX_NUMBER:
        raise ValueError(f"{n} outside 0..{MAX_NUMBER}")
    if n == 0:
        return "zero"
    words = []
    for scale, name in _SCALES:
        if n >= scale:
            words += _below_thousand(n // scale) + [name]
            n %= scale
    if n:
        words += _below_thousand(n)
    return " ".join(words)


_TAGS = {"PERIOD": ".", "COMMA": ",", "QUESTIONMARK": "?", "EXCLAMATIONPOINT": "!"}
_TAG_RE = re.compile(r"\s*<(" + "|".join(_TAGS) + r")>", re.IGNORECASE)
_ANNOTATION_RE = re.compile(
    r"<(?:SIL|MUSIC|NOISE|OTHER)>"
    r"|\[(?:MUSIC|SILENCE|NOISE|BLANK_AUDIO|INAUDIBLE|APPLAUSE|LAUGHTER)\]"
    r"|\((?:music|silence|noise|upbeat music|inaudible)\)",
    re.IGNORECASE,
)
_GROUPED_RE = re.compile(r"\b\d{1,3}(?:,\d{3})+\b")
_DIGITS_RE = re.compile(r"\d+")

# applied in order, so specific forms precede the generic suffixes
_CONTRACTIONS = [
    (r"\bwon't\b", "will not"),
    (r"\bcan't\b", "can not"),
    (r"\blet's\b", "let us"),
    (r"n't\b", " not"),
    (r"'re\b", " are"),
    (r"'s\b", " is"),
    (r"'d\b", " would"),
    (r"'ll\b", " will"),
    (r"'t\b", " not"),
    (r"'ve\b", " have"),
    (r"'m\b", " am"),
]
_CONTRACTION_RES = [(re.compile(p, re.IGNORECASE), r) for p, r in _CONTRACTIONS]

_TLDS = "com|org|net|io|co|edu|gov|ai|fm|ly|us|uk|tv|me|app|dev|info|biz"
_URL_RE = re.compile(r"^(?:\S*://\S*|[\w-]+(?:\.[\w-]+)*\.(?:" + _TLDS + r")(?:/\S*)?)$", re.IGNORECASE)
_TRAILING_PUNCT = ".,!?;:"


@dataclass(frozen=True)
class NormalizationConfig:
    tag_punctuation: bool = True
    strip_annotations: bool = True
    numbers_to_words: bool = True
    expand_contractions: bool = True
    url_textualize: bool = True
    strip_music_symbol: bool = True
    collapse_whitespace: bool = True
    lowercase: bool = True

    @classmethod
    def from_mapping(cls, values: dict) -> "NormalizationConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise KeyError(f"unknown normalization keys: {sorted(unknown)}")
        return cls(**{k: _as_bool(v) for k, v in values.items()})


def _as_bool(v) -> bool:
    if isinstance(v, str):
        return v.strip().lower() in ("1", "true", "yes", "on")
    return bool(v)


def _numbers(text: str) -> str:
    text = _GROUPED_RE.sub(lambda m: m.group(0).replace(",", ""), text)

    def spell(m: re.Match) -> str:
        n = int(m.group(0))
        return f" {number_to_words(n)} " if n <= MAX_NUMBER else m.group(0)

    return _DIGITS_RE.sub(spell, text)


def _textualize_url(token: str) -> str:
    core = token.rstrip(_TRAILING_PUNCT)
    if not core or not _URL_RE.match(core):
        return token
    spoken = core.replace("/", " slash ").replace(".", " dot ")
    return spoken + token[len(core) :]


def normalize(text: str, cfg: NormalizationConfig = NormalizationConfig()) -> str:
    if cfg.tag_punctuation:
        text = _TAG_RE.sub(lambda m: _TAGS[m.group(1).upper()], text)
    if cfg.strip_annotations:
        text = _ANNOTATION_RE.sub(" ", text)
    if cfg.numbers_to_words:
        text = _numbers(text)
    if cfg.expand_contractions:
        for pattern, repl in _CONTRACTION_RES:
            text = pattern.sub(repl, text)
    if cfg.strip_music_symbol:
        text = text.replace("♪", " ")
    if cfg.url_textualize:
        text = " ".join(_textualize_url(t) for t in text.split())
    if cfg.collapse_whitespace:
        text = " ".join(text.split())
    if cfg.lowercase:
        text = text.lower()
    return text


def align_words(ref_tokens: Sequence[str], hyp_tokens: Sequence[str]) -> tuple[int, int, int, int]:
    """Minimal edit alignment of two token lists, returned as (H, S, D, I).

    Among alignments of minimal cost the one with the most hits is chosen,
    which fixes the split between S, D and I.
    """
    n, m = len(ref_tokens), len(hyp_tokens)
    # each cell holds (cost, -hits); tuple order picks cheapest, then most hits
    prev = [(j, 0) for j in range(m + 1)]
    for i in range(1, n + 1):
        cur = [(i, 0)] + [None] * m
        r = ref_tokens[i - 1]
        for j in range(1, m + 1):
            c, h = prev[j - 1]
            diag = (c, h - 1) if r == hyp_tokens[j - 1] else (c + 1, h)
            up = (prev[j][0] + 1, prev[j][1])
            left = (cur[j - 1][0] + 1, cur[j - 1][1])
            cur[j] = min(diag, up, left)
        prev = cur
    cost, neg_hits = prev[m]
    hits = -neg_hits
    subs = (n - hits) + (m - hits) - cost
    return hits, subs, n - hits - subs, m - hits - subs


@dataclass(frozen=True)
class ErrorReport:
    hits: int
    substitutions: int
    deletions: int
    insertions: int
    wer: float
    mer: float
    wil: float

    @property
    def counts(self) -> tuple[int, int, int, int]:
        return self.hits, self.substitutions, self.deletions, self.insertions


def error_rates(counts) -> ErrorReport:
    h, s, d, i = counts
    errors = s + d + i
    n_ref, n_hyp = h + s + d, h + s + i
    wer = errors / n_ref if n_ref else (float("inf") if errors else 0.0)
    mer = errors / (h + errors) if h + errors else 0.0
    wil = 1.0 - (h * h) / (n_ref * n_hyp) if n_ref and n_hyp else (1.0 if errors else 0.0)
    return ErrorReport(h, s, d, i, wer, mer, wil)


def score(reference: str, hypothesis: str, cfg: NormalizationConfig = NormalizationConfig()) -> ErrorReport:
    return error_rates(align_words(normalize(reference, cfg).split(), normalize(hypothesis, cfg).split()))


def combine(reports: Sequence[ErrorReport]) -> ErrorReport:
    """Corpus-level report from per-file reports (counts are summed, not rates)."""
    totals = [sum(r.counts[k] for r in reports) for k in range(4)]
    return error_rates(totals)
