"""Seeded synthetic corpora: utterances of tone-burst words separated by silence."""

from __future__ import annotations

import string
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import AudioClip, Timeline, WordTiming, read_timeline, synth_corpus, wav_read, wav_write, write_timeline
from .errors import InvalidCorpus


@dataclass(frozen=True)
class CorpusSpec:
    n_utterances: int = 50
    vocab_size: int = 400
    word_chars: tuple[int, int] = (4, 12)
    words_per_utterance: tuple[int, int] = (5, 12)
    word_ms: tuple[int, int] = (250, 500)
    silence_ms: tuple[int, int] = (800, 1500)
    amplitude: int = 8000
    noise_floor: int = 200


@dataclass(frozen=True)
class CorpusFile:
    name: str
    clip: AudioClip
    timeline: Timeline


def make_vocabulary(rng: np.random.Generator, spec: CorpusSpec) -> list[str]:
    letters = np.array(list(string.ascii_lowercase))
    vocab: set[str] = set()
    while len(vocab) < spec.vocab_size:
        n = int(rng.integers(spec.word_chars[0], spec.word_chars[1] + 1))
        vocab.add("".join(rng.choice(letters, size=n)))
    return sorted(vocab)


def make_timeline(seed: int, spec: CorpusSpec = CorpusSpec()) -> tuple[Timeline, float]:
    """Timeline of ``spec.n_utterances`` segments plus the trailing silence in seconds."""
    rng = np.random.default_rng(seed)
    vocab = make_vocabulary(rng, spec)
    entries = []
    t_ms = 0
    for seg in range(spec.n_utterances):
        t_ms += int(rng.integers(spec.silence_ms[0], spec.silence_ms[1] + 1))
        for _ in range(int(rng.integers(spec.words_per_utterance[0], spec.words_per_utterance[1] + 1))):
            dur = int(rng.integers(spec.word_ms[0], spec.word_ms[1] + 1))
            entries.append(WordTiming(vocab[int(rng.integers(len(vocab)))], t_ms / 1000, (t_ms + dur) / 1000, seg))
            t_ms += dur
    tail_s = int(rng.integers(spec.silence_ms[0], spec.silence_ms[1] + 1)) / 1000
    return Timeline(tuple(entries)), tail_s


def make_corpus(seed: int, spec: CorpusSpec = CorpusSpec()) -> CorpusFile:
    timeline, tail_s = make_timeline(seed, spec)
    clip = synth_corpus(
        timeline, {"amplitude": spec.amplitude, "noise_floor": spec.noise_floor}, tail_s=tail_s, seed=seed
    )
    return CorpusFile(f"synth-{seed}", clip, timeline)


def validate(clip: AudioClip, timeline: Timeline) -> None:
    if timeline.end_s > clip.duration_s + 1e-9:
        raise InvalidCorpus(f"timeline ends at {timeline.end_s:.3f}s, past the clip end {clip.duration_s:.3f}s")


def save(corpus: CorpusFile, out_dir) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    wav, tsv = out / f"{corpus.name}.wav", out / f"{corpus.name}.tsv"
    wav_write(corpus.clip, wav)
    write_timeline(corpus.timeline, tsv)
    return wav, tsv


def load_file(wav_path, tsv_path=None) -> CorpusFile:
    wav_path = Path(wav_path)
    tsv_path = Path(tsv_path) if tsv_path else wav_path.with_suffix(".tsv")
    clip, timeline = wav_read(wav_path), read_timeline(tsv_path)
    validate(clip, timeline)
    return CorpusFile(wav_path.stem, clip, timeline)


def load_dir(path) -> list[CorpusFile]:
    """Every ``<name>.wav`` with a sibling ``<name>.tsv`` timeline, sorted by name."""
    files = [load_file(w) for w in sorted(Path(path).glob("*.wav")) if w.with_suffix(".tsv").exists()]
    if not files:
        raise InvalidCorpus(f"no WAV + timeline pairs in {path}")
    return files
