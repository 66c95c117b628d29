"""Experiment orchestration: batch baselines, real-time runs and the model x splitter grid."""

from __future__ import annotations

import csv
import io
import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import SAMPLE_RATE
from .asr import LatencyModel, MockTranscriber, Transcriber, latency_preset, whole_clip_fragment
from .audio import AudioClip, Timeline
from .corpus import CorpusFile, CorpusSpec, load_dir, load_file, make_corpus, validate
from .delay import DelayMeasurement, SearchParams, dominates, measure_delays, summarize_delays
from .metrics import ErrorReport, NormalizationConfig, combine, score
from .splitter import SplitterConfig
from .stream import MergeParams, simulate_stream

log = logging.getLogger(__name__)

CSV_FIELDS = [
    "model",
    "splitter",
    "wer",
    "mer",
    "wil",
    "mean_delay_ms",
    "n_found",
    "n_word_not_found",
    "n_context_not_found",
    "n_false_positives",
]


@dataclass
class ExperimentConfig:
    corpus: Optional[str] = None
    seed: int = 0
    n_utterances: int = 50
    splitters: list[str] = field(default_factory=lambda: ["fixed2", "fixed3", "vad", "feedback"])
    latency_presets: list[str] = field(default_factory=lambda: ["tiny"])
    latency_intercept_ms: Optional[float] = None
    latency_slope: Optional[float] = None
    feedback_interval_s: float = 2.0
    feedback_window_s: float = 4.0
    vad_frame_ms: int = 10
    vad_hangover_frames: int = 30
    vad_threshold: Optional[float] = None
    merge_nwords: int = 7
    merge_words_checked: int = 2
    search_width: int = 10
    widen_step: int = 5
    context_radius: int = 2
    time_scale: float = 1.0
    repeats: int = 3
    phase_step_s: float = 0.7
    transmission_ms: float = 0.0
    parallel_files: int = 1
    output_dir: Optional[str] = None

    def __post_init__(self):
        if self.corpus is not None and not Path(self.corpus).exists():
            raise FileNotFoundError(self.corpus)
        if not self.splitters or not self.latency_presets:
            raise ValueError("need at least one splitter and one latency preset")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")

    def splitter_config(self, name: str) -> SplitterConfig:
        common = dict(
            vad_frame_ms=self.vad_frame_ms,
            vad_hangover_frames=self.vad_hangover_frames,
            vad_threshold=self.vad_threshold,
            feedback_window_s=self.feedback_window_s,
        )
        if name == "feedback":
            common["interval_s"] = self.feedback_interval_s
        return SplitterConfig.parse(name, **common)

    def latency_model(self, preset: str) -> LatencyModel:
        model = latency_preset(preset)
        if self.latency_intercept_ms is not None:
            model = replace(model, intercept_ms=self.latency_intercept_ms)
        if self.latency_slope is not None:
            model = replace(model, slope_ms_per_s=self.latency_slope)
        return model

    @property
    def search(self) -> SearchParams:
        return SearchParams(self.search_width, self.widen_step, self.context_radius)

    @property
    def merge(self) -> MergeParams:
        return MergeParams(self.merge_nwords, self.merge_words_checked)

    def files(self) -> list[CorpusFile]:
        if self.corpus is None:
            return [make_corpus(self.seed, CorpusSpec(n_utterances=self.n_utterances))]
        path = Path(self.corpus)
        return load_dir(path) if path.is_dir() else [load_file(path)]


def _coerce(value: str, annotation: str):
    value = value.strip()
    if annotation.startswith("list"):
        return [v.strip() for v in value.split(",") if v.strip()]
    if annotation.startswith("Optional") and value.lower() in ("", "none"):
        return None
    if "int" in annotation:
        return int(value)
    if "float" in annotation:
        return float(value)
    return value


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment, dashes in keys map to underscores."""
    types = {f.name: str(f.type) for f in fields(ExperimentConfig)}
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in types:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        out[key] = _coerce(value, types[key])
    return out


def load_config(path=None, **overrides) -> ExperimentConfig:
    values = parse_config_text(Path(path).read_text(encoding="utf-8")) if path else {}
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values)


@dataclass
class BatchResult:
    text: str
    report: ErrorReport


def run_batch(clip: AudioClip, timeline: Timeline, backend: Transcriber) -> BatchResult:
    """Transcribe the whole clip in one call and score it against the timeline."""
    validate(clip, timeline)
    text = backend.transcribe(whole_clip_fragment(clip))
    return BatchResult(text, score(" ".join(timeline.words()), text))


def with_lead_in(clip: AudioClip, timeline: Timeline, lead_in_s: float) -> tuple[AudioClip, Timeline]:
    """Delay the stream by ``lead_in_s``, padding with the clip's own first 100 ms.

    Shifts where fixed-interval boundaries fall relative to words while
    leaving the VAD calibration window unchanged.
    """
    n = int(round(lead_in_s * SAMPLE_RATE))
    if n == 0:
        return clip, timeline
    seed = clip.samples[: SAMPLE_RATE // 10]
    if not len(seed):
        seed = np.zeros(1, dtype=np.int16)
    pad = np.resize(seed, n)
    return AudioClip(np.concatenate([pad, clip.samples])), timeline.shifted(n / SAMPLE_RATE)


@dataclass
class RunOutcome:
    """One splitter/preset combination over every file and repeat."""

    model: str
    splitter: str
    report: Optional[ErrorReport]
    measures: list[DelayMeasurement]
    error: Optional[str] = None

    @property
    def summary(self):
        return summarize_delays(self.measures)

    def row(self) -> dict:
        s = self.summary
        rep = self.report
        fmt = lambda x: "" if x is None else f"{x:.4f}"
        return {
            "model": self.model,
            "splitter": self.splitter,
            "wer": fmt(rep and rep.wer),
            "mer": fmt(rep and rep.mer),
            "wil": fmt(rep and rep.wil),
            "mean_delay_ms": "" if s.mean_delay_ms is None else f"{s.mean_delay_ms:.1f}",
            "n_found": s.n_found,
            "n_word_not_found": s.n_word_not_found,
            "n_context_not_found": s.n_context_not_found,
            "n_false_positives": s.n_false_positive,
        }


BackendFactory = Callable[[CorpusFile], Transcriber]


def mock_backend(f: CorpusFile) -> Transcriber:
    return MockTranscriber(f.timeline)


def run_stream(
    f: CorpusFile,
    splitter: SplitterConfig,
    latency: LatencyModel,
    config: ExperimentConfig,
    backend_factory: BackendFactory = mock_backend,
    repeat: int = 0,
):
    clip, timeline = with_lead_in(f.clip, f.timeline, repeat * config.phase_step_s)
    shifted = CorpusFile(f.name, clip, timeline)
    result = simulate_stream(
        clip, splitter, backend_factory(shifted), latency, merge=config.merge, d_t_ms=config.transmission_ms
    )
    report = score(" ".join(timeline.words()), result.transcript)
    measures = measure_delays(timeline, result.events, config.search, d_t_ms=config.transmission_ms)
    return result, report, measures


def run_combination(
    config: ExperimentConfig,
    splitter_name: str,
    preset: str,
    files: Sequence[CorpusFile],
    backend_factory: BackendFactory = mock_backend,
) -> RunOutcome:
    splitter = config.splitter_config(splitter_name)
    latency = config.latency_model(preset)
    jobs = [(f, r) for f in files for r in range(config.repeats)]

    def job(args):
        f, r = args
        _, report, measures = run_stream(f, splitter, latency, config, backend_factory, r)
        return report, measures

    if config.parallel_files > 1:
        with ThreadPoolExecutor(config.parallel_files) as pool:
            results = list(pool.map(job, jobs))
    else:
        results = [job(j) for j in jobs]
    reports = [rep for rep, _ in results]
    measures = [m for _, ms in results for m in ms]
    return RunOutcome(preset, splitter.label, combine(reports), measures)


@dataclass
class GridResult:
    outcomes: list[RunOutcome]
    dominance: list[tuple[str, str]]

    def csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
        for o in self.outcomes:
            writer.writerow(o.row())
        return buf.getvalue()

    def by_label(self) -> dict[tuple[str, str], RunOutcome]:
        return {(o.model, o.splitter): o for o in self.outcomes}


def dominance_pairs(rows: Sequence[dict]) -> list[tuple[str, str]]:
    """Pairs ``(a, b)`` where ``a`` beats ``b``; only rows sharing a latency preset are compared."""
    pairs = []
    for a, b in itertools.permutations(rows, 2):
        if a["model"] != b["model"]:
            continue
        c1 = {"quality_wer": _num(a["wer"]), "delay_ms": _num(a["mean_delay_ms"])}
        c2 = {"quality_wer": _num(b["wer"]), "delay_ms": _num(b["mean_delay_ms"])}
        if dominates(c1, c2):
            pairs.append((f"{a['model']}/{a['splitter']}", f"{b['model']}/{b['splitter']}"))
    return pairs


def _num(v):
    if v is None or v == "":
        return None
    return float(v)


def run_grid(config: ExperimentConfig, backend_factory: BackendFactory = mock_backend) -> GridResult:
    files = config.files()
    outcomes = []
    for preset in config.latency_presets:
        for name in config.splitters:
            try:
                outcomes.append(run_combination(config, name, preset, files, backend_factory))
            except Exception as exc:  # one failed cell must not sink the grid
                log.exception("run %s/%s failed", preset, name)
                outcomes.append(RunOutcome(preset, name, None, [], error=str(exc)))
    result = GridResult(outcomes, dominance_pairs([o.row() for o in outcomes]))
    if config.output_dir:
        write_outputs(result, config.output_dir)
    return result


def write_outputs(result: GridResult, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "grid.csv").write_text(result.csv_text(), encoding="utf-8")
    lines = [f"{a} > {b}\n" for a, b in result.dominance]
    (out / "dominance.txt").write_text("".join(lines), encoding="utf-8")


def read_rows(paths: Sequence) -> list[dict]:
    rows = []
    for p in paths:
        with open(p, newline="", encoding="utf-8") as fh:
            rows.extend(csv.DictReader(fh))
    return rows
