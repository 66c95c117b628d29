"""Command line entry point: ``rtsplit <subcommand>``."""

from __future__ import annotations

import argparse
import asyncio
import csv
import json
import logging
import sys
from dataclasses import asdict, replace

from .asr import ExternalAdapterConfig, ExternalTranscriber, MockTranscriber, TABLE_III, fit_latency_model
from .corpus import CorpusSpec, load_file, make_corpus, save
from .delay import measure_delays, summarize_delays
from .errors import RtsplitError
from .harness import CSV_FIELDS, ExperimentConfig, dominance_pairs, load_config, read_rows, run_batch, run_grid
from .merge import Provenance
from .metrics import score
from .stream import MergeParams, simulate_stream


def _add_splitter_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--splitter", default="fixed", help="fixed | fixedN | vad | feedback")
    p.add_argument("--interval-s", type=float, default=None)
    p.add_argument("--feedback-window-s", type=float, default=None)
    p.add_argument("--vad-frame-ms", type=int, default=None)
    p.add_argument("--vad-hangover-frames", type=int, default=None)
    p.add_argument("--vad-threshold", type=float, default=None)


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--latency-preset", default=None, choices=sorted(TABLE_III))
    p.add_argument("--latency-intercept-ms", type=float, default=None)
    p.add_argument("--latency-slope", type=float, default=None)
    p.add_argument("--merge-nwords", type=int, default=None)
    p.add_argument("--merge-words-checked", type=int, default=None)


def _add_backend_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", choices=["mock", "external"], default="mock")
    p.add_argument("--external-cmd", default=None, help="executable taking a WAV path, printing text")


def _add_corpus_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--wav", help="16 kHz mono PCM16 WAV")
    p.add_argument("--timeline", help="timeline TSV (default: WAV path with .tsv)")
    p.add_argument("--seed", type=int, default=0, help="synthesize a corpus when --wav is absent")
    p.add_argument("--utterances", type=int, default=50)


def _corpus(args):
    if args.wav:
        return load_file(args.wav, args.timeline)
    return make_corpus(args.seed, CorpusSpec(n_utterances=args.utterances))


def _backend_factory(args, timeline):
    if args.backend == "external":
        if not args.external_cmd:
            raise SystemExit("--backend external needs --external-cmd")
        cfg = ExternalAdapterConfig(args.external_cmd)
        return lambda: ExternalTranscriber(cfg)
    if timeline is None:
        raise SystemExit("the mock backend needs a timeline")
    return lambda: MockTranscriber(timeline)


def _grid_config(args) -> ExperimentConfig:
    overrides = dict(
        corpus=args.corpus,
        seed=args.seed,
        n_utterances=args.utterances,
        splitters=args.splitters.split(",") if args.splitters else None,
        latency_presets=args.latency_presets.split(",") if args.latency_presets else None,
        latency_intercept_ms=args.latency_intercept_ms,
        latency_slope=args.latency_slope,
        feedback_interval_s=args.interval_s,
        feedback_window_s=args.feedback_window_s,
        vad_frame_ms=args.vad_frame_ms,
        vad_hangover_frames=args.vad_hangover_frames,
        vad_threshold=args.vad_threshold,
        merge_nwords=args.merge_nwords,
        merge_words_checked=args.merge_words_checked,
        search_width=args.search_width,
        widen_step=args.widen_step,
        context_radius=args.context_radius,
        repeats=args.repeats,
        parallel_files=args.parallel_files,
        output_dir=args.out,
    )
    return load_config(args.config, **overrides)


def cmd_synth(args) -> int:
    corpus = make_corpus(args.seed, CorpusSpec(n_utterances=args.utterances))
    wav, tsv = save(corpus, args.out)
    print(f"{wav}\n{tsv}")
    return 0


def cmd_batch(args) -> int:
    corpus = _corpus(args)
    backend = _backend_factory(args, corpus.timeline)()
    result = run_batch(corpus.clip, corpus.timeline, backend)
    print(json.dumps({"text": result.text, **asdict(result.report)}))
    return 0


def cmd_stream(args) -> int:
    corpus = _corpus(args)
    cfg = ExperimentConfig(
        splitters=[args.splitter],
        latency_presets=[args.latency_preset or "tiny"],
        latency_intercept_ms=args.latency_intercept_ms,
        latency_slope=args.latency_slope,
    )
    overrides = {
        k: v
        for k, v in dict(
            feedback_window_s=args.feedback_window_s,
            vad_frame_ms=args.vad_frame_ms,
            vad_hangover_frames=args.vad_hangover_frames,
            vad_threshold=args.vad_threshold,
            merge_nwords=args.merge_nwords,
            merge_words_checked=args.merge_words_checked,
        ).items()
        if v is not None
    }
    cfg = replace(cfg, **overrides)
    splitter = cfg.splitter_config(args.splitter)
    if args.interval_s is not None:
        splitter = replace(splitter, interval_s=args.interval_s)
    merge = MergeParams(cfg.merge_nwords, cfg.merge_words_checked)

    if args.server:
        from .transport.client import client_stream

        result = client_stream(corpus.clip, splitter, args.server, args.time_scale, merge=merge)
    else:
        backend = _backend_factory(args, corpus.timeline)()
        result = simulate_stream(corpus.clip, splitter, backend, cfg.latency_model(cfg.latency_presets[0]), merge=merge)

    for e in result.events:
        stable = [w.token for w in e.words if w.provenance is Provenance.STABLE]
        line = {"seq": e.seq, "arrival_ts_ms": e.arrival_ts_ms, "emit_ts_ms": e.emit_ts_ms, "text": e.text, "new": stable}
        if e.error:
            line["error"] = e.error
        print(json.dumps(line))
    report = score(" ".join(corpus.timeline.words()), result.transcript)
    summary = summarize_delays(measure_delays(corpus.timeline, result.events, cfg.search))
    print(json.dumps({"transcript": result.transcript, "partial": result.partial, **asdict(report), **asdict(summary)}))
    return 0


def cmd_grid(args) -> int:
    result = run_grid(_grid_config(args))
    sys.stdout.write(result.csv_text())
    for a, b in result.dominance:
        print(f"# {a} > {b}")
    return 1 if any(o.error for o in result.outcomes) else 0


def cmd_report(args) -> int:
    rows = read_rows(args.csv)
    writer = csv.DictWriter(sys.stdout, fieldnames=CSV_FIELDS, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    writer.writerows(rows)
    for a, b in dominance_pairs(rows):
        print(f"# {a} > {b}")
    return 0


def _point(text: str) -> tuple[float, float]:
    d, _, ms = text.partition(":")
    return float(d), float(ms)


def cmd_fit_latency(args) -> int:
    points = [_point(p) for p in args.points] if args.points else TABLE_III[args.preset]
    model = fit_latency_model(points)
    print(json.dumps(asdict(model)))
    return 0


def cmd_serve(args) -> int:
    from .asr import latency_preset
    from .audio import read_timeline
    from .transport.server import serve

    timeline = read_timeline(args.timeline) if args.timeline else None
    factory = _backend_factory(args, timeline)
    latency = None if args.no_latency else latency_preset(args.latency_preset or "tiny")

    async def main():
        server = await serve(args.bind, factory, latency, time_scale=args.time_scale)
        async with server:
            await server.serve_forever()

    try:
        asyncio.run(main())
    except KeyboardInterrupt:
        pass
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rtsplit", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic WAV + timeline corpus")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--utterances", type=int, default=50)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("batch", help="transcribe a whole file in one pass and score it")
    _add_corpus_flags(p)
    _add_backend_flags(p)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("stream", help="stream one file through one splitter/model combination")
    _add_corpus_flags(p)
    _add_splitter_flags(p)
    _add_model_flags(p)
    _add_backend_flags(p)
    p.add_argument("--server", help="host:port of a running `rtsplit serve`; omit for the virtual clock")
    p.add_argument("--time-scale", type=float, default=1.0)
    p.set_defaults(func=cmd_stream)

    p = sub.add_parser("grid", help="run the splitter x latency-preset grid")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--corpus", help="WAV file or directory of WAV + TSV pairs")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--utterances", type=int, default=None)
    p.add_argument("--splitters", help="comma list, e.g. fixed2,fixed3,vad,feedback")
    p.add_argument("--latency-presets", help="comma list, e.g. tiny,base")
    p.add_argument("--latency-intercept-ms", type=float, default=None)
    p.add_argument("--latency-slope", type=float, default=None)
    p.add_argument("--interval-s", type=float, default=None, help="feedback fragment interval")
    p.add_argument("--feedback-window-s", type=float, default=None)
    p.add_argument("--vad-frame-ms", type=int, default=None)
    p.add_argument("--vad-hangover-frames", type=int, default=None)
    p.add_argument("--vad-threshold", type=float, default=None)
    p.add_argument("--merge-nwords", type=int, default=None)
    p.add_argument("--merge-words-checked", type=int, default=None)
    p.add_argument("--search-width", type=int, default=None)
    p.add_argument("--widen-step", type=int, default=None)
    p.add_argument("--context-radius", type=int, default=None)
    p.add_argument("--repeats", type=int, default=None)
    p.add_argument("--parallel-files", type=int, default=None)
    p.add_argument("--out", help="directory for grid.csv and dominance.txt")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("report", help="merge grid CSVs and recompute dominance")
    p.add_argument("csv", nargs="+")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("fit-latency", help="fit the affine processing-delay model")
    p.add_argument("points", nargs="*", help="duration_s:delay_ms pairs")
    p.add_argument("--preset", default="tiny", choices=sorted(TABLE_III))
    p.set_defaults(func=cmd_fit_latency)

    p = sub.add_parser("serve", help="run the ASR cluster endpoint")
    p.add_argument("--bind", default="127.0.0.1:8765")
    p.add_argument("--timeline", help="ground truth for the mock backend")
    p.add_argument("--latency-preset", default=None, choices=sorted(TABLE_III))
    p.add_argument("--no-latency", action="store_true", help="do not add simulated processing delay")
    p.add_argument("--time-scale", type=float, default=1.0)
    _add_backend_flags(p)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (RtsplitError, OSError, ValueError, KeyError) as exc:
        print(f"rtsplit: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
