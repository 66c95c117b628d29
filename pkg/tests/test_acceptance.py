"""Acceptance suite: one ``criterion`` marker per numbered requirement.

The terminal summary prints a PASS/FAIL line per criterion (see conftest).
"""

import asyncio
import random
import time
from functools import lru_cache

import numpy as np
import pytest

from rtsplit.asr import TABLE_III, MockTranscriber, fit_latency_model, latency_preset
from rtsplit.audio import Timeline, WordTiming, concat, duration_from_size, synth_corpus
from rtsplit.corpus import CorpusSpec, make_corpus
from rtsplit.delay import Classification, DelayMeasurement, dominates, measure_delays, summarize_delays
from rtsplit.harness import ExperimentConfig, run_batch, run_grid
from rtsplit.merge import RollingTranscript, merge_transcription
from rtsplit.metrics import align_words, error_rates, score
from rtsplit.splitter import FixedSplitter, SplitterConfig, VadSplitter
from rtsplit.stream import simulate_stream
from rtsplit.transport import Frame, FrameKind, decode_frame, encode_frame, serve
from rtsplit.transport.protocol import audio_frame, end_frame, json_payload, read_frame

SEEDS = (0, 1, 2, 3, 4)
crit = pytest.mark.criterion


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


# 1 ------------------------------------------------------------------------


@crit(1, "duration from byte size is exact")
def test_c1_duration_exact():
    with Timer() as t:
        assert duration_from_size(64000) == 2.0
        rng = random.Random(1)
        for n in [0, 1, 15999, 16000] + [rng.randrange(10**9) for _ in range(5000)]:
            assert duration_from_size(2 * n) * 16000 == n
    assert t.elapsed < 1.0


# 2 ------------------------------------------------------------------------


def dp_oracle(ref, hyp):
    """Textbook edit-distance table; ties broken toward more hits, then counts recovered by backtrace."""
    n, m = len(ref), len(hyp)
    cost = [[(0, 0)] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        cost[i][0] = (i, 0)
    for j in range(1, m + 1):
        cost[0][j] = (j, 0)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            hit = ref[i - 1] == hyp[j - 1]
            c, h = cost[i - 1][j - 1]
            diag = (c + (not hit), h - hit)
            up = (cost[i - 1][j][0] + 1, cost[i - 1][j][1])
            left = (cost[i][j - 1][0] + 1, cost[i][j - 1][1])
            cost[i][j] = min(diag, up, left)
    e, neg_h = cost[n][m]
    h = -neg_h
    # with cost E and hits H fixed, S, D, I follow from the lengths
    for s in range(e + 1):
        d = n - h - s
        i = m - h - s
        if d >= 0 and i >= 0 and s + d + i == e:
            return h, s, d, i
    raise AssertionError("inconsistent table")


@crit(2, "alignment matches a DP oracle and rates match hand values")
def test_c2_metrics_oracle():
    with Timer() as t:
        rng = random.Random(2)
        for _ in range(1000):
            ref = [rng.choice("abcd") for _ in range(rng.randint(0, 8))]
            hyp = [rng.choice("abcd") for _ in range(rng.randint(0, 8))]
            assert align_words(ref, hyp) == dp_oracle(ref, hyp)
        r = error_rates((3, 1, 0, 1))
        assert (r.wer, r.mer, r.wil) == pytest.approx((0.5, 0.4, 0.55))
    assert t.elapsed < 10.0


# 3 ------------------------------------------------------------------------


@crit(3, "fixed and VAD splitters are lossless under any chunking")
def test_c3_lossless():
    corpus = make_corpus(3, CorpusSpec(n_utterances=3))
    samples = corpus.clip.samples
    rng = np.random.default_rng(3)
    with Timer() as t:
        for k in range(200):
            cuts = np.sort(rng.integers(0, len(samples), size=int(rng.integers(1, 60))))
            chunks = np.split(samples, cuts)
            for splitter in (FixedSplitter(2.0 if k % 2 else 3.0), VadSplitter()):
                out = [f for c in chunks for f in splitter.push(c)]
                tail = splitter.flush()
                out += [tail] if tail is not None else []
                assert np.array_equal(concat(f.samples for f in out), samples)
    assert t.elapsed < 10.0


# 4 ------------------------------------------------------------------------


@crit(4, "VAD streaming equals batch with WER 0")
def test_c4_vad_equals_batch():
    with Timer() as t:
        corpus = make_corpus(0, CorpusSpec(n_utterances=50))
        ref = " ".join(corpus.timeline.words())
        batch = run_batch(corpus.clip, corpus.timeline, MockTranscriber(corpus.timeline))
        vad = simulate_stream(corpus.clip, SplitterConfig.parse("vad"), MockTranscriber(corpus.timeline), latency_preset("tiny"))
        assert score(ref, vad.transcript).wer == batch.report.wer == 0.0
    assert t.elapsed < 30.0


# 5 and 6 ------------------------------------------------------------------


@pytest.fixture(scope="module")
def grids():
    t0 = time.perf_counter()
    out = {seed: run_grid(ExperimentConfig(seed=seed)).by_label() for seed in SEEDS}
    return out, time.perf_counter() - t0


@crit(5, "WER ordering fixed2 > fixed3 > feedback >= VAD on every seed")
@pytest.mark.parametrize("seed", SEEDS)
def test_c5_quality_ordering(grids, seed):
    runs, elapsed = grids
    wer = {s: runs[seed][("tiny", s)].report.wer for s in ("fixed2", "fixed3", "feedback", "vad")}
    print(f"seed {seed} WER {wer}")
    assert wer["fixed2"] > wer["fixed3"] > wer["feedback"] >= wer["vad"]
    assert elapsed < 180.0


@crit(6, "delay ordering fixed2 < feedback < fixed3 < VAD on every seed")
@pytest.mark.parametrize("seed", SEEDS)
def test_c6_delay_ordering(grids, seed):
    runs, elapsed = grids
    delay = {s: runs[seed][("tiny", s)].summary.mean_delay_ms for s in ("fixed2", "fixed3", "feedback", "vad")}
    print(f"seed {seed} delay {delay}")
    assert delay["fixed2"] < delay["feedback"] < delay["fixed3"] < delay["vad"]
    assert delay["fixed2"] >= 1000 and delay["fixed3"] >= 1500
    assert elapsed < 180.0


# 7 ------------------------------------------------------------------------


@crit(7, "latency fit of the tiny points")
def test_c7_latency_fit():
    with Timer() as t:
        pts = TABLE_III["tiny"]
        x = np.array([p[0] for p in pts], float)
        y = np.array([p[1] for p in pts], float)
        (slope, intercept), *_ = np.linalg.lstsq(np.column_stack([x, np.ones_like(x)]), y, rcond=None)
        m = fit_latency_model(pts)
        assert m.slope_ms_per_s == pytest.approx(slope) and m.intercept_ms == pytest.approx(intercept)
        assert 10 <= m.slope_ms_per_s <= 16 and 470 <= m.intercept_ms <= 490
        assert (m.intercept_ms, m.slope_ms_per_s) == pytest.approx((478.605, 13.079), abs=1e-3)
    assert t.elapsed < 1.0


# 8 ------------------------------------------------------------------------


@crit(8, "merge examples and idempotence on overlap")
def test_c8_merge():
    with Timer() as t:
        assert merge_transcription(RollingTranscript(), "hello world", 1).merged.text == "hello world"
        assert merge_transcription(RollingTranscript.from_text("a b c d"), "x y z", 1).merged.text == "a b c d x y z"
        res = merge_transcription(RollingTranscript.from_text("one two three four"), "three four five", 1)
        assert res.merged.text == "one two three four five" and res.net_new == ["five"]
        res = merge_transcription(
            RollingTranscript.from_text("our first guest today is a famous"), "a famous speedcuber. The vision for the", 2
        )
        assert res.net_new == ["speedcuber.", "The", "vision", "for", "the"]

        rng = random.Random(8)
        for _ in range(1000):
            toks = [rng.choice("a b c d e f g h".split()) for _ in range(rng.randint(2, 20))]
            prev = RollingTranscript.from_text(" ".join(toks))
            overlap = toks[-min(prev.n_words, len(toks)) :]
            res = merge_transcription(prev, overlap, 1)
            assert res.net_new == [] and res.replaced_count == len(res.appended)
            assert len(res.merged) <= len(toks)
    assert t.elapsed < 10.0


# 9 ------------------------------------------------------------------------


def _planted_corpus():
    segs = [
        (1.0, "amber river stone lantern"),
        (5.0, "quiet harbor morning"),
        (9.0, "quiet harbor morning"),  # planted repeat of the previous segment
        (13.0, "violet engine basket"),
    ]
    entries = []
    for seg, (start, text) in enumerate(segs):
        for k, w in enumerate(text.split()):
            entries.append(WordTiming(w, round(start + 0.4 * k, 3), round(start + 0.4 * (k + 1), 3), seg))
    tl = Timeline(tuple(entries))
    return synth_corpus(tl, {"amplitude": 8000, "noise_floor": 200}, tail_s=2.0, seed=9), tl


@crit(9, "delay classification with one planted false positive")
def test_c9_false_positive():
    with Timer() as t:
        clip, tl = _planted_corpus()
        res = simulate_stream(clip, SplitterConfig.parse("vad"), MockTranscriber(tl), latency_preset("tiny"))
        ms = measure_delays(tl, res.events)
        classes = [m.classification for m in ms]
        assert classes.count(Classification.FALSE_POSITIVE) == 1
        assert classes[2] is Classification.FALSE_POSITIVE
        s = summarize_delays(ms)
        found = [m.delay_ms for m in ms if m.classification is Classification.FOUND]
        assert s.mean_delay_ms == pytest.approx(sum(found) / len(found))
        assert all(d >= 0 for d in found)
        assert s.n_searched == len(tl.segments())

        # counts of a reported row shape partition the searched words
        shape = {Classification.WORD_NOT_FOUND: 4480, Classification.CONTEXT_NOT_FOUND: 11753,
                 Classification.FOUND: 744, Classification.FALSE_POSITIVE: 8}
        rows = [
            DelayMeasurement("w", 0, c, 1000, 500 if c is Classification.FOUND else -500)
            for c, n in shape.items()
            for _ in range(n)
        ]
        assert summarize_delays(rows).n_searched == 16985
    assert t.elapsed < 5.0


# 10 -----------------------------------------------------------------------


def _c(wer, delay):
    return {"quality_wer": wer, "delay_ms": delay}


@crit(10, "dominance relations and order properties")
def test_c10_dominance():
    with Timer() as t:
        tiny_fixed3, tiny_vad, tiny_feedback = _c(0.3050, 2244), _c(0.2551, 3521), _c(0.2908, 2000)
        base_fixed3, base_feedback = _c(0.2735, 2783), _c(0.2536, 2496)
        assert dominates(tiny_feedback, tiny_fixed3)
        assert dominates(base_feedback, tiny_vad)
        assert dominates(base_feedback, base_fixed3)

        rng = np.random.default_rng(10)
        pts = [_c(float(w), float(d)) for w, d in zip(rng.integers(0, 6, 3000) / 10, rng.integers(0, 6, 3000) * 100)]
        for a, b, c in zip(pts[0::3], pts[1::3], pts[2::3]):
            assert not dominates(a, a)
            assert not (dominates(a, b) and dominates(b, a))
            if dominates(a, b) and dominates(b, c):
                assert dominates(a, c)
    assert t.elapsed < 5.0


# 11 -----------------------------------------------------------------------


class _Slow:
    def __init__(self, log, tag):
        self.log, self.tag = log, tag

    def transcribe(self, fragment):
        self.log.append((self.tag, fragment.seq))
        time.sleep(0.02)
        return str(fragment.seq)


@crit(11, "frame round trip and two-connection ordering")
def test_c11_transport():
    with Timer() as t:
        rng = np.random.default_rng(11)
        kinds = list(FrameKind)
        for _ in range(10_000):
            f = Frame(kinds[int(rng.integers(4))], int(rng.integers(0, 2**32)), rng.bytes(int(rng.integers(0, 64))))
            assert decode_frame(encode_frame(f)) == f

        calls, tags = [], iter("AB")

        async def main():
            server = await serve("127.0.0.1:0", lambda: _Slow(calls, next(tags)))
            port = server.sockets[0].getsockname()[1]
            gate = asyncio.Event()

            async def client():
                reader, writer = await asyncio.open_connection("127.0.0.1", port)
                await gate.wait()
                for s in range(5):
                    writer.write(encode_frame(audio_frame(s, np.zeros(16))))
                writer.write(encode_frame(end_frame()))
                seqs = []
                while (f := await read_frame(reader)) is not None and f.kind is FrameKind.TRANSCRIPT:
                    seqs.append(json_payload(f)["seq"])
                writer.close()
                return seqs

            async with server:
                tasks = [asyncio.create_task(client()) for _ in range(2)]
                await asyncio.sleep(0.05)
                gate.set()
                return await asyncio.gather(*tasks)

        results = asyncio.run(main())
        assert results == [[0, 1, 2, 3, 4]] * 2
        order = [tag for tag, _ in calls]
        assert order.index("B") < max(i for i, tag in enumerate(order) if tag == "A")
    assert t.elapsed < 30.0
