import pytest
from hypothesis import given, strategies as st

from rtsplit.asr import MockTranscriber, latency_preset
from rtsplit.audio import Timeline, WordTiming
from rtsplit.corpus import CorpusSpec, make_corpus
from rtsplit.delay import (
    Classification,
    DelayBreakdown,
    DelayMeasurement,
    SearchParams,
    dominates,
    measure_delays,
    summarize_delays,
)
from rtsplit.merge import TranscriptEvent
from rtsplit.splitter import SplitterConfig
from rtsplit.stream import simulate_stream


def timeline(*segments):
    """segments: (start_s, "w1 w2 ...") with 0.3 s per word."""
    entries = []
    for seg, (start, text) in enumerate(segments):
        for k, w in enumerate(text.split()):
            entries.append(WordTiming(w, start + 0.3 * k, start + 0.3 * (k + 1), seg))
    return Timeline(tuple(entries))


def ev(seq, text, arrival, emit=None):
    return TranscriptEvent.plain(seq, text, arrival, emit_ts_ms=emit)


def test_found_delay():
    ref = timeline((3.0, "welcome to the show"))
    m = measure_delays(ref, [ev(0, "Welcome to the show.", 4702, emit=4000)])
    assert len(m) == 1
    assert m[0].classification is Classification.FOUND
    assert m[0].delay_ms == pytest.approx(1702)
    assert m[0].breakdown.d_s == pytest.approx(1000)
    assert m[0].breakdown.d_p == pytest.approx(702)


def test_stream_start_offset():
    ref = timeline((3.0, "welcome to the show"))
    m = measure_delays(ref, [ev(0, "welcome to the show", 13_702)], stream_start_ts_ms=9000)
    assert m[0].delay_ms == pytest.approx(1702)


def test_context_not_found():
    ref = timeline((0.0, "alpha beta gamma"))
    m = measure_delays(ref, [ev(0, "alpha delta", 900)])
    assert m[0].classification is Classification.CONTEXT_NOT_FOUND
    assert m[0].delay_ms is None


def test_word_not_found():
    ref = timeline((0.0, "alpha beta gamma"))
    m = measure_delays(ref, [ev(0, "zeta eta", 900)])
    assert m[0].classification is Classification.WORD_NOT_FOUND


def test_false_positive_from_repeated_phrase():
    ref = timeline((1.0, "hello there friend"), (10.0, "hello there friend"))
    events = [ev(0, "hello there friend", 2500), ev(1, "hello there friend", 11500)]
    m = measure_delays(ref, events)
    assert [x.classification for x in m] == [Classification.FOUND, Classification.FALSE_POSITIVE]
    # the second segment hits the first event, spoken 10 s later than it arrived
    assert m[1].delay_ms == pytest.approx(2500 - 10_000)
    s = summarize_delays(m)
    assert (s.n_found, s.n_false_positive) == (1, 1)
    assert s.mean_delay_ms == pytest.approx(1500)


def test_window_widens_after_miss_and_resets():
    words = "w0 w1 w2 w3 w4 w5".split()
    ref = timeline(*[(10.0 * k, f"{w} x{k} y{k}") for k, w in enumerate(words)])
    filler = [ev(i, "noise", 100 + i) for i in range(12)]
    events = filler + [ev(12, "w1 x1 y1", 20_000)]
    params = SearchParams(search_width=10, widen_step=5, context_radius=2)
    m = measure_delays(ref, events, params)
    # w0 misses with width 10; w1 at index 12 is reached only after widening to 15
    assert m[0].classification is Classification.WORD_NOT_FOUND
    assert m[1].classification is Classification.FOUND
    assert m[1].event_index == 12
    assert m[1].delay_ms == pytest.approx(10_000)


def test_replaced_words_ignored():
    from rtsplit.merge import Provenance, TranscriptWord

    ref = timeline((0.0, "alpha beta gamma"))
    e = TranscriptEvent(0, "alpha beta gamma", 900, [TranscriptWord(t, 50, Provenance.REPLACED) for t in "alpha beta gamma".split()])
    assert measure_delays(ref, [e])[0].classification is Classification.WORD_NOT_FOUND


def test_search_params_validated():
    with pytest.raises(ValueError):
        SearchParams(0, 5, 2)


def test_summary_trivial():
    ms = [DelayMeasurement("a", 0, Classification.FOUND, 1000, 1000, 0),
          DelayMeasurement("b", 0, Classification.FOUND, 2000, 2000, 1)]
    s = summarize_delays(ms)
    assert s.mean_delay_ms == 1500
    assert (s.n_found, s.n_word_not_found, s.n_context_not_found, s.n_false_positive) == (2, 0, 0, 0)
    empty = summarize_delays([])
    assert empty.mean_delay_ms is None and empty.n_searched == 0


def test_summary_table_row_partition():
    # Base / 3 s row: word-not-found 4480, context-not-found 11753, context-found 752 of which 8 false positives
    counts = {
        Classification.WORD_NOT_FOUND: 4480,
        Classification.CONTEXT_NOT_FOUND: 11753,
        Classification.FOUND: 752 - 8,
        Classification.FALSE_POSITIVE: 8,
    }
    ms = [DelayMeasurement("w", 0, c, None, 1.0 if c is Classification.FOUND else None) for c, n in counts.items() for _ in range(n)]
    s = summarize_delays(ms)
    assert s.n_searched == 16985
    assert s.n_found + s.n_false_positive == 752


def test_breakdown_sums():
    b = DelayBreakdown.decompose(3000, 4000, 4702, d_t=20)
    assert b.d_total == pytest.approx(1702)


TINY_FEEDBACK = {"quality_wer": 0.2908, "delay_ms": 2000}
TINY_FIXED3 = {"quality_wer": 0.3050, "delay_ms": 2244}
TINY_FIXED2 = {"quality_wer": 0.3458, "delay_ms": 1702}
TINY_VAD = {"quality_wer": 0.2551, "delay_ms": 3521}


def test_dominance_examples():
    assert dominates(TINY_FEEDBACK, TINY_FIXED3)
    assert not dominates(TINY_FIXED3, TINY_FEEDBACK)
    assert not dominates(TINY_FEEDBACK, dict(TINY_FEEDBACK))
    assert not dominates(TINY_FIXED2, TINY_VAD) and not dominates(TINY_VAD, TINY_FIXED2)
    assert not dominates(TINY_FEEDBACK, {"quality_wer": None, "delay_ms": 1})


combos = st.fixed_dictionaries({"quality_wer": st.floats(0, 1), "delay_ms": st.floats(0, 10_000)})


@given(combos, combos, combos)
def test_dominance_order_properties(a, b, c):
    assert not dominates(a, a)
    assert not (dominates(a, b) and dominates(b, a))
    if dominates(a, b) and dominates(b, c):
        assert dominates(a, c)


@pytest.fixture(scope="module")
def small_corpus():
    return make_corpus(3, CorpusSpec(n_utterances=12))


@pytest.mark.parametrize("name, interval", [("fixed2", 2.0), ("fixed3", 3.0)])
def test_fixed_mean_delay_at_least_half_interval(small_corpus, name, interval):
    res = simulate_stream(small_corpus.clip, SplitterConfig.parse(name), MockTranscriber(small_corpus.timeline), latency_preset("tiny"))
    s = summarize_delays(measure_delays(small_corpus.timeline, res.events))
    assert s.n_found > 0
    assert s.mean_delay_ms >= interval / 2 * 1000


def test_measure_deterministic(small_corpus):
    cfg = SplitterConfig.parse("feedback")
    runs = [
        measure_delays(
            small_corpus.timeline,
            simulate_stream(small_corpus.clip, cfg, MockTranscriber(small_corpus.timeline), latency_preset("tiny")).events,
        )
        for _ in range(2)
    ]
    assert runs[0] == runs[1]
