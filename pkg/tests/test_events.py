import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from activeevent.errors import DataError, ShapeError, UsageError
from activeevent.events import (
    Segment,
    SegmenterConfig,
    StreamingSegmenter,
    detect_boundaries,
    entropy,
    entropy_curve,
    hidden_delta_signal,
    normalize_window,
    segments_from_boundaries,
    summarize,
)

import oracles

LN30 = 3.4011973816621553754
H_EIGHTHS = 1.2130075659799042915  # 1.75 ln 2


def test_normalize_plugin():
    assert np.allclose(normalize_window([1, 1, 2, 4]), [0.125, 0.125, 0.25, 0.5], atol=0)


def test_normalize_all_zero():
    assert np.array_equal(normalize_window([0, 0, 0, 0]), [0.25] * 4)


@given(st.lists(st.floats(0, 1e9, allow_nan=False), min_size=2, max_size=64))
def test_normalize_sums_to_one(w):
    assert abs(normalize_window(w).sum() - 1) <= 1e-12


def test_normalize_errors():
    with pytest.raises(DataError):
        normalize_window([1, -1, 2])
    with pytest.raises(ShapeError):
        normalize_window([1.0])


def test_entropy_cases():
    assert entropy(np.full(30, 1 / 30)) == pytest.approx(LN30, abs=1e-12)
    assert entropy([0, 1, 0, 0]) == 0.0
    assert entropy([0.125, 0.125, 0.25, 0.5]) == pytest.approx(H_EIGHTHS, abs=1e-12)


@given(st.lists(st.floats(0, 1e6, allow_nan=False), min_size=2, max_size=60))
def test_entropy_bounds(w):
    h = entropy(normalize_window(w))
    assert -1e-12 <= h <= math.log(len(w)) + 1e-12


def test_constant_stream_has_no_boundaries():
    assert detect_boundaries(np.full(300, 0.7)) == []
    assert detect_boundaries(np.zeros(300)) == []


def spike_stream(rng, centers, T=300, width=6):
    x = 1.0 + 0.01 * rng.standard_normal(T)
    for c in centers:
        x[c : c + width] += 25.0
    return np.abs(x)


@pytest.mark.parametrize("seed", range(10))
def test_single_spike_single_boundary(seed):
    rng = np.random.default_rng(seed)
    cfg = SegmenterConfig()
    x = spike_stream(rng, [100])
    bounds = [b.t for b in detect_boundaries(x, cfg)]
    ref = oracles.peaks(x.tolist(), oracles.entropy_series(x.tolist(), cfg.window_n), cfg.window_n, cfg.nms_radius, cfg.prominence)
    assert bounds == ref
    assert len(bounds) == 1 and 100 - cfg.window_n <= bounds[0] <= 100 + cfg.nms_radius


@pytest.mark.parametrize("seed", range(10))
def test_two_spikes_two_boundaries(seed):
    rng = np.random.default_rng(100 + seed)
    cfg = SegmenterConfig()
    c2 = 100 + 3 * cfg.nms_radius
    x = spike_stream(rng, [100, c2])
    bounds = [b.t for b in detect_boundaries(x, cfg)]
    ref = oracles.peaks(x.tolist(), oracles.entropy_series(x.tolist(), cfg.window_n), cfg.window_n, cfg.nms_radius, cfg.prominence)
    assert bounds == ref and len(bounds) == 2


def test_entropy_curve_matches_oracle(rng):
    for _ in range(50):
        n = int(rng.integers(2, 40))
        x = rng.exponential(size=int(rng.integers(1, 120)))
        x[rng.random(x.size) < 0.1] = 0.0
        got = entropy_curve(x, n)
        ref = oracles.entropy_series(x.tolist(), n)
        assert np.allclose(got, ref, atol=1e-12, equal_nan=True)


def test_detect_matches_oracle_random(rng):
    for _ in range(200):
        n = int(rng.integers(3, 20))
        cfg = SegmenterConfig(window_n=n, nms_radius=int(rng.integers(1, 12)), min_prominence=float(rng.uniform(0, 0.2)))
        x = rng.exponential(size=int(rng.integers(n, 200))) ** 2
        got = [b.t for b in detect_boundaries(x, cfg)]
        ref = oracles.peaks(x.tolist(), oracles.entropy_series(x.tolist(), n), n, cfg.nms_radius, cfg.prominence)
        assert got == ref


# exact zeros or normal magnitudes, so scaling never underflows
stream_values = st.one_of(st.just(0.0), st.floats(1e-3, 100))


@given(st.lists(stream_values, min_size=40, max_size=160), st.floats(1e-3, 1e3))
def test_boundaries_scale_invariant(xs, c):
    cfg = SegmenterConfig(window_n=10, nms_radius=5)
    x = np.array(xs)
    assert [b.t for b in detect_boundaries(x, cfg)] == [b.t for b in detect_boundaries(c * x, cfg)]


@given(st.lists(st.floats(0, 10, allow_nan=False), min_size=0, max_size=150), st.integers(1, 10))
def test_streaming_equals_batch(xs, radius):
    cfg = SegmenterConfig(window_n=8, nms_radius=radius)
    seg = StreamingSegmenter(cfg)
    out = []
    for v in xs:
        emitted = seg.push(v)
        for b in emitted:
            assert b.t <= len(seg.values) - 1 - seg.lag
        out.extend(emitted)
    out.extend(seg.flush())
    assert out == detect_boundaries(np.array(xs, dtype=float), cfg)


def test_segments_examples():
    assert segments_from_boundaries(10, []) == [Segment(0, 10)]
    assert segments_from_boundaries(10, [4]) == [Segment(0, 4), Segment(4, 10)]
    segs = segments_from_boundaries(10, [3, 7])
    assert [(s.start, s.end) for s in segs] == [(0, 3), (3, 7), (7, 10)]


def test_segments_errors():
    with pytest.raises(UsageError):
        segments_from_boundaries(10, [7, 3])
    with pytest.raises(UsageError):
        segments_from_boundaries(10, [0])
    with pytest.raises(UsageError):
        segments_from_boundaries(10, [10])


@given(st.integers(1, 300), st.data())
def test_partition_completeness(T, data):
    cuts = sorted(data.draw(st.sets(st.integers(1, max(1, T - 1)), max_size=20)))
    cuts = [c for c in cuts if 0 < c < T]
    segs = segments_from_boundaries(T, cuts)
    assert segs[0].start == 0 and segs[-1].end == T
    assert all(a.end == b.start for a, b in zip(segs, segs[1:]))
    assert sum(len(s) for s in segs) == T and all(len(s) > 0 for s in segs)


def test_summarize_examples():
    assert summarize([3.0, 1.0, 2.0], [Segment(0, 3)])[0].keyframe == 1
    assert summarize([5.0] * 6, [Segment(0, 2), Segment(2, 6)])[1].keyframe == 2


def test_summarize_random_partitions(rng):
    for _ in range(100):
        x = rng.integers(0, 20, size=200).astype(float)  # many ties
        cuts = sorted(set(rng.integers(1, 200, size=int(rng.integers(0, 15))).tolist()))
        segs = segments_from_boundaries(200, cuts)
        got = [f.keyframe for f in summarize(x, segs)]
        assert got == oracles.keyframes(x.tolist(), oracles.partition(200, cuts))


def test_hidden_delta_cases():
    assert not hidden_delta_signal(np.ones((5, 3))).any()
    assert hidden_delta_signal([[0.0], [3.0]]).tolist() == [9.0]
    with pytest.raises(UsageError):
        hidden_delta_signal([[1.0, 2.0]])
    with pytest.raises(ShapeError):
        hidden_delta_signal([[1.0], [1.0, 2.0]])


def test_hidden_delta_random(rng):
    for _ in range(50):
        hs = rng.normal(size=(int(rng.integers(2, 30)), int(rng.integers(1, 20))))
        assert np.allclose(hidden_delta_signal(hs), oracles.hidden_deltas(hs.tolist()), atol=1e-9, rtol=0)


def test_stream_validation():
    with pytest.raises(DataError):
        detect_boundaries([1.0, float("nan"), 2.0])
    with pytest.raises(DataError):
        detect_boundaries([1.0, -2.0])
