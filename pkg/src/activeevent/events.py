"""Event boundaries from windowed error entropy, and per-segment keyframes.

A boundary is a local peak of the trailing-window entropy curve that is
followed, within ``nms_radius`` frames, by an entropy drop of at least
``min_prominence``; surviving peaks are non-maximum suppressed within
``nms_radius``. The drop marks the frame where concentrated, surprising
errors start entering the window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigError, DataError, ShapeError, UsageError

# tolerance for treating two entropy values as tied
TIE_EPS = 1e-12


@dataclass
class SegmenterConfig:
    window_n: int = 30
    nms_radius: int = 15
    min_prominence: float | None = None  # default 0.02 * ln(window_n)
    signal_mode: str = "le"  # "le" or "hidden"

    def validate(self) -> None:
        if self.window_n < 2:
            raise ConfigError("segmenter.window_n", "must be >= 2")
        if self.nms_radius < 1:
            raise ConfigError("segmenter.nms_radius", "must be >= 1")
        if self.min_prominence is not None and self.min_prominence < 0:
            raise ConfigError("segmenter.min_prominence", "must be >= 0")
        if self.signal_mode not in ("le", "hidden"):
            raise ConfigError("segmenter.signal_mode", "must be 'le' or 'hidden'")

    @property
    def prominence(self) -> float:
        if self.min_prominence is None:
            return 0.02 * math.log(self.window_n)
        return self.min_prominence


@dataclass(frozen=True)
class Boundary:
    t: int
    entropy_at_peak: float

    def to_json(self) -> dict:
        return {"t": self.t, "entropy": self.entropy_at_peak}


@dataclass(frozen=True)
class Segment:
    start: int
    end: int  # exclusive

    def __len__(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class SummaryFrame:
    segment: int
    keyframe: int
    le: float

    def to_json(self) -> dict:
        return {"segment": self.segment, "keyframe": self.keyframe, "le": self.le}


def normalize_window(w) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1 or w.size < 2:
        raise ShapeError("window must be 1-D with at least 2 entries")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise DataError("window entries must be finite and >= 0")
    s = w.sum()
    if s == 0:
        return np.full(w.size, 1.0 / w.size)
    return w / s


def entropy(p) -> float:
    """Shannon entropy in nats, with 0 log 0 = 0."""
    p = np.asarray(p, dtype=np.float64)
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def check_stream(stream) -> np.ndarray:
    x = np.asarray(stream, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError("error stream must be 1-D")
    if not np.all(np.isfinite(x)) or np.any(x < 0):
        raise DataError("error stream entries must be finite and >= 0")
    return x


def entropy_curve(stream, window_n: int) -> np.ndarray:
    """H_t over trailing windows ending at t; NaN until the first window fills."""
    return kernels.window_entropy(check_stream(stream), int(window_n))


def detect_boundaries(stream, cfg: SegmenterConfig | None = None) -> list[Boundary]:
    cfg = cfg or SegmenterConfig()
    cfg.validate()
    x = check_stream(stream)
    if x.size < cfg.window_n:
        return []
    H = kernels.window_entropy(x, cfg.window_n)
    peaks = kernels.entropy_peaks(x, H, cfg.window_n, cfg.nms_radius, cfg.prominence, TIE_EPS)
    return [Boundary(int(t), float(H[t])) for t in peaks]


class StreamingSegmenter:
    """Incremental boundary detection over an append-only stream.

    A boundary at ``t`` is final once frame ``t + 2 * nms_radius`` has been
    pushed (its drop window and every competing peak are then known); the
    concatenation of ``push`` outputs and ``flush`` equals
    ``detect_boundaries`` on the full stream.
    """

    def __init__(self, cfg: SegmenterConfig | None = None):
        self.cfg = cfg or SegmenterConfig()
        self.cfg.validate()
        self.values: list[float] = []
        self.emitted: list[Boundary] = []

    @property
    def lag(self) -> int:
        return 2 * self.cfg.nms_radius

    def _peaks(self) -> list[Boundary]:
        return detect_boundaries(self.values, self.cfg)

    def push(self, value: float) -> list[Boundary]:
        if not (math.isfinite(value) and value >= 0):
            raise DataError("error stream entries must be finite and >= 0")
        self.values.append(float(value))
        last_final = len(self.values) - 1 - self.lag
        done = self.emitted[-1].t if self.emitted else -1
        if last_final <= done:
            return []
        new = [b for b in self._peaks() if done < b.t <= last_final]
        self.emitted.extend(new)
        return new

    def flush(self) -> list[Boundary]:
        done = self.emitted[-1].t if self.emitted else -1
        new = [b for b in self._peaks() if b.t > done]
        self.emitted.extend(new)
        return new


def segments_from_boundaries(T: int, bounds) -> list[Segment]:
    ts = [b.t if isinstance(b, Boundary) else int(b) for b in bounds]
    for a, b in zip(ts, ts[1:]):
        if b <= a:
            raise UsageError("boundaries must be strictly increasing")
    if ts and (ts[0] <= 0 or ts[-1] >= T):
        raise UsageError(f"boundaries must lie in (0, {T})")
    edges = [0, *ts, T]
    return [Segment(s, e) for s, e in zip(edges, edges[1:])]


def summarize(stream, segs: list[Segment]) -> list[SummaryFrame]:
    """Keyframe of each segment = first frame of minimum error."""
    x = np.asarray(stream, dtype=np.float64)
    if not segs:
        return []
    starts = np.array([s.start for s in segs], dtype=np.int64)
    ends = np.array([s.end for s in segs], dtype=np.int64)
    if np.any(ends <= starts) or starts.min() < 0 or ends.max() > x.size:
        raise UsageError("segments do not fit the stream")
    keys = kernels.segment_argmin(x, starts, ends)
    return [SummaryFrame(k, int(t), float(x[t])) for k, t in enumerate(keys)]


def hidden_delta_signal(hidden_states) -> np.ndarray:
    """Squared distance between consecutive hidden vectors."""
    try:
        h = np.asarray(hidden_states, dtype=np.float64)
    except ValueError as exc:
        raise ShapeError(f"hidden states have inconsistent dimensions: {exc}") from exc
    if h.ndim != 2:
        raise ShapeError("hidden states must be a sequence of equal-length vectors")
    if h.shape[0] < 2:
        raise UsageError("need at least two hidden states")
    d = np.diff(h, axis=0)
    return np.einsum("ij,ij->i", d, d)
