"""Boundary, segment and tracking metrics."""

from __future__ import annotations

import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError, UsageError
from .events import Segment


@dataclass(frozen=True)
class ToleranceProfile:
    name: str
    tol_frames: tuple[int, ...]

    def __post_init__(self):
        tols = tuple(self.tol_frames)
        if not tols or any(t <= 0 for t in tols) or list(tols) != sorted(tols):
            raise ConfigError("profile.tol_frames", "tolerances must be positive and ascending")


STRICT = ToleranceProfile("strict", (2, 5, 10, 15))
RELAXED = ToleranceProfile("relaxed", (15, 30, 45))
PROFILES = {"strict": STRICT, "relaxed": RELAXED}


@dataclass
class MetricsReport:
    precision: dict = field(default_factory=dict)
    recall: dict = field(default_factory=dict)
    f1: dict = field(default_factory=dict)
    iou: float | None = None
    frame_acc: float | None = None
    ar: float | None = None
    al: float | None = None


def _sorted_ints(xs, what):
    arr = np.asarray(list(xs), dtype=np.int64)
    if arr.size and (np.any(np.diff(arr) < 0) or arr.min() < 0):
        raise UsageError(f"{what} boundaries must be sorted and non-negative")
    return arr


def boundary_tp(pred, gt, tol: int) -> int:
    """One-to-one matches, greedily taken in ascending distance (ties: lower gt index)."""
    return int(kernels.greedy_match_count(_sorted_ints(pred, "predicted"), _sorted_ints(gt, "ground-truth"), int(tol)))


def f1_score(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def boundary_prf(pred, gt, tol: int) -> tuple[float, float, float]:
    pred = _sorted_ints(pred, "predicted")
    gt = _sorted_ints(gt, "ground-truth")
    tp = boundary_tp(pred, gt, tol)
    if pred.size == 0 or gt.size == 0:
        warnings.warn("empty boundary set; precision/recall reported as 0 where undefined", stacklevel=2)
    p = tp / pred.size if pred.size else 0.0
    r = tp / gt.size if gt.size else 0.0
    return p, r, f1_score(p, r)


def _as_segments(segs):
    return [s if isinstance(s, Segment) else Segment(int(s[0]), int(s[1])) for s in segs]


def _check_partition(segs, what):
    if not segs or segs[0].start != 0:
        raise UsageError(f"{what} segments must start at 0")
    for a, b in zip(segs, segs[1:]):
        if a.end != b.start:
            raise UsageError(f"{what} segments must be contiguous")
    return segs[-1].end


def segment_iou(pred, gt) -> float:
    """Mean over ground-truth segments of the best IoU with any predicted segment."""
    pred, gt = _as_segments(pred), _as_segments(gt)
    if _check_partition(pred, "predicted") != _check_partition(gt, "ground-truth"):
        raise UsageError("predicted and ground-truth segmentations cover different lengths")
    ps = np.array([s.start for s in pred])
    pe = np.array([s.end for s in pred])
    scores = []
    for g in gt:
        inter = np.clip(np.minimum(pe, g.end) - np.maximum(ps, g.start), 0, None)
        union = np.maximum(pe, g.end) - np.minimum(ps, g.start)
        scores.append(float((inter / union).max()))
    return float(np.mean(scores))


def frame_accuracy(pred, gt_labels) -> float:
    """Each predicted segment takes its majority ground-truth label
    (ties: the label seen first inside the segment)."""
    pred = _as_segments(pred)
    labels = list(gt_labels)
    if _check_partition(pred, "predicted") != len(labels):
        raise UsageError("segmentation length differs from label count")
    hits = 0
    for s in pred:
        span = labels[s.start : s.end]
        counts = Counter(span)
        best = max(counts.values())
        winner = next(lab for lab in span if counts[lab] == best)
        hits += counts[winner]
    return hits / len(labels)


def labels_to_segments(labels) -> list[Segment]:
    labels = list(labels)
    cuts = [t for t in range(1, len(labels)) if labels[t] != labels[t - 1]]
    edges = [0, *cuts, len(labels)]
    return [Segment(a, b) for a, b in zip(edges, edges[1:])]


def tracking_metrics(traces, channel: str = "extrinsic") -> tuple[float, float]:
    """(AR, AL): mean summed reward per episode and mean episode length."""
    traces = list(traces)
    if not traces:
        raise UsageError("no traces given")
    totals, lengths = [], []
    for tr in traces:
        r = tr.rewards(channel) if hasattr(tr, "rewards") else np.asarray(tr, dtype=np.float64)
        totals.append(float(np.sum(r)))
        lengths.append(len(r))
    return float(np.mean(totals)), float(np.mean(lengths))


def random_baseline_f1(n_pred: int, T: int, gt, tol: int, draws: int = 1000, rng=None) -> float:
    """Expected F1 of ``n_pred`` boundaries drawn uniformly without replacement from 1..T-1."""
    rng = np.random.default_rng(0) if rng is None else rng
    if n_pred == 0:
        return 0.0
    if n_pred > T - 1:
        raise UsageError("more boundaries requested than frames available")
    gt = _sorted_ints(gt, "ground-truth")
    total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for _ in range(draws):
            pred = np.sort(rng.choice(np.arange(1, T), size=n_pred, replace=False))
            total += boundary_prf(pred, gt, tol)[2]
    return total / draws


METRIC_COLUMNS = (
    "env_config", "regime", "mode", "tolerance", "precision", "recall", "f1",
    "iou", "frame_acc", "ar", "al", "episodes",
)


def evaluate_episodes(preds, gts, profile: ToleranceProfile, channel: str = "extrinsic",
                      env_config: str = "default", regime: str = "intrinsic", mode: str = "le") -> list[dict]:
    """Macro-averaged metrics, one row per tolerance.

    ``gts`` items are either traces (full ground truth, enables IoU, frame
    accuracy and AR/AL) or plain boundary lists.
    """
    from .events import segments_from_boundaries

    preds = [list(p) for p in preds]
    gts = list(gts)
    if len(preds) != len(gts) or not preds:
        raise UsageError("need one ground truth per prediction and at least one episode")
    traces = [g for g in gts if hasattr(g, "gt_boundaries")]
    gt_bounds = [g.gt_boundaries() if hasattr(g, "gt_boundaries") else list(g) for g in gts]
    iou = acc = ar = al = None
    if len(traces) == len(gts):
        ious, accs = [], []
        for p, tr in zip(preds, traces):
            T = len(tr)
            pseg = segments_from_boundaries(T, [b for b in p if 0 < b < T])
            gseg = segments_from_boundaries(T, tr.gt_boundaries())
            ious.append(segment_iou(pseg, gseg))
            accs.append(frame_accuracy(pseg, tr.gt_labels()))
        iou, acc = float(np.mean(ious)), float(np.mean(accs))
        ar, al = tracking_metrics(traces, channel)
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for tol in profile.tol_frames:
            prf = np.array([boundary_prf(p, g, tol) for p, g in zip(preds, gt_bounds)])
            P, R, F = prf.mean(axis=0)
            rows.append({
                "env_config": env_config, "regime": regime, "mode": mode, "tolerance": tol,
                "precision": float(P), "recall": float(R), "f1": float(F),
                "iou": iou, "frame_acc": acc, "ar": ar, "al": al, "episodes": len(preds),
            })
    return rows


def metrics_csv(rows) -> str:
    import csv
    import io

    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=METRIC_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: ("" if row.get(k) is None else row[k]) for k in METRIC_COLUMNS})
    return buf.getvalue()
