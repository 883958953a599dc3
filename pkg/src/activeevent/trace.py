"""Per-step episode traces persisted as JSONL (one record per step)."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import FormatError

TRACE_KEYS = (
    "step",
    "action",
    "le",
    "entropy",
    "r_intrinsic",
    "r_extrinsic",
    "alpha_argmax",
    "gt_boundary",
    "gt_event_kind",
    "target_visible",
    "hidden",
)


def dumps_record(rec: dict) -> str:
    return json.dumps(rec, separators=(",", ":"), allow_nan=False)


class EpisodeTrace:
    """Append-only list of step records."""

    def __init__(self, records=None):
        self.records: list[dict] = list(records or [])

    def __len__(self) -> int:
        return len(self.records)

    def append(self, rec: dict) -> None:
        if rec["step"] != len(self.records):
            raise FormatError(f"trace step {rec['step']} out of order (expected {len(self.records)})")
        self.records.append(rec)

    def column(self, key: str) -> np.ndarray:
        return np.array([r[key] for r in self.records])

    @property
    def le(self) -> np.ndarray:
        return np.array([r["le"] for r in self.records], dtype=np.float64)

    def hidden_states(self) -> np.ndarray:
        return np.array([r["hidden"] for r in self.records], dtype=np.float64)

    def gt_boundaries(self) -> list[int]:
        return [r["step"] for r in self.records if r["gt_boundary"]]

    def gt_labels(self) -> list[str]:
        return [r["gt_event_kind"] for r in self.records]

    def rewards(self, channel: str = "extrinsic") -> np.ndarray:
        return np.array([r[f"r_{channel}"] for r in self.records], dtype=np.float64)

    def dumps(self) -> str:
        return "".join(dumps_record(r) + "\n" for r in self.records)

    def write(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def loads(cls, text: str) -> "EpisodeTrace":
        tr = cls()
        for i, line in enumerate(text.splitlines()):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"trace line {i + 1}: {exc}") from None
            tr.append(rec)
        return tr

    @classmethod
    def read(cls, path) -> "EpisodeTrace":
        return cls.loads(Path(path).read_text(encoding="utf-8"))


def read_stream(path, mode: str = "le") -> np.ndarray:
    """Error stream from a JSONL trace or a one-scalar-per-line text file."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    first = next((ln for ln in text.splitlines() if ln.strip()), "")
    if first.lstrip().startswith("{"):
        tr = EpisodeTrace.loads(text)
        if mode == "hidden":
            from .events import hidden_delta_signal

            return hidden_delta_signal(tr.hidden_states())
        return tr.le
    if mode == "hidden":
        raise FormatError(f"{path}: hidden mode needs a JSONL trace")
    try:
        return np.array([float(ln) for ln in text.split()], dtype=np.float64)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
