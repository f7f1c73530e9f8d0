"""Detection evaluation: bidirectional matching and precision/recall/F1.

Records are points (start, end) in the plane.  A prediction and a label
match when each is the other's nearest neighbour and their Euclidean
distance is within the radius; matched pairs count as true positives.
Counts pool across videos before computing aggregate metrics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import SchemaError
from .records import TransitionRecord


@dataclass(frozen=True)
class EvalConfig:
    match_radius: float = 20.0  # Euclidean, inclusive

    def __post_init__(self) -> None:
        if self.match_radius < 0:
            raise SchemaError(f"match_radius must be >= 0, got {self.match_radius}")


@dataclass(frozen=True)
class MatchResult:
    tp: int
    pairs: tuple[tuple[int, int], ...]  # (predicted index, labeled index)


def _distance(a: TransitionRecord, b: TransitionRecord) -> float:
    return math.hypot(a.start - b.start, a.end - b.end)


def _nearest(record: TransitionRecord, pool: Sequence[TransitionRecord]) -> int:
    # Ties on equal distance go to the lower index.
    best_i = 0
    best_d = _distance(record, pool[0])
    for i in range(1, len(pool)):
        d = _distance(record, pool[i])
        if d < best_d:
            best_i, best_d = i, d
    return best_i


def match_bidirectional(predicted: Sequence[TransitionRecord],
                        labeled: Sequence[TransitionRecord],
                        cfg: EvalConfig | None = None) -> MatchResult:
    """Mutual-nearest matching within the radius; injective by construction."""
    cfg = cfg or EvalConfig()
    if not predicted or not labeled:
        return MatchResult(tp=0, pairs=())
    nearest_label = [_nearest(p, labeled) for p in predicted]
    nearest_pred = [_nearest(g, predicted) for g in labeled]
    pairs = []
    for i, j in enumerate(nearest_label):
        if nearest_pred[j] == i and _distance(predicted[i], labeled[j]) <= cfg.match_radius:
            pairs.append((i, j))
    return MatchResult(tp=len(pairs), pairs=tuple(pairs))


@dataclass(frozen=True)
class MetricsReport:
    """One evaluation row.  precision/recall/f1 are percentages; None marks
    a metric whose denominator was zero (undefined, not NaN)."""

    tp: int
    fp: int
    fn: int
    precision: float | None
    recall: float | None
    f1: float | None

    @property
    def n_predicted(self) -> int:
        return self.tp + self.fp

    @property
    def n_labeled(self) -> int:
        return self.tp + self.fn

    def to_dict(self) -> dict:
        return {
            "n_predicted": self.n_predicted,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


def compute_metrics(tp: int, fp: int, fn: int) -> MetricsReport:
    if min(tp, fp, fn) < 0:
        raise SchemaError(f"counts must be >= 0, got tp={tp} fp={fp} fn={fn}")
    precision = 100.0 * tp / (tp + fp) if tp + fp > 0 else None
    recall = 100.0 * tp / (tp + fn) if tp + fn > 0 else None
    f1: float | None
    if precision is None or recall is None or precision + recall == 0:
        f1 = None
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return MetricsReport(tp=tp, fp=fp, fn=fn, precision=precision, recall=recall, f1=f1)


def evaluate_records(predicted: Sequence[TransitionRecord],
                     labeled: Sequence[TransitionRecord],
                     cfg: EvalConfig | None = None) -> MetricsReport:
    match = match_bidirectional(predicted, labeled, cfg)
    return compute_metrics(tp=match.tp, fp=len(predicted) - match.tp,
                           fn=len(labeled) - match.tp)


def _fmt(value: float | None) -> str:
    return "undef" if value is None else f"{value:.2f}"


def report_table(per_video: Sequence[tuple[str, MetricsReport]]) -> tuple[str, dict]:
    """Aligned text table plus a machine-readable summary.

    Counts pool across rows (micro-average) into a final row; metrics keep
    full precision in the summary and round to 2 decimals for display.
    """
    pooled = compute_metrics(
        tp=sum(r.tp for _, r in per_video),
        fp=sum(r.fp for _, r in per_video),
        fn=sum(r.fn for _, r in per_video),
    )
    rows = list(per_video) + [("pooled", pooled)]
    name_w = max(len(name) for name, _ in rows)
    header = (f"{'video':<{name_w}}  {'detected':>8}  {'tp':>5}  {'fp':>5}  {'fn':>5}  "
              f"{'precision':>9}  {'recall':>7}  {'f1':>7}")
    lines = [header, "-" * len(header)]
    for name, r in rows:
        lines.append(
            f"{name:<{name_w}}  {r.n_predicted:>8}  {r.tp:>5}  {r.fp:>5}  {r.fn:>5}  "
            f"{_fmt(r.precision):>9}  {_fmt(r.recall):>7}  {_fmt(r.f1):>7}"
        )
    summary = {
        "per_video": [{"name": name, **r.to_dict()} for name, r in per_video],
        "pooled": pooled.to_dict(),
    }
    return "\n".join(lines), summary
