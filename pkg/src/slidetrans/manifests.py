"""Training-sample manifests derived from ground truth.

Manifests reference frames by index only; pixels stay in the video source.
Pair manifests balance same/different labels exactly.  Clip manifests put
clips at striking positions: around hard cuts, at the begin/middle/end of
fades, centered in static slides, equally spaced inside video scenes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .annotations import GroundTruthDoc
from .errors import SchemaError
from .records import TransitionKind
from .refiner import ClipConfig, SceneClipClass, TransitionClipClass

TRANSITION_CLASSES = tuple(c.value for c in TransitionClipClass)
SCENE_CLASSES = tuple(c.value for c in SceneClipClass)

# Training-run metadata recorded alongside manifests so a training harness
# (out of scope here) sees one source of truth for the published recipe.
TRAINING_DEFAULTS = {
    "optimizer": "adam",
    "learning_rate": 2e-4,
    "betas": [0.9, 0.999],
    "epochs": 100,
    "lr_decay_epochs": [50, 60],
    "batch_size": {"pair": 64, "clip": 32},
    "loss": "weighted_cross_entropy",
    "augmentations": ["random_crop", "horizontal_flip", "color_jitter"],
}


@dataclass(frozen=True)
class PairEntry:
    frame_i: int
    frame_j: int
    label: str  # "same" | "different"

    def to_dict(self) -> dict[str, Any]:
        return {"frame_i": self.frame_i, "frame_j": self.frame_j, "label": self.label}


@dataclass(frozen=True)
class ClipEntry:
    start: int
    cls: str
    stream: str  # "cropped" | "raw"

    def to_dict(self) -> dict[str, Any]:
        return {"start": self.start, "class": self.cls, "stream": self.stream}


@dataclass
class Manifest:
    meta: dict[str, Any]
    entries: list[PairEntry] | list[ClipEntry] = field(default_factory=list)


def write_manifest(path: str | Path, manifest: Manifest) -> None:
    """JSON-lines: meta object first, one entry per following line."""
    lines = [json.dumps(manifest.meta, sort_keys=True)]
    lines += [json.dumps(e.to_dict(), sort_keys=True) for e in manifest.entries]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path: str | Path) -> Manifest:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise SchemaError(f"empty manifest {path}")
    meta = json.loads(lines[0])
    kind = meta.get("type")
    entries: list[Any] = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        data = json.loads(line)
        if kind == "pair_manifest":
            entries.append(PairEntry(data["frame_i"], data["frame_j"], data["label"]))
        elif kind == "clip_manifest":
            entries.append(ClipEntry(data["start"], data["class"], data["stream"]))
        else:
            raise SchemaError(f"unknown manifest type {kind!r} in {path}", field="type")
    return Manifest(meta=meta, entries=entries)


def _pair_key(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i <= j else (j, i)


def _sample_within(rng: np.random.Generator, start: int, end: int, count: int,
                   taken: set[tuple[int, int]]) -> list[tuple[int, int]]:
    """Distinct unordered same-slide pairs from [start, end]."""
    length = end - start + 1
    total = length * (length - 1) // 2
    count = min(count, total)
    out: list[tuple[int, int]] = []
    attempts = 0
    while len(out) < count and attempts < 200 * count:
        attempts += 1
        i, j = rng.integers(start, end + 1, size=2)
        if i == j:
            continue
        key = _pair_key(int(i), int(j))
        if key in taken:
            continue
        taken.add(key)
        out.append(key)
    if len(out) < count:
        # Tiny interval: enumerate instead of rejection-sampling.
        for i in range(start, end + 1):
            for j in range(i + 1, end + 1):
                if len(out) >= count:
                    break
                key = (i, j)
                if key not in taken:
                    taken.add(key)
                    out.append(key)
    return out


def generate_pair_manifest(gt: GroundTruthDoc, seed: int, pairs_per_slide: int = 4) -> Manifest:
    """Balanced same/different frame pairs.

    Positives come from within each slide interval.  Negatives are seeded
    with one pair toward each existing neighbor slide, then filled with
    random cross-slide pairs until they match the positive count exactly.
    """
    slides = gt.slide_intervals
    if len(slides) < 2:
        raise SchemaError("pair sampling needs at least 2 slide intervals "
                          "(no negative pairs possible)", field="slide_intervals")
    if pairs_per_slide < 1:
        raise SchemaError(f"pairs_per_slide must be >= 1, got {pairs_per_slide}")
    rng = np.random.default_rng(seed)

    taken_pos: set[tuple[int, int]] = set()
    positives: list[PairEntry] = []
    for s in slides:
        for (i, j) in _sample_within(rng, s.start, s.end, pairs_per_slide, taken_pos):
            positives.append(PairEntry(i, j, "same"))

    def rand_frame(idx: int) -> int:
        s = slides[idx]
        return int(rng.integers(s.start, s.end + 1))

    taken_neg: set[tuple[int, int]] = set()
    negatives: list[PairEntry] = []

    def add_negative(a_idx: int, b_idx: int, tries: int = 50) -> bool:
        for _ in range(tries):
            key = _pair_key(rand_frame(a_idx), rand_frame(b_idx))
            if key not in taken_neg:
                taken_neg.add(key)
                negatives.append(PairEntry(key[0], key[1], "different"))
                return True
        return False

    for idx in range(len(slides)):
        quota = pairs_per_slide
        neighbors = [n for n in (idx - 1, idx + 1) if 0 <= n < len(slides)]
        for n in neighbors[:quota]:
            add_negative(idx, n)
        for _ in range(quota - min(quota, len(neighbors))):
            other = int(rng.integers(0, len(slides) - 1))
            if other >= idx:
                other += 1
            add_negative(idx, other)

    # Exact balance: top up negatives with random cross pairs, else trim.
    attempts = 0
    while len(negatives) < len(positives) and attempts < 10000:
        attempts += 1
        a, b = rng.integers(0, len(slides), size=2)
        if a != b:
            add_negative(int(a), int(b), tries=5)
    if len(negatives) < len(positives):
        positives = positives[: len(negatives)]
    elif len(negatives) > len(positives):
        negatives = negatives[: len(positives)]

    entries = sorted(positives, key=lambda e: (e.frame_i, e.frame_j)) + sorted(
        negatives, key=lambda e: (e.frame_i, e.frame_j)
    )
    meta = {
        "type": "pair_manifest",
        "video": gt.video,
        "seed": seed,
        "pairs_per_slide": pairs_per_slide,
        "counts": {"same": len(positives), "different": len(negatives)},
        "training": TRAINING_DEFAULTS,
    }
    return Manifest(meta=meta, entries=entries)


def _center_start(center: int, clip_len: int) -> int:
    return center - clip_len // 2


def _interval_center(start: int, end: int) -> int:
    return (start + end + 1) // 2


def generate_clip_manifest(gt: GroundTruthDoc, cfg: ClipConfig, task: str, seed: int,
                           video_clip_spacing: int = 8, video_clip_cap: int = 16) -> Manifest:
    """Striking-position clips labeled for one of the two clip tasks.

    Out-of-bounds placements (interval too short, transition too close to
    a stream edge) are skipped and listed in the meta's skip report.
    """
    if task not in ("transition", "scene"):
        raise SchemaError(f"unknown clip task {task!r}", field="task")
    L = cfg.clip_len
    hi = gt.frame_count - L
    stream = "cropped" if task == "transition" else "raw"
    placements: list[tuple[int, str, str]] = []  # (start, class, why)
    skipped: list[dict[str, Any]] = []

    def place(start: int, cls: str, why: str) -> None:
        if 0 <= start <= hi:
            placements.append((start, cls, why))
        else:
            skipped.append({"start": start, "class": cls, "reason": "out_of_bounds",
                            "source": why})

    for t in gt.transitions:
        if t.kind is TransitionKind.HARD:
            cls = "hard" if task == "transition" else "slide"
            for offset in (-1, 0, 1):
                place(_center_start(t.end + offset, L), cls, f"hard@{t.start}")
        elif t.kind is TransitionKind.GRADUAL:
            cls = "gradual" if task == "transition" else "slide"
            mid = _interval_center(t.start, t.end)
            for pos in dict.fromkeys((t.start, mid, t.end)):
                place(_center_start(pos, L), cls, f"gradual@{t.start}")
        else:
            cls = "hard" if task == "transition" else "slide_video_transition"
            for offset in (-1, 0, 1):
                place(_center_start(t.end + offset, L), cls, f"{t.kind.value}@{t.start}")

    for s in gt.slide_intervals:
        cls = "static_slide" if task == "transition" else "slide"
        if s.end - s.start + 1 < L:
            skipped.append({"start": s.start, "class": cls, "reason": "interval_shorter_than_clip",
                            "source": f"slide@{s.start}"})
            continue
        start = _center_start(_interval_center(s.start, s.end), L)
        start = min(max(start, s.start), s.end - L + 1)
        place(start, cls, f"slide@{s.start}")

    for v in gt.video_intervals:
        length = v.end - v.start + 1
        if length < L:
            skipped.append({"start": v.start, "class": "video",
                            "reason": "interval_shorter_than_clip", "source": f"video@{v.start}"})
            continue
        n = min(video_clip_cap, max(1, length // video_clip_spacing))
        if n == 1:
            starts = [v.start + (length - L) // 2]
        else:
            starts = [int(round(x)) for x in np.linspace(v.start, v.end - L + 1, n)]
        for start in dict.fromkeys(starts):
            place(start, "video", f"video@{v.start}")

    placements.sort(key=lambda p: (p[0], p[1]))
    entries = [ClipEntry(start, cls, stream) for start, cls, _ in placements]
    counts: dict[str, int] = {}
    for e in entries:
        counts[e.cls] = counts.get(e.cls, 0) + 1
    meta = {
        "type": "clip_manifest",
        "video": gt.video,
        "task": task,
        "seed": seed,
        "clip_len": L,
        "counts": counts,
        "skipped": skipped,
        "training": TRAINING_DEFAULTS,
    }
    return Manifest(meta=meta, entries=entries)


def class_weights(manifest: Manifest) -> dict[str, Any]:
    """Inverse-frequency weights w_c = N / (K * count_c) over present classes.

    Task classes missing from the manifest are flagged, not weighted.
    """
    if manifest.meta.get("type") != "clip_manifest":
        raise SchemaError("class weights are defined for clip manifests")
    entries = manifest.entries
    if not entries:
        raise SchemaError("cannot weight an empty manifest")
    counts: dict[str, int] = {}
    for e in entries:
        counts[e.cls] = counts.get(e.cls, 0) + 1
    task = manifest.meta.get("task")
    universe = TRANSITION_CLASSES if task == "transition" else SCENE_CLASSES
    n = len(entries)
    k = len(counts)
    weights = {cls: n / (k * c) for cls, c in sorted(counts.items())}
    missing = [cls for cls in universe if cls not in counts]
    return {"weights": weights, "missing_classes": missing, "n": n, "k": k}


def manifest_bounds_ok(manifest: Manifest, frame_count: int) -> bool:
    L = manifest.meta.get("clip_len", 0)
    return all(0 <= e.start <= frame_count - L for e in manifest.entries)


def balanced(manifest: Manifest) -> bool:
    labels = [e.label for e in manifest.entries]
    return labels.count("same") == labels.count("different")


def unordered_pairs(entries: Iterable[PairEntry]) -> list[tuple[int, int]]:
    return [_pair_key(e.frame_i, e.frame_j) for e in entries]


def expected_clip_count(width: int, cfg: ClipConfig) -> int:
    """Closed form for the number of covering clips over a gap of the given
    width (gap_end - gap_start) when no clamping applies."""
    return math.ceil((width + 2 * cfg.margin - cfg.clip_len) / cfg.stride) + 1
