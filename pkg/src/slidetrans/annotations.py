"""Ground-truth annotation documents: schema, validation, file round trip.

One document describes one video: slide intervals (with stable slide ids),
video intervals, and the labeled transitions between them.  The same schema
is written by the synthetic generator, edited by the review UI, and read by
the evaluator.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import SchemaError
from .records import TransitionRecord


@dataclass(frozen=True)
class SlideInterval:
    slide_id: int
    start: int
    end: int


@dataclass(frozen=True)
class FrameInterval:
    start: int
    end: int


@dataclass
class GroundTruthDoc:
    video: str
    fps: float
    frame_count: int
    slide_intervals: list[SlideInterval] = field(default_factory=list)
    video_intervals: list[FrameInterval] = field(default_factory=list)
    transitions: list[TransitionRecord] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "video": self.video,
            "fps": self.fps,
            "frame_count": self.frame_count,
            "slide_intervals": [
                {"slide_id": s.slide_id, "start": s.start, "end": s.end}
                for s in self.slide_intervals
            ],
            "video_intervals": [
                {"start": v.start, "end": v.end} for v in self.video_intervals
            ],
            "transitions": [t.to_dict() for t in self.transitions],
        }


def _require(cond: bool, message: str, fieldpath: str) -> None:
    if not cond:
        raise SchemaError(message, field=fieldpath)


def _check_interval_list(items: list[tuple[int, int]], frame_count: int, name: str) -> None:
    for i, (start, end) in enumerate(items):
        _require(0 <= start <= end, f"{name}[{i}] has invalid bounds ({start}, {end})",
                 f"{name}[{i}]")
        _require(end < frame_count,
                 f"{name}[{i}] end {end} exceeds frame_count {frame_count}", f"{name}[{i}].end")
    for i in range(1, len(items)):
        _require(items[i][0] > items[i - 1][0],
                 f"{name} must be sorted by start: {name}[{i - 1}] and {name}[{i}]",
                 f"{name}[{i}]")
        _require(items[i][0] > items[i - 1][1],
                 f"{name}[{i - 1}] overlaps {name}[{i}]", f"{name}[{i}]")


def validate_ground_truth(doc: GroundTruthDoc) -> None:
    """Raise SchemaError (with a field path) on the first violation."""
    _require(isinstance(doc.video, str) and doc.video != "", "video id must be non-empty", "video")
    _require(doc.fps > 0, f"fps must be > 0, got {doc.fps}", "fps")
    _require(doc.frame_count >= 0, f"frame_count must be >= 0, got {doc.frame_count}",
             "frame_count")

    slides = [(s.start, s.end) for s in doc.slide_intervals]
    videos = [(v.start, v.end) for v in doc.video_intervals]
    _check_interval_list(slides, doc.frame_count, "slide_intervals")
    _check_interval_list(videos, doc.frame_count, "video_intervals")

    ids = [s.slide_id for s in doc.slide_intervals]
    _require(len(ids) == len(set(ids)), "slide_ids must be unique", "slide_intervals")

    # Slide and video intervals must not overlap each other either.
    merged = sorted(
        [(s, e, f"slide_intervals[{i}]") for i, (s, e) in enumerate(slides)]
        + [(s, e, f"video_intervals[{i}]") for i, (s, e) in enumerate(videos)]
    )
    for i in range(1, len(merged)):
        _require(merged[i][0] > merged[i - 1][1],
                 f"{merged[i - 1][2]} overlaps {merged[i][2]}", merged[i][2])

    intervals = [(s, e) for s, e, _ in merged]

    def strictly_inside(t: int) -> str | None:
        for (s, e, name) in merged:
            if s < t < e:
                return name
        return None

    for i, tr in enumerate(doc.transitions):
        fieldpath = f"transitions[{i}]"
        _require(tr.end < doc.frame_count,
                 f"{fieldpath} end {tr.end} exceeds frame_count {doc.frame_count}",
                 f"{fieldpath}.end")
        if i > 0:
            _require(tr.start >= doc.transitions[i - 1].start,
                     "transitions must be sorted by start", fieldpath)
        if intervals:
            for t, side in ((tr.start, "start"), (tr.end, "end")):
                inside = strictly_inside(t)
                _require(inside is None,
                         f"{fieldpath}.{side} ({t}) falls strictly inside {inside}; "
                         f"transitions must sit between or at interval boundaries",
                         f"{fieldpath}.{side}")


def ground_truth_from_dict(data: dict[str, Any]) -> GroundTruthDoc:
    if not isinstance(data, dict):
        raise SchemaError("ground truth document must be a JSON object")
    try:
        doc = GroundTruthDoc(
            video=data["video"],
            fps=float(data["fps"]),
            frame_count=int(data["frame_count"]),
            slide_intervals=[
                SlideInterval(int(s["slide_id"]), int(s["start"]), int(s["end"]))
                for s in data.get("slide_intervals", [])
            ],
            video_intervals=[
                FrameInterval(int(v["start"]), int(v["end"]))
                for v in data.get("video_intervals", [])
            ],
            transitions=[
                TransitionRecord.from_dict(t, field=f"transitions[{i}]")
                for i, t in enumerate(data.get("transitions", []))
            ],
        )
    except KeyError as exc:
        raise SchemaError(f"missing field {exc.args[0]!r}", field=str(exc.args[0])) from None
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"malformed ground truth document: {exc}") from exc
    validate_ground_truth(doc)
    return doc


def load_ground_truth(path: str | Path) -> GroundTruthDoc:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path} is not valid JSON: {exc}") from exc
    return ground_truth_from_dict(data)


def save_ground_truth(path: str | Path, doc: GroundTruthDoc) -> None:
    validate_ground_truth(doc)
    payload = json.dumps(doc.to_dict(), indent=2, sort_keys=True) + "\n"
    Path(path).write_text(payload, encoding="utf-8")


def slide_ids_per_frame(doc: GroundTruthDoc) -> list[int]:
    """Per-frame slide identity for the scripted pair oracle.

    Frames inside a slide interval share that slide's id; every other frame
    (fades, video scenes, unlabeled tails) gets a unique negative id so it
    matches nothing, not even itself at another index.
    """
    ids = [-(i + 1) for i in range(doc.frame_count)]
    for s in doc.slide_intervals:
        if s.slide_id < 0:
            raise SchemaError(f"slide_id must be >= 0 for the pair oracle, got {s.slide_id}")
        for i in range(s.start, s.end + 1):
            ids[i] = s.slide_id
    return ids
