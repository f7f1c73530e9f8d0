"""First-stage candidate detection: the anchor state machine.

Each incoming frame is compared against the current anchor.  A run of Same
verdicts long enough to clear the static floor becomes a StaticSlide; short
runs of Different verdicts set video anchors that bound a suspected video
sequence.  Candidates are then read off the gaps between segments.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterable

from .errors import DetectorError, SchemaError


@dataclass(frozen=True)
class DetectorConfig:
    # static_min_frames is the floor on static-slide run length; gaps between
    # statics wider than min_video_len are treated as video-bearing.
    static_min_frames: int = 8
    min_video_len: int = 9

    def __post_init__(self) -> None:
        if self.static_min_frames < 1:
            raise SchemaError(f"static_min_frames must be >= 1, got {self.static_min_frames}")
        if self.min_video_len < 0:
            raise SchemaError(f"min_video_len must be >= 0, got {self.min_video_len}")


class SegmentKind(str, Enum):
    STATIC_SLIDE = "static_slide"
    VIDEO = "video"


@dataclass(frozen=True)
class Segment:
    kind: SegmentKind
    start: int
    end: int

    def __post_init__(self) -> None:
        if self.start < 0 or self.end < self.start:
            raise SchemaError(f"bad segment bounds ({self.start}, {self.end})")

    @property
    def length(self) -> int:
        return self.end - self.start + 1

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "start": self.start, "end": self.end}


class CandidateKind(str, Enum):
    SLIDE_SLIDE = "slide_slide"
    SLIDE_VIDEO = "slide_video"
    VIDEO_SLIDE = "video_slide"


@dataclass(frozen=True)
class TransitionCandidate:
    """A gap between segments proposed for refinement.

    gap_start is the last frame of the preceding segment, gap_end the first
    frame of the following one; context holds the indices of those segments
    in the segment list (-1 when absent).
    """

    kind: CandidateKind
    gap_start: int
    gap_end: int
    context: tuple[int, int] = (-1, -1)

    def __post_init__(self) -> None:
        if self.gap_start >= self.gap_end:
            raise SchemaError(
                f"candidate gap must satisfy gap_start < gap_end, "
                f"got ({self.gap_start}, {self.gap_end})"
            )

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "gap_start": self.gap_start, "gap_end": self.gap_end}


SameFn = Callable[[int, int], Any]


def _is_same(verdict: Any) -> bool:
    if isinstance(verdict, bool):
        return verdict
    is_same = getattr(verdict, "is_same", None)
    if is_same is not None:
        return bool(is_same)
    return bool(verdict)


def detect_segments(same_fn: SameFn, n_frames: int, cfg: DetectorConfig | None = None) -> list[Segment]:
    """Single streaming pass over pair verdicts against the current anchor.

    same_fn(anchor, k) is invoked exactly once for every k in 1..n_frames-1.
    On a Different verdict at k with run length d = k - anchor:
      d >= static_min_frames: the run was a static slide; any pending video
        flushes first, clipped to end before the slide so segments stay
        disjoint (a video anchor coinciding with the slide start would
        otherwise overlap it).
      d < static_min_frames: the previous video anchor arms on first entry,
        the video anchor tracks k from then on.
    The anchor moves to k on every Different.  The trailing run flushes the
    same way at end of stream, except that a pending video with no static
    after it keeps its last anchor (nothing to stay disjoint from).
    """
    cfg = cfg or DetectorConfig()
    if n_frames < 0:
        raise DetectorError(f"n_frames must be >= 0, got {n_frames}")
    segments: list[Segment] = []
    anchor = 0
    prev_video_anchor: int | None = None
    video_anchor: int | None = None

    def flush_video(end: int) -> None:
        nonlocal prev_video_anchor, video_anchor
        if prev_video_anchor is not None and end >= prev_video_anchor:
            segments.append(Segment(SegmentKind.VIDEO, prev_video_anchor, end))
        prev_video_anchor = None
        video_anchor = None

    for k in range(1, n_frames):
        try:
            verdict = same_fn(anchor, k)
        except Exception as exc:
            raise DetectorError(f"pair classification failed: {exc}", frame_index=k) from exc
        if _is_same(verdict):
            continue
        run = k - anchor
        if run >= cfg.static_min_frames:
            flush_video(anchor - 1)
            segments.append(Segment(SegmentKind.STATIC_SLIDE, anchor, k - 1))
        else:
            if prev_video_anchor is None:
                prev_video_anchor = k
            video_anchor = k
        anchor = k

    if n_frames > 0:
        run = n_frames - anchor
        if run >= cfg.static_min_frames:
            flush_video(anchor - 1)
            segments.append(Segment(SegmentKind.STATIC_SLIDE, anchor, n_frames - 1))
        elif video_anchor is not None:
            flush_video(video_anchor)
    return segments


def _check_segments(segments: list[Segment]) -> None:
    for i in range(1, len(segments)):
        prev, cur = segments[i - 1], segments[i]
        if cur.start <= prev.end:
            raise DetectorError(
                f"segments must be sorted and disjoint; segment {i} ({cur.start}, {cur.end}) "
                f"overlaps or precedes segment {i - 1} ({prev.start}, {prev.end})"
            )


def derive_candidates(segments: list[Segment], cfg: DetectorConfig | None = None) -> list[TransitionCandidate]:
    """Read transition candidates off the gaps between segments.

    Adjacent statics with nothing between them (or with a gap of at most
    min_video_len frames, which a gradual transition's spurious video
    anchors produce) yield one SlideSlide candidate spanning the gap.
    A video in a wider gap yields SlideVideo at its left boundary and
    VideoSlide at its right, whenever a static adjoins on that side.
    """
    cfg = cfg or DetectorConfig()
    _check_segments(segments)
    candidates: list[TransitionCandidate] = []
    static_idx = [i for i, s in enumerate(segments) if s.kind is SegmentKind.STATIC_SLIDE]

    merged_videos: set[int] = set()
    for a, b in zip(static_idx, static_idx[1:]):
        s1, s2 = segments[a], segments[b]
        gap_len = s2.start - s1.end - 1
        between = list(range(a + 1, b))
        if not between or gap_len <= cfg.min_video_len:
            merged_videos.update(between)
            candidates.append(
                TransitionCandidate(CandidateKind.SLIDE_SLIDE, s1.end, s2.start, (a, b))
            )

    for i, seg in enumerate(segments):
        if seg.kind is not SegmentKind.VIDEO or i in merged_videos:
            continue
        if i > 0 and segments[i - 1].kind is SegmentKind.STATIC_SLIDE:
            candidates.append(
                TransitionCandidate(
                    CandidateKind.SLIDE_VIDEO, segments[i - 1].end, seg.start, (i - 1, i)
                )
            )
        if i + 1 < len(segments) and segments[i + 1].kind is SegmentKind.STATIC_SLIDE:
            candidates.append(
                TransitionCandidate(
                    CandidateKind.VIDEO_SLIDE, seg.end, segments[i + 1].start, (i, i + 1)
                )
            )

    candidates.sort(key=lambda c: (c.gap_start, c.gap_end, c.kind.value))
    for j in range(1, len(candidates)):
        if candidates[j].to_dict() == candidates[j - 1].to_dict():
            raise DetectorError(f"duplicate candidate {candidates[j].to_dict()}")
    return candidates


def dump_segments(video: str, segments: Iterable[Segment],
                  candidates: Iterable[TransitionCandidate]) -> dict[str, Any]:
    return {
        "video": video,
        "segments": [s.to_dict() for s in segments],
        "candidates": [c.to_dict() for c in candidates],
    }


def write_segments(path: str | Path, doc: dict[str, Any]) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_segments(path: str | Path) -> tuple[list[Segment], list[TransitionCandidate]]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    try:
        segments = [
            Segment(SegmentKind(s["kind"]), s["start"], s["end"]) for s in doc["segments"]
        ]
        candidates = [
            TransitionCandidate(CandidateKind(c["kind"]), c["gap_start"], c["gap_end"])
            for c in doc["candidates"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed segment dump {path}: {exc}") from exc
    return segments, candidates
