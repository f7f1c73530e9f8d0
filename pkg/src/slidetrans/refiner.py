"""Second-stage refinement: clip extraction, classification, vote fusion.

Candidates from the first stage get a window of overlapping fixed-length
clips.  Two classifiers vote per clip: a transition model on the cropped
stream (hard / gradual / static slide / video) and a scene model on the
raw stream (slide-video transition / slide / video).  A candidate is
dropped exactly when both aggregated votes say video.
"""

from __future__ import annotations

import json
from collections import Counter, deque
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Protocol, Sequence

import numpy as np

from .detector import CandidateKind, TransitionCandidate
from .errors import BackendError, ContractError, SchemaError
from .frames import Frame, FrameStream
from .pairs import IO_CONTRACT_FILE, _check_declared, _load_torchscript, _probe
from .records import TransitionKind, TransitionRecord


@dataclass(frozen=True)
class ClipConfig:
    clip_len: int = 8
    stride: int = 4
    margin: int = 4  # frames of context around the gap included in coverage

    def __post_init__(self) -> None:
        if self.clip_len < 2:
            raise SchemaError(f"clip_len must be >= 2, got {self.clip_len}")
        if not 1 <= self.stride <= self.clip_len:
            raise SchemaError(f"stride must be in 1..clip_len, got {self.stride}")
        if self.margin < 0:
            raise SchemaError(f"margin must be >= 0, got {self.margin}")


class StreamKind(str, Enum):
    CROPPED = "cropped"
    RAW = "raw"


class TransitionClipClass(str, Enum):
    HARD = "hard"
    GRADUAL = "gradual"
    STATIC_SLIDE = "static_slide"
    VIDEO = "video"


class SceneClipClass(str, Enum):
    SLIDE_VIDEO_TRANSITION = "slide_video_transition"
    SLIDE = "slide"
    VIDEO = "video"


# Tie-break preference orders: non-video first, then the stated ranking.
TRANSITION_PRIORITY: tuple[TransitionClipClass, ...] = (
    TransitionClipClass.HARD,
    TransitionClipClass.GRADUAL,
    TransitionClipClass.STATIC_SLIDE,
    TransitionClipClass.VIDEO,
)
SCENE_PRIORITY: tuple[SceneClipClass, ...] = (
    SceneClipClass.SLIDE_VIDEO_TRANSITION,
    SceneClipClass.SLIDE,
    SceneClipClass.VIDEO,
)


@dataclass(frozen=True)
class Clip:
    start: int
    frames: tuple[Frame, ...]
    stream: StreamKind

    def __post_init__(self) -> None:
        for offset, frame in enumerate(self.frames):
            if frame.index != self.start + offset:
                raise SchemaError(
                    f"clip frames must be contiguous from {self.start}; "
                    f"offset {offset} has index {frame.index}"
                )

    @property
    def end(self) -> int:
        return self.start + len(self.frames) - 1


@dataclass(frozen=True)
class ClipVerdict:
    value: TransitionClipClass | SceneClipClass
    scores: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.scores:
            if not all(np.isfinite(self.scores)):
                raise SchemaError("clip scores must be finite")
            top = int(np.argmax(self.scores))
            classes = _task_classes(self.value)
            if classes[top] is not self.value:
                raise SchemaError(
                    f"verdict value {self.value.value!r} disagrees with argmax {classes[top].value!r}"
                )


def _task_classes(value: TransitionClipClass | SceneClipClass) -> tuple[Any, ...]:
    if isinstance(value, TransitionClipClass):
        return tuple(TransitionClipClass)
    return tuple(SceneClipClass)


@dataclass(frozen=True)
class ClipModelContract:
    """Expected tensor shapes for a clip model: frames-major rgb input."""

    task: str  # "transition" (cropped, 4 classes) or "scene" (raw, 3 classes)
    clip_len: int = 8
    patch_size: int = 256

    def __post_init__(self) -> None:
        if self.task not in ("transition", "scene"):
            raise SchemaError(f"unknown clip task {self.task!r}")

    @property
    def classes(self) -> int:
        return 4 if self.task == "transition" else 3

    @property
    def stream_kind(self) -> StreamKind:
        return StreamKind.CROPPED if self.task == "transition" else StreamKind.RAW

    @property
    def class_values(self) -> tuple[Any, ...]:
        if self.task == "transition":
            return tuple(TransitionClipClass)
        return tuple(SceneClipClass)

    def to_dict(self) -> dict[str, Any]:
        return {
            "task": self.task,
            "input": [self.clip_len, self.patch_size, self.patch_size, 3],
            "output": [self.classes],
        }


def clip_starts(gap_start: int, gap_end: int, n_frames: int, cfg: ClipConfig | None = None) -> list[int]:
    """Start indices of overlapping clips covering the gap plus margin.

    Coverage target is [gap_start - margin, gap_end + margin - 1], clamped
    to the stream; consecutive starts differ by stride except for a final
    clamp at the top.  When the whole gap fits in one clip, at least one
    returned start straddles both gap ends.
    """
    cfg = cfg or ClipConfig()
    if n_frames < cfg.clip_len:
        raise SchemaError(f"stream of {n_frames} frames is shorter than clip_len {cfg.clip_len}")
    if not 0 <= gap_start < gap_end < n_frames:
        raise SchemaError(f"gap ({gap_start}, {gap_end}) outside stream of {n_frames} frames")
    lo, hi = 0, n_frames - cfg.clip_len
    cover_end = min(max(gap_end + cfg.margin - 1, gap_end), n_frames - 1)
    starts = []
    s = min(max(gap_start - cfg.margin, lo), hi)
    while True:
        starts.append(s)
        if s >= hi or s + cfg.clip_len - 1 >= cover_end:
            break
        s = min(s + cfg.stride, hi)
    if gap_end - gap_start + 1 <= cfg.clip_len:
        if not any(t <= gap_start and t + cfg.clip_len - 1 >= gap_end for t in starts):
            t = min(max(gap_end - cfg.clip_len + 1, lo), gap_start, hi)
            starts.append(t)
    return sorted(set(starts))


def collect_clips(stream: FrameStream, starts: Sequence[int], clip_len: int,
                  kind: StreamKind) -> dict[int, Clip]:
    """Materialize the requested clip windows in one pass over the stream."""
    wanted = sorted(set(starts))
    out: dict[int, Clip] = {}
    if not wanted:
        return out
    buffer: deque[Frame] = deque(maxlen=clip_len)
    next_i = 0
    for frame in stream:
        buffer.append(frame)
        while next_i < len(wanted) and len(buffer) == clip_len and buffer[0].index == wanted[next_i]:
            out[wanted[next_i]] = Clip(start=wanted[next_i], frames=tuple(buffer), stream=kind)
            next_i += 1
        if next_i >= len(wanted):
            break
    if next_i < len(wanted):
        raise SchemaError(
            f"stream ended before clip at {wanted[next_i]} (+{clip_len} frames) could be read"
        )
    return out


def extract_clips(candidate: TransitionCandidate, stream: FrameStream,
                  cfg: ClipConfig | None = None, kind: StreamKind | None = None) -> list[Clip]:
    """Clips for one candidate, consuming the stream (single pass)."""
    cfg = cfg or ClipConfig()
    n = stream.info.frame_count
    if n is None:
        raise SchemaError("clip extraction needs a source with a known frame count")
    if kind is None:
        cropped = stream.spec is not None and stream.spec.crop is not None
        kind = StreamKind.CROPPED if cropped else StreamKind.RAW
    starts = clip_starts(candidate.gap_start, candidate.gap_end, n, cfg)
    clips = collect_clips(stream, starts, cfg.clip_len, kind)
    return [clips[s] for s in starts]


class ClipBackend(Protocol):
    needs_frames: bool
    stream_kind: StreamKind

    def classify(self, clip: Clip) -> ClipVerdict: ...


def classify_clip(clip: Clip, backend: ClipBackend) -> ClipVerdict:
    if clip.stream is not backend.stream_kind:
        raise BackendError(
            f"clip from the {clip.stream.value} stream fed to a backend expecting "
            f"the {backend.stream_kind.value} stream"
        )
    return backend.classify(clip)


class NeuralClipBackend:
    """TorchScript clip model behind the backend protocol."""

    needs_frames = True

    def __init__(self, module: Any, contract: ClipModelContract, path: str | Path = "<memory>"):
        self._module = module
        self.contract = contract
        self.stream_kind = contract.stream_kind
        self._path = str(path)

    def classify(self, clip: Clip) -> ClipVerdict:
        import torch

        c = self.contract
        if len(clip.frames) != c.clip_len:
            raise BackendError(
                f"clip model {self._path} expects {c.clip_len} frames, got {len(clip.frames)}"
            )
        for frame in clip.frames:
            if frame.data.shape != (c.patch_size, c.patch_size, 3):
                raise BackendError(
                    f"clip model {self._path} expects {c.patch_size}x{c.patch_size} rgb frames, "
                    f"got shape {frame.data.shape}"
                )
        stacked = np.stack([f.data for f in clip.frames]).astype(np.float32) / 255.0
        tensor = torch.from_numpy(stacked).unsqueeze(0)
        with torch.no_grad():
            logits = self._module(tensor)
            probs = torch.softmax(logits, dim=1)[0].numpy()
        values = c.class_values
        return ClipVerdict(value=values[int(np.argmax(probs))],
                           scores=tuple(float(p) for p in probs))


def load_clip_model(path: str | Path, contract: ClipModelContract) -> NeuralClipBackend:
    """Load a TorchScript clip model, verifying shapes before first use."""
    module, declared = _load_torchscript(path)
    expected = contract.to_dict()
    _check_declared(path, declared, expected)
    _probe(module, path, (contract.clip_len, contract.patch_size, contract.patch_size, 3),
           contract.classes)
    return NeuralClipBackend(module, contract, path)


def save_clip_model(module: Any, path: str | Path, contract: ClipModelContract) -> None:
    import torch

    scripted = module if isinstance(module, torch.jit.ScriptModule) else torch.jit.script(module)
    torch.jit.save(scripted, str(path),
                   _extra_files={IO_CONTRACT_FILE: json.dumps(contract.to_dict()).encode()})


class OracleClipBackend:
    """Scripted clip verdicts derived from interval-level ground truth.

    Works from frame indices alone.  In the cropped (transition) task a
    labeled cut pair inside the window wins, then fade-interior overlap,
    then video-interval overlap, else static slide.  In the raw (scene)
    task only slide-video cuts count as transitions.
    """

    needs_frames = False

    def __init__(self, task: str, cut_pairs: list[tuple[int, int]],
                 fade_intervals: list[tuple[int, int]],
                 video_intervals: list[tuple[int, int]],
                 sv_pairs: list[tuple[int, int]]):
        if task not in ("transition", "scene"):
            raise BackendError(f"unknown clip task {task!r}")
        self.task = task
        self.stream_kind = StreamKind.CROPPED if task == "transition" else StreamKind.RAW
        self._cuts = cut_pairs  # hard slide-slide cuts plus slide<->video cuts
        self._fades = fade_intervals  # gradual fade interiors (start+1 .. end-1)
        self._videos = video_intervals
        self._sv_cuts = sv_pairs  # slide<->video cuts only

    @classmethod
    def from_ground_truth(cls, gt: Any, task: str) -> "OracleClipBackend":
        cuts: list[tuple[int, int]] = []
        fades: list[tuple[int, int]] = []
        sv: list[tuple[int, int]] = []
        for t in gt.transitions:
            if t.kind is TransitionKind.HARD:
                cuts.append((t.start, t.end))
            elif t.kind is TransitionKind.GRADUAL:
                if t.end - t.start >= 2:
                    fades.append((t.start + 1, t.end - 1))
                else:
                    cuts.append((t.start, t.end))
            else:
                cuts.append((t.start, t.end))
                sv.append((t.start, t.end))
        videos = [(v.start, v.end) for v in gt.video_intervals]
        return cls(task, cuts, fades, videos, sv)

    def classify_window(self, start: int, length: int) -> ClipVerdict:
        end = start + length - 1

        def contains(pair: tuple[int, int]) -> bool:
            return start <= pair[0] and pair[1] <= end

        def overlaps(iv: tuple[int, int]) -> bool:
            return iv[0] <= end and start <= iv[1]

        if self.task == "transition":
            if any(contains(p) for p in self._cuts):
                value: Any = TransitionClipClass.HARD
            elif any(overlaps(f) for f in self._fades):
                value = TransitionClipClass.GRADUAL
            elif any(overlaps(v) for v in self._videos):
                value = TransitionClipClass.VIDEO
            else:
                value = TransitionClipClass.STATIC_SLIDE
            classes: tuple[Any, ...] = tuple(TransitionClipClass)
        else:
            if any(contains(p) for p in self._sv_cuts):
                value = SceneClipClass.SLIDE_VIDEO_TRANSITION
            elif any(overlaps(v) for v in self._videos):
                value = SceneClipClass.VIDEO
            else:
                value = SceneClipClass.SLIDE
            classes = tuple(SceneClipClass)
        scores = tuple(1.0 if c is value else 0.0 for c in classes)
        return ClipVerdict(value=value, scores=scores)

    def classify(self, clip: Clip) -> ClipVerdict:
        return self.classify_window(clip.start, len(clip.frames))


def _majority(votes: Sequence[Any], priority: Sequence[Any]) -> Any:
    counts = Counter(votes)
    best = max(counts.values())
    for value in priority:
        if counts.get(value, 0) == best:
            return value
    raise BackendError(f"votes {votes!r} outside the known classes")


def aggregate_votes(transition_votes: Sequence[TransitionClipClass | ClipVerdict],
                    scene_votes: Sequence[SceneClipClass | ClipVerdict],
                    ) -> tuple[TransitionClipClass, SceneClipClass]:
    """Majority vote per network; ties break toward non-video, then toward
    hard over gradual over static slide (resp. transition over slide)."""
    if not transition_votes or not scene_votes:
        raise BackendError("aggregate_votes needs at least one vote per network")
    t_values = [v.value if isinstance(v, ClipVerdict) else v for v in transition_votes]
    s_values = [v.value if isinstance(v, ClipVerdict) else v for v in scene_votes]
    if not all(isinstance(v, TransitionClipClass) for v in t_values):
        raise BackendError("transition votes must be transition classes")
    if not all(isinstance(v, SceneClipClass) for v in s_values):
        raise BackendError("scene votes must be scene classes")
    return (_majority(t_values, TRANSITION_PRIORITY), _majority(s_values, SCENE_PRIORITY))


def fuse(items: Iterable[tuple[TransitionCandidate, TransitionClipClass, SceneClipClass]]
         ) -> list[TransitionRecord]:
    """Drop candidates both networks call video; map the rest to records."""
    records: list[TransitionRecord] = []
    for candidate, t_vote, s_vote in items:
        if t_vote is TransitionClipClass.VIDEO and s_vote is SceneClipClass.VIDEO:
            continue
        if candidate.kind is CandidateKind.SLIDE_VIDEO:
            kind = TransitionKind.SLIDE_VIDEO
        elif candidate.kind is CandidateKind.VIDEO_SLIDE:
            kind = TransitionKind.VIDEO_SLIDE
        elif t_vote is TransitionClipClass.HARD:
            kind = TransitionKind.HARD
        else:
            kind = TransitionKind.GRADUAL
        records.append(TransitionRecord(kind=kind, start=candidate.gap_start,
                                        end=candidate.gap_end))
    records.sort(key=lambda r: (r.start, r.end))
    return records
