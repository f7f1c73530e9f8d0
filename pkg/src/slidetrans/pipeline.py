"""End-to-end orchestration: stream -> candidates -> refined transitions.

The oracle backends never touch pixels, so a scripted run needs no decoding
at all; the diff and neural backends stream the source once per stage.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from . import __version__
from .annotations import GroundTruthDoc, load_ground_truth, slide_ids_per_frame
from .detector import (
    CandidateKind,
    DetectorConfig,
    TransitionCandidate,
    derive_candidates,
    detect_segments,
    dump_segments,
)
from .errors import SchemaError, SlidetransError
from .frames import (
    ColorMode,
    Frame,
    FrameSpec,
    FrameStream,
    count_frames,
    load_sidecar,
    open_stream,
    sidecar_crop,
    spec_with_crop,
)
from .metrics import EvalConfig, MetricsReport, evaluate_records
from .pairs import (
    DiffBlurBackend,
    DiffBlurConfig,
    OraclePairBackend,
    PairModelContract,
    load_pair_model,
)
from .records import TransitionKind, TransitionRecord, sort_records
from .refiner import (
    ClipConfig,
    ClipModelContract,
    OracleClipBackend,
    SceneClipClass,
    StreamKind,
    TransitionClipClass,
    aggregate_votes,
    clip_starts,
    collect_clips,
    fuse,
    load_clip_model,
)

PAIR_BACKENDS = ("diff", "neural", "oracle")
CLIP_BACKENDS = ("oracle", "neural")


@dataclass
class RunConfig:
    source: Path
    output: Path | None = None
    pair_backend: str = "diff"
    clip_backend: str = "oracle"
    first_stage_only: bool = False
    gt_path: Path | None = None  # oracle backends script themselves from this
    pair_model: Path | None = None
    transition_model: Path | None = None
    scene_model: Path | None = None
    color_mode: ColorMode = ColorMode.RGB
    patch_size: int = 256
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    clips: ClipConfig = field(default_factory=ClipConfig)
    diff: DiffBlurConfig = field(default_factory=DiffBlurConfig)
    export_slides: bool = False

    def validate(self) -> None:
        if self.pair_backend not in PAIR_BACKENDS:
            raise SchemaError(f"pair_backend must be one of {PAIR_BACKENDS}")
        if not self.first_stage_only and self.clip_backend not in CLIP_BACKENDS:
            raise SchemaError(f"clip_backend must be one of {CLIP_BACKENDS}")
        if not Path(self.source).exists():
            raise SchemaError(f"source {self.source} does not exist")
        needs_gt = self.pair_backend == "oracle" or (
            not self.first_stage_only and self.clip_backend == "oracle"
        )
        if needs_gt:
            if self.gt_path is None:
                base = Path(self.source)
                if not base.is_dir():
                    base = base.parent
                default = base / "ground_truth.json"
                if default.is_file():
                    self.gt_path = default
                else:
                    raise SchemaError("oracle backends need --gt pointing at ground truth")
            if not Path(self.gt_path).is_file():
                raise SchemaError(f"ground truth file {self.gt_path} does not exist")
        if self.pair_backend == "neural":
            if self.pair_model is None or not Path(self.pair_model).is_file():
                raise SchemaError(f"pair model file not found: {self.pair_model}")
        if not self.first_stage_only and self.clip_backend == "neural":
            for name, path in (("transition", self.transition_model),
                               ("scene", self.scene_model)):
                if path is None or not Path(path).is_file():
                    raise SchemaError(f"{name} model file not found: {path}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "source": str(self.source),
            "pair_backend": self.pair_backend,
            "clip_backend": None if self.first_stage_only else self.clip_backend,
            "first_stage_only": self.first_stage_only,
            "gt_path": str(self.gt_path) if self.gt_path else None,
            "pair_model": str(self.pair_model) if self.pair_model else None,
            "transition_model": str(self.transition_model) if self.transition_model else None,
            "scene_model": str(self.scene_model) if self.scene_model else None,
            "color_mode": self.color_mode.value,
            "patch_size": self.patch_size,
            "detector": {
                "static_min_frames": self.detector.static_min_frames,
                "min_video_len": self.detector.min_video_len,
            },
            "clips": {
                "clip_len": self.clips.clip_len,
                "stride": self.clips.stride,
                "margin": self.clips.margin,
            },
            "diff": {
                "blur_kernel": self.diff.blur_kernel,
                "diff_threshold": self.diff.diff_threshold,
            },
        }


class _AnchorPairReader:
    """Serves (anchor, current) frame lookups over one sequential pass.

    The anchor only ever moves forward onto a frame that was just current,
    so keeping the last served anchor and current frame suffices: memory
    stays at two frames regardless of run lengths.
    """

    def __init__(self, stream: FrameStream):
        self._it = iter(stream)
        self._cache: dict[int, Frame] = {}
        self._next = 0

    def get(self, index: int) -> Frame:
        if index in self._cache:
            return self._cache[index]
        if index < self._next:
            raise SlidetransError(f"frame {index} already evicted (requested out of order)")
        frame = None
        while self._next <= index:
            frame = next(self._it)
            if frame.index != self._next:
                raise SlidetransError(
                    f"stream returned frame {frame.index}, expected {self._next}"
                )
            self._next += 1
        assert frame is not None
        self._cache[frame.index] = frame
        return frame

    def pair_fn(self, classify: Callable[[Frame, Frame], Any]) -> Callable[[int, int], Any]:
        def same(anchor: int, current: int) -> Any:
            a = self.get(anchor)
            b = self.get(current)
            verdict = classify(a, b)
            self._cache = {anchor: a, current: b}
            return verdict

        return same


def _cropped_spec(cfg: RunConfig, sidecar: dict[str, Any]) -> FrameSpec:
    return FrameSpec(patch_size=cfg.patch_size, color_mode=cfg.color_mode,
                     crop=sidecar_crop(sidecar))


def _raw_spec(cfg: RunConfig) -> FrameSpec:
    # Raw-stream clips stay rgb full-frame regardless of the pair color mode.
    return FrameSpec(patch_size=cfg.patch_size, color_mode=ColorMode.RGB, crop=None)


def _stage_one(cfg: RunConfig, sidecar: dict[str, Any], n_frames: int,
               gt: GroundTruthDoc | None) -> tuple[list, list[TransitionCandidate], int]:
    """Run the anchor scan; returns (segments, candidates, classifier calls)."""
    calls = 0

    if cfg.pair_backend == "oracle":
        assert gt is not None
        oracle = OraclePairBackend(slide_ids=slide_ids_per_frame(gt))

        def same(a: int, b: int) -> bool:
            nonlocal calls
            calls += 1
            return oracle.same_by_index(a, b)

        segments = detect_segments(same, n_frames, cfg.detector)
    else:
        if cfg.pair_backend == "diff":
            backend: Any = DiffBlurBackend(cfg.diff)
        else:
            contract = PairModelContract(patch_size=cfg.patch_size, color_mode=cfg.color_mode)
            backend = load_pair_model(Path(cfg.pair_model), contract)
        stream = open_stream(cfg.source, _cropped_spec(cfg, sidecar))
        try:
            reader = _AnchorPairReader(stream)
            inner = reader.pair_fn(backend.classify)

            def same(a: int, b: int) -> Any:
                nonlocal calls
                calls += 1
                return inner(a, b)

            segments = detect_segments(same, n_frames, cfg.detector)
        finally:
            stream.close()

    candidates = derive_candidates(segments, cfg.detector)
    return segments, candidates, calls


def _first_stage_records(candidates: list[TransitionCandidate]) -> list[TransitionRecord]:
    """Candidates read directly as records (no refinement): a one-frame
    slide-slide gap is a hard cut, wider ones are reported as gradual."""
    records = []
    for c in candidates:
        if c.kind is CandidateKind.SLIDE_VIDEO:
            kind = TransitionKind.SLIDE_VIDEO
        elif c.kind is CandidateKind.VIDEO_SLIDE:
            kind = TransitionKind.VIDEO_SLIDE
        elif c.gap_end - c.gap_start == 1:
            kind = TransitionKind.HARD
        else:
            kind = TransitionKind.GRADUAL
        records.append(TransitionRecord(kind=kind, start=c.gap_start, end=c.gap_end))
    return sort_records(records)


def _refine(cfg: RunConfig, sidecar: dict[str, Any], n_frames: int,
            candidates: list[TransitionCandidate], gt: GroundTruthDoc | None,
            ) -> list[tuple[TransitionCandidate, TransitionClipClass, SceneClipClass]]:
    per_candidate_starts = {
        c: clip_starts(c.gap_start, c.gap_end, n_frames, cfg.clips) for c in candidates
    }

    if cfg.clip_backend == "oracle":
        assert gt is not None
        t_backend: Any = OracleClipBackend.from_ground_truth(gt, "transition")
        s_backend: Any = OracleClipBackend.from_ground_truth(gt, "scene")
        votes = []
        for c in candidates:
            starts = per_candidate_starts[c]
            t_votes = [t_backend.classify_window(s, cfg.clips.clip_len) for s in starts]
            s_votes = [s_backend.classify_window(s, cfg.clips.clip_len) for s in starts]
            votes.append((c, *aggregate_votes(t_votes, s_votes)))
        return votes

    t_contract = ClipModelContract("transition", cfg.clips.clip_len, cfg.patch_size)
    s_contract = ClipModelContract("scene", cfg.clips.clip_len, cfg.patch_size)
    t_backend = load_clip_model(Path(cfg.transition_model), t_contract)
    s_backend = load_clip_model(Path(cfg.scene_model), s_contract)

    all_starts = sorted({s for starts in per_candidate_starts.values() for s in starts})
    cropped_spec = spec_with_crop(_raw_spec(cfg), sidecar_crop(sidecar))

    def clips_for(spec: FrameSpec, kind: StreamKind) -> dict[int, Any]:
        stream = open_stream(cfg.source, spec)
        try:
            return collect_clips(stream, all_starts, cfg.clips.clip_len, kind)
        finally:
            stream.close()

    cropped_clips = clips_for(cropped_spec, StreamKind.CROPPED)
    raw_clips = clips_for(_raw_spec(cfg), StreamKind.RAW)

    votes = []
    for c in candidates:
        starts = per_candidate_starts[c]
        t_votes = [t_backend.classify(cropped_clips[s]) for s in starts]
        s_votes = [s_backend.classify(raw_clips[s]) for s in starts]
        votes.append((c, *aggregate_votes(t_votes, s_votes)))
    return votes


def detect_video(cfg: RunConfig, video_id: str | None = None) -> dict[str, Any]:
    """Run the pipeline on one source; returns the detection document."""
    cfg.validate()
    source = Path(cfg.source)
    if video_id is None:
        video_id = source.stem if source.is_file() else source.name

    sidecar = load_sidecar(source)
    gt: GroundTruthDoc | None = None
    if cfg.gt_path is not None and Path(cfg.gt_path).is_file():
        gt = load_ground_truth(cfg.gt_path)

    if gt is not None:
        n_frames = gt.frame_count
        fps = gt.fps
    else:
        n_frames = count_frames(source)
        fps = sidecar.get("fps")

    segments, candidates, calls = _stage_one(cfg, sidecar, n_frames, gt)

    votes_by_record: dict[tuple[int, int], dict[str, str]] = {}
    if cfg.first_stage_only:
        records = _first_stage_records(candidates)
    else:
        voted = _refine(cfg, sidecar, n_frames, candidates, gt)
        records = fuse(voted)
        for c, t_vote, s_vote in voted:
            votes_by_record[(c.gap_start, c.gap_end)] = {
                "transition": t_vote.value,
                "scene": s_vote.value,
            }

    transitions = []
    for r in records:
        entry = r.to_dict()
        votes = votes_by_record.get((r.start, r.end))
        if votes is not None:
            entry["votes"] = votes
        transitions.append(entry)

    return {
        "video": video_id,
        "fps": fps,
        "frame_count": n_frames,
        "version": __version__,
        "config": cfg.to_dict(),
        "classifier_calls": calls,
        "transitions": transitions,
        "stage_one": dump_segments(video_id, segments, candidates),
    }


def evaluate_files(pred_records: list[TransitionRecord], gt_records: list[TransitionRecord],
                   cfg: EvalConfig | None = None) -> MetricsReport:
    return evaluate_records(pred_records, gt_records, cfg)


def export_slide_images(source: str | Path, records: list[TransitionRecord],
                        out_dir: str | Path) -> list[Path]:
    """One PNG per record: the frame at its end index (first frame of the
    new slide), named slide_%04d_frame%08d.png."""
    import cv2

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    wanted = {r.end for r in records}
    grabbed: dict[int, Any] = {}
    stream = open_stream(source)
    try:
        for frame in stream:
            if frame.index in wanted:
                grabbed[frame.index] = frame.data
                if len(grabbed) == len(wanted):
                    break
    finally:
        stream.close()
    missing = wanted - set(grabbed)
    if missing:
        raise SchemaError(f"frames {sorted(missing)} not present in {source}")
    paths = []
    for i, r in enumerate(sort_records(records)):
        path = out / f"slide_{i:04d}_frame{r.end:08d}.png"
        cv2.imwrite(str(path), cv2.cvtColor(grabbed[r.end], cv2.COLOR_RGB2BGR))
        paths.append(path)
    return paths
