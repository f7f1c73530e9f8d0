"""Slide transition detection for lecture recordings.

Pipeline: a streaming anchor scan proposes transition candidates from
frame-pair verdicts, two clip classifiers vote on short windows around
each candidate, and fusion drops candidates both classifiers call video.
Ships with evaluation, dataset tooling, a synthetic-video generator, a
CLI, and an annotation review server.
"""

__version__ = "0.1.0"

from .annotations import (
    FrameInterval,
    GroundTruthDoc,
    SlideInterval,
    load_ground_truth,
    save_ground_truth,
    validate_ground_truth,
)
from .detector import (
    CandidateKind,
    DetectorConfig,
    Segment,
    SegmentKind,
    TransitionCandidate,
    derive_candidates,
    detect_segments,
)
from .errors import (
    BackendError,
    ContractError,
    DetectorError,
    SchemaError,
    SlidetransError,
    StreamError,
)
from .frames import ColorMode, Frame, FrameSpec, Roi, StreamInfo, open_stream, preprocess
from .metrics import (
    EvalConfig,
    MatchResult,
    MetricsReport,
    compute_metrics,
    evaluate_records,
    match_bidirectional,
    report_table,
)
from .pairs import (
    DiffBlurBackend,
    DiffBlurConfig,
    OraclePairBackend,
    PairLabel,
    PairModelContract,
    PairVerdict,
    classify_pair,
    load_pair_model,
)
from .pipeline import RunConfig, detect_video, export_slide_images
from .records import TransitionKind, TransitionRecord
from .refiner import (
    Clip,
    ClipConfig,
    ClipModelContract,
    ClipVerdict,
    OracleClipBackend,
    SceneClipClass,
    StreamKind,
    TransitionClipClass,
    aggregate_votes,
    classify_clip,
    clip_starts,
    extract_clips,
    fuse,
    load_clip_model,
)
from .synth import SceneSpec, SyntheticScript, TransitionOut, build_corpus, synthesize_video

__all__ = [name for name in dir() if not name.startswith("_")]
