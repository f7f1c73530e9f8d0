from __future__ import annotations

import itertools
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import reference_majority
from conftest import solid_frame
from slidetrans.annotations import FrameInterval, GroundTruthDoc, SlideInterval
from slidetrans.detector import CandidateKind, TransitionCandidate
from slidetrans.errors import BackendError, ContractError, SchemaError
from slidetrans.frames import Frame
from slidetrans.records import TransitionKind, TransitionRecord
from slidetrans.refiner import (
    SCENE_PRIORITY,
    TRANSITION_PRIORITY,
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
    fuse,
    load_clip_model,
)

T = TransitionClipClass
S = SceneClipClass


# ---------------------------------------------------------------------------
# Clip window arithmetic


def test_clip_starts_hard_cut_example() -> None:
    assert clip_starts(19, 20, 1000) == [15, 19]


def test_clip_starts_clamped_near_stream_head() -> None:
    assert clip_starts(1, 2, 10) == [0]


def test_clip_starts_wide_gap_count_formula() -> None:
    starts = clip_starts(100, 140, 10000)
    expected = -(-(40 + 2 * 4 - 8) // 4) + 1  # ceil((w + 2m - L)/stride) + 1
    assert len(starts) == expected == 11
    assert starts[0] == 96
    assert all(b - a == 4 for a, b in zip(starts, starts[1:]))


def test_clip_starts_straddle_guarantee() -> None:
    # Margin 0 with a narrow gap: at least one clip must contain both ends.
    cfg = ClipConfig(clip_len=8, stride=4, margin=0)
    for gap_start in range(0, 60):
        for width in range(1, 8):
            starts = clip_starts(gap_start, gap_start + width, 80, cfg)
            assert any(s <= gap_start and gap_start + width <= s + 7 for s in starts)


def test_clip_starts_rejects_bad_windows() -> None:
    with pytest.raises(SchemaError, match="shorter than clip_len"):
        clip_starts(0, 1, 5)
    with pytest.raises(SchemaError, match="outside"):
        clip_starts(5, 5, 100)
    with pytest.raises(SchemaError, match="outside"):
        clip_starts(90, 100, 100)


@settings(max_examples=150, deadline=None)
@given(
    gap_start=st.integers(0, 300),
    width=st.integers(1, 60),
    n_extra=st.integers(0, 200),
    stride=st.integers(1, 8),
    margin=st.integers(0, 6),
)
def test_clip_starts_coverage_property(gap_start: int, width: int, n_extra: int,
                                       stride: int, margin: int) -> None:
    cfg = ClipConfig(clip_len=8, stride=stride, margin=margin)
    gap_end = gap_start + width
    n = gap_end + 1 + n_extra
    if n < cfg.clip_len:
        n = cfg.clip_len
    starts = clip_starts(gap_start, gap_end, n, cfg)
    assert starts == sorted(set(starts))
    assert all(0 <= s <= n - cfg.clip_len for s in starts)
    covered = set()
    for s in starts:
        covered.update(range(s, s + cfg.clip_len))
    target_lo = max(gap_start - margin, 0)
    target_hi = min(max(gap_end + margin - 1, gap_end), n - 1)
    assert set(range(target_lo, target_hi + 1)) <= covered


def test_clip_frame_contiguity_enforced() -> None:
    frames = (solid_frame(3, 0), solid_frame(5, 0))
    with pytest.raises(SchemaError, match="contiguous"):
        Clip(3, frames, StreamKind.RAW)


# ---------------------------------------------------------------------------
# Oracle clip backend


def make_gt() -> GroundTruthDoc:
    return GroundTruthDoc(
        video="v",
        fps=25.0,
        frame_count=400,
        slide_intervals=[
            SlideInterval(0, 0, 99),
            SlideInterval(1, 101, 199),
            SlideInterval(2, 220, 299),
            SlideInterval(3, 312, 399),
        ],
        video_intervals=[FrameInterval(201, 218)],
        transitions=[
            TransitionRecord(TransitionKind.HARD, 99, 101),
            TransitionRecord(TransitionKind.SLIDE_VIDEO, 199, 201),
            TransitionRecord(TransitionKind.VIDEO_SLIDE, 218, 220),
            TransitionRecord(TransitionKind.GRADUAL, 299, 312),
        ],
    )


def test_oracle_clip_transition_task_precedence() -> None:
    oracle = OracleClipBackend.from_ground_truth(make_gt(), "transition")
    # Window containing the hard cut pair.
    assert oracle.classify_window(96, 8).value is T.HARD
    # Fully inside a slide interval.
    assert oracle.classify_window(10, 8).value is T.STATIC_SLIDE
    # Overlapping the fade interior (frames 300..311).
    assert oracle.classify_window(304, 8).value is T.GRADUAL
    # Inside the video interval, no cut contained.
    assert oracle.classify_window(205, 8).value is T.VIDEO
    # Slide-video cut counts as a cut in the cropped task.
    assert oracle.classify_window(196, 8).value is T.HARD


def test_oracle_clip_scene_task() -> None:
    oracle = OracleClipBackend.from_ground_truth(make_gt(), "scene")
    assert oracle.classify_window(196, 8).value is S.SLIDE_VIDEO_TRANSITION
    assert oracle.classify_window(214, 8).value is S.SLIDE_VIDEO_TRANSITION
    assert oracle.classify_window(205, 8).value is S.VIDEO
    assert oracle.classify_window(10, 8).value is S.SLIDE
    # A slide-slide hard cut is not a scene transition.
    assert oracle.classify_window(96, 8).value is S.SLIDE


def test_oracle_scores_are_one_hot() -> None:
    oracle = OracleClipBackend.from_ground_truth(make_gt(), "transition")
    verdict = oracle.classify_window(10, 8)
    assert verdict.scores == (0.0, 0.0, 1.0, 0.0)


def test_classify_clip_stream_kind_checked() -> None:
    oracle = OracleClipBackend.from_ground_truth(make_gt(), "transition")
    clip = Clip(0, tuple(solid_frame(i, 0) for i in range(8)), StreamKind.RAW)
    with pytest.raises(BackendError, match="cropped"):
        classify_clip(clip, oracle)


# ---------------------------------------------------------------------------
# Vote aggregation


def test_majority_examples() -> None:
    assert aggregate_votes([T.HARD, T.HARD, T.VIDEO], [S.SLIDE] * 3) == (T.HARD, S.SLIDE)
    # Tie breaks toward non-video.
    assert aggregate_votes([T.VIDEO, T.GRADUAL], [S.SLIDE]) == (T.GRADUAL, S.SLIDE)
    assert aggregate_votes([T.HARD], [S.VIDEO, S.SLIDE_VIDEO_TRANSITION]) == (
        T.HARD,
        S.SLIDE_VIDEO_TRANSITION,
    )
    # Hard outranks gradual outranks static slide on exact ties.
    assert aggregate_votes([T.GRADUAL, T.HARD], [S.SLIDE])[0] is T.HARD
    assert aggregate_votes([T.STATIC_SLIDE, T.GRADUAL], [S.SLIDE])[0] is T.GRADUAL


def test_aggregate_accepts_verdicts() -> None:
    v = ClipVerdict(T.HARD, (1.0, 0.0, 0.0, 0.0))
    s = ClipVerdict(S.VIDEO, (0.0, 0.0, 1.0))
    assert aggregate_votes([v], [s]) == (T.HARD, S.VIDEO)


def test_aggregate_rejects_empty_or_mixed() -> None:
    with pytest.raises(BackendError, match="at least one vote"):
        aggregate_votes([], [S.SLIDE])
    with pytest.raises(BackendError, match="transition votes"):
        aggregate_votes([S.SLIDE], [S.SLIDE])  # type: ignore[list-item]


@settings(max_examples=500, deadline=None)
@given(
    t_votes=st.lists(st.sampled_from(list(T)), min_size=1, max_size=9),
    s_votes=st.lists(st.sampled_from(list(S)), min_size=1, max_size=9),
)
def test_aggregate_matches_reference_majority(t_votes, s_votes) -> None:
    got_t, got_s = aggregate_votes(t_votes, s_votes)
    assert got_t is reference_majority(t_votes, TRANSITION_PRIORITY)
    assert got_s is reference_majority(s_votes, SCENE_PRIORITY)


def test_verdict_argmax_consistency_enforced() -> None:
    with pytest.raises(SchemaError, match="argmax"):
        ClipVerdict(T.HARD, (0.1, 0.9, 0.0, 0.0))
    with pytest.raises(SchemaError, match="finite"):
        ClipVerdict(S.SLIDE, (0.0, float("nan"), 0.0))


# ---------------------------------------------------------------------------
# Fusion


def test_fusion_grid_drops_exactly_video_video() -> None:
    for t_vote, s_vote in itertools.product(T, S):
        candidate = TransitionCandidate(CandidateKind.SLIDE_SLIDE, 100, 112)
        records = fuse([(candidate, t_vote, s_vote)])
        if t_vote is T.VIDEO and s_vote is S.VIDEO:
            assert records == []
        else:
            assert len(records) == 1


def test_fusion_kind_mapping() -> None:
    ss = TransitionCandidate(CandidateKind.SLIDE_SLIDE, 100, 112)
    sv = TransitionCandidate(CandidateKind.SLIDE_VIDEO, 10, 12)
    vs = TransitionCandidate(CandidateKind.VIDEO_SLIDE, 50, 52)
    records = fuse([
        (ss, T.GRADUAL, S.SLIDE),
        (sv, T.VIDEO, S.SLIDE_VIDEO_TRANSITION),
        (vs, T.HARD, S.SLIDE_VIDEO_TRANSITION),
    ])
    assert [(r.kind, r.start, r.end) for r in records] == [
        (TransitionKind.SLIDE_VIDEO, 10, 12),
        (TransitionKind.VIDEO_SLIDE, 50, 52),
        (TransitionKind.GRADUAL, 100, 112),
    ]
    hard = fuse([(ss, T.HARD, S.SLIDE)])
    assert hard[0].kind is TransitionKind.HARD
    # Votes that are non-committal map a slide-slide candidate to gradual.
    soft = fuse([(ss, T.STATIC_SLIDE, S.SLIDE)])
    assert soft[0].kind is TransitionKind.GRADUAL


# ---------------------------------------------------------------------------
# Neural clip backend contracts


def test_clip_model_contract_shapes() -> None:
    t = ClipModelContract("transition")
    s = ClipModelContract("scene")
    assert t.classes == 4 and t.stream_kind is StreamKind.CROPPED
    assert s.classes == 3 and s.stream_kind is StreamKind.RAW
    assert t.to_dict()["input"] == [8, 256, 256, 3]
    with pytest.raises(SchemaError):
        ClipModelContract("other")


def test_neural_clip_backend_classifies(model_dir: Path) -> None:
    backend = load_clip_model(model_dir / "transition.pt", ClipModelContract("transition"))
    a = np.full((256, 256, 3), 60, np.uint8)
    b = np.full((256, 256, 3), 200, np.uint8)
    cut = Clip(0, tuple(Frame(i, a if i < 4 else b) for i in range(8)), StreamKind.CROPPED)
    static = Clip(0, tuple(Frame(i, a) for i in range(8)), StreamKind.CROPPED)
    assert classify_clip(cut, backend).value is T.HARD
    assert classify_clip(static, backend).value is T.STATIC_SLIDE


def test_clip_model_task_mismatch_fails_at_load(model_dir: Path) -> None:
    # The scene archive declares 3 output classes; the transition contract
    # expects 4 and must refuse before any clip is classified.
    with pytest.raises(ContractError):
        load_clip_model(model_dir / "scene.pt", ClipModelContract("transition"))


def test_neural_clip_backend_rejects_wrong_clip_shape(model_dir: Path) -> None:
    backend = load_clip_model(model_dir / "transition.pt", ClipModelContract("transition"))
    short = Clip(0, tuple(solid_frame(i, 0, 256, 256) for i in range(4)), StreamKind.CROPPED)
    with pytest.raises(BackendError, match="expects 8 frames"):
        backend.classify(short)
    tiny = Clip(0, tuple(solid_frame(i, 0, 64, 64) for i in range(8)), StreamKind.CROPPED)
    with pytest.raises(BackendError, match="256x256"):
        backend.classify(tiny)
