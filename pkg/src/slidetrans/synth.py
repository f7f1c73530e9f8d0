"""Deterministic synthetic lecture videos with exact ground truth.

Slides render as flat or gently graded backgrounds with rectangle "text"
blocks, constant over their interval up to optional additive noise.  Video
scenes are scrolling block textures with moving rectangles; a pause freezes
the motion for a stretch of frames while noise keeps varying.  Gradual
transitions are linear cross-fades with weights (i+1)/(L+1).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator

import cv2
import numpy as np

from .annotations import FrameInterval, GroundTruthDoc, SlideInterval, validate_ground_truth
from .errors import SchemaError
from .frames import Roi, write_sltf
from .records import TransitionKind, TransitionRecord

MIN_WIDTH = 64
MIN_HEIGHT = 48


@dataclass(frozen=True)
class TransitionOut:
    kind: str  # "hard" | "gradual" | "cut"  (cut: slide<->video boundary)
    length: int = 0  # fade frames, gradual only

    def __post_init__(self) -> None:
        if self.kind not in ("hard", "gradual", "cut"):
            raise SchemaError(f"unknown transition kind {self.kind!r}")
        if self.kind == "gradual" and self.length < 2:
            raise SchemaError(f"gradual transitions need length >= 2, got {self.length}")
        if self.kind != "gradual" and self.length != 0:
            raise SchemaError(f"{self.kind} transitions carry no length")


@dataclass(frozen=True)
class SceneSpec:
    kind: str  # "slide" | "video"
    duration: int
    transition_out: TransitionOut | None = None
    pauses: tuple[tuple[int, int], ...] = ()  # (offset, length) within the scene

    def __post_init__(self) -> None:
        if self.kind not in ("slide", "video"):
            raise SchemaError(f"unknown scene kind {self.kind!r}")
        if self.duration < 1:
            raise SchemaError(f"scene duration must be >= 1, got {self.duration}")
        if self.pauses and self.kind != "video":
            raise SchemaError("pauses only apply to video scenes")
        last_end = -1
        for offset, length in self.pauses:
            if offset <= 0 or length < 1 or offset + length > self.duration:
                raise SchemaError(f"pause ({offset}, {length}) outside scene of {self.duration}")
            if offset <= last_end:
                raise SchemaError("pauses must be sorted and non-overlapping")
            last_end = offset + length - 1


@dataclass
class SyntheticScript:
    seed: int
    width: int
    height: int
    scenes: list[SceneSpec]
    fps: float = 25.0
    noise_sigma: float = 0.0
    slide_region: Roi | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "width": self.width,
            "height": self.height,
            "fps": self.fps,
            "noise_sigma": self.noise_sigma,
            "slide_region": self.slide_region.to_dict() if self.slide_region else None,
            "scenes": [
                {
                    "kind": s.kind,
                    "duration": s.duration,
                    "transition_out": (
                        {"kind": s.transition_out.kind, "length": s.transition_out.length}
                        if s.transition_out
                        else None
                    ),
                    "pauses": [list(p) for p in s.pauses],
                }
                for s in self.scenes
            ],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SyntheticScript":
        try:
            scenes = [
                SceneSpec(
                    kind=s["kind"],
                    duration=int(s["duration"]),
                    transition_out=(
                        TransitionOut(s["transition_out"]["kind"],
                                      int(s["transition_out"].get("length", 0)))
                        if s.get("transition_out")
                        else None
                    ),
                    pauses=tuple((int(p[0]), int(p[1])) for p in s.get("pauses", [])),
                )
                for s in data["scenes"]
            ]
            region = data.get("slide_region")
            return cls(
                seed=int(data["seed"]),
                width=int(data["width"]),
                height=int(data["height"]),
                fps=float(data.get("fps", 25.0)),
                noise_sigma=float(data.get("noise_sigma", 0.0)),
                slide_region=Roi.from_dict(region) if region else None,
                scenes=scenes,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed synthetic script: {exc}") from exc


def validate_script(script: SyntheticScript) -> None:
    if script.width < MIN_WIDTH or script.height < MIN_HEIGHT:
        raise SchemaError(
            f"geometry {script.width}x{script.height} too small to render blocks "
            f"(need at least {MIN_WIDTH}x{MIN_HEIGHT})"
        )
    if not script.scenes:
        raise SchemaError("script needs at least one scene")
    if script.slide_region is not None:
        r = script.slide_region
        if r.x + r.width > script.width or r.y + r.height > script.height:
            raise SchemaError("slide_region exceeds frame geometry")
    for i, scene in enumerate(script.scenes):
        out = scene.transition_out
        last = i == len(script.scenes) - 1
        if last:
            if out is not None:
                raise SchemaError(f"scene {i} is last and cannot have a transition_out")
            continue
        if out is None:
            raise SchemaError(f"scene {i} needs a transition_out")
        nxt = script.scenes[i + 1]
        if scene.kind == "video" and nxt.kind == "video":
            raise SchemaError(f"scene {i}: video-to-video transitions are not supported")
        if scene.kind == "slide" and nxt.kind == "slide":
            if out.kind == "cut":
                raise SchemaError(f"scene {i}: slide-to-slide must be hard or gradual")
        else:
            if out.kind != "cut":
                raise SchemaError(f"scene {i}: slide<->video boundaries must be cuts")


# ---------------------------------------------------------------------------
# Rendering


def _content_region(script: SyntheticScript) -> tuple[int, int, int, int]:
    if script.slide_region is not None:
        r = script.slide_region
        return r.x, r.y, r.width, r.height
    return 0, 0, script.width, script.height


def _render_slide(script: SyntheticScript, ordinal: int) -> np.ndarray:
    """One slide image.  Parity alternates light/dark palettes so any two
    consecutive slides differ strongly in mean intensity."""
    rng = np.random.default_rng(np.random.SeedSequence([script.seed, 101, ordinal]))
    light = ordinal % 2 == 0
    bg_base = rng.integers(195, 236) if light else rng.integers(20, 56)
    fg_lo, fg_hi = (10, 70) if light else (175, 246)
    canvas = np.empty((script.height, script.width, 3), dtype=np.uint8)
    border = 16 if light else 230
    canvas[:] = border
    x0, y0, w, h = _content_region(script)
    tint = rng.integers(-12, 13, size=3)
    bg = np.clip(int(bg_base) + tint, 0, 255).astype(np.uint8)
    canvas[y0 : y0 + h, x0 : x0 + w] = bg

    n_blocks = int(rng.integers(3, 7))
    for _ in range(n_blocks):
        bw = int(rng.integers(w // 4, max(w // 4 + 1, (w * 3) // 4)))
        bh = int(rng.integers(max(4, h // 18), max(6, h // 8)))
        bx = x0 + int(rng.integers(0, max(1, w - bw)))
        by = y0 + int(rng.integers(0, max(1, h - bh)))
        color = rng.integers(fg_lo, fg_hi, size=3).astype(np.uint8)
        canvas[by : by + bh, bx : bx + bw] = color
    return canvas


@dataclass
class _VideoScene:
    texture: np.ndarray
    step: tuple[int, int]
    rects: list[tuple[int, int, int, int, np.ndarray, int, int]]  # x,y,w,h,color,vx,vy


def _make_video_scene(script: SyntheticScript, ordinal: int) -> _VideoScene:
    rng = np.random.default_rng(np.random.SeedSequence([script.seed, 202, ordinal]))
    cell = 24
    th = -(-script.height // cell)
    tw = -(-script.width // cell)
    small = rng.integers(0, 256, size=(th, tw, 3), dtype=np.uint8)
    texture = np.repeat(np.repeat(small, cell, axis=0), cell, axis=1)
    texture = texture[: script.height, : script.width]
    step = (int(rng.integers(3, 8)), int(rng.integers(2, 6)))  # (dx, dy)
    rects = []
    for _ in range(2):
        rw = int(rng.integers(script.width // 8, script.width // 4))
        rh = int(rng.integers(script.height // 8, script.height // 4))
        rx = int(rng.integers(0, script.width - rw))
        ry = int(rng.integers(0, script.height - rh))
        color = rng.integers(0, 256, size=3).astype(np.uint8)
        vx = int(rng.integers(2, 7))
        vy = int(rng.integers(1, 5))
        rects.append((rx, ry, rw, rh, color, vx, vy))
    return _VideoScene(texture=texture, step=step, rects=rects)


def _motion_indices(duration: int, pauses: tuple[tuple[int, int], ...]) -> list[int]:
    """Per-frame motion step; frames after a pause start repeat its step."""

    def frozen(offset: int) -> bool:
        return any(p0 < offset <= p0 + pl - 1 for p0, pl in pauses)

    out = [0]
    m = 0
    for offset in range(1, duration):
        if not frozen(offset):
            m += 1
        out.append(m)
    return out


def _render_video_frame(scene: _VideoScene, m: int, width: int, height: int) -> np.ndarray:
    dx, dy = scene.step
    frame = np.roll(scene.texture, shift=(dy * m % height, dx * m % width), axis=(0, 1)).copy()
    for rx, ry, rw, rh, color, vx, vy in scene.rects:
        x = (rx + vx * m) % (width - rw)
        y = (ry + vy * m) % (height - rh)
        frame[y : y + rh, x : x + rw] = color
    return frame


def _apply_noise(img: np.ndarray, sigma: float, seed: int, global_index: int) -> np.ndarray:
    if sigma <= 0:
        return img
    rng = np.random.default_rng(np.random.SeedSequence([seed, 909, global_index]))
    noisy = img.astype(np.float32) + rng.normal(0.0, sigma, size=img.shape).astype(np.float32)
    return np.clip(np.rint(noisy), 0, 255).astype(np.uint8)


def _blend(a: np.ndarray, b: np.ndarray, w: float) -> np.ndarray:
    mixed = (1.0 - w) * a.astype(np.float32) + w * b.astype(np.float32)
    return np.clip(np.rint(mixed), 0, 255).astype(np.uint8)


def fade_weights(length: int) -> list[float]:
    return [(i + 1) / (length + 1) for i in range(length)]


def render_frames(script: SyntheticScript) -> Iterator[np.ndarray]:
    """All frames of the script in order, noise included."""
    validate_script(script)
    slide_images: dict[int, np.ndarray] = {}
    for i, scene in enumerate(script.scenes):
        if scene.kind == "slide":
            slide_images[i] = _render_slide(script, i)
    global_index = 0

    def emit(img: np.ndarray) -> Iterator[np.ndarray]:
        nonlocal global_index
        yield _apply_noise(img, script.noise_sigma, script.seed, global_index)
        global_index += 1

    for i, scene in enumerate(script.scenes):
        if scene.kind == "slide":
            base = slide_images[i]
            for _ in range(scene.duration):
                yield from emit(base)
        else:
            vs = _make_video_scene(script, i)
            for m in _motion_indices(scene.duration, scene.pauses):
                yield from emit(_render_video_frame(vs, m, script.width, script.height))
        out = scene.transition_out
        if out is not None and out.kind == "gradual":
            a = slide_images[i]
            b = slide_images[i + 1]
            for w in fade_weights(out.length):
                yield from emit(_blend(a, b, w))


def build_ground_truth(script: SyntheticScript, video_id: str) -> GroundTruthDoc:
    validate_script(script)
    slide_intervals: list[SlideInterval] = []
    video_intervals: list[FrameInterval] = []
    transitions: list[TransitionRecord] = []
    cursor = 0
    next_slide_id = 0
    last_frame_of_scene: list[int] = []
    starts: list[int] = []
    for scene in script.scenes:
        starts.append(cursor)
        end = cursor + scene.duration - 1
        if scene.kind == "slide":
            slide_intervals.append(SlideInterval(next_slide_id, cursor, end))
            next_slide_id += 1
        else:
            video_intervals.append(FrameInterval(cursor, end))
        last_frame_of_scene.append(end)
        cursor = end + 1
        if scene.transition_out is not None and scene.transition_out.kind == "gradual":
            cursor += scene.transition_out.length

    for i, scene in enumerate(script.scenes[:-1]):
        out = scene.transition_out
        assert out is not None
        a_last = last_frame_of_scene[i]
        b_first = starts[i + 1]
        nxt = script.scenes[i + 1]
        if out.kind == "hard":
            transitions.append(TransitionRecord(TransitionKind.HARD, a_last, b_first))
        elif out.kind == "gradual":
            transitions.append(TransitionRecord(TransitionKind.GRADUAL, a_last, b_first))
        elif scene.kind == "slide":
            transitions.append(TransitionRecord(TransitionKind.SLIDE_VIDEO, a_last, b_first))
        else:
            transitions.append(TransitionRecord(TransitionKind.VIDEO_SLIDE, a_last, b_first))

    doc = GroundTruthDoc(
        video=video_id,
        fps=script.fps,
        frame_count=cursor,
        slide_intervals=slide_intervals,
        video_intervals=video_intervals,
        transitions=transitions,
    )
    validate_ground_truth(doc)
    return doc


def synthesize_video(script: SyntheticScript, out_dir: str | Path, video_id: str,
                     fmt: str = "png") -> GroundTruthDoc:
    """Write frames plus sidecar and ground truth under out_dir/video_id."""
    if fmt not in ("png", "sltf"):
        raise SchemaError(f"unknown output format {fmt!r}")
    gt = build_ground_truth(script, video_id)
    target = Path(out_dir) / video_id
    target.mkdir(parents=True, exist_ok=True)
    if fmt == "png":
        for i, frame in enumerate(render_frames(script)):
            ok = cv2.imwrite(str(target / f"{i:08d}.png"),
                             cv2.cvtColor(frame, cv2.COLOR_RGB2BGR))
            if not ok:
                raise SchemaError(f"could not write frame {i} under {target}")
        sidecar_path = target / "sidecar.json"
    else:
        stream_path = target / "stream.sltf"
        write_sltf(stream_path, render_frames(script), frame_count=gt.frame_count)
        sidecar_path = target / "stream.sltf.json"
    sidecar: dict[str, Any] = {"fps": script.fps, "frame_count": gt.frame_count}
    if script.slide_region is not None:
        sidecar["crop"] = script.slide_region.to_dict()
    sidecar_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n",
                            encoding="utf-8")
    (target / "ground_truth.json").write_text(
        json.dumps(gt.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (target / "script.json").write_text(
        json.dumps(script.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return gt


# ---------------------------------------------------------------------------
# Corpus construction


def make_random_script(seed: int, index: int, noise_sigma: float = 1.0) -> SyntheticScript:
    """A plausible lecture layout: slides with mixed transitions and one or
    two video scenes whose pauses sit well inside the scene."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 42, index]))
    n_slides = int(rng.integers(6, 10))
    n_videos = int(rng.integers(1, 3))
    video_after = set()
    while len(video_after) < n_videos:
        video_after.add(int(rng.integers(1, n_slides - 1)))

    kinds: list[str] = []
    for s in range(n_slides):
        kinds.append("slide")
        if s in video_after:
            kinds.append("video")

    scenes: list[SceneSpec] = []
    for i, kind in enumerate(kinds):
        last = i == len(kinds) - 1
        if kind == "slide":
            duration = int(rng.integers(24, 49))
            if last:
                out = None
            elif kinds[i + 1] == "video":
                out = TransitionOut("cut")
            elif rng.random() < 0.6:
                out = TransitionOut("hard")
            else:
                out = TransitionOut("gradual", int(rng.integers(2, 10)))
            scenes.append(SceneSpec("slide", duration, out))
        else:
            duration = int(rng.integers(60, 97))
            pause_len = int(rng.integers(8, 13))
            pause_off = int(rng.integers(16, duration - 16 - pause_len + 1))
            out = None if last else TransitionOut("cut")
            scenes.append(SceneSpec("video", duration, out, pauses=((pause_off, pause_len),)))

    return SyntheticScript(
        seed=int(rng.integers(0, 2**31)),
        width=480,
        height=270,
        fps=25.0,
        noise_sigma=noise_sigma,
        slide_region=Roi(40, 22, 400, 225) if index % 2 == 0 else None,
        scenes=scenes,
    )


def build_corpus(out_dir: str | Path, n_videos: int = 20, seed: int = 20260815,
                 noise_sigma: float = 1.0, fmt: str = "png") -> dict[str, Any]:
    """Generate a corpus of synthetic videos; returns a transition census."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    counts = {"hard": 0, "gradual": 0, "slide_video": 0, "video_slide": 0, "video_scenes": 0}
    ids = []
    for index in range(n_videos):
        script = make_random_script(seed, index, noise_sigma=noise_sigma)
        video_id = f"synth_{index:03d}"
        gt = synthesize_video(script, out, video_id, fmt=fmt)
        ids.append(video_id)
        counts["video_scenes"] += len(gt.video_intervals)
        for t in gt.transitions:
            counts[t.kind.value] += 1
    summary = {"videos": ids, "seed": seed, "noise_sigma": noise_sigma, "counts": counts}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                                      encoding="utf-8")
    return summary
