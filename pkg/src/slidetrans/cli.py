"""Command-line entry points."""

from __future__ import annotations

import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from . import __version__
from .detector import DetectorConfig
from .errors import (
    BackendError,
    ContractError,
    DetectorError,
    SchemaError,
    SlidetransError,
    StreamError,
)
from .frames import ColorMode
from .manifests import class_weights, generate_clip_manifest, generate_pair_manifest, write_manifest
from .metrics import EvalConfig, evaluate_records, report_table
from .pairs import DiffBlurConfig
from .pipeline import RunConfig, detect_video, export_slide_images
from .records import load_detections, records_from_doc, write_detections
from .refiner import ClipConfig
from .annotations import load_ground_truth
from .synth import SyntheticScript, build_corpus, synthesize_video


def _stage_tag(exc: Exception) -> str:
    if isinstance(exc, StreamError):
        return "stream"
    if isinstance(exc, (BackendError, ContractError)):
        return "backend"
    if isinstance(exc, DetectorError):
        return "detector"
    if isinstance(exc, SchemaError):
        return "schema"
    return "internal"


def _fail(stage: str, exc: Exception) -> "click.ClickException":
    return click.ClickException(f"[{stage}] {exc}")


@click.group()
@click.version_option(version=__version__, prog_name="slidetrans")
def main() -> None:
    """Slide transition detection for lecture recordings."""


def _expand_sources(paths: tuple[Path, ...]) -> list[Path]:
    """A corpus root (directory of video directories) expands to its entries."""
    out: list[Path] = []
    for path in paths:
        if path.is_dir() and not (path / "sidecar.json").is_file():
            entries = sorted(
                p for p in path.iterdir()
                if p.is_dir() and ((p / "sidecar.json").is_file()
                                   or any(p.glob("*.sltf")))
            )
            if entries:
                out.extend(entries)
                continue
        out.append(path)
    return out


def _resolve_source(path: Path) -> Path:
    # A video directory holding a raw stream instead of images.
    if path.is_dir() and not any(path.glob("00000000.*")):
        streams = sorted(path.glob("*.sltf"))
        if streams:
            return streams[0]
    return path


def _default_output(source: Path, out_dir: Path | None, video_id: str) -> Path:
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        return out_dir / f"{video_id}.detections.json"
    if source.is_dir():
        return source / "detections.json"
    return source.parent / f"{source.stem}.detections.json"


@main.command()
@click.argument("sources", nargs=-1, required=True,
                type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=None,
              help="Directory for detection JSON (default: alongside each source).")
@click.option("--pair-backend", type=click.Choice(["diff", "neural", "oracle"]),
              default="diff", show_default=True)
@click.option("--clip-backend", type=click.Choice(["oracle", "neural"]),
              default="oracle", show_default=True)
@click.option("--first-stage-only", is_flag=True,
              help="Emit candidates without clip refinement.")
@click.option("--gt", "gt_path", type=click.Path(path_type=Path), default=None,
              help="Ground truth JSON for oracle backends "
                   "(default: <source>/ground_truth.json).")
@click.option("--pair-model", type=click.Path(path_type=Path), default=None)
@click.option("--transition-model", type=click.Path(path_type=Path), default=None)
@click.option("--scene-model", type=click.Path(path_type=Path), default=None)
@click.option("--color-mode", type=click.Choice(["rgb", "gray"]), default="rgb",
              show_default=True)
@click.option("--patch-size", type=int, default=256, show_default=True)
@click.option("--static-min-frames", type=int, default=8, show_default=True)
@click.option("--min-video-len", type=int, default=9, show_default=True)
@click.option("--clip-len", type=int, default=8, show_default=True)
@click.option("--stride", type=int, default=4, show_default=True)
@click.option("--margin", type=int, default=4, show_default=True)
@click.option("--blur-kernel", type=int, default=21, show_default=True)
@click.option("--diff-threshold", type=float, default=4.0, show_default=True)
@click.option("--export-slides", is_flag=True,
              help="Write a PNG of the first frame after each transition.")
@click.option("--jobs", type=int, default=1, show_default=True,
              help="Videos processed in parallel.")
@click.option("--reverse-order", is_flag=True,
              help="Reserved: run the two clip classifiers before the pair scan.")
def detect(sources: tuple[Path, ...], out_dir: Path | None, pair_backend: str,
           clip_backend: str, first_stage_only: bool, gt_path: Path | None,
           pair_model: Path | None, transition_model: Path | None,
           scene_model: Path | None, color_mode: str, patch_size: int,
           static_min_frames: int, min_video_len: int, clip_len: int, stride: int,
           margin: int, blur_kernel: int, diff_threshold: float,
           export_slides: bool, jobs: int, reverse_order: bool) -> None:
    """Detect slide transitions in one or more videos."""
    if reverse_order:
        raise click.ClickException(
            "--reverse-order (clip classifiers before the pair scan) is recognized "
            "but not implemented; the shipped pipeline runs the pair scan first"
        )
    expanded = _expand_sources(sources)

    def run_one(given: Path) -> tuple[str, Path]:
        # The id and output placement follow what the user pointed at, not
        # the stream file a video directory resolves to.
        source = _resolve_source(given)
        video_id = given.stem if given.is_file() else given.name
        try:
            cfg = RunConfig(
                source=source,
                pair_backend=pair_backend,
                clip_backend=clip_backend,
                first_stage_only=first_stage_only,
                gt_path=gt_path,
                pair_model=pair_model,
                transition_model=transition_model,
                scene_model=scene_model,
                color_mode=ColorMode(color_mode),
                patch_size=patch_size,
                detector=DetectorConfig(static_min_frames=static_min_frames,
                                        min_video_len=min_video_len),
                clips=ClipConfig(clip_len=clip_len, stride=stride, margin=margin),
                diff=DiffBlurConfig(blur_kernel=blur_kernel,
                                    diff_threshold=diff_threshold),
                export_slides=export_slides,
            )
            doc = detect_video(cfg, video_id=video_id)
            out_path = _default_output(given, out_dir, video_id)
            write_detections(out_path, doc)
            if export_slides:
                records = records_from_doc(doc)
                slide_dir = out_path.parent / f"slides_{video_id}"
                export_slide_images(source, records, slide_dir)
        except SlidetransError as exc:
            raise _fail(_stage_tag(exc), exc) from exc
        return video_id, out_path

    if jobs > 1 and len(expanded) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_one, expanded))
    else:
        results = [run_one(s) for s in expanded]
    for video_id, out_path in results:
        click.echo(f"{video_id}: {out_path}")


def _collect_eval_pairs(pred: Path, gt: Path) -> list[tuple[str, Path, Path]]:
    if pred.is_file() and gt.is_file():
        name = gt.parent.name if gt.name == "ground_truth.json" else gt.stem
        return [(name, pred, gt)]
    if not (pred.is_dir() and gt.is_dir()):
        raise click.ClickException("[schema] --pred and --gt must both be files or both "
                                   "be directories")
    pairs = []
    for gt_file in sorted(gt.glob("*/ground_truth.json")):
        video_id = gt_file.parent.name
        for cand in (pred / f"{video_id}.detections.json",
                     pred / video_id / "detections.json",
                     pred / video_id / "annotations.json"):
            if cand.is_file():
                pairs.append((video_id, cand, gt_file))
                break
    if not pairs:
        raise click.ClickException(f"[schema] no detection files matching {gt} found in {pred}")
    return pairs


@main.command()
@click.option("--pred", required=True, type=click.Path(exists=True, path_type=Path),
              help="Detection JSON file, or a directory of them.")
@click.option("--gt", required=True, type=click.Path(exists=True, path_type=Path),
              help="Ground truth JSON file, or a corpus directory.")
@click.option("--radius", type=float, default=20.0, show_default=True,
              help="Match radius in (start,end) space.")
@click.option("--json", "json_out", type=click.Path(path_type=Path), default=None,
              help="Also write the machine-readable summary here.")
def evaluate(pred: Path, gt: Path, radius: float, json_out: Path | None) -> None:
    """Score detections against ground truth (bidirectional matching)."""
    try:
        cfg = EvalConfig(match_radius=radius)
        rows = []
        for video_id, pred_path, gt_path in _collect_eval_pairs(pred, gt):
            pred_records = records_from_doc(load_detections(pred_path))
            gt_records = load_ground_truth(gt_path).transitions
            rows.append((video_id, evaluate_records(pred_records, gt_records, cfg)))
        table, summary = report_table(rows)
    except SlidetransError as exc:
        raise _fail(_stage_tag(exc), exc) from exc
    click.echo(table)
    if json_out is not None:
        json_out.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                            encoding="utf-8")


@main.command("make-data")
@click.option("--gt", "gt_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--task", type=click.Choice(["pair", "transition", "scene"]), required=True)
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--pairs-per-slide", type=int, default=4, show_default=True)
@click.option("--clip-len", type=int, default=8, show_default=True)
@click.option("--stride", type=int, default=4, show_default=True)
@click.option("--margin", type=int, default=4, show_default=True)
def make_data(gt_path: Path, task: str, out_path: Path, seed: int, pairs_per_slide: int,
              clip_len: int, stride: int, margin: int) -> None:
    """Build a training manifest (frame pairs or striking-position clips)."""
    try:
        gt = load_ground_truth(gt_path)
        if task == "pair":
            manifest = generate_pair_manifest(gt, seed=seed, pairs_per_slide=pairs_per_slide)
        else:
            cfg = ClipConfig(clip_len=clip_len, stride=stride, margin=margin)
            manifest = generate_clip_manifest(gt, cfg, task=task, seed=seed)
        write_manifest(out_path, manifest)
    except SlidetransError as exc:
        raise _fail(_stage_tag(exc), exc) from exc
    click.echo(f"{out_path}: {len(manifest.entries)} entries, counts "
               f"{json.dumps(manifest.meta['counts'], sort_keys=True)}")
    if task != "pair":
        weights = class_weights(manifest)
        click.echo(f"class weights: {json.dumps(weights['weights'], sort_keys=True)}"
                   + (f" (missing: {', '.join(weights['missing_classes'])})"
                      if weights["missing_classes"] else ""))


@main.command()
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--script", "script_path", type=click.Path(exists=True, path_type=Path),
              default=None, help="Render a single scripted video.")
@click.option("--id", "video_id", default=None, help="Video id for --script runs.")
@click.option("--videos", type=int, default=20, show_default=True,
              help="Corpus size for random generation.")
@click.option("--seed", type=int, default=20260815, show_default=True)
@click.option("--noise-sigma", type=float, default=1.0, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["png", "sltf"]), default="png",
              show_default=True)
def synth(out_dir: Path, script_path: Path | None, video_id: str | None, videos: int,
          seed: int, noise_sigma: float, fmt: str) -> None:
    """Generate synthetic lecture videos with exact ground truth."""
    try:
        if script_path is not None:
            script = SyntheticScript.from_dict(
                json.loads(script_path.read_text(encoding="utf-8")))
            vid = video_id or script_path.stem
            gt = synthesize_video(script, out_dir, vid, fmt=fmt)
            click.echo(f"{vid}: {gt.frame_count} frames, "
                       f"{len(gt.transitions)} transitions")
        else:
            summary = build_corpus(out_dir, n_videos=videos, seed=seed,
                                   noise_sigma=noise_sigma, fmt=fmt)
            click.echo(json.dumps(summary["counts"], sort_keys=True))
    except SlidetransError as exc:
        raise _fail(_stage_tag(exc), exc) from exc


@main.command("extract-slides")
@click.option("--detections", "det_path", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--source", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
def extract_slides(det_path: Path, source: Path, out_dir: Path) -> None:
    """Export one PNG per detected transition (the frame at its end index)."""
    try:
        records = records_from_doc(load_detections(det_path))
        paths = export_slide_images(_resolve_source(source), records, out_dir)
    except SlidetransError as exc:
        raise _fail(_stage_tag(exc), exc) from exc
    click.echo(f"wrote {len(paths)} slide images to {out_dir}")


@main.command()
@click.argument("corpus", type=click.Path(exists=True, path_type=Path))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--ui", "ui_dir", type=click.Path(path_type=Path), default=None,
              help="Static UI bundle to serve at / (default: ./frontend/dist if present).")
def review(corpus: Path, host: str, port: int, ui_dir: Path | None) -> None:
    """Serve the annotation review API (and UI) over a corpus directory."""
    import uvicorn

    from .server import create_app

    if ui_dir is None:
        default_ui = Path("frontend") / "dist"
        ui_dir = default_ui if default_ui.is_dir() else None
    try:
        app = create_app(corpus, ui_dir=ui_dir)
    except SlidetransError as exc:
        raise _fail(_stage_tag(exc), exc) from exc
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    sys.exit(main())
