"""Frame sources and preprocessing.

Every source is normalized to a stream of rgb24 frames.  Three source
layouts are supported natively: a directory of numbered PNG images, a
raw ``.sltf`` byte stream (header + packed rgb24 payloads), and any
container format via an external decoder process that emits the same
raw stream on stdout.  Sidecar JSON next to the source carries crop,
fps and frame count when the container itself cannot.
"""

from __future__ import annotations

import json
import os
import re
import struct
import subprocess
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Any, BinaryIO, Iterator

import cv2
import numpy as np

from .errors import SchemaError, StreamError

SLTF_MAGIC = b"SLTF"
_HEADER = struct.Struct("<4sIIII")  # magic, width, height, channels, frame_count (0 = unknown)

DECODER_ENV = "SLIDETRANS_DECODER"

_IMAGE_NAME = re.compile(r"^(\d{8})\.(png|jpg|jpeg)$", re.IGNORECASE)


class ColorMode(str, Enum):
    RGB = "rgb"
    GRAY = "gray"


@dataclass(frozen=True)
class Roi:
    """Axis-aligned crop rectangle in source pixel coordinates."""

    x: int
    y: int
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise SchemaError(f"roi must have positive size, got {self.width}x{self.height}")
        if self.x < 0 or self.y < 0:
            raise SchemaError(f"roi origin must be >= 0, got ({self.x}, {self.y})")

    def to_dict(self) -> dict[str, int]:
        return {"x": self.x, "y": self.y, "width": self.width, "height": self.height}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Roi":
        try:
            return cls(int(data["x"]), int(data["y"]), int(data["width"]), int(data["height"]))
        except (KeyError, TypeError, ValueError):
            raise SchemaError(f"malformed roi {data!r}") from None


@dataclass(frozen=True)
class FrameSpec:
    """Preprocessing recipe applied to decoded frames."""

    patch_size: int = 256
    color_mode: ColorMode = ColorMode.RGB
    crop: Roi | None = None

    def __post_init__(self) -> None:
        if self.patch_size < 1:
            raise SchemaError(f"patch_size must be >= 1, got {self.patch_size}")

    @property
    def channels(self) -> int:
        return 1 if self.color_mode is ColorMode.GRAY else 3


@dataclass(frozen=True)
class Frame:
    """A single frame: uint8 array of shape (height, width, channels)."""

    index: int
    data: np.ndarray

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def channels(self) -> int:
        return int(self.data.shape[2])


@dataclass
class StreamInfo:
    width: int
    height: int
    channels: int = 3
    fps: float | None = None
    frame_count: int | None = None


def scaled_size(width: int, height: int, patch_size: int) -> tuple[int, int]:
    """Target (width, height) with the longer side scaled to exactly patch_size."""
    if width >= height:
        return patch_size, max(1, int(height * patch_size / width + 0.5))
    return max(1, int(width * patch_size / height + 0.5)), patch_size


def preprocess(frame: Frame, spec: FrameSpec) -> Frame:
    """Crop, scale the longer side to the patch size, pad to a square patch.

    Scaling is bilinear; padding is zero-valued and anchored top-left, so
    content always occupies the [0:h, 0:w] corner of the patch.  Grayscale
    conversion (BT.601 luma) happens after padding; zeros stay zeros.
    """
    data = frame.data
    if data.ndim != 3 or data.shape[2] != 3 or data.dtype != np.uint8:
        raise SchemaError("preprocess expects uint8 rgb frames of shape (h, w, 3)")
    if spec.crop is not None:
        c = spec.crop
        if c.x + c.width > data.shape[1] or c.y + c.height > data.shape[0]:
            raise SchemaError(
                f"crop {c.to_dict()} exceeds frame bounds {data.shape[1]}x{data.shape[0]}"
            )
        data = data[c.y : c.y + c.height, c.x : c.x + c.width]
    h, w = data.shape[:2]
    out_w, out_h = scaled_size(w, h, spec.patch_size)
    if (out_w, out_h) != (w, h):
        data = cv2.resize(data, (out_w, out_h), interpolation=cv2.INTER_LINEAR)
    if (out_w, out_h) != (spec.patch_size, spec.patch_size):
        canvas = np.zeros((spec.patch_size, spec.patch_size, 3), dtype=np.uint8)
        canvas[:out_h, :out_w] = data
        data = canvas
    elif data.base is not None:
        data = np.ascontiguousarray(data)
    if spec.color_mode is ColorMode.GRAY:
        data = cv2.cvtColor(data, cv2.COLOR_RGB2GRAY)[:, :, np.newaxis]
    return Frame(index=frame.index, data=data)


# ---------------------------------------------------------------------------
# Raw byte stream (.sltf): header followed by packed row-major rgb24 frames.


def write_sltf(target: str | Path | BinaryIO, frames: Iterator[np.ndarray] | list[np.ndarray],
               frame_count: int | None = None) -> int:
    """Write frames as a raw stream; returns the number of frames written.

    When frame_count is None and frames is a list, the count is taken from
    the list; otherwise 0 (unknown) goes into the header.
    """
    own = isinstance(target, (str, Path))
    fh: BinaryIO = open(target, "wb") if own else target  # type: ignore[arg-type]
    try:
        if frame_count is None and isinstance(frames, list):
            frame_count = len(frames)
        it = iter(frames)
        try:
            first = next(it)
        except StopIteration:
            raise StreamError("cannot write an empty frame stream") from None
        h, w, c = first.shape
        fh.write(_HEADER.pack(SLTF_MAGIC, w, h, c, frame_count or 0))
        written = 0
        for arr in _chain_one(first, it):
            if arr.shape != (h, w, c) or arr.dtype != np.uint8:
                raise StreamError(
                    f"frame {written} geometry {arr.shape} does not match declared {(h, w, c)}"
                )
            fh.write(np.ascontiguousarray(arr).tobytes())
            written += 1
        return written
    finally:
        if own:
            fh.close()


def _chain_one(first: np.ndarray, rest: Iterator[np.ndarray]) -> Iterator[np.ndarray]:
    yield first
    yield from rest


def _read_exact(fh: BinaryIO, size: int, offset: int, what: str) -> bytes:
    buf = fh.read(size)
    if buf is None or len(buf) < size:
        got = 0 if buf is None else len(buf)
        raise StreamError(
            f"truncated stream: expected {size} bytes of {what}, got {got}",
            byte_offset=offset + got,
        )
    return buf


class _RawStreamReader:
    """Iterates frames out of an open raw byte stream."""

    def __init__(self, fh: BinaryIO, declared: StreamInfo | None = None):
        self._fh = fh
        header = _read_exact(fh, _HEADER.size, 0, "header")
        magic, w, h, c, n = _HEADER.unpack(header)
        if magic != SLTF_MAGIC:
            raise StreamError(f"bad magic {magic!r}, expected {SLTF_MAGIC!r}", byte_offset=0)
        if c not in (1, 3):
            raise StreamError(f"unsupported channel count {c}", byte_offset=12)
        self.info = StreamInfo(width=w, height=h, channels=c, frame_count=n or None)
        if declared is not None and (declared.width, declared.height) != (w, h):
            raise StreamError(
                f"geometry mismatch: sidecar declares {declared.width}x{declared.height}, "
                f"stream carries {w}x{h}"
            )
        self._frame_bytes = w * h * c
        self._offset = _HEADER.size
        self._served = 0

    def __iter__(self) -> Iterator[Frame]:
        return self

    def __next__(self) -> Frame:
        n = self.info.frame_count
        if n is not None and self._served >= n:
            raise StopIteration
        buf = self._fh.read(self._frame_bytes)
        if not buf:
            if n is not None and self._served < n:
                raise StreamError(
                    f"stream ended after {self._served} of {n} declared frames",
                    byte_offset=self._offset,
                )
            raise StopIteration
        if len(buf) < self._frame_bytes:
            raise StreamError(
                f"truncated frame {self._served}: expected {self._frame_bytes} bytes, "
                f"got {len(buf)}",
                byte_offset=self._offset + len(buf),
            )
        self._offset += self._frame_bytes
        arr = np.frombuffer(buf, dtype=np.uint8).reshape(
            self.info.height, self.info.width, self.info.channels
        )
        frame = Frame(index=self._served, data=arr)
        self._served += 1
        return frame


# ---------------------------------------------------------------------------
# Sources


class FrameStream:
    """Single-pass frame iterator with source metadata.

    When a FrameSpec is attached, frames come out preprocessed; info still
    describes the source geometry.
    """

    def __init__(self, info: StreamInfo, frames: Iterator[Frame], spec: FrameSpec | None,
                 close: Any = None):
        self.info = info
        self.spec = spec
        self._frames = frames
        self._close = close

    def __iter__(self) -> Iterator[Frame]:
        if self.spec is None:
            yield from self._frames
        else:
            for frame in self._frames:
                yield preprocess(frame, self.spec)

    def close(self) -> None:
        if self._close is not None:
            self._close()
            self._close = None

    def __enter__(self) -> "FrameStream":
        return self

    def __exit__(self, *exc: Any) -> None:
        self.close()


def load_sidecar(source: str | Path) -> dict[str, Any]:
    """Load sidecar metadata for a source, or {} when none exists.

    For a directory the sidecar is <dir>/sidecar.json; for a file it is
    <file>.json alongside it.
    """
    path = Path(source)
    candidates = []
    if path.is_dir():
        candidates.append(path / "sidecar.json")
    candidates.append(path.parent / (path.name + ".json"))
    for cand in candidates:
        if cand.is_file():
            try:
                data = json.loads(cand.read_text(encoding="utf-8"))
            except json.JSONDecodeError as exc:
                raise SchemaError(f"malformed sidecar {cand}: {exc}") from exc
            if not isinstance(data, dict):
                raise SchemaError(f"sidecar {cand} must be a JSON object")
            return data
    return {}


def sidecar_crop(sidecar: dict[str, Any]) -> Roi | None:
    raw = sidecar.get("crop")
    return None if raw is None else Roi.from_dict(raw)


def _list_frame_images(directory: Path) -> list[Path]:
    found: dict[int, Path] = {}
    for entry in directory.iterdir():
        m = _IMAGE_NAME.match(entry.name)
        if m:
            idx = int(m.group(1))
            if idx in found:
                raise StreamError(f"duplicate frame index {idx} in {directory}")
            found[idx] = entry
    if not found:
        raise StreamError(f"no numbered frame images in {directory}")
    for i in range(len(found)):
        if i not in found:
            raise StreamError(f"frame sequence in {directory} is missing index {i}")
    return [found[i] for i in range(len(found))]


def _read_image_rgb(path: Path) -> np.ndarray:
    bgr = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if bgr is None:
        raise StreamError(f"could not decode image {path}")
    return cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB)


def _iter_image_dir(paths: list[Path], info: StreamInfo) -> Iterator[Frame]:
    for i, p in enumerate(paths):
        arr = _read_image_rgb(p)
        if arr.shape[:2] != (info.height, info.width):
            raise StreamError(
                f"geometry mismatch at frame {i}: {arr.shape[1]}x{arr.shape[0]} vs "
                f"declared {info.width}x{info.height}"
            )
        yield Frame(index=i, data=arr)


def _open_decoder_process(path: Path) -> tuple[subprocess.Popen, BinaryIO]:
    decoder = os.environ.get(DECODER_ENV)
    if not decoder:
        raise StreamError(
            f"no native reader for {path.suffix!r} files and {DECODER_ENV} is not set; "
            f"point it at a decoder that writes a raw frame stream to stdout"
        )
    try:
        proc = subprocess.Popen([decoder, str(path)], stdout=subprocess.PIPE,
                                stderr=subprocess.DEVNULL)
    except OSError as exc:
        raise StreamError(f"could not start decoder {decoder!r}: {exc}") from exc
    assert proc.stdout is not None
    return proc, proc.stdout


def open_stream(source: str | Path | BinaryIO, spec: FrameSpec | None = None) -> FrameStream:
    """Open a frame source for one sequential pass.

    Accepts a directory of numbered images, a .sltf raw stream file, any
    other file handled by the configured external decoder, or an already
    open binary file object carrying a raw stream.  When spec is given,
    yielded frames are preprocessed with it.
    """
    if hasattr(source, "read"):
        reader = _RawStreamReader(source)  # type: ignore[arg-type]
        return FrameStream(reader.info, iter(reader), spec)

    path = Path(source)  # type: ignore[arg-type]
    if not path.exists():
        raise StreamError(f"source {path} does not exist")
    sidecar = load_sidecar(path)

    if path.is_dir():
        paths = _list_frame_images(path)
        probe = _read_image_rgb(paths[0])
        info = StreamInfo(
            width=probe.shape[1],
            height=probe.shape[0],
            fps=sidecar.get("fps"),
            frame_count=len(paths),
        )
        return FrameStream(info, _iter_image_dir(paths, info), spec)

    if path.suffix.lower() == ".sltf":
        fh = open(path, "rb")
        try:
            reader = _RawStreamReader(fh)
        except Exception:
            fh.close()
            raise
        if reader.info.fps is None:
            reader.info.fps = sidecar.get("fps")
        return FrameStream(reader.info, iter(reader), spec, close=fh.close)

    proc, stdout = _open_decoder_process(path)

    def _close() -> None:
        stdout.close()
        proc.terminate()
        proc.wait(timeout=10)

    try:
        reader = _RawStreamReader(stdout)
    except Exception:
        _close()
        raise
    if reader.info.fps is None:
        reader.info.fps = sidecar.get("fps")
    if reader.info.frame_count is None:
        fc = sidecar.get("frame_count")
        reader.info.frame_count = int(fc) if fc is not None else None

    def _iter_and_reap() -> Iterator[Frame]:
        yield from reader
        stdout.close()
        code = proc.wait()
        if code != 0:
            raise StreamError(f"decoder exited with status {code} for {path}")

    return FrameStream(reader.info, _iter_and_reap(), spec, close=_close)


def count_frames(source: str | Path) -> int:
    """Frame count for a source, decoding only if the metadata lacks it."""
    stream = open_stream(source)
    try:
        if stream.info.frame_count is not None:
            return stream.info.frame_count
        return sum(1 for _ in stream)
    finally:
        stream.close()


def read_frame(source: str | Path, index: int) -> Frame:
    """Random access to one raw frame.  Directories seek; streams skip."""
    path = Path(source)
    if path.is_dir():
        paths = _list_frame_images(path)
        if not 0 <= index < len(paths):
            raise StreamError(f"frame {index} out of range 0..{len(paths) - 1}")
        return Frame(index=index, data=_read_image_rgb(paths[index]))
    if index < 0:
        raise StreamError(f"frame index must be >= 0, got {index}")
    stream = open_stream(path)
    try:
        for frame in stream:
            if frame.index == index:
                return frame
    finally:
        stream.close()
    raise StreamError(f"frame {index} out of range for {path}")


def spec_with_crop(spec: FrameSpec, crop: Roi | None) -> FrameSpec:
    """Copy of spec with the crop replaced (None clears it)."""
    return replace(spec, crop=crop)
