"""Frame-pair classification: is the slide content of two frames the same?

Three interchangeable backends: a blurred-difference baseline, a scripted
oracle driven by per-frame slide identity, and a neural model shipped as a
TorchScript archive with an embedded I/O contract.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Protocol

import cv2
import numpy as np

from .errors import BackendError, ContractError
from .frames import ColorMode, Frame

IO_CONTRACT_FILE = "io_contract.json"


class PairLabel(str, Enum):
    SAME = "same"
    DIFFERENT = "different"


@dataclass(frozen=True)
class PairVerdict:
    label: PairLabel
    score: float  # confidence that the pair is Same, in [0, 1]

    @property
    def is_same(self) -> bool:
        return self.label is PairLabel.SAME


@dataclass(frozen=True)
class DiffBlurConfig:
    blur_kernel: int = 21
    diff_threshold: float = 4.0

    def __post_init__(self) -> None:
        if self.blur_kernel < 1 or self.blur_kernel % 2 == 0:
            raise BackendError(f"blur_kernel must be odd and >= 1, got {self.blur_kernel}")
        if self.diff_threshold < 0:
            raise BackendError(f"diff_threshold must be >= 0, got {self.diff_threshold}")


@dataclass(frozen=True)
class PairModelContract:
    """Expected tensor shapes for a pair model.

    Input is two preprocessed frames stacked along channels, so 6 channels
    for rgb and 2 for grayscale; output is two class scores with index 0 =
    Different and index 1 = Same.
    """

    patch_size: int = 256
    color_mode: ColorMode = ColorMode.RGB
    classes: int = 2

    @property
    def in_channels(self) -> int:
        return 6 if self.color_mode is ColorMode.RGB else 2

    def to_dict(self) -> dict[str, Any]:
        return {
            "task": "pair",
            "input": [self.in_channels, self.patch_size, self.patch_size],
            "output": [self.classes],
        }


class PairBackend(Protocol):
    needs_frames: bool

    def classify(self, a: Frame, b: Frame) -> PairVerdict: ...


def _check_pair(a: Frame, b: Frame) -> None:
    if a.data.shape != b.data.shape:
        raise BackendError(
            f"frame geometry mismatch: {a.data.shape} vs {b.data.shape} "
            f"(indices {a.index}, {b.index})"
        )
    if a.channels not in (1, 3):
        raise BackendError(f"expected 1 or 3 channels, got {a.channels}")


def classify_pair(a: Frame, b: Frame, backend: PairBackend) -> PairVerdict:
    """Classify a frame pair after checking both sides share geometry."""
    _check_pair(a, b)
    return backend.classify(a, b)


class DiffBlurBackend:
    """Blur both frames, threshold the mean absolute difference.

    Blur uses the library's derived sigma for the kernel size.  The score
    is the mean difference rescaled to [0, 1]; Same wins at or below the
    threshold.
    """

    needs_frames = True

    def __init__(self, config: DiffBlurConfig | None = None):
        self.config = config or DiffBlurConfig()

    def mean_difference(self, a: Frame, b: Frame) -> float:
        k = self.config.blur_kernel
        blur_a = cv2.GaussianBlur(a.data, (k, k), 0)
        blur_b = cv2.GaussianBlur(b.data, (k, k), 0)
        diff = np.abs(blur_a.astype(np.int16) - blur_b.astype(np.int16))
        return float(diff.mean())

    def classify(self, a: Frame, b: Frame) -> PairVerdict:
        _check_pair(a, b)
        mean = self.mean_difference(a, b)
        label = PairLabel.SAME if mean <= self.config.diff_threshold else PairLabel.DIFFERENT
        return PairVerdict(label=label, score=max(0.0, 1.0 - mean / 255.0))


class OraclePairBackend:
    """Scripted verdicts, keyed either by explicit pairs or per-frame slide ids.

    With slide ids, two frames are Same exactly when their ids are equal;
    frames inside video scenes or fades carry unique ids so they never
    match anything.  Needs no pixels, which keeps scripted runs cheap.
    """

    needs_frames = False

    def __init__(self, slide_ids: list[int] | None = None,
                 pairs: dict[tuple[int, int], PairLabel] | None = None):
        if (slide_ids is None) == (pairs is None):
            raise BackendError("provide exactly one of slide_ids or pairs")
        self._ids = slide_ids
        self._pairs = pairs

    @classmethod
    def from_script(cls, script: dict[str, Any]) -> "OraclePairBackend":
        if "slide_id_per_frame" in script:
            ids = script["slide_id_per_frame"]
            if not isinstance(ids, list) or not all(isinstance(i, int) for i in ids):
                raise BackendError("slide_id_per_frame must be a list of integers")
            return cls(slide_ids=ids)
        if "pairs" in script:
            table: dict[tuple[int, int], PairLabel] = {}
            for i, entry in enumerate(script["pairs"]):
                try:
                    a, b, label = entry
                    table[(min(a, b), max(a, b))] = PairLabel(label)
                except (TypeError, ValueError) as exc:
                    raise BackendError(f"malformed pair entry {i}: {entry!r}") from exc
            return cls(pairs=table)
        raise BackendError("pair script needs 'slide_id_per_frame' or 'pairs'")

    def same_by_index(self, i: int, j: int) -> bool:
        if self._ids is not None:
            n = len(self._ids)
            if not (0 <= i < n and 0 <= j < n):
                raise BackendError(f"frame index out of scripted range 0..{n - 1}: ({i}, {j})")
            return self._ids[i] == self._ids[j]
        assert self._pairs is not None
        key = (min(i, j), max(i, j))
        if key not in self._pairs:
            raise BackendError(f"pair ({i}, {j}) not covered by the script")
        return self._pairs[key] is PairLabel.SAME

    def classify(self, a: Frame, b: Frame) -> PairVerdict:
        same = self.same_by_index(a.index, b.index)
        return PairVerdict(
            label=PairLabel.SAME if same else PairLabel.DIFFERENT,
            score=1.0 if same else 0.0,
        )


def _load_torchscript(path: str | Path) -> tuple[Any, dict[str, Any] | None]:
    import torch

    extra = {IO_CONTRACT_FILE: b""}
    try:
        module = torch.jit.load(str(path), map_location="cpu", _extra_files=extra)
    except (RuntimeError, ValueError, OSError) as exc:
        raise ContractError(f"could not load model archive {path}: {exc}") from exc
    module.eval()
    declared: dict[str, Any] | None = None
    raw = extra.get(IO_CONTRACT_FILE) or b""
    if raw:
        try:
            declared = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ContractError(f"model {path} carries a malformed io contract: {exc}") from exc
    return module, declared


def _check_declared(path: str | Path, declared: dict[str, Any] | None,
                    expected: dict[str, Any]) -> None:
    if declared is None:
        return
    for key in ("input", "output"):
        if key in declared and list(declared[key]) != list(expected[key]):
            raise ContractError(
                f"model {path} declares {key} shape {declared[key]}, "
                f"expected {expected[key]}"
            )


def _probe(module: Any, path: str | Path, in_shape: tuple[int, ...], out_len: int) -> None:
    import torch

    try:
        with torch.no_grad():
            out = module(torch.zeros((1, *in_shape), dtype=torch.float32))
    except RuntimeError as exc:
        raise ContractError(
            f"model {path} rejected a probe input of shape (1, {', '.join(map(str, in_shape))}): "
            f"{str(exc).splitlines()[0]}"
        ) from exc
    if out.ndim != 2 or out.shape[1] != out_len:
        raise ContractError(
            f"model {path} produced output shape {tuple(out.shape)}, expected (1, {out_len})"
        )


class NeuralPairBackend:
    """TorchScript pair model behind the backend protocol."""

    needs_frames = True

    def __init__(self, module: Any, contract: PairModelContract, path: str | Path = "<memory>"):
        self._module = module
        self.contract = contract
        self._path = str(path)

    def classify(self, a: Frame, b: Frame) -> PairVerdict:
        import torch

        _check_pair(a, b)
        c = self.contract
        expected_c = 3 if c.color_mode is ColorMode.RGB else 1
        if a.channels != expected_c or a.height != c.patch_size or a.width != c.patch_size:
            raise BackendError(
                f"pair model {self._path} expects {c.patch_size}x{c.patch_size}x{expected_c} "
                f"frames, got {a.width}x{a.height}x{a.channels}"
            )
        stacked = np.concatenate([a.data, b.data], axis=2).astype(np.float32) / 255.0
        tensor = torch.from_numpy(stacked.transpose(2, 0, 1)).unsqueeze(0)
        with torch.no_grad():
            logits = self._module(tensor)
            probs = torch.softmax(logits, dim=1)[0]
        score = float(probs[1])
        label = PairLabel.SAME if score >= 0.5 else PairLabel.DIFFERENT
        return PairVerdict(label=label, score=score)


def load_pair_model(path: str | Path, contract: PairModelContract | None = None) -> NeuralPairBackend:
    """Load a TorchScript pair model, verifying shapes before first use."""
    contract = contract or PairModelContract()
    module, declared = _load_torchscript(path)
    expected = contract.to_dict()
    _check_declared(path, declared, expected)
    _probe(module, path, (contract.in_channels, contract.patch_size, contract.patch_size),
           contract.classes)
    return NeuralPairBackend(module, contract, path)


def save_pair_model(module: Any, path: str | Path, contract: PairModelContract) -> None:
    """Serialize a scripted module with its contract embedded."""
    import torch

    scripted = module if isinstance(module, torch.jit.ScriptModule) else torch.jit.script(module)
    torch.jit.save(scripted, str(path),
                   _extra_files={IO_CONTRACT_FILE: json.dumps(contract.to_dict()).encode()})
