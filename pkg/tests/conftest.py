from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest
import torch

from slidetrans.frames import ColorMode, Frame
from slidetrans.pairs import PairModelContract, save_pair_model
from slidetrans.refiner import ClipModelContract, save_clip_model
from slidetrans.synth import (
    SceneSpec,
    SyntheticScript,
    TransitionOut,
    build_corpus,
    synthesize_video,
)

CORPUS_SEED = 20260815


# ---------------------------------------------------------------------------
# Tiny deterministic TorchScript models.  They score by mean absolute frame
# difference, which is enough to behave correctly on the synthetic corpus:
# additive noise stays far below the 0.015 activity threshold while slide
# changes and video motion sit far above it.


class _MeanDiffPairNet(torch.nn.Module):
    def __init__(self, in_channels: int):
        super().__init__()
        self.half = in_channels // 2

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        a = x[:, : self.half]
        b = x[:, self.half :]
        diff = (a - b).abs().mean(dim=[1, 2, 3])
        return torch.stack([diff * 400.0 - 6.0, 6.0 - diff * 400.0], dim=1)


class _StepCountClipNet(torch.nn.Module):
    """Counts active inter-frame steps: none -> static, one -> cut, all ->
    video, otherwise gradual (transition task); the scene task folds the
    middle cases into its transition class."""

    def __init__(self, classes: int):
        super().__init__()
        self.classes = classes

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        steps = (x[:, 1:] - x[:, :-1]).abs().mean(dim=[2, 3, 4])
        active = (steps > 0.015).to(torch.float32).sum(dim=1)
        n_steps = float(x.shape[1] - 1)
        if self.classes == 4:
            idx = torch.where(
                active <= 0.5,
                torch.full_like(active, 2.0),
                torch.where(
                    active <= 1.5,
                    torch.zeros_like(active),
                    torch.where(
                        active >= n_steps - 0.5,
                        torch.full_like(active, 3.0),
                        torch.ones_like(active),
                    ),
                ),
            )
        else:
            idx = torch.where(
                active <= 0.5,
                torch.ones_like(active),
                torch.where(
                    active >= n_steps - 0.5,
                    torch.full_like(active, 2.0),
                    torch.zeros_like(active),
                ),
            )
        one_hot = torch.nn.functional.one_hot(idx.to(torch.int64), self.classes)
        return one_hot.to(torch.float32) * 8.0


class _WrongOutputNet(torch.nn.Module):
    def __init__(self, out_len: int):
        super().__init__()
        self.out_len = out_len

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x.mean(dim=[1, 2, 3]).unsqueeze(1).repeat(1, self.out_len)


def build_pair_model(path: Path, in_channels: int = 6,
                     declared: dict | None = None) -> Path:
    module = torch.jit.script(_MeanDiffPairNet(in_channels))
    if declared is None:
        color = ColorMode.RGB if in_channels == 6 else ColorMode.GRAY
        save_pair_model(module, path, PairModelContract(color_mode=color))
    else:
        from slidetrans.pairs import IO_CONTRACT_FILE

        torch.jit.save(module, str(path),
                       _extra_files={IO_CONTRACT_FILE: json.dumps(declared).encode()})
    return path


def build_clip_model(path: Path, task: str) -> Path:
    contract = ClipModelContract(task)
    module = torch.jit.script(_StepCountClipNet(contract.classes))
    save_clip_model(module, path, contract)
    return path


def build_wrong_output_model(path: Path, out_len: int) -> Path:
    module = torch.jit.script(_WrongOutputNet(out_len))
    torch.jit.save(module, str(path))
    return path


@pytest.fixture(scope="session")
def model_dir(tmp_path_factory: pytest.TempPathFactory) -> Path:
    d = tmp_path_factory.mktemp("models")
    build_pair_model(d / "pair_rgb.pt", 6)
    build_clip_model(d / "transition.pt", "transition")
    build_clip_model(d / "scene.pt", "scene")
    return d


# ---------------------------------------------------------------------------
# Synthetic sources


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory: pytest.TempPathFactory) -> Path:
    """The full seeded corpus: 20 noisy videos as raw streams."""
    d = tmp_path_factory.mktemp("corpus")
    build_corpus(d, n_videos=20, seed=CORPUS_SEED, noise_sigma=1.0, fmt="sltf")
    return d


@pytest.fixture(scope="session")
def corpus_summary(corpus_dir: Path) -> dict:
    return json.loads((corpus_dir / "summary.json").read_text(encoding="utf-8"))


def small_script(noise_sigma: float = 1.0, seed: int = 4242) -> SyntheticScript:
    """A fast-to-render mixed layout: 171 frames at 200x120."""
    return SyntheticScript(
        seed=seed,
        width=200,
        height=120,
        fps=25.0,
        noise_sigma=noise_sigma,
        scenes=[
            SceneSpec("slide", 30, TransitionOut("hard")),
            SceneSpec("slide", 30, TransitionOut("cut")),
            SceneSpec("video", 45, TransitionOut("cut"), pauses=((18, 9),)),
            SceneSpec("slide", 30, TransitionOut("gradual", 6)),
            SceneSpec("slide", 30, None),
        ],
    )


@pytest.fixture(scope="session")
def mini_video(tmp_path_factory: pytest.TempPathFactory) -> Path:
    """One small PNG-directory video with ground truth next to the frames."""
    d = tmp_path_factory.mktemp("mini")
    synthesize_video(small_script(), d, "mini_000", fmt="png")
    return d / "mini_000"


def solid_frame(index: int, value: int, width: int = 64, height: int = 48) -> Frame:
    return Frame(index=index, data=np.full((height, width, 3), value, dtype=np.uint8))
