"""Transition records and the detection document that carries them."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Iterable

from .errors import SchemaError


class TransitionKind(str, Enum):
    HARD = "hard"
    GRADUAL = "gradual"
    SLIDE_VIDEO = "slide_video"
    VIDEO_SLIDE = "video_slide"


@dataclass(frozen=True)
class TransitionRecord:
    """One detected or labeled transition.

    start and end are frame indices: the last frame before the transition
    and the first frame after it.  For a hard cut end == start + 1; for a
    gradual transition the fade frames lie strictly between them.
    """

    kind: TransitionKind
    start: int
    end: int

    def __post_init__(self) -> None:
        if self.start < 0:
            raise SchemaError(f"transition start must be >= 0, got {self.start}", field="start")
        if self.end < self.start:
            raise SchemaError(
                f"transition end {self.end} precedes start {self.start}", field="end"
            )

    @property
    def point(self) -> tuple[int, int]:
        return (self.start, self.end)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "start": self.start, "end": self.end}

    @classmethod
    def from_dict(cls, data: dict[str, Any], field: str = "transition") -> "TransitionRecord":
        try:
            kind = TransitionKind(data["kind"])
        except KeyError:
            raise SchemaError("transition record missing 'kind'", field=field) from None
        except ValueError:
            raise SchemaError(f"unknown transition kind {data['kind']!r}", field=field) from None
        for key in ("start", "end"):
            if not isinstance(data.get(key), int) or isinstance(data.get(key), bool):
                raise SchemaError(f"transition {key!r} must be an integer", field=field)
        return cls(kind=kind, start=data["start"], end=data["end"])


def sort_records(records: Iterable[TransitionRecord]) -> list[TransitionRecord]:
    return sorted(records, key=lambda r: (r.start, r.end, r.kind.value))


def write_detections(path: str | Path, doc: dict[str, Any]) -> None:
    """Write a detection document with stable key order and newline at EOF."""
    payload = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    Path(path).write_text(payload, encoding="utf-8")


def load_detections(path: str | Path) -> dict[str, Any]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or "transitions" not in doc:
        raise SchemaError("detection document must be an object with 'transitions'")
    return doc


def records_from_doc(doc: dict[str, Any]) -> list[TransitionRecord]:
    """Parse transition records out of a detection or annotation document."""
    raw = doc.get("transitions")
    if not isinstance(raw, list):
        raise SchemaError("'transitions' must be a list", field="transitions")
    return [
        TransitionRecord.from_dict(item, field=f"transitions[{i}]") for i, item in enumerate(raw)
    ]
