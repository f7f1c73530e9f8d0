"""Independent reference implementations used to cross-check the package.

Everything here is deliberately written in a different shape from the
production code (post-hoc grouping instead of streaming flushes, vectorized
matrices instead of loops, float64 instead of fixed point) so agreement is
evidence rather than tautology.
"""

from __future__ import annotations

from collections import Counter
from typing import Callable, Sequence

import numpy as np


def reference_segments(same_fn: Callable[[int, int], bool], n_frames: int,
                       static_min: int = 8) -> list[tuple[str, int, int]]:
    """Anchor-machine semantics re-derived via event materialization.

    First pass records every Different event as (anchor, k, run); a second
    pass classifies events into statics and maximal groups of short runs,
    then reads the video bounds off each group: the video starts at the
    first short-run frame and ends one before the last short-run frame when
    a static follows (the static starts there), or exactly at it when the
    stream ends without one.
    """
    events: list[tuple[int, int, int]] = []
    a = 0
    for k in range(1, n_frames):
        if not same_fn(a, k):
            events.append((a, k, k - a))
            a = k
    trailing_run = n_frames - a

    is_static = [run >= static_min for (_, _, run) in events]
    segs: list[tuple[str, int, int]] = []
    i = 0
    while i < len(events):
        if is_static[i]:
            anchor, k, _ = events[i]
            segs.append(("static_slide", anchor, k - 1))
            i += 1
            continue
        j = i
        while j + 1 < len(events) and not is_static[j + 1]:
            j += 1
        first_short_k = events[i][1]
        last_short_k = events[j][1]
        followed_by_static = j + 1 < len(events) or trailing_run >= static_min
        end = last_short_k - 1 if followed_by_static else last_short_k
        if end >= first_short_k:
            segs.append(("video", first_short_k, end))
        i = j + 1
    if n_frames > 0 and trailing_run >= static_min:
        segs.append(("static_slide", a, n_frames - 1))
    return segs


def reference_match(pred: Sequence[tuple[float, float]],
                    labeled: Sequence[tuple[float, float]],
                    radius: float) -> set[tuple[int, int]]:
    """Mutual-nearest pairs via a full distance matrix.

    np.argmin returns the first minimum, which reproduces the lower-index
    tie rule.
    """
    if not pred or not labeled:
        return set()
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(labeled, dtype=np.float64)
    d = np.hypot(p[:, 0, None] - g[None, :, 0], p[:, 1, None] - g[None, :, 1])
    nearest_label = d.argmin(axis=1)
    nearest_pred = d.argmin(axis=0)
    return {
        (i, int(j))
        for i, j in enumerate(nearest_label)
        if nearest_pred[j] == i and d[i, j] <= radius
    }


def reference_majority(votes: Sequence, priority: Sequence):
    counts = Counter(votes)
    best = max(counts.values())
    tied = [v for v, c in counts.items() if c == best]
    order = list(priority)
    return min(tied, key=order.index)


def reference_blend(a: np.ndarray, b: np.ndarray, weight: float) -> np.ndarray:
    mixed = (1.0 - weight) * a.astype(np.float64) + weight * b.astype(np.float64)
    return np.clip(np.rint(mixed), 0, 255).astype(np.uint8)


def bilinear_resize_reference(img: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Float64 bilinear resample with half-pixel-aligned sample centers."""
    h, w = img.shape[:2]
    sx = w / out_w
    sy = h / out_h
    xs = (np.arange(out_w) + 0.5) * sx - 0.5
    ys = (np.arange(out_h) + 0.5) * sy - 0.5
    x0 = np.clip(np.floor(xs).astype(int), 0, w - 1)
    y0 = np.clip(np.floor(ys).astype(int), 0, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = np.clip(xs - np.floor(xs), 0.0, 1.0)
    fy = np.clip(ys - np.floor(ys), 0.0, 1.0)
    # Edge samples clamp both taps to the border row/column.
    fx = np.where(xs < 0, 0.0, fx)
    fy = np.where(ys < 0, 0.0, fy)

    plane = img.astype(np.float64)
    top = plane[y0][:, x0] * (1 - fx)[None, :, None] + plane[y0][:, x1] * fx[None, :, None]
    bot = plane[y1][:, x0] * (1 - fx)[None, :, None] + plane[y1][:, x1] * fx[None, :, None]
    out = top * (1 - fy)[:, None, None] + bot * fy[:, None, None]
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)
