"""Planar point/segment distances used by the generator, heatmaps and
the reachability matrix."""

from __future__ import annotations

import numpy as np


def point_segment_distance(p, a, b):
    """Euclidean distance from point(s) ``p`` to the segment ``a``-``b``.

    ``p`` may be a single ``(x, y)`` pair or an array of shape ``(..., 2)``;
    the result has the matching leading shape.
    """
    p = np.asarray(p, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.linalg.norm(p - a, axis=-1)
    s = np.clip(((p - a) @ ab) / denom, 0.0, 1.0)
    proj = a + s[..., None] * ab
    return np.linalg.norm(p - proj, axis=-1)


def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _on_segment(a, b, c) -> bool:
    # c collinear with a-b; check bounding box
    return (min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= c[1] <= max(a[1], b[1]))


def segments_intersect(a, b, c, d) -> bool:
    d1 = _orient(c, d, a)
    d2 = _orient(c, d, b)
    d3 = _orient(a, b, c)
    d4 = _orient(a, b, d)
    if ((d1 > 0) != (d2 > 0)) and d1 != 0 and d2 != 0 \
            and ((d3 > 0) != (d4 > 0)) and d3 != 0 and d4 != 0:
        return True
    if d1 == 0 and _on_segment(c, d, a):
        return True
    if d2 == 0 and _on_segment(c, d, b):
        return True
    if d3 == 0 and _on_segment(a, b, c):
        return True
    if d4 == 0 and _on_segment(a, b, d):
        return True
    return False


def segment_distance(a, b, c, d) -> float:
    """Minimum distance between segments ``a``-``b`` and ``c``-``d``.

    Zero when they touch or cross; otherwise the closest pair always has an
    endpoint on one of the two segments.
    """
    a, b, c, d = (np.asarray(v, dtype=float) for v in (a, b, c, d))
    if segments_intersect(a, b, c, d):
        return 0.0
    return float(min(
        point_segment_distance(a, c, d),
        point_segment_distance(b, c, d),
        point_segment_distance(c, a, b),
        point_segment_distance(d, a, b),
    ))
