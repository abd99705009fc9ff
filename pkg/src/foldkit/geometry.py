"""Computational-geometry and point-cloud primitives.

Conventions: point clouds are float64 arrays of shape (N, 3) in meters;
2D operations project onto the ground plane z=0. All functions are pure and
deterministic; ties break toward the lowest index so repeated runs produce
bit-identical output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    BadKError,
    DegenerateGeometryError,
    EmptyInputError,
    SizeMismatchError,
)


@dataclass(frozen=True)
class FlowField:
    """Per-point displacement between two corresponded frames."""

    displacements: np.ndarray  # (N, 3), meters
    source_frame: int = 0
    target_frame: int = 1

    @property
    def magnitudes(self) -> np.ndarray:
        return np.linalg.norm(self.displacements, axis=1)


@dataclass(frozen=True)
class OrientedRect:
    """Minimum-area oriented bounding rectangle in the ground plane."""

    area: float
    angle: float  # radians, direction of the rect's local x-axis
    extents: tuple[float, float]  # (width, height) along the local axes
    center: tuple[float, float]


def _as_points(points, dim: int = 3) -> np.ndarray:
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != dim:
        arr = arr.reshape(-1, dim)
    return arr


def farthest_point_sample(points, k: int, seed: int = 0) -> np.ndarray:
    """Greedy max-min downsampling of a point cloud.

    The first pick is the point nearest the centroid; every subsequent pick
    maximizes the minimum distance to the already-chosen set. Ties break by
    lowest index, so the seed only matters if a future tie rule needs it.

    Returns the selected indices in pick order.
    """
    pts = _as_points(points)
    n = len(pts)
    if n == 0:
        raise EmptyInputError("farthest_point_sample: empty point set")
    if not 1 <= k <= n:
        raise BadKError(f"farthest_point_sample: k={k} not in [1, {n}]")

    centroid = pts.mean(axis=0)
    first = int(np.argmin(np.linalg.norm(pts - centroid, axis=1)))
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = first

    # min squared distance from every point to the chosen set
    dist2 = np.sum((pts - pts[first]) ** 2, axis=1)
    for i in range(1, k):
        nxt = int(np.argmax(dist2))  # argmax returns the lowest index on ties
        chosen[i] = nxt
        np.minimum(dist2, np.sum((pts - pts[nxt]) ** 2, axis=1), out=dist2)
    return chosen


def convex_hull_2d(points) -> np.ndarray:
    """Counter-clockwise convex hull by monotone chain.

    Collinear and duplicate vertices are dropped. Raises
    DegenerateGeometryError("point"/"segment") when the input has no area.
    """
    pts = _as_points(points, dim=2)
    if len(pts) == 0:
        raise EmptyInputError("convex_hull_2d: empty point set")

    uniq = np.unique(pts, axis=0)  # lexicographic sort on (x, y)
    if len(uniq) == 1:
        raise DegenerateGeometryError("point")

    def cross2(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and cross2(out[-2], out[-1], p) <= 0:
                out.pop()
            out.append(p)
        return out

    lower = half(uniq)
    upper = half(uniq[::-1])
    hull = np.array(lower[:-1] + upper[:-1])
    if len(hull) < 3:
        raise DegenerateGeometryError("segment")
    return hull


def polygon_area(vertices: np.ndarray) -> float:
    """Shoelace area of a simple polygon (positive if counter-clockwise)."""
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def min_area_rect(points) -> OrientedRect:
    """Minimum-area oriented bounding rectangle via rotating calipers.

    By the edge-flush property the optimum is axis-aligned in the frame of
    one hull edge, so it suffices to evaluate the bounding box rotated to
    each hull edge direction. Ties break toward the lowest edge index.
    """
    hull = convex_hull_2d(points)  # raises Degenerate for collinear input
    edges = np.roll(hull, -1, axis=0) - hull
    angles = np.arctan2(edges[:, 1], edges[:, 0])

    best = None
    for i, theta in enumerate(angles):
        c, s = np.cos(theta), np.sin(theta)
        rot = hull @ np.array([[c, -s], [s, c]])  # rotate by -theta
        lo = rot.min(axis=0)
        hi = rot.max(axis=0)
        w, h = hi - lo
        area = float(w * h)
        if best is None or area < best[0]:
            cx, cy = (lo + hi) / 2.0
            # map the rect center back to the input frame
            center = (cx * c - cy * s, cx * s + cy * c)
            best = (area, float(theta), (float(w), float(h)), center)
    return OrientedRect(*best)


def chamfer_distance(a, b) -> float:
    """Symmetric Chamfer distance: mean nearest-neighbor distance, averaged
    over both directions."""
    pa = _as_points(a)
    pb = _as_points(b)
    if len(pa) == 0 or len(pb) == 0:
        raise EmptyInputError("chamfer_distance: empty point set")
    d_ab, _ = cKDTree(pb).query(pa)
    d_ba, _ = cKDTree(pa).query(pb)
    return 0.5 * (float(np.mean(d_ab)) + float(np.mean(d_ba)))


def corresponded_distance(a, b, mask=None) -> float:
    """Mean per-point distance between index-corresponded clouds (2D or 3D),
    optionally restricted to a boolean mask."""
    pa = np.asarray(a, dtype=np.float64)
    pb = np.asarray(b, dtype=np.float64)
    if pa.shape != pb.shape:
        raise SizeMismatchError(
            f"corresponded_distance: shapes differ ({pa.shape} vs {pb.shape})"
        )
    d = np.linalg.norm(pa - pb, axis=1)
    if mask is not None and np.any(mask):
        d = d[mask]
    return float(d.mean())


def compute_flow(frame_from, frame_to, source_frame: int = 0, target_frame: int = 1) -> FlowField:
    """Index-corresponded displacement field between two frames."""
    a = _as_points(frame_from)
    b = _as_points(frame_to)
    if a.shape != b.shape:
        raise SizeMismatchError(
            f"compute_flow: frame shapes differ ({a.shape} vs {b.shape})"
        )
    return FlowField(b - a, source_frame, target_frame)


def signed_line_distance(points_xy: np.ndarray, line_point, line_dir) -> np.ndarray:
    """Signed distance of 2D points to a line; positive on the side of the
    left normal of `line_dir`."""
    p = np.asarray(line_point, dtype=np.float64)
    d = np.asarray(line_dir, dtype=np.float64)
    d = d / np.linalg.norm(d)
    normal = np.array([-d[1], d[0]])
    return (np.atleast_2d(points_xy) - p) @ normal


def reflect_across_line(points_xy: np.ndarray, line_point, line_dir) -> np.ndarray:
    """Reflect 2D points across a line given by point + direction."""
    p = np.asarray(line_point, dtype=np.float64)
    d = np.asarray(line_dir, dtype=np.float64)
    d = d / np.linalg.norm(d)
    normal = np.array([-d[1], d[0]])
    dist = (np.atleast_2d(points_xy) - p) @ normal
    return np.atleast_2d(points_xy) - 2.0 * dist[:, None] * normal[None, :]
