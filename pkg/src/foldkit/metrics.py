"""Fold-quality evaluation: projected area, rectangularity, area ratio,
success judgement, and report serialization.

Projected area rasterizes the union of ground-plane-projected triangles onto
a uniform grid (cell = max(1 mm, bbox diagonal / 512)); a cell counts once if
any triangle overlaps it with positive area, which is conservative for the
union and keeps layered (folded) geometry well defined.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError
from .geometry import convex_hull_2d, min_area_rect

GRID_DIVISOR = 512
MIN_CELL = 0.001  # m


@dataclass
class MetricThresholds:
    rectangularity_min: float = 0.75
    area_ratio_max: float = 0.55

    def validate(self) -> None:
        assert 0.0 < self.rectangularity_min <= 1.0
        assert 0.0 < self.area_ratio_max <= 1.0


@dataclass
class FoldReport:
    rectangularity: float
    area_ratio: float
    success: bool
    chamfer_to_goal: float
    initial_area: float
    final_area: float

    def to_text(self) -> str:
        lines = [
            f"rectangularity={self.rectangularity:.6f}",
            f"area_ratio={self.area_ratio:.6f}",
            f"success={'true' if self.success else 'false'}",
            f"chamfer_to_goal={self.chamfer_to_goal:.6f}",
            f"initial_area={self.initial_area:.6f}",
            f"final_area={self.final_area:.6f}",
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "FoldReport":
        kv = {}
        for line in text.strip().splitlines():
            key, value = line.split("=", 1)
            kv[key] = value
        return cls(
            rectangularity=float(kv["rectangularity"]),
            area_ratio=float(kv["area_ratio"]),
            success=kv["success"] == "true",
            chamfer_to_goal=float(kv["chamfer_to_goal"]),
            initial_area=float(kv["initial_area"]),
            final_area=float(kv["final_area"]),
        )


def projected_area(positions, triangles) -> float:
    """Area of the union of triangles projected to z=0, by conservative
    rasterization. Raises DegenerateGeometryError for zero-area projections."""
    pos = np.asarray(positions, dtype=np.float64)[:, :2]
    tris = np.asarray(triangles, dtype=np.int64)
    if len(tris) == 0:
        raise DegenerateGeometryError("point", "no triangles")
    lo = pos.min(axis=0)
    hi = pos.max(axis=0)
    diag = float(np.linalg.norm(hi - lo))
    if diag <= 0:
        raise DegenerateGeometryError("point", "zero-extent projection")
    cell = max(MIN_CELL, diag / GRID_DIVISOR)
    nx = max(1, int(np.ceil((hi[0] - lo[0]) / cell)))
    ny = max(1, int(np.ceil((hi[1] - lo[1]) / cell)))
    covered = np.zeros((ny, nx), dtype=bool)
    hs = 0.5 * cell

    p0 = pos[tris[:, 0]]
    p1 = pos[tris[:, 1]]
    p2 = pos[tris[:, 2]]
    tri_min = np.minimum(np.minimum(p0, p1), p2)
    tri_max = np.maximum(np.maximum(p0, p1), p2)

    for t in range(len(tris)):
        i0 = max(0, int((tri_min[t, 0] - lo[0]) / cell))
        i1 = min(nx - 1, int((tri_max[t, 0] - lo[0]) / cell))
        j0 = max(0, int((tri_min[t, 1] - lo[1]) / cell))
        j1 = min(ny - 1, int((tri_max[t, 1] - lo[1]) / cell))
        if i1 < i0 or j1 < j0:
            continue
        block = covered[j0:j1 + 1, i0:i1 + 1]
        if block.all():
            continue
        cx = lo[0] + (np.arange(i0, i1 + 1) + 0.5) * cell
        cy = lo[1] + (np.arange(j0, j1 + 1) + 0.5) * cell
        X, Y = np.meshgrid(cx, cy)
        verts = (p0[t], p1[t], p2[t])
        overlap = np.ones_like(X, dtype=bool)
        # separating-axis test on the three edge normals (the box axes are
        # handled by the bbox-limited candidate block, refined below)
        for a, b in ((0, 1), (1, 2), (2, 0)):
            ex, ey = verts[b][0] - verts[a][0], verts[b][1] - verts[a][1]
            nxn, nyn = -ey, ex
            tri_proj = [nxn * v[0] + nyn * v[1] for v in verts]
            t_lo, t_hi = min(tri_proj), max(tri_proj)
            c_proj = nxn * X + nyn * Y
            radius = hs * (abs(nxn) + abs(nyn))
            overlap &= (c_proj + radius > t_lo) & (c_proj - radius < t_hi)
        # box axes: positive-width overlap in x and y
        overlap &= (X + hs > tri_min[t, 0]) & (X - hs < tri_max[t, 0])
        overlap &= (Y + hs > tri_min[t, 1]) & (Y - hs < tri_max[t, 1])
        block |= overlap

    area = float(covered.sum()) * cell * cell
    if area <= 0:
        raise DegenerateGeometryError("segment", "projection has no area")
    return area


def rectangularity(positions, triangles) -> float:
    """Projected union area over the area of the minimum oriented bounding
    rectangle of the projected vertices."""
    area = projected_area(positions, triangles)
    pos = np.asarray(positions, dtype=np.float64)
    hull = convex_hull_2d(pos[:, :2])
    rect = min_area_rect(hull)
    return area / rect.area


def area_ratio(final_positions, initial_positions, triangles) -> float:
    """Final over initial projected area for the same triangulation."""
    initial = projected_area(initial_positions, triangles)
    final = projected_area(final_positions, triangles)
    return final / initial


def judge(report: FoldReport, thresholds: MetricThresholds | None = None) -> bool:
    """Success: rectangular enough and compact enough."""
    th = thresholds or MetricThresholds()
    th.validate()
    return (report.rectangularity >= th.rectangularity_min
            and report.area_ratio <= th.area_ratio_max)


def evaluate_fold(final_positions, initial_positions, triangles,
                  chamfer_to_goal: float = float("nan"),
                  thresholds: MetricThresholds | None = None) -> FoldReport:
    """Assemble a FoldReport for a finished episode."""
    initial = projected_area(initial_positions, triangles)
    final = projected_area(final_positions, triangles)
    report = FoldReport(
        rectangularity=rectangularity(final_positions, triangles),
        area_ratio=final / initial,
        success=False,
        chamfer_to_goal=chamfer_to_goal,
        initial_area=initial,
        final_area=final,
    )
    report.success = judge(report, thresholds)
    return report


def write_batch_csv(path, rows: dict[str, dict[str, float]],
                    categories: list[str]) -> None:
    """Metric-by-category summary: one row per metric, one column per
    category ('metric' first)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric"] + list(categories))
        for metric, per_cat in rows.items():
            writer.writerow([metric] + [f"{per_cat.get(c, float('nan')):.4f}"
                                        for c in categories])
