"""Parametric garment meshes with labeled keypoints and fold-stage libraries.

Categories: no_sleeve (vest), short_sleeve, long_sleeve, pants. Garments are
built flat on the ground plane with a small z lift, body axis +y (collar
toward +y) and the wearer's left toward -x seen from above.

Each garment is a union of axis-aligned rectangular panels meshed with
structured grids; panels weld along shared grid lines so the mesh is a single
connected sheet. Sleeve and leg widths snap to whole grid rows/columns of the
body panel, which keeps shared edges conforming.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BadSpecError
from .geometry import reflect_across_line, signed_line_distance

NO_SLEEVE = "no_sleeve"
SHORT_SLEEVE = "short_sleeve"
LONG_SLEEVE = "long_sleeve"
PANTS = "pants"
CATEGORIES = (NO_SLEEVE, SHORT_SLEEVE, LONG_SLEEVE, PANTS)

LEFT_SLEEVE = "left_sleeve"
RIGHT_SLEEVE = "right_sleeve"
BOTTOM_UP = "bottom_up"
LEFT_LEG_ONTO_RIGHT = "left_leg_onto_right"
ALL_STAGES = (LEFT_SLEEVE, RIGHT_SLEEVE, BOTTOM_UP, LEFT_LEG_ONTO_RIGHT)

CATEGORY_STAGES = {
    NO_SLEEVE: (BOTTOM_UP,),
    SHORT_SLEEVE: (LEFT_SLEEVE, RIGHT_SLEEVE, BOTTOM_UP),
    LONG_SLEEVE: (LEFT_SLEEVE, RIGHT_SLEEVE, BOTTOM_UP),
    PANTS: (LEFT_LEG_ONTO_RIGHT, BOTTOM_UP),
}

DEFAULT_LIFT = 0.002  # initial height above the ground plane, meters


@dataclass
class GarmentSpec:
    """Dimensions of a parametric garment, meters.

    `seed` records the jitter draw used by sample_spec so a spec can be
    regenerated; build_garment itself is deterministic in the dimensions.
    """

    category: str
    body_width: float
    body_height: float
    sleeve_length: float = 0.0
    sleeve_width: float = 0.0
    leg_length: float = 0.0
    leg_width: float = 0.0
    resolution: float = 0.02
    seed: int = 0

    def validate(self) -> None:
        if self.category not in CATEGORIES:
            raise BadSpecError("category", f"unknown category {self.category!r}")
        dims = {"body_width": self.body_width, "body_height": self.body_height}
        if self.category in (SHORT_SLEEVE, LONG_SLEEVE):
            dims["sleeve_length"] = self.sleeve_length
            dims["sleeve_width"] = self.sleeve_width
        if self.category == PANTS:
            dims["leg_length"] = self.leg_length
            dims["leg_width"] = self.leg_width
        for name, value in dims.items():
            if not np.isfinite(value) or value <= 0:
                raise BadSpecError(name, f"{name} must be positive, got {value}")
        if self.resolution <= 0:
            raise BadSpecError("resolution")
        if self.resolution > min(dims.values()) / 4.0:
            raise BadSpecError(
                "resolution",
                f"resolution {self.resolution} exceeds min dimension / 4",
            )
        if self.category in (SHORT_SLEEVE, LONG_SLEEVE):
            if self.sleeve_length > self.body_width:
                # folded sleeve tip would land outside the body panel
                raise BadSpecError("sleeve_length", "sleeve longer than body width")
            if self.sleeve_width > self.body_height:
                raise BadSpecError("sleeve_width")
        if self.category == PANTS and 2.0 * self.leg_width >= self.body_width:
            raise BadSpecError("leg_width", "legs wider than the waist panel")


_DEFAULT_DIMS = {
    NO_SLEEVE: dict(body_width=0.38, body_height=0.54),
    SHORT_SLEEVE: dict(body_width=0.36, body_height=0.48, sleeve_length=0.16, sleeve_width=0.18),
    LONG_SLEEVE: dict(body_width=0.34, body_height=0.46, sleeve_length=0.30, sleeve_width=0.16),
    PANTS: dict(body_width=0.34, body_height=0.16, leg_length=0.46, leg_width=0.15),
}


def default_spec(category: str) -> GarmentSpec:
    if category not in _DEFAULT_DIMS:
        raise BadSpecError("category", f"unknown category {category!r}")
    return GarmentSpec(category=category, **_DEFAULT_DIMS[category])


def sample_spec(category: str, seed: int) -> GarmentSpec:
    """Jittered spec: one global scale draw plus small per-dimension jitter.

    Jitter ranges are chosen so every sampled garment still satisfies the
    fold-target containment constraints (e.g. sleeves shorter than the body
    panel is wide).
    """
    rng = np.random.default_rng(seed)
    base = default_spec(category)
    scale = rng.uniform(0.92, 1.08)
    dims = {}
    for name in ("body_width", "body_height", "sleeve_length", "sleeve_width",
                 "leg_length", "leg_width"):
        value = getattr(base, name)
        dims[name] = value * scale * rng.uniform(0.97, 1.03) if value > 0 else 0.0
    spec = GarmentSpec(category=category, resolution=base.resolution, seed=seed, **dims)
    spec.validate()
    return spec


@dataclass
class GarmentMesh:
    """Triangulated flat garment. Treated as immutable after build."""

    vertices: np.ndarray  # (n, 3) float64, rest pose
    triangles: np.ndarray  # (t, 3) int
    edges: np.ndarray  # (e, 2) int
    edge_rest_lengths: np.ndarray  # (e,)
    category: str
    keypoints: dict[str, int]
    panels: list[tuple[float, float, float, float]] = field(default_factory=list)
    spec: GarmentSpec | None = None

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def keypoint_position(self, name: str) -> np.ndarray:
        return self.vertices[self.keypoints[name]]

    def silhouette_area(self) -> float:
        """Analytic area of the as-built panel union (panels are disjoint)."""
        return float(sum((x1 - x0) * (y1 - y0) for x0, x1, y0, y1 in self.panels))

    def contains_xy(self, points_xy, tol: float = 1e-9) -> np.ndarray:
        """True for points inside (or on the border of) the silhouette."""
        p = np.atleast_2d(np.asarray(points_xy, dtype=float))
        inside = np.zeros(len(p), dtype=bool)
        for x0, x1, y0, y1 in self.panels:
            inside |= (
                (p[:, 0] >= x0 - tol) & (p[:, 0] <= x1 + tol)
                & (p[:, 1] >= y0 - tol) & (p[:, 1] <= y1 + tol)
            )
        return inside

    def mesh_area(self) -> float:
        v = self.vertices
        t = self.triangles
        a = v[t[:, 1], :2] - v[t[:, 0], :2]
        b = v[t[:, 2], :2] - v[t[:, 0], :2]
        return float(np.abs(0.5 * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])).sum())


@dataclass
class FoldStage:
    """One atomic fold: rotate the moving half-plane across the fold line.

    moving_side is the sign of signed_line_distance for points that move.
    """

    stage_id: str
    line_point: np.ndarray  # (2,)
    line_dir: np.ndarray  # (2,), unit
    moving_side: int
    grasp_keypoint: str
    target_keypoint: str

    def __post_init__(self):
        self.line_point = np.asarray(self.line_point, dtype=float)
        d = np.asarray(self.line_dir, dtype=float)
        norm = np.linalg.norm(d)
        if norm == 0:
            raise BadSpecError("line_dir", "fold line direction must be nonzero")
        self.line_dir = d / norm

    def side_of(self, points_xy) -> np.ndarray:
        return signed_line_distance(points_xy, self.line_point, self.line_dir)


class _PanelMesher:
    """Accumulates structured grids, welding vertices on identical (x, y)."""

    def __init__(self):
        self._index: dict[tuple[float, float], int] = {}
        self.coords: list[tuple[float, float]] = []
        self.triangles: list[tuple[int, int, int]] = []

    def _vertex(self, x: float, y: float) -> int:
        key = (float(x), float(y))
        idx = self._index.get(key)
        if idx is None:
            idx = len(self.coords)
            self._index[key] = idx
            self.coords.append(key)
        return idx

    def add_grid(self, xs: np.ndarray, ys: np.ndarray) -> None:
        nx, ny = len(xs), len(ys)
        grid = np.empty((ny, nx), dtype=int)
        for j, y in enumerate(ys):
            for i, x in enumerate(xs):
                grid[j, i] = self._vertex(x, y)
        for j in range(ny - 1):
            for i in range(nx - 1):
                v00, v10 = grid[j, i], grid[j, i + 1]
                v01, v11 = grid[j + 1, i], grid[j + 1, i + 1]
                self.triangles.append((v00, v10, v11))
                self.triangles.append((v00, v11, v01))

    def find(self, x: float, y: float) -> int:
        return self._index[(float(x), float(y))]


def _centered_axis(extent: float, n_cells: int) -> np.ndarray:
    # exact mirror symmetry: coordinates are (i - n/2) * cell, so negation of
    # index i maps bitwise to index n-i
    cell = extent / n_cells
    return (np.arange(n_cells + 1) - n_cells / 2.0) * cell


def _attached_axis(anchor: float, length: float, n_cells: int, direction: int) -> np.ndarray:
    # grows from the anchor outward; anchor coordinate is reproduced exactly
    cell = length / n_cells
    steps = np.arange(n_cells + 1)
    return anchor + direction * steps * cell


def _with_cuts(axis: np.ndarray, cuts, cell: float) -> np.ndarray:
    """Place exact cut coordinates on a grid axis.

    The nearest interior grid line moves onto the cut, so panel boundaries
    are exact without creating sliver cells (neighbor cells stay within
    0.5..1.5 of the nominal cell). Boundary lines never move; if no interior
    line is within half a cell, the cut is inserted as a new line. Symmetric
    cut pairs on a symmetric axis preserve exact mirror symmetry (IEEE
    negation is exact).
    """
    vals = list(axis)
    claimed: set[int] = set()
    for cut in cuts:
        order = np.argsort([abs(v - cut) for v in vals])
        placed = False
        for i in map(int, order):
            if i in (0, len(axis) - 1) or i in claimed:
                continue
            if abs(vals[i] - cut) <= 0.5 * cell:
                vals[i] = cut
                claimed.add(i)
                placed = True
            break
        if not placed:
            vals.append(cut)
    return np.array(sorted(vals))


def _even(n: int) -> int:
    return n if n % 2 == 0 else n + 1


def build_garment(spec: GarmentSpec, lift: float = DEFAULT_LIFT) -> GarmentMesh:
    """Mesh the garment silhouette and label its keypoints.

    Raises BadSpecError (with the offending field) for invalid specs.
    """
    spec.validate()
    res = spec.resolution
    mesher = _PanelMesher()
    panels: list[tuple[float, float, float, float]] = []
    keypoints: dict[str, int] = {}

    w, h = spec.body_width, spec.body_height
    nx = _even(int(np.ceil(w / res)))
    ny = int(np.ceil(h / res))
    xs = _centered_axis(w, nx)
    ys = _centered_axis(h, ny)

    if spec.category == PANTS:
        # body panel is the waist band at the top; legs hang below
        total_h = spec.body_height + spec.leg_length
        top = total_h / 2.0
        waist_bottom = top - spec.body_height
        # exact leg boundaries as symmetric cut columns
        cut = w / 2.0 - spec.leg_width
        xs = _with_cuts(xs, [-cut, cut], w / nx)
        n_waist = max(1, int(np.ceil(spec.body_height / res)))
        ys_waist = _attached_axis(waist_bottom, spec.body_height, n_waist, +1)
        mesher.add_grid(xs, ys_waist)
        panels.append((xs[0], xs[-1], waist_bottom, top))

        n_leg = max(1, int(np.ceil(spec.leg_length / res)))
        ys_leg = _attached_axis(waist_bottom, spec.leg_length, n_leg, -1)[::-1]
        xs_left = xs[xs <= -cut + 1e-12]
        xs_right = xs[xs >= cut - 1e-12]
        mesher.add_grid(xs_left, ys_leg)
        mesher.add_grid(xs_right, ys_leg)
        panels.append((xs_left[0], xs_left[-1], ys_leg[0], waist_bottom))
        panels.append((xs_right[0], xs_right[-1], ys_leg[0], waist_bottom))

        keypoints["waist_left"] = mesher.find(xs[0], top)
        keypoints["waist_right"] = mesher.find(xs[-1], top)
        m = len(xs_left)
        keypoints["left_cuff"] = mesher.find(xs_left[m // 2], ys_leg[0])
        keypoints["right_cuff"] = mesher.find(xs_right[m - 1 - m // 2], ys_leg[0])
    else:
        if spec.category in (SHORT_SLEEVE, LONG_SLEEVE):
            # exact sleeve lower edge as a cut row
            sleeve_bottom = h / 2.0 - spec.sleeve_width
            ys = _with_cuts(ys, [sleeve_bottom], h / ny)
        mesher.add_grid(xs, ys)
        panels.append((xs[0], xs[-1], ys[0], ys[-1]))
        keypoints["left_shoulder"] = mesher.find(xs[0], ys[-1])
        keypoints["right_shoulder"] = mesher.find(xs[-1], ys[-1])
        keypoints["collar_mid"] = mesher.find(0.0, ys[-1])
        keypoints["hem_left"] = mesher.find(xs[0], ys[0])
        keypoints["hem_right"] = mesher.find(xs[-1], ys[0])
        keypoints["hem_mid"] = mesher.find(0.0, ys[0])

        if spec.category in (SHORT_SLEEVE, LONG_SLEEVE):
            ys_sleeve = ys[ys >= sleeve_bottom - 1e-12]
            ns = max(1, int(np.ceil(spec.sleeve_length / res)))
            xs_sl = _attached_axis(xs[0], spec.sleeve_length, ns, -1)[::-1]
            xs_sr = _attached_axis(xs[-1], spec.sleeve_length, ns, +1)
            mesher.add_grid(xs_sl, ys_sleeve)
            mesher.add_grid(xs_sr, ys_sleeve)
            panels.append((xs_sl[0], xs[0], ys_sleeve[0], ys_sleeve[-1]))
            panels.append((xs[-1], xs_sr[-1], ys_sleeve[0], ys_sleeve[-1]))
            tip_row = ys_sleeve[len(ys_sleeve) // 2]
            keypoints["left_sleeve_tip"] = mesher.find(xs_sl[0], tip_row)
            keypoints["right_sleeve_tip"] = mesher.find(xs_sr[-1], tip_row)

    coords = np.array(mesher.coords, dtype=np.float64)
    vertices = np.column_stack([coords, np.full(len(coords), lift)])
    triangles = np.array(mesher.triangles, dtype=np.int64)

    pairs = set()
    for tri in triangles:
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            pairs.add((min(a, b), max(a, b)))
    edges = np.array(sorted(pairs), dtype=np.int64)
    rest = np.linalg.norm(vertices[edges[:, 0]] - vertices[edges[:, 1]], axis=1)

    mesh = GarmentMesh(
        vertices=vertices,
        triangles=triangles,
        edges=edges,
        edge_rest_lengths=rest,
        category=spec.category,
        keypoints=keypoints,
        panels=panels,
        spec=spec,
    )
    _register_fold_landings(mesh)
    return mesh


def _nearest_vertex_xy(mesh: GarmentMesh, point_xy: np.ndarray) -> int:
    d2 = np.sum((mesh.vertices[:, :2] - point_xy) ** 2, axis=1)
    return int(np.argmin(d2))


def _stage_lines(mesh: GarmentMesh) -> dict[str, tuple[np.ndarray, np.ndarray, int, str]]:
    """Fold line (point, dir), moving side, and grasp keypoint per stage id."""
    v = mesh.vertices
    y_mid = (v[:, 1].min() + v[:, 1].max()) / 2.0
    lines = {}
    if mesh.category in (SHORT_SLEEVE, LONG_SLEEVE):
        xl = mesh.keypoint_position("left_shoulder")[0]
        xr = mesh.keypoint_position("right_shoulder")[0]
        # normal of (0,1) is (-1,0): left of the line is positive side
        lines[LEFT_SLEEVE] = (np.array([xl, 0.0]), np.array([0.0, 1.0]), +1, "left_sleeve_tip")
        lines[RIGHT_SLEEVE] = (np.array([xr, 0.0]), np.array([0.0, 1.0]), -1, "right_sleeve_tip")
    if mesh.category == PANTS:
        lines[LEFT_LEG_ONTO_RIGHT] = (np.array([0.0, 0.0]), np.array([0.0, 1.0]), +1, "left_cuff")
        grasp = "right_cuff"
    else:
        grasp = "hem_mid"
    # normal of (1,0) is (0,1): below the line is the negative side
    lines[BOTTOM_UP] = (np.array([0.0, y_mid]), np.array([1.0, 0.0]), -1, grasp)
    return lines


def _register_fold_landings(mesh: GarmentMesh) -> None:
    """Add a landing keypoint per stage: the mesh vertex nearest to the
    reflection of the stage's grasp keypoint across its fold line."""
    for stage_id, (point, direction, _side, grasp) in _stage_lines(mesh).items():
        grasp_xy = mesh.keypoint_position(grasp)[:2]
        landing_xy = reflect_across_line(grasp_xy[None, :], point, direction)[0]
        mesh.keypoints[stage_id + "_landing"] = _nearest_vertex_xy(mesh, landing_xy)


def default_stage_sequence(mesh: GarmentMesh) -> list[FoldStage]:
    """Category's canonical fold order, with fold lines taken from the built
    garment's keypoints."""
    lines = _stage_lines(mesh)
    stages = []
    for stage_id in CATEGORY_STAGES[mesh.category]:
        point, direction, side, grasp = lines[stage_id]
        stages.append(
            FoldStage(
                stage_id=stage_id,
                line_point=point,
                line_dir=direction,
                moving_side=side,
                grasp_keypoint=grasp,
                target_keypoint=stage_id + "_landing",
            )
        )
    return stages


def stage_sequence_for(mesh: GarmentMesh, stage_ids: list[str]) -> list[FoldStage]:
    """Stages in a caller-chosen order (e.g. parsed from an instruction)."""
    lines = _stage_lines(mesh)
    stages = []
    for stage_id in stage_ids:
        if stage_id not in lines:
            raise BadSpecError("stage", f"{stage_id} undefined for {mesh.category}")
        point, direction, side, grasp = lines[stage_id]
        stages.append(
            FoldStage(
                stage_id=stage_id,
                line_point=point,
                line_dir=direction,
                moving_side=side,
                grasp_keypoint=grasp,
                target_keypoint=stage_id + "_landing",
            )
        )
    return stages


def export_obj(mesh: GarmentMesh, path) -> None:
    """ASCII OBJ dump (v/f records) of the rest mesh."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# foldkit garment, category={mesh.category}\n")
        for x, y, z in mesh.vertices:
            fh.write(f"v {x:.9f} {y:.9f} {z:.9f}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"f {a + 1} {b + 1} {c + 1}\n")
