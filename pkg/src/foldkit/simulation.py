"""Position-based cloth dynamics with kinematic grasping.

The stepper is deterministic: single-threaded numpy with a fixed constraint
order, so identical (state, params, command sequence) reproduce trajectories
bit for bit. Integration is velocity-Verlet (half kick, drift, half kick)
which makes free fall exact for constant gravity; constraints are projected
with compliance (XPBD) over graph-colored batches so Gauss-Seidel sweeps
vectorize without write conflicts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BadKError, NotGraspedError, NumericalBlowupError
from .garments import GarmentMesh
from .geometry import farthest_point_sample

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pure-numpy fallback below
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


AREA_DENSITY = 0.2  # kg/m^2, typical mid-weight fabric
BLOWUP_LIMIT = 1e3  # meters


@dataclass
class SimParams:
    dt: float = 1.0 / 60.0
    substeps: int = 10
    iterations: int = 10
    gravity: tuple[float, float, float] = (0.0, 0.0, -9.81)
    stretch_compliance: float = 0.0
    # bend compliance trades crease mobility against wrinkle resistance; at
    # this cloth's lumped masses (~1e-4 kg) values below ~1e-2 make bending
    # effectively rigid and the sheet fights being folded
    bend_compliance: float = 0.1
    damping: float = 0.5  # 1/s
    friction: float = 0.6  # ground friction factor, [0, 1]
    collision_thickness: float = 0.002  # m

    def validate(self) -> None:
        assert self.dt > 0, "dt must be positive"
        assert self.substeps >= 1 and self.iterations >= 1
        assert 0.0 <= self.friction <= 1.0


@dataclass
class SimState:
    positions: np.ndarray  # (n, 3)
    prev_positions: np.ndarray  # (n, 3)
    velocities: np.ndarray  # (n, 3)
    pinned: dict[int, np.ndarray] = field(default_factory=dict)
    time: float = 0.0
    last_grasped: int | None = None
    _obs_cache: dict[int, np.ndarray] = field(default_factory=dict)

    def copy(self) -> "SimState":
        return SimState(
            positions=self.positions.copy(),
            prev_positions=self.prev_positions.copy(),
            velocities=self.velocities.copy(),
            pinned={k: v.copy() for k, v in self.pinned.items()},
            time=self.time,
            last_grasped=self.last_grasped,
            _obs_cache={k: v.copy() for k, v in self._obs_cache.items()},
        )


def make_state(mesh: GarmentMesh) -> SimState:
    pos = mesh.vertices.astype(np.float64).copy()
    return SimState(
        positions=pos,
        prev_positions=pos.copy(),
        velocities=np.zeros_like(pos),
    )


# ------------------------------------------------------------------ solver

@njit(cache=True)
def _project_seq(pos, w, i_idx, j_idx, rest, alpha, lam, iterations):
    """Sequential Gauss-Seidel sweeps over all distance constraints.

    Fixed constraint order keeps results deterministic. `alpha` is the
    per-constraint compliance already divided by h^2; `lam` accumulates the
    constraint multipliers for the current substep.
    """
    n = len(i_idx)
    for _ in range(iterations):
        for k in range(n):
            i = i_idx[k]
            j = j_idx[k]
            dx = pos[i, 0] - pos[j, 0]
            dy = pos[i, 1] - pos[j, 1]
            dz = pos[i, 2] - pos[j, 2]
            dist = (dx * dx + dy * dy + dz * dz) ** 0.5
            if dist < 1e-12:
                continue
            denom = w[i] + w[j] + alpha[k]
            if denom == 0.0:
                continue
            dlam = ((rest[k] - dist) - alpha[k] * lam[k]) / denom
            lam[k] += dlam
            s = dlam / dist
            pos[i, 0] += w[i] * s * dx
            pos[i, 1] += w[i] * s * dy
            pos[i, 2] += w[i] * s * dz
            pos[j, 0] -= w[j] * s * dx
            pos[j, 1] -= w[j] * s * dy
            pos[j, 2] -= w[j] * s * dz


class _Solver:
    """Precomputed constraints (stretch + bend) and lumped masses for a mesh."""

    def __init__(self, mesh: GarmentMesh):
        n = mesh.n_vertices
        v = mesh.vertices
        tri = mesh.triangles

        # lumped vertex mass from triangle areas
        a = v[tri[:, 1]] - v[tri[:, 0]]
        b = v[tri[:, 2]] - v[tri[:, 0]]
        areas = 0.5 * np.linalg.norm(np.cross(a, b), axis=1)
        mass = np.zeros(n)
        np.add.at(mass, tri.ravel(), np.repeat(areas / 3.0, 3) * AREA_DENSITY)
        self.inv_mass = 1.0 / mass

        # stretch constraints on edges; bend constraints between the opposite
        # vertices of each pair of triangles sharing an edge
        constraints = [
            (int(i), int(j), float(r), False)
            for (i, j), r in zip(mesh.edges, mesh.edge_rest_lengths)
        ]
        edge_opposites: dict[tuple[int, int], list[int]] = {}
        for t0, t1, t2 in tri:
            for (ea, eb), opp in (((t0, t1), t2), ((t1, t2), t0), ((t2, t0), t1)):
                key = (min(ea, eb), max(ea, eb))
                edge_opposites.setdefault(key, []).append(int(opp))
        for key in sorted(edge_opposites):
            opps = edge_opposites[key]
            if len(opps) == 2:
                i, j = opps
                rest = float(np.linalg.norm(v[i] - v[j]))
                constraints.append((i, j, rest, True))

        self.i_idx = np.array([c[0] for c in constraints], dtype=np.int64)
        self.j_idx = np.array([c[1] for c in constraints], dtype=np.int64)
        self.rest = np.array([c[2] for c in constraints])
        self.is_bend = np.array([c[3] for c in constraints])
        self.lam = np.zeros(len(constraints))

        if not _HAVE_NUMBA:
            # greedy graph coloring in fixed order: batches share no vertex,
            # so vectorized Gauss-Seidel updates are conflict-free
            color_of = []
            vertex_colors: dict[int, set[int]] = {}
            for i, j, _r, _b in constraints:
                used = vertex_colors.get(i, set()) | vertex_colors.get(j, set())
                c = 0
                while c in used:
                    c += 1
                color_of.append(c)
                vertex_colors.setdefault(i, set()).add(c)
                vertex_colors.setdefault(j, set()).add(c)
            self.batches = []
            for c in range(max(color_of) + 1):
                sel = np.array([k for k, cc in enumerate(color_of) if cc == c])
                self.batches.append(
                    (self.i_idx[sel], self.j_idx[sel], self.rest[sel], self.is_bend[sel])
                )


_solver_cache: dict[int, tuple[GarmentMesh, _Solver]] = {}


def _solver_for(mesh: GarmentMesh) -> _Solver:
    hit = _solver_cache.get(id(mesh))
    if hit is not None and hit[0] is mesh:
        return hit[1]
    solver = _Solver(mesh)
    _solver_cache[id(mesh)] = (mesh, solver)
    return solver


# ------------------------------------------------------------------- step

def _project_colored(pos, w, solver, alpha_s, alpha_b, iterations):
    """Vectorized Gauss-Seidel over conflict-free colored batches (fallback
    path when numba is unavailable; ignores compliance multipliers beyond the
    per-iteration solve, which matches stretch_compliance=0 exactly)."""
    for _ in range(iterations):
        for bi, bj, rest, is_bend in solver.batches:
            wi = w[bi]
            wj = w[bj]
            d = pos[bi] - pos[bj]
            dist = np.sqrt(np.einsum("ij,ij->i", d, d))
            np.maximum(dist, 1e-12, out=dist)
            alpha = np.where(is_bend, alpha_b, alpha_s)
            dlam = (rest - dist) / (wi + wj + alpha)
            scale = dlam / dist
            corr = scale[:, None] * d
            pos[bi] += wi[:, None] * corr
            pos[bj] -= wj[:, None] * corr


def step(state: SimState, mesh: GarmentMesh, params: SimParams) -> SimState:
    """Advance one frame of params.dt seconds, in place.

    Pinned vertices track their targets exactly (linearly interpolated across
    substeps within the frame). Raises NumericalBlowupError if positions
    leave the sane range.
    """
    params.validate()
    solver = _solver_for(mesh)
    h = params.dt / params.substeps
    g = np.asarray(params.gravity)
    damp = max(0.0, 1.0 - params.damping * h)
    thickness = params.collision_thickness

    pos = state.positions
    vel = state.velocities

    w = solver.inv_mass.copy()
    pin_idx = np.array(sorted(state.pinned), dtype=np.int64)
    if len(pin_idx):
        w[pin_idx] = 0.0
        pin_start = pos[pin_idx].copy()
        pin_end = np.array([state.pinned[i] for i in sorted(state.pinned)])

    alpha_s = params.stretch_compliance / (h * h)
    alpha_b = params.bend_compliance / (h * h)
    alpha = np.where(solver.is_bend, alpha_b, alpha_s)

    for s in range(params.substeps):
        vel += (0.5 * h) * g
        vel *= damp
        prev = pos.copy()
        pos += h * vel

        if len(pin_idx):
            # exact target on the last substep; lerp would be one ulp off
            t = (s + 1) / params.substeps
            pin_now = pin_end if s == params.substeps - 1 else pin_start + t * (pin_end - pin_start)
            pos[pin_idx] = pin_now

        solver.lam[:] = 0.0
        if _HAVE_NUMBA:
            _project_seq(pos, w, solver.i_idx, solver.j_idx, solver.rest,
                         alpha, solver.lam, params.iterations)
        else:
            _project_colored(pos, w, solver, alpha_s, alpha_b, params.iterations)

        if len(pin_idx):
            pos[pin_idx] = pin_now

        contact = pos[:, 2] < thickness
        if len(pin_idx):
            contact[pin_idx] = False
        pos[contact, 2] = thickness

        vel[:] = (pos - prev) / h
        vel += (0.5 * h) * g
        if np.any(contact):
            vel[contact, 2] = np.maximum(vel[contact, 2], 0.0)
            vel[contact, :2] *= 1.0 - params.friction

    state.prev_positions = prev
    state.time += params.dt

    if not np.all(np.isfinite(pos)) or np.abs(pos).max() > BLOWUP_LIMIT:
        raise NumericalBlowupError(f"positions diverged at t={state.time:.3f}s")
    return state


# --------------------------------------------------------------- grasping

def grasp(state: SimState, vertex: int) -> None:
    """Pin a vertex kinematically at its current position."""
    state.pinned[vertex] = state.positions[vertex].copy()
    state.last_grasped = vertex


def move_grasp(state: SimState, target, vertex: int | None = None) -> None:
    """Retarget a pinned vertex; the next step() moves it there exactly."""
    if vertex is None:
        vertex = state.last_grasped
    if vertex is None or vertex not in state.pinned:
        raise NotGraspedError(f"vertex {vertex} is not grasped")
    state.pinned[vertex] = np.asarray(target, dtype=np.float64).copy()


def release(state: SimState, vertex: int | None = None) -> None:
    if vertex is None:
        vertex = state.last_grasped
    if vertex is None or vertex not in state.pinned:
        raise NotGraspedError(f"vertex {vertex} is not grasped")
    del state.pinned[vertex]
    if state.last_grasped == vertex:
        state.last_grasped = next(iter(state.pinned), None)


# ------------------------------------------------------------ observation

def observe(state: SimState, mesh: GarmentMesh, n_points: int) -> np.ndarray:
    """Downsampled snapshot of the cloth as an (n_points, 3) array.

    The vertex subset is chosen by farthest-point sampling on first call and
    cached, so successive observations correspond index-wise.
    """
    n = mesh.n_vertices
    if not 1 <= n_points <= n:
        raise BadKError(f"observe: n_points={n_points} not in [1, {n}]")
    indices = state._obs_cache.get(n_points)
    if indices is None:
        if n_points == n:
            indices = np.arange(n, dtype=np.int64)
        else:
            indices = farthest_point_sample(state.positions, n_points)
        state._obs_cache[n_points] = indices
    return state.positions[indices].copy()


def observation_indices(state: SimState, mesh: GarmentMesh, n_points: int) -> np.ndarray:
    observe(state, mesh, n_points)
    return state._obs_cache[n_points]


# ------------------------------------------------------------- utilities

def settle(state: SimState, mesh: GarmentMesh, params: SimParams,
           max_seconds: float = 3.0, velocity_eps: float = 1e-3) -> SimState:
    """Step without actuation until the cloth comes to rest."""
    n_frames = int(np.ceil(max_seconds / params.dt))
    for _ in range(n_frames):
        step(state, mesh, params)
        if np.abs(state.velocities).max() < velocity_eps:
            break
    return state


def max_edge_strain(state: SimState, mesh: GarmentMesh) -> float:
    d = state.positions[mesh.edges[:, 0]] - state.positions[mesh.edges[:, 1]]
    length = np.linalg.norm(d, axis=1)
    return float(np.abs((length - mesh.edge_rest_lengths) / mesh.edge_rest_lengths).max())


def total_energy(state: SimState, mesh: GarmentMesh, params: SimParams) -> float:
    """Kinetic plus gravitational potential energy, joules."""
    solver = _solver_for(mesh)
    mass = 1.0 / solver.inv_mass
    ke = 0.5 * float(np.sum(mass * np.einsum("ij,ij->i", state.velocities, state.velocities)))
    g = np.asarray(params.gravity)
    pe = -float(np.sum(mass * (state.positions @ g)))
    return ke + pe


def dump_ply(positions: np.ndarray, path) -> None:
    """Binary little-endian PLY with float32 x/y/z."""
    pts = np.asarray(positions, dtype="<f4")
    header = (
        "ply\n"
        "format binary_little_endian 1.0\n"
        f"element vertex {len(pts)}\n"
        "property float x\n"
        "property float y\n"
        "property float z\n"
        "end_header\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(pts.tobytes())


def read_ply(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    end = data.index(b"end_header\n") + len(b"end_header\n")
    header = data[:end].decode("ascii")
    n = int([ln for ln in header.splitlines() if ln.startswith("element vertex")][0].split()[-1])
    pts = np.frombuffer(data[end:end + 12 * n], dtype="<f4").reshape(n, 3)
    return pts.astype(np.float64)
