"""Fold trajectory generation, one stage at a time.

Two backends produce M-frame point-cloud trajectories for a fold stage:

* predict_hinge_trajectory: analytic. The stage's moving region rotates
  rigidly about the fold line from its current hinge angle to the fully
  folded pose (reflection across the line plus a layer lift), with cosine
  easing. Supports replanning from intermediate states by recovering the
  current angle from the observed geometry.
* rollout_oracle_trajectory: runs the grasp arc in the cloth simulator and
  records observed frames; used to generate ground-truth dataset records.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import simulation as sim
from .errors import DegenerateSegmentError, NothingToFoldError
from .garments import FoldStage, GarmentMesh
from .geometry import signed_line_distance

LINE_MARGIN = 0.005  # m: moving-side material must sit beyond this
MIN_SEGMENT = 0.001  # m: grasp->target shorter than this is degenerate
CONVERGED_ANGLE = 0.08  # rad: remaining hinge angle treated as complete
DEFAULT_FRAME_PERIOD = 1.0 / 15.0  # s
MAX_GRASP_SPEED = 0.25  # m/s, keeps executed motion quasi-static


@dataclass
class GraspPlan:
    """Sampled end-effector curve from grasp point to target point."""

    grasp: np.ndarray  # (3,)
    samples: np.ndarray  # (M, 3)
    target: np.ndarray  # (3,)
    arc_height_ratio: float


@dataclass
class Trajectory:
    """M corresponded N-point frames describing one fold stage."""

    frames: np.ndarray  # (M, N, 3)
    stage_id: str
    frame_period: float = DEFAULT_FRAME_PERIOD
    converged: bool = False
    moving: np.ndarray | None = None  # bool mask of points the plan moves

    @property
    def n_frames(self) -> int:
        return len(self.frames)


def _ease(u):
    return 0.5 * (1.0 - np.cos(np.pi * np.asarray(u)))


def plan_arc(grasp, target, n_samples: int, arc_height_ratio: float = 0.5) -> GraspPlan:
    """Half-ellipse curve in the vertical plane through grasp -> target.

    The horizontal coordinate follows the segment with cosine easing; height
    adds arc_height_ratio * |target - grasp| * sin(pi u) on top of the linear
    base, so endpoints are exact.
    """
    g = np.asarray(grasp, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if n_samples < 2:
        raise ValueError("plan_arc needs at least 2 samples")
    span = float(np.linalg.norm(t - g))
    if span < MIN_SEGMENT:
        raise DegenerateSegmentError(f"grasp and target {span * 1e3:.2f} mm apart")
    u = np.linspace(0.0, 1.0, n_samples)
    samples = g[None, :] + _ease(u)[:, None] * (t - g)[None, :]
    samples[:, 2] += arc_height_ratio * span * np.sin(np.pi * u)
    samples[0] = g
    samples[-1] = t
    return GraspPlan(grasp=g, samples=samples, target=t, arc_height_ratio=arc_height_ratio)


def _line_frame(observation: np.ndarray, stage: FoldStage):
    """Decompose points into (rho, along, z): rho is the in-plane distance
    from the fold line, positive on the stage's moving side."""
    d = stage.line_dir
    normal = np.array([-d[1], d[0]]) * stage.moving_side
    rel = observation[:, :2] - stage.line_point
    rho = rel @ normal
    along = rel @ d
    return rho, along, normal


def predict_hinge_trajectory(
    observation: np.ndarray,
    stage: FoldStage,
    n_frames: int = 30,
    layer_lift: float = 0.002,
    frame_period: float = DEFAULT_FRAME_PERIOD,
) -> Trajectory:
    """Analytic hinge fold of the observed moving region.

    Raises NothingToFoldError when the moving side is empty and the scene
    shows no layered material; returns a converged trajectory (identical
    frames) when the fold already looks complete.
    """
    obs = np.asarray(observation, dtype=np.float64)
    if obs.ndim != 2 or obs.shape[1] != 3 or len(obs) == 0:
        raise NothingToFoldError("empty or malformed observation")
    if n_frames < 2:
        raise ValueError("trajectory needs at least 2 frames")

    rho, along, normal = _line_frame(obs, stage)
    z = obs[:, 2]
    z_elev = 1.5 * layer_lift + 0.002
    # moving material: beyond the margin on the moving side, or airborne with
    # a hinge angle short of fully folded (excludes settled layers from other
    # folds that merely sit above the lift on the far side of the line)
    angle = np.arctan2(z, rho)
    moving = (rho > LINE_MARGIN) | ((z > z_elev) & (angle < np.pi - CONVERGED_ANGLE))

    if not np.any(moving):
        if z.max() - z.min() > 0.75 * layer_lift:
            frames = np.repeat(obs[None, :, :], n_frames, axis=0)
            return Trajectory(frames, stage.stage_id, frame_period,
                              converged=True, moving=moving)
        raise NothingToFoldError(
            f"no material beyond {LINE_MARGIN * 1e3:.0f} mm on the moving side"
        )

    # common hinge angle of the moving set, radius-weighted
    theta0 = float(np.arctan2(z[moving].sum(), rho[moving].sum()))
    theta0 = min(max(theta0, 0.0), np.pi)
    remaining = np.pi - theta0
    if remaining < CONVERGED_ANGLE:
        frames = np.repeat(obs[None, :, :], n_frames, axis=0)
        return Trajectory(frames, stage.stage_id, frame_period,
                          converged=True, moving=moving)

    u = np.linspace(0.0, 1.0, n_frames)
    angles = remaining * _ease(u)
    lifts = layer_lift * _ease(u)

    frames = np.repeat(obs[None, :, :], n_frames, axis=0)
    rho_m = rho[moving]
    z_m = z[moving]
    along_m = along[moving]
    base = stage.line_point[None, :] + along_m[:, None] * stage.line_dir[None, :]
    for k in range(1, n_frames):
        c, s = np.cos(angles[k]), np.sin(angles[k])
        rho_k = rho_m * c - z_m * s
        z_k = rho_m * s + z_m * c + lifts[k]
        frames[k][moving, 0] = base[:, 0] + rho_k * normal[0]
        frames[k][moving, 1] = base[:, 1] + rho_k * normal[1]
        frames[k][moving, 2] = z_k
    return Trajectory(frames, stage.stage_id, frame_period, converged=False,
                      moving=moving)


def stage_goal_frame(observation: np.ndarray, stage: FoldStage,
                     layer_lift: float = 0.002) -> np.ndarray:
    """Fully folded pose of an observation: the final hinge frame."""
    traj = predict_hinge_trajectory(observation, stage, n_frames=2,
                                    layer_lift=layer_lift)
    return traj.frames[-1]


def rollout_oracle_trajectory(
    state: sim.SimState,
    mesh: GarmentMesh,
    stage: FoldStage,
    n_frames: int = 30,
    params: sim.SimParams | None = None,
    n_points: int | None = None,
    arc_height_ratio: float = 0.5,
    settle_frames: int = 20,
) -> Trajectory:
    """Execute the stage's grasp arc in the simulator and record M observed
    frames. The state is advanced in place (grasp, drag, release, settle);
    frame 0 is the pre-rollout observation."""
    if params is None:
        params = sim.SimParams()
    if n_points is None:
        n_points = mesh.n_vertices

    grasp_vertex = mesh.keypoints[stage.grasp_keypoint]
    grasp_pos = state.positions[grasp_vertex].copy()
    target_pos = state.positions[mesh.keypoints[stage.target_keypoint]].copy()
    span = float(np.linalg.norm(target_pos - grasp_pos))
    if span < MIN_SEGMENT:
        raise DegenerateSegmentError("stage grasp and target coincide")
    target_pos[2] += 2.0 * params.collision_thickness
    duration = span * np.pi * max(0.5, arc_height_ratio) / MAX_GRASP_SPEED
    steps = max(n_frames, int(np.ceil(duration / params.dt)))
    plan = plan_arc(grasp_pos, target_pos, steps + 1, arc_height_ratio)

    # steps >= n_frames, so the rounded sample indices are distinct
    obs_at = set(np.round(np.linspace(0, steps, n_frames)).astype(int)[1:])
    frames = [sim.observe(state, mesh, n_points)]
    sim.grasp(state, grasp_vertex)
    for k in range(1, steps + 1):
        sim.move_grasp(state, plan.samples[k], vertex=grasp_vertex)
        sim.step(state, mesh, params)
        if k in obs_at:
            frames.append(sim.observe(state, mesh, n_points))
    sim.release(state, grasp_vertex)
    for _ in range(settle_frames):
        sim.step(state, mesh, params)

    period = steps * params.dt / (len(frames) - 1)
    return Trajectory(np.stack(frames), stage.stage_id, frame_period=period)
