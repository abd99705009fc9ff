"""Contact synthesis: pick where to grab and which way to move.

Given two corresponded point-cloud frames, a proposal is drawn from the
highest-flow region; an ensemble of seeded proposals is clustered with
epsilon-grouping and the modal group's most central member wins. Determinism:
seeds are enumerated in order and grouping consumes proposals in seed order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoMotionError, TooShortError
from .geometry import compute_flow
from .planning import Trajectory

MIN_FLOW = 1e-6  # m: below this the frames are considered identical


@dataclass
class ContactAction:
    """Contact position, unit motion direction, and intended displacement."""

    p: np.ndarray  # (3,)
    s: np.ndarray  # (3,), |s| = 1
    magnitude: float  # m

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=np.float64)
        self.s = np.asarray(self.s, dtype=np.float64)


@dataclass
class EnsembleConfig:
    seeds: int = 160
    epsilon: float = 0.03  # m, grouping radius
    beta: float = 0.8  # candidate fraction of the max flow magnitude

    def validate(self) -> None:
        assert self.seeds >= 1
        assert self.epsilon > 0
        assert 0.0 < self.beta <= 1.0


def propose(frame_a, frame_b, seed: int, beta: float = 0.8) -> ContactAction:
    """One stochastic proposal: a uniformly drawn point among those moving at
    least beta times the peak flow; direction is its normalized flow."""
    flow = compute_flow(frame_a, frame_b)
    mags = flow.magnitudes
    peak = float(mags.max())
    if peak < MIN_FLOW:
        raise NoMotionError(f"peak flow {peak:.2e} m is below {MIN_FLOW:.0e} m")
    candidates = np.flatnonzero(mags >= beta * peak)
    rng = np.random.default_rng(seed)
    pick = int(candidates[rng.integers(len(candidates))])
    a = np.asarray(frame_a, dtype=np.float64)
    return ContactAction(
        p=a[pick].copy(),
        s=flow.displacements[pick] / mags[pick],
        magnitude=float(mags[pick]),
    )


def synthesize(frame_a, frame_b, config: EnsembleConfig | None = None) -> ContactAction:
    """Ensemble of seeded proposals, epsilon-grouped; returns the member of
    the modal group closest to the group's mean position.

    Grouping is sequential: a proposal joins the first group whose running
    mean position lies within epsilon, else founds a new group. Ties between
    equally large groups break toward the earliest-founded one.
    """
    cfg = config or EnsembleConfig()
    cfg.validate()
    proposals = [propose(frame_a, frame_b, seed, cfg.beta)
                 for seed in range(cfg.seeds)]

    groups: list[dict] = []  # {"mean": (3,), "members": [indices]}
    for idx, prop in enumerate(proposals):
        for grp in groups:
            if np.linalg.norm(prop.p - grp["mean"]) < cfg.epsilon:
                grp["members"].append(idx)
                pts = np.array([proposals[m].p for m in grp["members"]])
                grp["mean"] = pts.mean(axis=0)
                break
        else:
            groups.append({"mean": prop.p.copy(), "members": [idx]})

    modal = max(groups, key=lambda g: len(g["members"]))  # first-founded wins ties
    members = modal["members"]
    dists = [np.linalg.norm(proposals[m].p - modal["mean"]) for m in members]
    winner = members[int(np.argmin(dists))]  # earliest member wins ties
    return proposals[winner]


def slice_actions(trajectory: Trajectory, cadence: int,
                  config: EnsembleConfig | None = None) -> list[ContactAction]:
    """One action per (frame_t, frame_{t+K}) pair, t = 0, K, 2K, ...; the
    final partial segment is included when at least one frame remains."""
    if cadence < 1:
        raise ValueError("cadence must be >= 1")
    m = trajectory.n_frames
    if m < cadence + 1:
        raise TooShortError(f"{m} frames cannot be sliced at cadence {cadence}")
    actions = []
    t = 0
    while t < m - 1:
        end = min(t + cadence, m - 1)
        actions.append(synthesize(trajectory.frames[t], trajectory.frames[end], config))
        t += cadence
    return actions
