"""Radial-symmetry pre-alignment and tip-exact dense interpolation."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import PreconditionError
from .forward_model import SymmetryDescriptor
from .geometry import Pose, rot_z, slerp, slerp_many
from .planner import SparseEntry, SparsePlan, WaypointPath, entry_deviation
from .shape_library import ShapeLibrary, threshold_cluster


@dataclass
class DensePlan:
    """``(n-1) h + 1`` timed configurations with their base and desired tip poses."""

    path: WaypointPath
    h: int
    configs: np.ndarray
    base_rotations: np.ndarray
    base_translations: np.ndarray
    desired_rotations: np.ndarray
    desired_positions: np.ndarray
    interval: np.ndarray
    alpha: np.ndarray
    method: str = "sampling"

    def __len__(self) -> int:
        return self.configs.shape[0]

    def base_pose(self, k: int) -> Pose:
        return Pose(self.base_rotations[k], self.base_translations[k])

    def desired_tip(self, k: int) -> Pose:
        return Pose(self.desired_rotations[k], self.desired_positions[k])

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "h": self.h,
            "steps": [
                {
                    "q": self.configs[k].tolist(),
                    "base_pose": self.base_pose(k).to_dict(),
                    "desired_tip": self.desired_tip(k).to_dict(),
                    "interval": int(self.interval[k]),
                    "alpha": float(self.alpha[k]),
                }
                for k in range(len(self))
            ],
        }


def step_grid(n: int, h: int) -> tuple[np.ndarray, np.ndarray]:
    """Interval index and ``alpha`` for each of the ``(n-1) h + 1`` dense steps."""
    if h < 1:
        raise PreconditionError("h must be at least 1")
    k = np.arange(1, h + 1)
    interval = np.concatenate([[0], np.repeat(np.arange(n - 1), h)])
    alpha = np.concatenate([[0.0], np.tile(k / h, n - 1)])
    return interval, alpha


# -- pre-alignment -------------------------------------------------------------


def alignment_angle(x_ref, R_base) -> float:
    """Roll that turns the base x-axis of ``R_base`` closest to ``x_ref``."""
    x_j, y_j = R_base[:, 0], R_base[:, 1]
    return math.atan2(-float(x_ref @ y_j), float(x_ref @ x_j))


def snap_angle(theta: float, k: int) -> float:
    step = 2 * math.pi / k
    return step * round(theta / step)


def _rolled_entry(entry: SparseEntry, theta: float, model) -> SparseEntry:
    # config turned by +theta, base by -theta: the world shape is untouched
    Rz = rot_z(theta)
    q = model.rotate_configuration(entry.config, theta)
    base = Pose(entry.base_pose.rotation @ Rz.T, entry.base_pose.translation)
    tip = Pose(Rz @ entry.tip_local.rotation @ Rz.T, Rz @ entry.tip_local.translation)
    return replace(entry, config=q, base_pose=base, tip_local=tip)


def tip_aligned_points(lib: ShapeLibrary) -> tuple[np.ndarray, np.ndarray]:
    """Roll every shape about its base axis so the tip lies in the x-z half plane (x >= 0)."""
    tip = lib.points[:, -1]
    psi = -np.arctan2(tip[:, 1], tip[:, 0])
    c, s = np.cos(psi), np.sin(psi)
    P = lib.points
    out = P.copy()
    out[..., 0] = c[:, None] * P[..., 0] - s[:, None] * P[..., 1]
    out[..., 1] = s[:, None] * P[..., 0] + c[:, None] * P[..., 1]
    return out, psi


def symmetry_clusters(lib: ShapeLibrary, gamma: float):
    """Cluster labels of the tip-aligned library plus the alignment angles (cached)."""
    key = ("symmetry", float(gamma))
    if key not in lib._cache:
        pts, psi = tip_aligned_points(lib)
        aligned = ShapeLibrary(lib.spec, lib.seed, lib.bounds, lib.configs, pts, lib.tip_rotations)
        clib = threshold_cluster(aligned, gamma)
        labels = np.empty(len(lib), dtype=int)
        for c, mem in enumerate(clib.members):
            labels[mem] = c
        lib._cache[key] = (labels, clib.members, psi)
    return lib._cache[key]


def _substituted_entry(entry: SparseEntry, x_ref, lib: ShapeLibrary, gamma: float, path, i) -> SparseEntry:
    labels, members, psi = symmetry_clusters(lib, gamma)
    ell = entry.library_index
    cand = members[labels[ell]]
    delta = psi[ell] - psi[cand]
    R_b = entry.base_pose.rotation
    # x-axis of R_b rot_z(-delta) is cos(delta) x_b - sin(delta) y_b
    score = np.cos(delta) * (x_ref @ R_b[:, 0]) - np.sin(delta) * (x_ref @ R_b[:, 1])
    best = int(np.argmax(score))
    c = int(cand[best])
    if c == ell:
        return entry
    R_new = R_b @ rot_z(-delta[best])
    w = path.waypoints[i - 1]
    pose = Pose(R_new, w - R_new @ lib.points[c, -1])
    m, dev = entry_deviation(pose.apply(lib.points[c]), path, i)
    tip_local = Pose(lib.tip_rotations[c], lib.points[c, -1])
    return SparseEntry(lib.configs[c].copy(), pose, m, dev, c, tip_local)


def prealign_radial(plan: SparsePlan, sym: SymmetryDescriptor, model=None, library: ShapeLibrary | None = None) -> SparsePlan:
    """Roll each sparse entry toward the first entry's base x-axis.

    Continuous and discrete symmetry re-parameterise the configuration and
    leave the world shape unchanged. Data-driven symmetry swaps in a library
    shape from the same tip-aligned cluster.
    """
    if not plan.entries:
        raise PreconditionError("plan is empty")
    if sym.kind == "none":
        return SparsePlan(plan.path, list(plan.entries), plan.mode, plan.evaluations)
    x_ref = plan.entries[0].base_pose.rotation[:, 0].copy()
    out = []
    for i, entry in enumerate(plan.entries, start=1):
        if sym.kind == "data_driven":
            if library is None:
                raise PreconditionError("data-driven symmetry needs the shape library")
            out.append(_substituted_entry(entry, x_ref, library, sym.gamma, plan.path, i))
            continue
        theta = alignment_angle(x_ref, entry.base_pose.rotation)
        if sym.kind == "discrete":
            theta = snap_angle(theta, sym.k)
        out.append(_rolled_entry(entry, theta, model) if theta != 0.0 else entry)
    return SparsePlan(plan.path, out, plan.mode, plan.evaluations)


# -- dense interpolation ---------------------------------------------------------


def interpolate(plan: SparsePlan, h: int, model) -> DensePlan:
    """Dense plan whose forward-model tip lands exactly on the interpolated tip pose.

    Tip position is linear between waypoints, tip orientation is slerped,
    configurations are linear, and each base pose is the desired tip pose
    composed with the inverse local tip pose. Uses exactly ``(n-1) h`` forward
    model evaluations.
    """
    path = plan.path
    n = len(plan)
    if n != len(path):
        raise PreconditionError("plan and path lengths differ")
    interval, alpha = step_grid(n, h)
    N = interval.size
    Q = np.array([e.config for e in plan.entries])
    tips = [e.tip_world for e in plan.entries]
    W = path.waypoints

    configs = np.empty((N, Q.shape[1]))
    des_R = np.empty((N, 3, 3))
    des_p = np.empty((N, 3))
    configs[0] = Q[0]
    des_R[0] = tips[0].rotation
    des_p[0] = W[0]
    a = np.arange(1, h + 1) / h
    for j in range(n - 1):
        sl = slice(1 + j * h, 1 + (j + 1) * h)
        configs[sl] = (1 - a)[:, None] * Q[j] + a[:, None] * Q[j + 1]
        des_p[sl] = (1 - a)[:, None] * W[j] + a[:, None] * W[j + 1]
        des_R[sl] = slerp_many(tips[j].rotation, tips[j + 1].rotation, a)

    tip_R, tip_t = model.tip_poses(configs[1:])
    base_R = np.empty((N, 3, 3))
    base_t = np.empty((N, 3))
    base_R[0] = plan.entries[0].base_pose.rotation
    base_t[0] = plan.entries[0].base_pose.translation
    base_R[1:] = des_R[1:] @ np.transpose(tip_R, (0, 2, 1))
    base_t[1:] = des_p[1:] - np.einsum("nij,nj->ni", base_R[1:], tip_t)
    return DensePlan(path, h, configs, base_R, base_t, des_R, des_p, interval, alpha)


def inter_step_tip_error(dense: DensePlan, model, beta_samples: int = 9) -> np.ndarray:
    """Max tip deviation from the straight FTL segment within each inter-step interval.

    Between consecutive dense steps the configuration and base translation
    move linearly and the base rotation is slerped.
    """
    if beta_samples < 3:
        raise PreconditionError("need at least three beta samples")
    beta = np.linspace(0.0, 1.0, beta_samples)
    N = len(dense)
    Qb = (1 - beta)[None, :, None] * dense.configs[:-1, None] + beta[None, :, None] * dense.configs[1:, None]
    tb = (1 - beta)[None, :, None] * dense.base_translations[:-1, None] + beta[None, :, None] * dense.base_translations[1:, None]
    pf = (1 - beta)[None, :, None] * dense.desired_positions[:-1, None] + beta[None, :, None] * dense.desired_positions[1:, None]
    Rb = np.stack([slerp_many(dense.base_rotations[k], dense.base_rotations[k + 1], beta) for k in range(N - 1)])
    _, tip_t = model.tip_poses(Qb.reshape(-1, Qb.shape[-1]))
    tip_t = tip_t.reshape(N - 1, beta_samples, 3)
    world = np.einsum("kbij,kbj->kbi", Rb, tip_t) + tb
    return np.linalg.norm(world - pf, axis=2).max(axis=1)


def tip_errors(dense: DensePlan, model) -> np.ndarray:
    """Distance between forward-model tip and desired tip at every dense step."""
    _, tip_t = model.tip_poses(dense.configs)
    world = np.einsum("nij,nj->ni", dense.base_rotations, tip_t) + dense.base_translations
    return np.linalg.norm(world - dense.desired_positions, axis=1)


__all__ = [
    "DensePlan",
    "alignment_angle",
    "inter_step_tip_error",
    "interpolate",
    "prealign_radial",
    "slerp",
    "snap_angle",
    "step_grid",
    "symmetry_clusters",
    "tip_errors",
]
