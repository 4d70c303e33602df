"""Per-waypoint shape search and sparse plan assembly.

Every candidate shape is placed in the world by a closed-form base pose:
translate its tip onto the current waypoint, rotate about the tip so the
active part points back along the path, then roll about the path axis to
match a third point. Candidates are scored by symmetric Chamfer distance to
the waypoints reached so far.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyLibrary, PreconditionError
from .forward_model import Shape
from .geometry import Pose, align_vectors_batch, hat, signed_angle_about_axis_batch
from .shape_library import ClusteredLibrary, ShapeLibrary, linear_search, two_pass_search

CHUNK = 2048


@dataclass(frozen=True)
class WaypointPath:
    waypoints: np.ndarray
    cumulative_arclen: np.ndarray = field(init=False)

    def __post_init__(self):
        w = np.array(self.waypoints, dtype=float)
        if w.ndim != 2 or w.shape[1] != 3 or w.shape[0] < 1:
            raise PreconditionError("waypoints must be an (n, 3) array")
        if not np.all(np.isfinite(w)):
            raise PreconditionError("waypoints must be finite")
        steps = np.linalg.norm(np.diff(w, axis=0), axis=1)
        if np.any(steps == 0):
            raise PreconditionError("consecutive waypoints must be distinct")
        w.setflags(write=False)
        cum = np.concatenate([[0.0], np.cumsum(steps)])
        cum.setflags(write=False)
        object.__setattr__(self, "waypoints", w)
        object.__setattr__(self, "cumulative_arclen", cum)

    def __len__(self) -> int:
        return self.waypoints.shape[0]

    @property
    def length(self) -> float:
        return float(self.cumulative_arclen[-1])

    def to_dict(self) -> dict:
        return {"waypoints": self.waypoints.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> WaypointPath:
        return cls(np.asarray(d["waypoints"], dtype=float))


@dataclass(frozen=True)
class AlignedCandidate:
    library_index: int
    base_pose: Pose
    m_star: int
    deviation: float
    roll_applied: bool = True


@dataclass
class SparseEntry:
    config: np.ndarray
    base_pose: Pose
    m_star: int
    deviation: float
    library_index: int
    tip_local: Pose

    @property
    def tip_world(self) -> Pose:
        return self.base_pose @ self.tip_local


@dataclass
class SparsePlan:
    path: WaypointPath
    entries: list[SparseEntry]
    mode: str = "linear"
    evaluations: int = 0

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def deviations(self) -> np.ndarray:
        return np.array([e.deviation for e in self.entries])

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "evaluations": self.evaluations,
            "entries": [
                {
                    "q": e.config.tolist(),
                    "base_pose": e.base_pose.to_dict(),
                    "m_star": e.m_star,
                    "deviation": e.deviation,
                    "library_index": e.library_index,
                    "tip_local": e.tip_local.to_dict(),
                }
                for e in self.entries
            ],
        }


# -- active subset -----------------------------------------------------------


def _tie_tol(total_length: float) -> float:
    return 1e-9 * max(total_length, 1.0)


def active_subset_batch(tail: np.ndarray, target: float) -> np.ndarray:
    """Rows of ``tail`` hold arc length from each point to the tip."""
    D = tail.shape[1] - 1
    if target <= 0:
        return np.full(tail.shape[0], D)
    err = np.abs(target - tail[:, :D])
    tol = _tie_tol(float(tail[:, 0].max()))
    near = err <= err.min(axis=1, keepdims=True) + tol
    return np.argmax(near, axis=1)


def active_subset(shape, target_arclen: float) -> int:
    """Index where the tip-side part of the backbone best matches ``target_arclen``.

    Near-ties (within 1e-9 of the shape length) go to the smaller index.
    """
    pts = shape.points if isinstance(shape, Shape) else np.asarray(shape, dtype=float)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    tail = np.zeros(pts.shape[0])
    tail[:-1] = np.cumsum(seg[::-1])[::-1]
    return int(active_subset_batch(tail[None], target_arclen)[0])


# -- alignment ---------------------------------------------------------------


def _third_waypoint(W: np.ndarray):
    """Active waypoint farthest from the line through the first and last."""
    axis = W[-1] - W[0]
    axis = axis / np.linalg.norm(axis)
    rel = W - W[0]
    perp = rel - np.outer(rel @ axis, axis)
    dist = np.linalg.norm(perp, axis=1)
    k = int(np.argmax(dist))
    return k, float(dist[k]), axis


def _point_at_fraction(P, tail, m_star, ratio):
    """Point on each active polyline at arc fraction ``ratio`` from ``p_m*``."""
    n, Dp1 = tail.shape
    rows = np.arange(n)
    total = tail[:, 0]
    from_base = total[:, None] - tail  # arc length from p_0, nondecreasing
    act_len = tail[rows, m_star]
    s = from_base[rows, m_star] + ratio * act_len
    j = np.clip((from_base < s[:, None]).sum(axis=1) - 1, 0, Dp1 - 2)
    j = np.maximum(j, m_star)
    j = np.minimum(j, Dp1 - 2)
    seg = from_base[rows, j + 1] - from_base[rows, j]
    frac = np.where(seg > 0, (s - from_base[rows, j]) / np.where(seg > 0, seg, 1.0), 0.0)
    frac = np.clip(frac, 0.0, 1.0)
    return P[rows, j] + frac[:, None] * (P[rows, j + 1] - P[rows, j])


def _align_batch(P, tail, m_star, W):
    """Base rotations for shapes ``P`` (n, D+1, 3) against active waypoints ``W``.

    Returns ``(R, roll_applied)``; the base translation is ``w_i - R p_D``.
    """
    w1, wi = W[0], W[-1]
    pD = P[:, -1]
    rows = np.arange(P.shape[0])
    v1 = (wi - w1) / np.linalg.norm(wi - w1)
    v2 = pD - P[rows, m_star]
    v2 = v2 / np.linalg.norm(v2, axis=1, keepdims=True)
    R2 = align_vectors_batch(v2, v1)

    cum = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(W, axis=0), axis=1))])
    eps = 1e-9 * cum[-1]
    k, line_dist, _ = _third_waypoint(W)
    if line_dist <= eps:
        return R2, np.zeros(P.shape[0], dtype=bool)
    ratio = cum[k] / cum[-1]
    pk = _point_at_fraction(P, tail, m_star, ratio)
    pk_aligned = np.einsum("nij,nj->ni", R2, pk - pD) + wi
    phi, valid = signed_angle_about_axis_batch(pk_aligned - w1, W[k] - w1, v1, eps)
    K = hat(v1)
    R3 = np.eye(3) + np.sin(phi)[:, None, None] * K + (1.0 - np.cos(phi))[:, None, None] * (K @ K)
    return R3 @ R2, valid


def _chamfer_local(P, pD, m_star, R, W, weights=None, normalizer="cardinality", tail=None):
    """Symmetric Chamfer between active shape points and waypoints, batched.

    Waypoints are mapped into each shape's frame instead of moving the shape.
    """
    n, Dp1, _ = P.shape
    wi = W[-1]
    local_w = np.einsum("nji,mj->nmi", R, W - wi) + pD[:, None, :]  # R^T (w - w_i) + p_D
    m0 = int(m_star.min())
    pts = P[:, m0:]
    diff = pts[:, :, None, :] - local_w[:, None, :, :]
    dist = np.sqrt(np.einsum("nabk,nabk->nab", diff, diff))  # (n, points, waypoints)
    active = np.arange(m0, Dp1)[None, :] >= m_star[:, None]
    s2p = np.where(active, dist.min(axis=2), 0.0)
    p2s = np.where(active[:, :, None], dist, np.inf).min(axis=1)
    if weights is not None:
        w = np.asarray(weights, dtype=float)[: W.shape[0]]
        p2s_term = (p2s * w).sum(axis=1) / w.sum()
    else:
        p2s_term = None
    if normalizer == "cardinality":
        s2p_term = s2p.sum(axis=1) / active.sum(axis=1)
        if p2s_term is None:
            p2s_term = p2s.mean(axis=1)
    elif normalizer == "arclength":
        path_len = max(float(np.linalg.norm(np.diff(W, axis=0), axis=1).sum()), 1e-12)
        rows = np.arange(n)
        shape_len = np.maximum(tail[rows, m_star], 1e-12)
        s2p_term = s2p.sum(axis=1) / shape_len
        if p2s_term is None:
            p2s_term = p2s.sum(axis=1) / path_len
    else:
        raise PreconditionError(f"unknown normalizer {normalizer!r}")
    return s2p_term + p2s_term


def _polyline_length(X):
    return float(np.linalg.norm(np.diff(X, axis=0), axis=1).sum())


def shape_deviation(aligned_active_points, active_waypoints, weights=None, normalizer="cardinality") -> float:
    """Symmetric Chamfer distance between two point sets (mean NN distance both ways).

    With ``normalizer="arclength"`` each sum is divided by the polyline
    length of its set instead of the point count.
    """
    A = np.asarray(aligned_active_points, dtype=float).reshape(-1, 3)
    B = np.asarray(active_waypoints, dtype=float).reshape(-1, 3)
    if A.size == 0 or B.size == 0:
        raise PreconditionError("point sets must be nonempty")
    d = np.linalg.norm(A[:, None, :] - B[None, :, :], axis=2)
    a_term = d.min(axis=1)
    b_term = d.min(axis=0)
    if normalizer == "arclength" and A.shape[0] > 1 and B.shape[0] > 1:
        a_mean = a_term.sum() / _polyline_length(A)
        b_mean = b_term.sum() / _polyline_length(B)
    else:
        a_mean = a_term.mean()
        b_mean = b_term.mean()
    if weights is not None:
        w = np.asarray(weights, dtype=float)[: B.shape[0]]
        b_mean = (b_term * w).sum() / w.sum()
    return float(a_mean + b_mean)


def _active_waypoints(path: WaypointPath, i: int) -> np.ndarray:
    if not 1 <= i <= len(path):
        raise PreconditionError(f"waypoint index {i} outside 1..{len(path)}")
    return path.waypoints[:i]


def align_base_pose(shape: Shape, m_star: int, path: WaypointPath, i: int):
    """Closed-form base pose for ``shape`` at waypoint ``i`` (1-based).

    Returns ``(pose, aligned_points, roll_applied)``. The roll about the path
    axis is skipped for collinear paths.
    """
    if i < 3:
        raise PreconditionError("alignment needs at least three active waypoints")
    W = _active_waypoints(path, i)
    P = np.asarray(shape.points, dtype=float)[None]
    tail = _tail(P)
    R, valid = _align_batch(P, tail, np.array([m_star]), W)
    pose = Pose(R[0], W[-1] - R[0] @ P[0, -1])
    return pose, pose.apply(P[0]), bool(valid[0])


def _tail(P):
    seg = np.linalg.norm(np.diff(P, axis=1), axis=2)
    tail = np.zeros(P.shape[:2])
    tail[:, :-1] = np.cumsum(seg[:, ::-1], axis=1)[:, ::-1]
    return tail


@dataclass
class SearchOptions:
    normalizer: str = "cardinality"
    weights: np.ndarray | None = None


def score_candidates(lib: ShapeLibrary, idx, path: WaypointPath, i: int, options: SearchOptions | None = None,
                     return_poses: bool = False):
    """Align and score library shapes ``idx`` against the first ``i`` waypoints."""
    options = options or SearchOptions()
    W = _active_waypoints(path, i)
    target = float(path.cumulative_arclen[i - 1])
    idx = np.asarray(idx, dtype=int)
    scores = np.empty(idx.size)
    rots = np.empty((idx.size, 3, 3)) if return_poses else None
    mstars = np.empty(idx.size, dtype=int) if return_poses else None
    rolls = np.empty(idx.size, dtype=bool) if return_poses else None
    for start in range(0, idx.size, CHUNK):
        sl = idx[start : start + CHUNK]
        P = lib.points[sl]
        tail = lib.tail_arclen[sl]
        m_star = active_subset_batch(tail, target)
        R, valid = _align_batch(P, tail, m_star, W)
        scores[start : start + sl.size] = _chamfer_local(
            P, P[:, -1], m_star, R, W, options.weights, options.normalizer, tail
        )
        if return_poses:
            rots[start : start + sl.size] = R
            mstars[start : start + sl.size] = m_star
            rolls[start : start + sl.size] = valid
    if return_poses:
        return scores, rots, mstars, rolls
    return scores


def candidate(lib: ShapeLibrary, index: int, path: WaypointPath, i: int, options=None) -> AlignedCandidate:
    scores, rots, mstars, rolls = score_candidates(lib, [index], path, i, options, return_poses=True)
    R = rots[0]
    pose = Pose(R, path.waypoints[i - 1] - R @ lib.points[index, -1])
    return AlignedCandidate(int(index), pose, int(mstars[0]), float(scores[0]), bool(rolls[0]))


def search_waypoint(lib: ShapeLibrary | ClusteredLibrary, path: WaypointPath, i: int, mode: str = "linear",
                    options: SearchOptions | None = None) -> tuple[AlignedCandidate, int]:
    """Best library shape for waypoint ``i``; returns ``(candidate, evaluations)``."""
    if i < 3:
        raise PreconditionError("shape search needs at least three active waypoints")
    if isinstance(lib, ClusteredLibrary):
        clib, base = lib, lib.base
    else:
        clib, base = None, lib
    if len(base) == 0:
        raise EmptyLibrary("library is empty")

    def score(idx):
        return score_candidates(base, idx, path, i, options)

    if mode == "linear":
        best, _, evals = linear_search(len(base), score)
    elif mode == "clustered":
        if clib is None:
            raise PreconditionError("clustered mode needs a ClusteredLibrary")
        best, _, evals = two_pass_search(clib, score)
    else:
        raise PreconditionError(f"unknown search mode {mode!r}")
    return candidate(base, best, path, i, options), evals


def entry_deviation(points_world: np.ndarray, path: WaypointPath, i: int, options=None) -> tuple[int, float]:
    """Active subset and Chamfer deviation of an already placed shape at waypoint ``i``."""
    options = options or SearchOptions()
    target = float(path.cumulative_arclen[i - 1])
    m = active_subset(points_world, target)
    W = _active_waypoints(path, i)
    return m, shape_deviation(points_world[m:], W, options.weights, options.normalizer)


def plan_sparse(lib: ShapeLibrary | ClusteredLibrary, path: WaypointPath, mode: str = "linear",
                options: SearchOptions | None = None) -> SparsePlan:
    """One aligned library shape per waypoint.

    Waypoints 1 and 2 reuse the shape chosen at waypoint 3, translated so its
    tip sits on them.
    """
    n = len(path)
    if n < 3:
        raise PreconditionError("planning needs at least three non-collinear active waypoints")
    base = lib.base if isinstance(lib, ClusteredLibrary) else lib
    found: list[AlignedCandidate] = []
    evaluations = 0
    for i in range(3, n + 1):
        cand, evals = search_waypoint(lib, path, i, mode, options)
        found.append(cand)
        evaluations += evals
    entries = []
    first = found[0]
    R = first.base_pose.rotation
    pD = base.points[first.library_index, -1]
    for i in (1, 2):
        pose = Pose(R, path.waypoints[i - 1] - R @ pD)
        world = pose.apply(base.points[first.library_index])
        m, dev = entry_deviation(world, path, i, options)
        entries.append(_entry(base, first.library_index, pose, m, dev))
    for cand in found:
        entries.append(_entry(base, cand.library_index, cand.base_pose, cand.m_star, cand.deviation))
    return SparsePlan(path, entries, mode, evaluations)


def _entry(lib: ShapeLibrary, index: int, pose: Pose, m: int, dev: float) -> SparseEntry:
    tip_local = Pose(lib.tip_rotations[index], lib.points[index, -1])
    return SparseEntry(lib.configs[index].copy(), pose, int(m), float(dev), int(index), tip_local)
