"""Tip and shape deviation of a dense plan, in percent of robot length."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ConsistencyError
from ..interpolation import DensePlan, step_grid
from ..planner import WaypointPath, active_subset, shape_deviation

ROBOT_LENGTH = 3.0


@dataclass
class Metrics:
    tip_dev_pct: float
    shape_dev_pct: float
    compute_time_s: float = 0.0
    tip_dev_mean_pct: float = 0.0
    step_shape_dev_pct: np.ndarray | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("step_shape_dev_pct")
        return d


def desired_positions(path: WaypointPath, interval, alpha) -> np.ndarray:
    W = path.waypoints
    j = np.asarray(interval)
    a = np.asarray(alpha)[:, None]
    nxt = np.minimum(j + 1, len(path) - 1)
    return (1 - a) * W[j] + a * W[nxt]


def path_prefix(path: WaypointPath, j: int, alpha: float) -> tuple[np.ndarray, float]:
    """Waypoints reached at ``alpha`` along interval ``j`` plus the interpolated tip.

    Returns the prefix points and the arc length of the tip along the path.
    """
    W, cum = path.waypoints, path.cumulative_arclen
    if j + 1 >= len(path):
        return W.copy(), float(cum[-1])
    s = float((1 - alpha) * cum[j] + alpha * cum[j + 1])
    tip = (1 - alpha) * W[j] + alpha * W[j + 1]
    reached = W[cum <= s + 1e-12 * max(cum[-1], 1.0)]
    if np.linalg.norm(reached[-1] - tip) > 1e-12:
        reached = np.vstack([reached, tip])
    return reached, s


def _check(plan: DensePlan, path: WaypointPath):
    if len(plan.path) != len(path) or not np.allclose(plan.path.waypoints, path.waypoints, atol=1e-12, rtol=0.0):
        raise ConsistencyError("plan was built for a different path")
    interval, alpha = step_grid(len(path), plan.h)
    if len(plan) != interval.size:
        raise ConsistencyError(f"plan has {len(plan)} steps, expected {interval.size}")
    if not (np.array_equal(plan.interval, interval) and np.allclose(plan.alpha, alpha, atol=1e-12)):
        raise ConsistencyError("plan step grid does not match (n-1) h + 1 layout")


def eval_plan(plan: DensePlan, path: WaypointPath, model, robot_length: float = ROBOT_LENGTH,
              compute_time_s: float = 0.0) -> Metrics:
    """Tip error is the max over dense steps (the mean is kept alongside); shape
    error is the mean over dense steps."""
    _check(plan, path)
    pts, _ = model.shapes(plan.configs)
    world = np.einsum("nij,nkj->nki", plan.base_rotations, pts) + plan.base_translations[:, None, :]
    desired = desired_positions(path, plan.interval, plan.alpha)
    tip_err = np.linalg.norm(world[:, -1] - desired, axis=1)
    devs = np.empty(len(plan))
    for k in range(len(plan)):
        prefix, s = path_prefix(path, int(plan.interval[k]), float(plan.alpha[k]))
        m = active_subset(world[k], s)
        devs[k] = shape_deviation(world[k, m:], prefix)
    scale = 100.0 / robot_length
    return Metrics(
        tip_dev_pct=float(tip_err.max() * scale),
        shape_dev_pct=float(devs.mean() * scale),
        compute_time_s=float(compute_time_s),
        tip_dev_mean_pct=float(tip_err.mean() * scale),
        step_shape_dev_pct=devs * scale,
    )


def sparse_deviation_pct(plan, robot_length: float = ROBOT_LENGTH) -> float:
    """Mean per-waypoint deviation of a sparse plan."""
    return float(np.mean(plan.deviations) * 100.0 / robot_length)


def search_deviation_pct(plan, robot_length: float = ROBOT_LENGTH) -> float:
    """Mean deviation over the searched waypoints (3..n); the first two reuse waypoint 3's shape."""
    return float(np.mean(plan.deviations[2:]) * 100.0 / robot_length)
