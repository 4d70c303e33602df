"""Sequential local-optimisation FTL baseline.

At each waypoint the configuration and base pose are optimised jointly with
L-BFGS-B, warm-started from the previous solution. The tip is only pulled
toward the waypoint by a penalty, so it is not placed exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.spatial.transform import Rotation

from .errors import PreconditionError
from .geometry import Pose, slerp_many
from .interpolation import DensePlan, step_grid
from .planner import WaypointPath, active_subset_batch


@dataclass
class BaselineOptions:
    lambda_tip: float = 10.0
    max_iters: int = 200
    fd_step: float = 1e-6


@dataclass
class BaselineState:
    """Decision vector ``z = (q, t, rotvec)``."""

    z: np.ndarray
    cost: float = float("nan")
    converged: bool = True
    iterations: int = 0

    @classmethod
    def zero(cls, dof: int) -> BaselineState:
        return cls(np.zeros(dof + 6))

    def split(self, dof: int):
        return self.z[:dof], self.z[dof : dof + 3], self.z[dof + 3 :]

    def base_pose(self, dof: int) -> Pose:
        _, t, r = self.split(dof)
        return Pose(Rotation.from_rotvec(r).as_matrix(), t)


def _canonical_rotvec(r: np.ndarray) -> np.ndarray:
    # keep |r| < pi so consecutive warm starts stay on one chart
    return Rotation.from_rotvec(r).as_rotvec()


class _Cost:
    def __init__(self, model, W: np.ndarray, target: float, opts: BaselineOptions):
        self.model = model
        self.W = W
        self.wi = W[-1]
        self.target = target
        self.opts = opts
        self.dof = model.dof

    def batch(self, Z: np.ndarray) -> np.ndarray:
        d = self.dof
        pts, _ = self.model.shapes(Z[:, :d])
        R = Rotation.from_rotvec(Z[:, d + 3 :]).as_matrix()
        world = np.einsum("nij,nkj->nki", R, pts) + Z[:, None, d : d + 3]
        seg = np.linalg.norm(np.diff(pts, axis=1), axis=2)
        tail = np.zeros(pts.shape[:2])
        tail[:, :-1] = np.cumsum(seg[:, ::-1], axis=1)[:, ::-1]
        m = active_subset_batch(tail, self.target)
        diff = world[:, :, None, :] - self.W[None, None, :, :]
        dist = np.sqrt(np.einsum("nabk,nabk->nab", diff, diff))
        active = np.arange(pts.shape[1])[None, :] >= m[:, None]
        s2p = np.where(active, dist.min(axis=2), 0.0).sum(axis=1) / active.sum(axis=1)
        p2s = np.where(active[:, :, None], dist, np.inf).min(axis=1).mean(axis=1)
        tip = world[:, -1] - self.wi
        return s2p + p2s + self.opts.lambda_tip * np.einsum("ni,ni->n", tip, tip)

    def value_and_grad(self, z: np.ndarray):
        # forward differences, all perturbations in one batch
        h = self.opts.fd_step
        Z = np.repeat(z[None], z.size + 1, axis=0)
        Z[1:] += h * np.eye(z.size)
        f = self.batch(Z)
        return float(f[0]), (f[1:] - f[0]) / h


def optimize_waypoint(path: WaypointPath, i: int, warm_start: BaselineState, model,
                      options: BaselineOptions | None = None) -> BaselineState:
    """Locally minimise Chamfer deviation plus tip penalty at waypoint ``i`` (1-based)."""
    if not 1 <= i <= len(path):
        raise PreconditionError(f"waypoint index {i} outside 1..{len(path)}")
    opts = options or BaselineOptions()
    cost = _Cost(model, path.waypoints[:i], float(path.cumulative_arclen[i - 1]), opts)
    dof = model.dof
    # a tiny margin keeps finite-difference probes inside the model bounds
    margin = 2 * opts.fd_step
    qb = [(lo, hi - margin) for lo, hi in model.bounds]
    bounds = qb + [(None, None)] * 6
    z0 = warm_start.z.copy()
    z0[:dof] = np.clip(z0[:dof], [b[0] for b in qb], [b[1] for b in qb])
    res = minimize(cost.value_and_grad, z0, jac=True, method="L-BFGS-B", bounds=bounds,
                   options={"maxiter": opts.max_iters})
    z = np.asarray(res.x, dtype=float)
    z[dof + 3 :] = _canonical_rotvec(z[dof + 3 :])
    return BaselineState(z, float(res.fun), bool(res.success), int(res.nit))


@dataclass
class BaselinePlan:
    path: WaypointPath
    states: list[BaselineState] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.states)


def solve_baseline(path: WaypointPath, model, options: BaselineOptions | None = None) -> BaselinePlan:
    state = BaselineState.zero(model.dof)
    plan = BaselinePlan(path)
    for i in range(1, len(path) + 1):
        state = optimize_waypoint(path, i, state, model, options)
        plan.states.append(state)
    return plan


def densify_baseline(plan: BaselinePlan, h: int, model) -> DensePlan:
    """Same step grid as ``interpolate``, but with plain blending and no tip correction."""
    path = plan.path
    n = len(plan)
    dof = model.dof
    interval, alpha = step_grid(n, h)
    N = interval.size
    Q = np.array([s.z[:dof] for s in plan.states])
    T = np.array([s.z[dof : dof + 3] for s in plan.states])
    Rb = Rotation.from_rotvec(np.array([s.z[dof + 3 :] for s in plan.states])).as_matrix()
    tipR, _ = model.tip_poses(Q)
    tipR_world = Rb @ tipR
    W = path.waypoints

    configs = np.empty((N, dof))
    base_R = np.empty((N, 3, 3))
    base_t = np.empty((N, 3))
    des_R = np.empty((N, 3, 3))
    des_p = np.empty((N, 3))
    configs[0], base_R[0], base_t[0], des_R[0], des_p[0] = Q[0], Rb[0], T[0], tipR_world[0], W[0]
    a = np.arange(1, h + 1) / h
    for j in range(n - 1):
        sl = slice(1 + j * h, 1 + (j + 1) * h)
        configs[sl] = (1 - a)[:, None] * Q[j] + a[:, None] * Q[j + 1]
        base_t[sl] = (1 - a)[:, None] * T[j] + a[:, None] * T[j + 1]
        base_R[sl] = slerp_many(Rb[j], Rb[j + 1], a)
        des_R[sl] = slerp_many(tipR_world[j], tipR_world[j + 1], a)
        des_p[sl] = (1 - a)[:, None] * W[j] + a[:, None] * W[j + 1]
    return DensePlan(path, h, configs, base_R, base_t, des_R, des_p, interval, alpha, method="optimization")


def plan_baseline(path: WaypointPath, model, h: int = 10, options: BaselineOptions | None = None) -> DensePlan:
    return densify_baseline(solve_baseline(path, model, options), h, model)
