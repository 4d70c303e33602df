"""Seeded test-path generators: C curves, S curves and robot curves."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..forward_model import PCCModel
from ..geometry import rotation_from_axis_angle
from ..planner import WaypointPath

ROBOT_LENGTH = 3.0
LENGTH_CAP = 0.95

C_BOX = np.array([[0.5, 1.5], [-0.75, 0.25], [1.0, 2.0]])
S_BOX = np.array([[-2.25, -1.25], [-0.5, 0.5], [1.5, 1.5]])
CONTROL_FRACTION = 0.4
CLASSES = ("C", "S", "Robot")


@dataclass(frozen=True)
class PathSpec:
    cls: str
    seed: int
    n: int = 10


def _uniform_in(rng, box):
    return box[:, 0] + rng.random(3) * (box[:, 1] - box[:, 0])


def _cap(points: np.ndarray, arclen: float, robot_length: float) -> np.ndarray:
    limit = LENGTH_CAP * robot_length
    if arclen > limit:
        return points * (limit / arclen)
    return points


def _resample(dense: np.ndarray, n: int) -> np.ndarray:
    cum = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(dense, axis=0), axis=1))])
    targets = np.linspace(0.0, cum[-1], n)
    out = np.column_stack([np.interp(targets, cum, dense[:, k]) for k in range(3)])
    out[0], out[-1] = dense[0], dense[-1]
    return out


def half_circle(endpoint, plane_angle: float, n: int) -> np.ndarray:
    """``n`` equal-arc points on the half circle from the origin to ``endpoint``.

    ``plane_angle`` turns the bending plane about the chord.
    """
    e = np.asarray(endpoint, dtype=float)
    c = np.linalg.norm(e)
    chord = e / c
    ref = np.cross(chord, [0.0, 0.0, 1.0])
    if np.linalg.norm(ref) < 1e-9:
        ref = np.cross(chord, [1.0, 0.0, 0.0])
    ref /= np.linalg.norm(ref)
    u = rotation_from_axis_angle(chord, plane_angle) @ ref
    t = np.linspace(0.0, np.pi, n)
    pts = e / 2 + (c / 2) * (-np.cos(t)[:, None] * chord + np.sin(t)[:, None] * u)
    pts[0], pts[-1] = 0.0, e
    return pts


def gen_c_curve(seed: int, n: int = 10, robot_length: float = ROBOT_LENGTH) -> WaypointPath:
    rng = np.random.default_rng(seed)
    end = _uniform_in(rng, C_BOX)
    psi = rng.uniform(0.0, 2 * np.pi)
    pts = half_circle(end, psi, n)
    return WaypointPath(_cap(pts, np.pi * np.linalg.norm(end) / 2, robot_length))


def bezier(ctrl: np.ndarray, t: np.ndarray) -> np.ndarray:
    t = np.asarray(t)[:, None]
    P0, P1, P2, P3 = ctrl
    return (1 - t) ** 3 * P0 + 3 * (1 - t) ** 2 * t * P1 + 3 * (1 - t) * t**2 * P2 + t**3 * P3


def s_curve_controls(endpoint) -> np.ndarray:
    e = np.asarray(endpoint, dtype=float)
    off = CONTROL_FRACTION * np.linalg.norm(e) * np.array([0.0, 0.0, 1.0])
    return np.array([np.zeros(3), off, e - off, e])


def gen_s_curve(seed: int, n: int = 10, robot_length: float = ROBOT_LENGTH, dense: int = 4001) -> WaypointPath:
    rng = np.random.default_rng(seed)
    end = _uniform_in(rng, S_BOX)
    curve = bezier(s_curve_controls(end), np.linspace(0.0, 1.0, dense))
    arclen = float(np.linalg.norm(np.diff(curve, axis=0), axis=1).sum())
    return WaypointPath(_cap(_resample(curve, n), arclen, robot_length))


def sample_robot_config(rng, model: PCCModel, low: float = 0.2, high: float = 0.8) -> np.ndarray:
    kmax = model.spec.kappa_max
    segs = model.spec.segment_count
    mag = rng.uniform(low * kmax, high * kmax, segs)
    phi = rng.uniform(0.0, 2 * np.pi, segs)
    q = np.empty(2 * segs)
    q[0::2] = mag * np.cos(phi)
    q[1::2] = mag * np.sin(phi)
    return q


def robot_curve_from_config(q, model: PCCModel, n: int = 10) -> WaypointPath:
    s = np.linspace(0.0, model.nominal_length, n)
    return WaypointPath(model.backbone_at(q, s))


def gen_robot_curve(seed: int, model: PCCModel | None = None, n: int = 10) -> WaypointPath:
    model = model or PCCModel()
    rng = np.random.default_rng(seed)
    return robot_curve_from_config(sample_robot_config(rng, model), model, n)


def generate_path(spec: PathSpec, model: PCCModel | None = None) -> WaypointPath:
    if spec.cls == "C":
        return gen_c_curve(spec.seed, spec.n)
    if spec.cls == "S":
        return gen_s_curve(spec.seed, spec.n)
    if spec.cls == "Robot":
        return gen_robot_curve(spec.seed, model, spec.n)
    raise ValueError(f"unknown path class {spec.cls!r}")
