"""SE(3) primitives used by base-pose alignment and interpolation.

Rotations are plain ``(3, 3)`` float arrays. Quaternions only appear inside
:func:`slerp`. Most functions have a ``*_batch`` twin operating on stacks of
vectors so that a whole shape library can be aligned in one numpy pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateProjection, PreconditionError

UNIT_TOL = 1e-9
PARALLEL_TOL = 1e-12
ANTIPODAL_TOL = 1e-9


def hat(v: np.ndarray) -> np.ndarray:
    """Skew-symmetric cross-product matrix; works on ``(..., 3)`` input."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def rot_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_z_batch(angles: np.ndarray) -> np.ndarray:
    angles = np.asarray(angles, dtype=float)
    c, s = np.cos(angles), np.sin(angles)
    out = np.zeros(angles.shape + (3, 3))
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    out[..., 2, 2] = 1.0
    return out


def rotation_from_axis_angle(axis, angle: float) -> np.ndarray:
    """Rodrigues formula ``I + sin(a) K + (1 - cos(a)) K^2`` for a unit axis."""
    axis = np.asarray(axis, dtype=float)
    if abs(np.linalg.norm(axis) - 1.0) > UNIT_TOL:
        raise PreconditionError(f"axis must be unit length, got norm {np.linalg.norm(axis)!r}")
    K = hat(axis)
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def rodrigues_batch(axes: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """Vectorised Rodrigues; ``axes`` is ``(N, 3)`` unit vectors."""
    K = hat(axes)
    s = np.sin(angles)[:, None, None]
    c = np.cos(angles)[:, None, None]
    return np.eye(3) + s * K + (1.0 - c) * (K @ K)


def _perpendicular_axis(v: np.ndarray) -> np.ndarray:
    # cross with the basis vector least parallel to v
    e = np.zeros(3)
    e[np.argmin(np.abs(v))] = 1.0
    axis = np.cross(v, e)
    return axis / np.linalg.norm(axis)


def _small_alignment(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # closed form for nearly parallel unit vectors, well conditioned when a.b ~ 1
    K = hat(np.cross(a, b))
    return np.eye(3) + K + (K @ K) / (1.0 + a @ b)


def _half_turn_alignment(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # half turn a -> -a about a fixed perpendicular axis, then the small correction -a -> b
    H = rotation_from_axis_angle(_perpendicular_axis(a), np.pi)
    return _small_alignment(-a, b) @ H


def align_vectors(v_from, v_to) -> np.ndarray:
    """Minimal rotation taking unit vector ``v_from`` onto ``v_to``.

    The axis is ``v_from x v_to``. Parallel inputs give the identity; antipodal
    inputs give a half turn about a deterministic perpendicular axis.
    """
    a = np.asarray(v_from, dtype=float)
    b = np.asarray(v_to, dtype=float)
    for name, v in (("v_from", a), ("v_to", b)):
        if abs(np.linalg.norm(v) - 1.0) > UNIT_TOL:
            raise PreconditionError(f"{name} must be unit length")
    cos = float(np.clip(a @ b, -1.0, 1.0))
    if cos <= -1.0 + ANTIPODAL_TOL:
        return _half_turn_alignment(a, b)
    cross = np.cross(a, b)
    sin = np.linalg.norm(cross)
    if sin < PARALLEL_TOL:
        return np.eye(3)
    return rotation_from_axis_angle(cross / sin, np.arctan2(sin, cos))


def align_vectors_batch(v_from: np.ndarray, v_to: np.ndarray) -> np.ndarray:
    """Row-wise :func:`align_vectors` for ``(N, 3)`` stacks.

    ``v_to`` may also be a single ``(3,)`` vector shared by all rows.
    """
    a = np.asarray(v_from, dtype=float)
    b = np.broadcast_to(np.asarray(v_to, dtype=float), a.shape)
    cos = np.clip(np.einsum("ij,ij->i", a, b), -1.0, 1.0)
    cross = np.cross(a, b)
    sin = np.linalg.norm(cross, axis=1)
    # R = I + [c]x + [c]x^2 / (1 + cos), the closed form of Rodrigues with unnormalised axis
    K = hat(cross)
    denom = np.where(cos > -1.0 + ANTIPODAL_TOL, 1.0 + cos, 1.0)
    R = np.eye(3) + K + (K @ K) / denom[:, None, None]
    R[sin < PARALLEL_TOL] = np.eye(3)
    for i in np.flatnonzero(cos <= -1.0 + ANTIPODAL_TOL):
        R[i] = _half_turn_alignment(a[i], b[i])
    return R


def signed_angle_about_axis(u_a, u_b, axis, eps: float = 1e-9) -> float:
    """Angle that rotates the projection of ``u_a`` onto the projection of ``u_b``.

    Both vectors are projected onto the plane orthogonal to the unit ``axis``.
    Raises :class:`DegenerateProjection` if either projection is shorter
    than ``eps``.
    """
    axis = np.asarray(axis, dtype=float)
    u_a = np.asarray(u_a, dtype=float)
    u_b = np.asarray(u_b, dtype=float)
    pa = u_a - (u_a @ axis) * axis
    pb = u_b - (u_b @ axis) * axis
    if np.linalg.norm(pa) <= eps or np.linalg.norm(pb) <= eps:
        raise DegenerateProjection("projection onto the rotation plane vanished")
    return float(np.arctan2(axis @ np.cross(pa, pb), pa @ pb))


def signed_angle_about_axis_batch(u_a: np.ndarray, u_b, axis, eps: float = 1e-9):
    """Vectorised :func:`signed_angle_about_axis` over rows of ``u_a``.

    Returns ``(angles, valid)``; invalid rows get angle 0.
    """
    axis = np.asarray(axis, dtype=float)
    u_b = np.asarray(u_b, dtype=float)
    pa = u_a - np.outer(u_a @ axis, axis)
    pb = u_b - (u_b @ axis) * axis
    valid = (np.linalg.norm(pa, axis=1) > eps) & (np.linalg.norm(pb) > eps)
    angles = np.arctan2(np.cross(pa, pb) @ axis, pa @ pb)
    return np.where(valid, angles, 0.0), valid


def matrix_to_quaternion(R: np.ndarray) -> np.ndarray:
    """Unit quaternion ``(w, x, y, z)`` with ``w >= 0`` (Shepperd's method)."""
    m = np.asarray(R, dtype=float)
    tr = np.trace(m)
    if tr > 0:
        s = 2.0 * np.sqrt(tr + 1.0)
        q = np.array([0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s])
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = 2.0 * np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2])
        q = np.array([(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s])
    elif m[1, 1] > m[2, 2]:
        s = 2.0 * np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2])
        q = np.array([(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s])
    else:
        s = 2.0 * np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1])
        q = np.array([(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s])
    q /= np.linalg.norm(q)
    return q if q[0] >= 0 else -q


def quaternion_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = np.asarray(q, dtype=float) / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def slerp(R_a: np.ndarray, R_b: np.ndarray, alpha: float) -> np.ndarray:
    """Geodesic interpolation between two rotations, shortest way round."""
    if not 0.0 <= alpha <= 1.0:
        raise PreconditionError("alpha must lie in [0, 1]")
    if alpha == 0.0:
        return np.array(R_a, dtype=float)
    if alpha == 1.0:
        return np.array(R_b, dtype=float)
    qa = matrix_to_quaternion(R_a)
    qb = matrix_to_quaternion(R_b)
    dot = qa @ qb
    if dot < 0.0:
        qb, dot = -qb, -dot
    if dot > 1.0 - 1e-12:
        q = qa + alpha * (qb - qa)
    else:
        omega = np.arccos(min(dot, 1.0))
        q = (np.sin((1 - alpha) * omega) * qa + np.sin(alpha * omega) * qb) / np.sin(omega)
    return quaternion_to_matrix(q)


def rotation_angle_between(R_a: np.ndarray, R_b: np.ndarray) -> float:
    c = (np.trace(np.asarray(R_a).T @ R_b) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


@dataclass(frozen=True)
class Pose:
    """Rigid transform ``x -> R x + t``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> Pose:
        return cls(np.eye(3), np.zeros(3))

    def __matmul__(self, other: Pose) -> Pose:
        return Pose(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    def inverse(self) -> Pose:
        Rt = self.rotation.T
        return Pose(Rt, -Rt @ self.translation)

    def apply(self, points) -> np.ndarray:
        return apply_pose(self, points)

    def as_matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def to_dict(self) -> dict:
        return {"rotation": self.rotation.ravel().tolist(), "translation": self.translation.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> Pose:
        return cls(np.reshape(d["rotation"], (3, 3)), d["translation"])


def apply_pose(T: Pose, points) -> np.ndarray:
    """Map ``(..., 3)`` points through ``T``."""
    return np.asarray(points, dtype=float) @ T.rotation.T + T.translation


def is_rotation(R: np.ndarray, tol: float = 1e-9) -> bool:
    R = np.asarray(R)
    return bool(np.allclose(R @ R.T, np.eye(3), atol=tol) and abs(np.linalg.det(R) - 1.0) <= tol)


def slerp_many(R_a: np.ndarray, R_b: np.ndarray, alphas) -> np.ndarray:
    """:func:`slerp` evaluated at several ``alphas`` for one rotation pair."""
    alphas = np.asarray(alphas, dtype=float)
    qa = matrix_to_quaternion(R_a)
    qb = matrix_to_quaternion(R_b)
    dot = qa @ qb
    if dot < 0.0:
        qb, dot = -qb, -dot
    if dot > 1.0 - 1e-12:
        q = qa[None] + alphas[:, None] * (qb - qa)[None]
    else:
        omega = np.arccos(min(dot, 1.0))
        q = (np.sin((1 - alphas) * omega)[:, None] * qa + np.sin(alphas * omega)[:, None] * qb) / np.sin(omega)
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    w, x, y, z = q.T
    out = np.empty((alphas.size, 3, 3))
    out[:, 0, 0] = 1 - 2 * (y * y + z * z)
    out[:, 0, 1] = 2 * (x * y - z * w)
    out[:, 0, 2] = 2 * (x * z + y * w)
    out[:, 1, 0] = 2 * (x * y + z * w)
    out[:, 1, 1] = 1 - 2 * (x * x + z * z)
    out[:, 1, 2] = 2 * (y * z - x * w)
    out[:, 2, 0] = 2 * (x * z - y * w)
    out[:, 2, 1] = 2 * (y * z + x * w)
    out[:, 2, 2] = 1 - 2 * (x * x + y * y)
    out[alphas == 0.0] = R_a
    out[alphas == 1.0] = R_b
    return out
