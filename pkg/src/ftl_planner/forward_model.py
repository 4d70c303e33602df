"""Forward models mapping configurations to discretised backbones.

The planner only needs a handful of things from a model: a batched shape
evaluation, the tip pose, the nominal length and a radial-symmetry
descriptor. :class:`ForwardModel` spells that out; :class:`PCCModel` is the
shipped piecewise-constant-curvature implementation.

PCC configurations hold two bending components ``(kx, ky)`` per segment.
Segment ``i`` bends with curvature ``|(kx, ky)|`` in the plane at angle
``atan2(ky, kx)`` about its own base axis, which means the rotation vector
per unit length is simply ``(-ky, kx, 0)`` and there is no singularity at
zero curvature.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

import numpy as np

from .errors import BoundsError, PreconditionError
from .geometry import Pose, hat


@dataclass(frozen=True)
class SymmetryDescriptor:
    """Radial symmetry of a robot about its base axis.

    ``kind`` is ``"none"``, ``"continuous"``, ``"discrete"`` (with ``k`` folds)
    or ``"data_driven"`` (with clustering threshold ``gamma``).
    """

    kind: str = "continuous"
    k: int | None = None
    gamma: float | None = None

    def __post_init__(self):
        if self.kind not in ("none", "continuous", "discrete", "data_driven"):
            raise PreconditionError(f"unknown symmetry kind {self.kind!r}")
        if self.kind == "discrete" and (self.k is None or self.k < 2):
            raise PreconditionError("discrete symmetry needs k >= 2")
        if self.kind == "data_driven" and (self.gamma is None or self.gamma < 0):
            raise PreconditionError("data-driven symmetry needs gamma >= 0")

    @classmethod
    def parse(cls, text: str) -> SymmetryDescriptor:
        """Parse ``"continuous"``, ``"none"``, ``"discrete:3"`` or ``"data_driven:0.5"``."""
        kind, _, arg = text.partition(":")
        if kind == "discrete":
            return cls("discrete", k=int(arg or 3))
        if kind == "data_driven":
            return cls("data_driven", gamma=float(arg or 0.0))
        return cls(kind)

    def __str__(self):
        if self.kind == "discrete":
            return f"discrete:{self.k}"
        if self.kind == "data_driven":
            return f"data_driven:{self.gamma!r}"
        return self.kind


@dataclass(frozen=True)
class ModelSpec:
    segment_count: int = 3
    segment_length: float = 1.0
    D: int = 60
    kappa_max: float = np.pi / 2
    symmetry: SymmetryDescriptor = field(default_factory=SymmetryDescriptor)

    def __post_init__(self):
        if self.segment_length <= 0:
            raise PreconditionError("segment_length must be positive")
        if self.D < 3 * self.segment_count or self.D % self.segment_count:
            raise PreconditionError("D must be a multiple of segment_count and at least 3 per segment")

    @property
    def dof(self) -> int:
        return 2 * self.segment_count

    @property
    def length(self) -> float:
        return self.segment_count * self.segment_length

    @property
    def bounds(self) -> np.ndarray:
        """Sampling box as a ``(dof, 2)`` array of ``[low, high]`` rows."""
        return np.tile([-self.kappa_max, self.kappa_max], (self.dof, 1))

    def to_dict(self) -> dict:
        return {
            "model": "pcc",
            "segment_count": self.segment_count,
            "segment_length": self.segment_length,
            "D": self.D,
            "kappa_max": self.kappa_max,
            "symmetry": str(self.symmetry),
        }

    @classmethod
    def from_dict(cls, d: dict) -> ModelSpec:
        return cls(
            segment_count=int(d["segment_count"]),
            segment_length=float(d["segment_length"]),
            D=int(d["D"]),
            kappa_max=float(d["kappa_max"]),
            symmetry=SymmetryDescriptor.parse(d.get("symmetry", "continuous")),
        )


@dataclass(frozen=True)
class Shape:
    config: np.ndarray
    points: np.ndarray
    tip_rotation: np.ndarray

    @property
    def tip_pose(self) -> Pose:
        return Pose(self.tip_rotation, self.points[-1])


@runtime_checkable
class ForwardModel(Protocol):
    """What downstream modules require of a forward model."""

    D: int
    nominal_length: float
    symmetry: SymmetryDescriptor

    def shapes(self, Q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Backbones ``(N, D+1, 3)`` and tip rotations ``(N, 3, 3)`` for configs ``(N, d)``."""

    def tip_poses(self, Q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Tip rotations ``(N, 3, 3)`` and positions ``(N, 3)``."""

    def forward(self, q) -> Shape: ...

    def tip_pose(self, q) -> Pose: ...


def _arc_terms(kappa: np.ndarray, s):
    # sin(k s)/k and (1 - cos(k s))/k^2, both smooth through k = 0
    x = kappa * s
    A = s * np.sinc(x / np.pi)
    B = 0.5 * s * s * np.sinc(x / (2 * np.pi)) ** 2
    return A, B


class PCCModel:
    """Piecewise-constant-curvature backbone with ``(kx, ky)`` per segment."""

    def __init__(self, spec: ModelSpec | None = None):
        self.spec = spec or ModelSpec()
        self.D = self.spec.D
        self.nominal_length = self.spec.length
        self.symmetry = self.spec.symmetry
        self.bounds = self.spec.bounds
        self.dof = self.spec.dof
        # arcs are sampled exactly, so uniform spacing in s is uniform in arc length
        m = self.D // self.spec.segment_count
        self._s_local = np.linspace(0.0, self.spec.segment_length, m + 1)[1:]

    def _check(self, Q: np.ndarray) -> np.ndarray:
        Q = np.asarray(Q, dtype=float)
        if Q.ndim == 1:
            Q = Q[None]
        if Q.shape[1] != self.dof:
            raise PreconditionError(f"expected {self.dof} configuration components, got {Q.shape[1]}")
        if not np.all(np.isfinite(Q)):
            raise BoundsError("non-finite configuration")
        # the rotation-invariant hull of the sampling box, so radial re-orientation stays legal
        mags = np.hypot(Q[:, 0::2], Q[:, 1::2])
        if np.any(mags > np.sqrt(2.0) * self.spec.kappa_max * (1 + 1e-12)):
            raise BoundsError("segment curvature exceeds the model limit")
        return Q

    def in_bounds(self, Q) -> np.ndarray:
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        return np.all((Q >= lo) & (Q <= hi), axis=1)

    def shapes(self, Q):
        Q = self._check(Q)
        N = Q.shape[0]
        s = self._s_local
        m = s.size
        R = np.broadcast_to(np.eye(3), (N, 3, 3)).copy()
        t = np.zeros((N, 3))
        pts = np.empty((N, self.D + 1, 3))
        pts[:, 0] = 0.0
        for seg in range(self.spec.segment_count):
            kx, ky = Q[:, 2 * seg], Q[:, 2 * seg + 1]
            kappa = np.hypot(kx, ky)
            A, B = _arc_terms(kappa[:, None], s[None, :])  # (N, m)
            local = np.empty((N, m, 3))
            local[..., 0] = B * kx[:, None]
            local[..., 1] = B * ky[:, None]
            local[..., 2] = A
            pts[:, 1 + seg * m : 1 + (seg + 1) * m] = np.einsum("nij,nmj->nmi", R, local) + t[:, None, :]
            K = hat(np.stack([-ky, kx, np.zeros(N)], axis=1))
            Rseg = np.eye(3) + A[:, -1, None, None] * K + B[:, -1, None, None] * (K @ K)
            t = pts[:, 1 + (seg + 1) * m - 1].copy()
            R = R @ Rseg
        return pts, R

    def tip_poses(self, Q):
        Q = self._check(Q)
        N = Q.shape[0]
        L = self.spec.segment_length
        R = np.broadcast_to(np.eye(3), (N, 3, 3)).copy()
        t = np.zeros((N, 3))
        for seg in range(self.spec.segment_count):
            kx, ky = Q[:, 2 * seg], Q[:, 2 * seg + 1]
            A, B = _arc_terms(np.hypot(kx, ky), L)
            local = np.stack([B * kx, B * ky, A], axis=1)
            t = t + np.einsum("nij,nj->ni", R, local)
            K = hat(np.stack([-ky, kx, np.zeros(N)], axis=1))
            R = R @ (np.eye(3) + A[:, None, None] * K + B[:, None, None] * (K @ K))
        return R, t

    def forward(self, q) -> Shape:
        q = np.asarray(q, dtype=float)
        pts, R = self.shapes(q)
        return Shape(q.copy(), pts[0], R[0])

    def tip_pose(self, q) -> Pose:
        R, t = self.tip_poses(q)
        return Pose(R[0], t[0])

    def backbone_at(self, q, s_values) -> np.ndarray:
        """Backbone positions at arbitrary arc lengths ``0 <= s <= S``."""
        q = self._check(q)[0]
        s_values = np.asarray(s_values, dtype=float)
        L = self.spec.segment_length
        out = np.empty((s_values.size, 3))
        seg_idx = np.minimum((s_values // L).astype(int), self.spec.segment_count - 1)
        R, t = np.eye(3), np.zeros(3)
        for seg in range(self.spec.segment_count):
            kx, ky = q[2 * seg], q[2 * seg + 1]
            kappa = np.hypot(kx, ky)
            sel = seg_idx == seg
            if np.any(sel):
                A, B = _arc_terms(kappa, s_values[sel] - seg * L)
                local = np.stack([B * kx, B * ky, A], axis=1)
                out[sel] = local @ R.T + t
            A, B = _arc_terms(kappa, L)
            t = t + R @ np.array([B * kx, B * ky, A])
            K = hat(np.array([-ky, kx, 0.0]))
            R = R @ (np.eye(3) + A * K + B * (K @ K))
        return out

    def rotate_configuration(self, Q, angle) -> np.ndarray:
        """Configuration whose shape is the original rotated by ``rot_z(angle)``.

        Exact for PCC: every segment's bending pair turns by the same angle.
        ``angle`` may be a scalar or one angle per row of ``Q``.
        """
        Q = np.asarray(Q, dtype=float)
        c, s = np.cos(angle), np.sin(angle)
        if np.ndim(angle):
            c, s = c[:, None], s[:, None]
        out = np.empty_like(Q)
        out[..., 0::2] = c * Q[..., 0::2] - s * Q[..., 1::2]
        out[..., 1::2] = s * Q[..., 0::2] + c * Q[..., 1::2]
        return out
