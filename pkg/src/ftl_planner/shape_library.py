"""Offline shape library, threshold clustering and two-pass search."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError, EmptyLibrary, PreconditionError
from .forward_model import ModelSpec, PCCModel, Shape

FORMAT_VERSION = 1


@dataclass
class ShapeLibrary:
    """Configurations with their precomputed backbones and tip rotations."""

    spec: ModelSpec
    seed: int | None
    bounds: np.ndarray
    configs: np.ndarray
    points: np.ndarray
    tip_rotations: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __len__(self) -> int:
        return self.configs.shape[0]

    @property
    def D(self) -> int:
        return self.points.shape[1] - 1

    def shape(self, i: int) -> Shape:
        return Shape(self.configs[i], self.points[i], self.tip_rotations[i])

    def prefix(self, n: int) -> ShapeLibrary:
        """First ``n`` entries; with a shared seed this is the smaller library."""
        return ShapeLibrary(self.spec, self.seed, self.bounds, self.configs[:n], self.points[:n], self.tip_rotations[:n])

    def subset(self, idx) -> ShapeLibrary:
        idx = np.asarray(idx)
        return ShapeLibrary(self.spec, self.seed, self.bounds, self.configs[idx], self.points[idx], self.tip_rotations[idx])

    @property
    def segment_lengths(self) -> np.ndarray:
        """``(N, D)`` polyline segment lengths, cached."""
        if "seg" not in self._cache:
            self._cache["seg"] = np.linalg.norm(np.diff(self.points, axis=1), axis=2)
        return self._cache["seg"]

    @property
    def tail_arclen(self) -> np.ndarray:
        """``(N, D+1)`` arc length from point ``m`` to the tip."""
        if "tail" not in self._cache:
            seg = self.segment_lengths
            tail = np.zeros((len(self), self.D + 1))
            tail[:, :-1] = np.cumsum(seg[:, ::-1], axis=1)[:, ::-1]
            self._cache["tail"] = tail
        return self._cache["tail"]


def generate_library(spec: ModelSpec, n: int, seed: int, bounds=None, model=None) -> ShapeLibrary:
    """Sample ``n`` configurations uniformly in ``bounds`` and evaluate them.

    Draws happen in a single call, so a library of size ``n`` is the prefix of
    any larger library made with the same seed.
    """
    if n < 1:
        raise PreconditionError("library needs at least one shape")
    model = model or PCCModel(spec)
    bounds = np.asarray(spec.bounds if bounds is None else bounds, dtype=float)
    rng = np.random.default_rng(seed)
    Q = bounds[:, 0] + rng.random((n, bounds.shape[0])) * (bounds[:, 1] - bounds[:, 0])
    pts = np.empty((n, spec.D + 1, 3))
    rots = np.empty((n, 3, 3))
    chunk = 4096
    for start in range(0, n, chunk):
        pts[start : start + chunk], rots[start : start + chunk] = model.shapes(Q[start : start + chunk])
    return ShapeLibrary(spec, seed, bounds, Q, pts, rots)


def shape_similarity(a, b) -> float:
    """Sum over backbone indices of the point distances between two shapes."""
    pa = a.points if isinstance(a, Shape) else np.asarray(a)
    pb = b.points if isinstance(b, Shape) else np.asarray(b)
    if pa.shape != pb.shape:
        raise DimensionError(f"shapes have {pa.shape[0]} and {pb.shape[0]} points")
    return float(np.linalg.norm(pa - pb, axis=-1).sum())


def _similarity_to(points: np.ndarray, idx: np.ndarray, ref: np.ndarray) -> np.ndarray:
    d = points[idx] - ref
    return np.sqrt(np.einsum("nij,nij->ni", d, d)).sum(axis=1)


@dataclass
class ClusteredLibrary:
    base: ShapeLibrary
    gamma: float
    centers: np.ndarray
    members: list[np.ndarray]

    def __len__(self) -> int:
        return len(self.centers)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([m.size for m in self.members])

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "clusters": [{"center": int(c), "members": m.tolist()} for c, m in zip(self.centers, self.members)],
        }


class _ClusterAborted(Exception):
    pass


def _greedy_clusters(points: np.ndarray, gamma: float, max_clusters: int | None = None):
    N = points.shape[0]
    # Pivot distances give exact lower bounds |M(x,p) - M(c,p)| <= M(x,c), so
    # shapes outside the pivot band of a center are skipped without changing the result.
    all_idx = np.arange(N)
    pivots = [0, int(np.argmax(_similarity_to(points, all_idx, points[0])))]
    pd = np.stack([_similarity_to(points, all_idx, points[p]) for p in pivots], axis=1)
    order = np.argsort(pd[:, 0], kind="stable")
    sorted_d0 = pd[order, 0]
    grouped = np.zeros(N, dtype=bool)
    centers, members = [], []
    for c in range(N):
        if grouped[c]:
            continue
        if max_clusters is not None and len(centers) >= max_clusters:
            raise _ClusterAborted
        lo = np.searchsorted(sorted_d0, pd[c, 0] - gamma, side="left")
        hi = np.searchsorted(sorted_d0, pd[c, 0] + gamma, side="right")
        cand = order[lo:hi]
        cand = cand[~grouped[cand]]
        cand = cand[np.abs(pd[cand, 1] - pd[c, 1]) <= gamma]
        if cand.size:
            close = _similarity_to(points, cand, points[c]) <= gamma
            mem = np.sort(cand[close])
        else:
            mem = np.empty(0, dtype=int)
        if not grouped[c] and c not in mem:
            mem = np.sort(np.append(mem, c))
        grouped[mem] = True
        centers.append(c)
        members.append(mem)
    return np.array(centers, dtype=int), members


def threshold_cluster(lib: ShapeLibrary, gamma: float) -> ClusteredLibrary:
    """Greedy pass in library order: each ungrouped shape opens a cluster and
    absorbs every ungrouped shape within ``gamma`` of it."""
    if gamma < 0:
        raise PreconditionError("gamma must be non-negative")
    centers, members = _greedy_clusters(lib.points, float(gamma))
    return ClusteredLibrary(lib, float(gamma), centers, members)


def default_cluster_target(n: int) -> int:
    return max(1, math.floor(math.sqrt(n) * 1.5))


def _count_clusters(points, gamma, cap):
    try:
        return len(_greedy_clusters(points, gamma, max_clusters=cap)[0])
    except _ClusterAborted:
        return cap + 1


def suggest_threshold(lib: ShapeLibrary, target_clusters: int | None = None, tol: float = 0.2) -> float:
    """Bisect on ``gamma`` until clustering yields ``target_clusters`` (+-``tol``)."""
    N = len(lib)
    target = default_cluster_target(N) if target_clusters is None else int(target_clusters)
    if not 1 <= target <= N:
        raise PreconditionError("target cluster count must lie in [1, N_lib]")
    if target == N:
        return 0.0
    lo_ok, hi_ok = target * (1 - tol), target * (1 + tol)
    cap = int(math.floor(hi_ok)) + 1
    hi = float(_similarity_to(lib.points, np.arange(N), lib.points[0]).max()) * 2.0
    if target == 1:
        return hi
    lo = 0.0
    resolution = 1e-6 * hi
    gamma = hi
    while hi - lo > resolution:
        gamma = 0.5 * (lo + hi)
        count = _count_clusters(lib.points, gamma, cap)
        if lo_ok <= count <= hi_ok:
            return gamma
        if count > hi_ok:
            lo = gamma
        else:
            hi = gamma
    return gamma


def two_pass_search(clib: ClusteredLibrary, score) -> tuple[int, float, int]:
    """Score cluster centers, then every member of the best cluster.

    ``score`` maps an index array to an array of scores. Returns
    ``(index, score, evaluations)``; ties go to the lowest index.
    """
    if len(clib) == 0:
        raise EmptyLibrary("clustered library is empty")
    center_scores = np.asarray(score(clib.centers), dtype=float)
    best_cluster = int(np.argmin(center_scores))
    mem = clib.members[best_cluster]
    member_scores = np.asarray(score(mem), dtype=float)
    j = int(np.argmin(member_scores))
    return int(mem[j]), float(member_scores[j]), len(clib) + mem.size


def linear_search(n: int, score) -> tuple[int, float, int]:
    if n == 0:
        raise EmptyLibrary("library is empty")
    scores = np.asarray(score(np.arange(n)), dtype=float)
    j = int(np.argmin(scores))
    return j, float(scores[j]), n


# -- serialization ----------------------------------------------------------


def library_to_dict(lib: ShapeLibrary) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "model_spec": lib.spec.to_dict(),
        "seed": lib.seed,
        "bounds": lib.bounds.tolist(),
        "D": lib.D,
        "shapes": [
            {"q": q.tolist(), "points": p.tolist(), "tip_rotation": r.ravel().tolist()}
            for q, p, r in zip(lib.configs, lib.points, lib.tip_rotations)
        ],
    }


def library_from_dict(d: dict) -> ShapeLibrary:
    if d.get("format_version") != FORMAT_VERSION:
        raise PreconditionError(f"unsupported library format {d.get('format_version')!r}")
    spec = ModelSpec.from_dict(d["model_spec"])
    shapes = d["shapes"]
    if not shapes:
        raise EmptyLibrary("library file holds no shapes")
    configs = np.array([s["q"] for s in shapes], dtype=float)
    points = np.array([s["points"] for s in shapes], dtype=float)
    rots = np.array([s["tip_rotation"] for s in shapes], dtype=float).reshape(-1, 3, 3)
    if points.shape[1] != d["D"] + 1:
        raise DimensionError("point count does not match D")
    return ShapeLibrary(spec, d.get("seed"), np.array(d["bounds"], dtype=float), configs, points, rots)


def save_library(lib: ShapeLibrary, path, clusters: ClusteredLibrary | None = None) -> int:
    """Write the library JSON (and optional cluster sidecar); returns bytes written."""
    path = Path(path)
    text = json.dumps(library_to_dict(lib), separators=(",", ":"))
    path.write_text(text)
    if clusters is not None:
        sidecar_path(path).write_text(json.dumps(clusters.to_dict(), separators=(",", ":")))
    return len(text)


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".clusters.json")


def load_library(path) -> ShapeLibrary:
    return library_from_dict(json.loads(Path(path).read_text()))


def load_clusters(lib: ShapeLibrary, path) -> ClusteredLibrary:
    d = json.loads(Path(path).read_text())
    centers = np.array([c["center"] for c in d["clusters"]], dtype=int)
    members = [np.array(c["members"], dtype=int) for c in d["clusters"]]
    return ClusteredLibrary(lib, float(d["gamma"]), centers, members)
