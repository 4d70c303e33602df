"""Shared plumbing for the studies: cached libraries, cached sparse plans, reports."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..forward_model import ModelSpec, PCCModel
from ..planner import SparsePlan, WaypointPath, plan_sparse
from ..shape_library import ClusteredLibrary, ShapeLibrary, generate_library, suggest_threshold, threshold_cluster
from .paths import CLASSES, PathSpec, generate_path

SCHEMA_VERSION = 1

_LIBRARIES: dict = {}


def get_library(spec: ModelSpec, n: int, seed: int) -> ShapeLibrary:
    """Library of size ``n``; smaller requests are prefixes of the largest one built so far."""
    key = (json.dumps(spec.to_dict(), sort_keys=True), seed)
    lib = _LIBRARIES.get(key)
    if lib is None or len(lib) < n:
        lib = generate_library(spec, n, seed)
        _LIBRARIES[key] = lib
    return lib if len(lib) == n else _prefix_cached(lib, n)


def _prefix_cached(lib: ShapeLibrary, n: int) -> ShapeLibrary:
    key = ("prefix", n)
    if key not in lib._cache:
        lib._cache[key] = lib.prefix(n)
    return lib._cache[key]


def get_clusters(lib: ShapeLibrary, gamma: float | None = None, target: int | None = None) -> ClusteredLibrary:
    if gamma is None:
        tkey = ("gamma_for", target)
        if tkey not in lib._cache:
            lib._cache[tkey] = suggest_threshold(lib, target)
        gamma = lib._cache[tkey]
    key = ("clusters", float(gamma))
    if key not in lib._cache:
        lib._cache[key] = threshold_cluster(lib, gamma)
    return lib._cache[key]


def path_specs(classes=CLASSES, per_class: int = 40, seed0: int = 0, n: int = 10) -> list[PathSpec]:
    return [PathSpec(c, seed0 + k, n) for c in classes for k in range(per_class)]


class PlanCache:
    """Memo of sparse plans and their search times, keyed by path and search setting."""

    def __init__(self):
        self._plans: dict = {}
        self._paths: dict = {}

    def path(self, spec: PathSpec, model: PCCModel) -> WaypointPath:
        if spec not in self._paths:
            self._paths[spec] = generate_path(spec, model)
        return self._paths[spec]

    def sparse(self, spec: PathSpec, model, lib: ShapeLibrary, mode: str = "linear",
               clib: ClusteredLibrary | None = None) -> tuple[SparsePlan, float]:
        gamma = None if clib is None else clib.gamma
        key = (spec, len(lib), lib.seed, mode, gamma)
        if key not in self._plans:
            path = self.path(spec, model)
            t0 = time.perf_counter()
            plan = plan_sparse(clib if mode == "clustered" else lib, path, mode)
            self._plans[key] = (plan, time.perf_counter() - t0)
        return self._plans[key]


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return v


@dataclass
class StudyReport:
    """Per-path rows, aggregate rows and the configuration that produced them."""

    study: str
    config: dict
    rows: list[dict] = field(default_factory=list)
    aggregates: list[dict] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "tool_version": __version__,
            "study": self.study,
            "config": self.config,
            "aggregates": self.aggregates,
            "rows": self.rows,
            "extra": self.extra,
        }

    def write(self, out_dir, stem: str | None = None) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = stem or self.study
        csv_path = out / f"{stem}.csv"
        json_path = out / f"{stem}.json"
        if self.rows:
            cols = list(self.rows[0].keys())
            with csv_path.open("w", newline="") as fh:
                fh.write(f"# schema_version={SCHEMA_VERSION} tool_version={__version__} study={self.study}\n")
                fh.write(f"# config={json.dumps(self.config, sort_keys=True)}\n")
                w = csv.DictWriter(fh, fieldnames=cols)
                w.writeheader()
                for r in self.rows:
                    w.writerow({k: _fmt(r.get(k)) for k in cols})
        json_path.write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True, default=_json_default))
        return csv_path, json_path


def _json_default(o):
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def summarize(values) -> dict:
    v = np.asarray(values, dtype=float)
    return {"mean": float(v.mean()), "std": float(v.std()), "median": float(np.median(v)), "count": int(v.size)}
