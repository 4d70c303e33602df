"""Cluster-size, library-size and symmetry ablations on the 45-path set."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np

from ..forward_model import ModelSpec, PCCModel, SymmetryDescriptor
from ..interpolation import interpolate, prealign_radial
from ..planner import plan_sparse
from ..shape_library import ClusteredLibrary, default_cluster_target, suggest_threshold
from .common import PlanCache, StudyReport, get_clusters, get_library, path_specs, summarize
from .metrics import eval_plan, search_deviation_pct, sparse_deviation_pct
from .paths import CLASSES


@dataclass
class AblationConfig:
    n_lib: int = 20000
    lib_seed: int = 0
    classes: tuple = CLASSES
    paths_per_class: int = 15
    path_seed: int = 0
    n: int = 10
    h: int = 10
    D: int = 60

    def to_dict(self) -> dict:
        d = asdict(self)
        d["classes"] = list(self.classes)
        return d

    def setup(self):
        spec = ModelSpec(D=self.D)
        return spec, PCCModel(spec), path_specs(self.classes, self.paths_per_class, self.path_seed, self.n)


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


# -- clustering ------------------------------------------------------------------

CLUSTER_SIZES = (1, 2, 5, 10, 20, 50, 100, 200, 500, 1000)


def _clusters_for_size(lib, size: float) -> ClusteredLibrary:
    if size <= 1:
        return get_clusters(lib, gamma=0.0)
    target = max(1, int(round(len(lib) / size)))
    key = ("gamma_for", target)
    if key not in lib._cache:
        lib._cache[key] = suggest_threshold(lib, target)
    return get_clusters(lib, gamma=lib._cache[key])


def ablate_cluster(config: AblationConfig | None = None, sizes=CLUSTER_SIZES, cache: PlanCache | None = None,
                   include_linear: bool = True) -> StudyReport:
    """Sparse deviation and search time against average cluster size."""
    cfg = config or AblationConfig()
    cache = cache or PlanCache()
    spec, model, specs = cfg.setup()
    lib = get_library(spec, cfg.n_lib, cfg.lib_seed)
    rows = []
    if include_linear:
        for ps in specs:
            plan, t = cache.sparse(ps, model, lib, "linear")
            rows.append({"class": ps.cls, "seed": ps.seed, "variant": "linear", "gamma": 0.0,
                         "avg_cluster_size": 1.0, "sparse_dev_pct": sparse_deviation_pct(plan),
                         "time_s": t, "evaluations": plan.evaluations})
    for size in sizes:
        clib = _clusters_for_size(lib, size)
        avg = len(lib) / len(clib)
        for ps in specs:
            path = cache.path(ps, model)
            t0 = time.perf_counter()
            plan = plan_sparse(clib, path, "clustered")
            t = time.perf_counter() - t0
            rows.append({"class": ps.cls, "seed": ps.seed, "variant": f"size={size}", "gamma": clib.gamma,
                         "avg_cluster_size": avg, "sparse_dev_pct": sparse_deviation_pct(plan),
                         "time_s": t, "evaluations": plan.evaluations})
    aggregates = []
    variants = (["linear"] if include_linear else []) + [f"size={s}" for s in sizes]
    for v in variants:
        sel = [r for r in rows if r["variant"] == v]
        dev, tm = summarize([r["sparse_dev_pct"] for r in sel]), summarize([r["time_s"] for r in sel])
        aggregates.append({"variant": v, "gamma": sel[0]["gamma"], "avg_cluster_size": sel[0]["avg_cluster_size"],
                           "sparse_dev_pct_mean": dev["mean"], "sparse_dev_pct_std": dev["std"],
                           "time_s_mean": tm["mean"], "time_s_std": tm["std"]})
    return StudyReport("ablate_cluster", {**cfg.to_dict(), "sizes": list(sizes)}, rows, aggregates)


# -- library size ------------------------------------------------------------------

LIB_SIZES = (1000, 2000, 5000, 10000, 20000)


def ablate_libsize(config: AblationConfig | None = None, sizes=LIB_SIZES, cache: PlanCache | None = None,
                   dense: bool = False) -> StudyReport:
    """Nested library prefixes; linear and clustered sparse deviation and search time.

    With ``dense`` the interpolated deviation (continuous pre-alignment) is recorded too.
    """
    cfg = config or AblationConfig()
    cache = cache or PlanCache()
    spec, model, specs = cfg.setup()
    get_library(spec, max(sizes), cfg.lib_seed)  # build the largest once; the rest are prefixes
    rows = []
    for N in sizes:
        lib = get_library(spec, N, cfg.lib_seed)
        clib = get_clusters(lib, target=default_cluster_target(N))
        for ps in specs:
            for mode in ("linear", "clustered"):
                plan, t = cache.sparse(ps, model, lib, mode, clib if mode == "clustered" else None)
                row = {"class": ps.cls, "seed": ps.seed, "n_lib": N, "mode": mode,
                       "sparse_dev_pct": sparse_deviation_pct(plan), "search_dev_pct": search_deviation_pct(plan),
                       "time_s": t, "evaluations": plan.evaluations}
                if dense:
                    sym = SymmetryDescriptor("continuous")
                    d = interpolate(prealign_radial(plan, sym, model), cfg.h, model)
                    row["dense_dev_pct"] = eval_plan(d, cache.path(ps, model), model).shape_dev_pct
                rows.append(row)
    aggregates = []
    for mode in ("linear", "clustered"):
        for N in sizes:
            sel = [r for r in rows if r["mode"] == mode and r["n_lib"] == N]
            agg = {"mode": mode, "n_lib": N,
                   "time_s_mean": summarize([r["time_s"] for r in sel])["mean"]}
            for cls in cfg.classes:
                agg[f"median_{cls}"] = summarize([r["sparse_dev_pct"] for r in sel if r["class"] == cls])["median"]
            agg["sparse_dev_pct_mean"] = summarize([r["sparse_dev_pct"] for r in sel])["mean"]
            if dense:
                agg["dense_dev_pct_mean"] = summarize([r["dense_dev_pct"] for r in sel])["mean"]
            aggregates.append(agg)
    slopes = {}
    for mode in ("linear", "clustered"):
        t = [a["time_s_mean"] for a in aggregates if a["mode"] == mode]
        slopes[mode] = loglog_slope(sizes, t)
    return StudyReport("ablate_libsize", {**cfg.to_dict(), "sizes": list(sizes), "dense": dense}, rows, aggregates,
                       {"time_slopes": slopes})


# -- symmetry ------------------------------------------------------------------------

SYMMETRY_VARIANTS = ("none", "discrete:3", "continuous")


def ablate_symmetry(config: AblationConfig | None = None, variants=SYMMETRY_VARIANTS,
                    cache: PlanCache | None = None) -> StudyReport:
    """One linear sparse plan per path, densified under each pre-alignment variant."""
    cfg = config or AblationConfig()
    cache = cache or PlanCache()
    spec, model, specs = cfg.setup()
    lib = get_library(spec, cfg.n_lib, cfg.lib_seed)
    rows = []
    for ps in specs:
        path = cache.path(ps, model)
        plan, _ = cache.sparse(ps, model, lib, "linear")
        for v in variants:
            sym = SymmetryDescriptor.parse(v)
            dense = interpolate(prealign_radial(plan, sym, model, lib), cfg.h, model)
            m = eval_plan(dense, path, model)
            rows.append({"class": ps.cls, "seed": ps.seed, "variant": v, "shape_dev_pct": m.shape_dev_pct,
                         "sparse_dev_pct": sparse_deviation_pct(plan), "tip_dev_pct": m.tip_dev_pct})
    aggregates = []
    for cls in list(cfg.classes) + ["Overall"]:
        agg = {"class": cls}
        for v in variants:
            sel = [r["shape_dev_pct"] for r in rows if r["variant"] == v and (cls == "Overall" or r["class"] == cls)]
            s = summarize(sel)
            agg[f"{v}_mean"] = s["mean"]
            agg[f"{v}_std"] = s["std"]
        aggregates.append(agg)
    return StudyReport("ablate_symmetry", {**cfg.to_dict(), "variants": list(variants)}, rows, aggregates)


__all__ = ["AblationConfig", "CLUSTER_SIZES", "LIB_SIZES", "SYMMETRY_VARIANTS", "ablate_cluster",
           "ablate_libsize", "ablate_symmetry", "loglog_slope"]
