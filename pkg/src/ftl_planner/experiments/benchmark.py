"""Benchmark of the linear, clustered and optimisation planners on generated paths."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from ..baseline import BaselineOptions, densify_baseline, solve_baseline
from ..forward_model import ModelSpec, PCCModel, SymmetryDescriptor
from ..interpolation import interpolate, prealign_radial
from .common import PlanCache, StudyReport, get_clusters, get_library, path_specs, summarize
from .metrics import eval_plan, sparse_deviation_pct
from .paths import CLASSES

METHODS = ("linear", "clustered", "optimization")


@dataclass
class BenchmarkConfig:
    n_lib: int = 20000
    lib_seed: int = 0
    gamma: float | None = None
    target_clusters: int | None = None
    n: int = 10
    h: int = 10
    classes: tuple = CLASSES
    paths_per_class: int = 40
    path_seed: int = 0
    methods: tuple = METHODS
    symmetry: str = "continuous"
    D: int = 60
    lambda_tip: float = 10.0
    max_iters: int = 200
    threads: int = 1

    def model_spec(self) -> ModelSpec:
        return ModelSpec(D=self.D, symmetry=SymmetryDescriptor.parse(self.symmetry))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["classes"] = list(self.classes)
        d["methods"] = list(self.methods)
        d.pop("threads")
        return d


def _run_sampling(spec, model, lib, clib, mode, sym, h, cache):
    path = cache.path(spec, model)
    sparse, t_search = cache.sparse(spec, model, lib, mode, clib)
    t0 = time.perf_counter()
    dense = interpolate(prealign_radial(sparse, sym, model, lib), h, model)
    t_interp = time.perf_counter() - t0
    m = eval_plan(dense, path, model, compute_time_s=t_search + t_interp)
    return m, sparse


def _row(spec, method, m, sparse=None, evaluations=None):
    steps = m.step_shape_dev_pct
    return {
        "class": spec.cls,
        "seed": spec.seed,
        "method": method,
        "tip_dev_pct": m.tip_dev_pct,
        "tip_dev_mean_pct": m.tip_dev_mean_pct,
        "shape_dev_pct": m.shape_dev_pct,
        "sparse_dev_pct": float("nan") if sparse is None else sparse_deviation_pct(sparse),
        "time_s": m.compute_time_s,
        "evaluations": -1 if evaluations is None else int(evaluations),
        "_steps": steps,
    }


def run_benchmark(config: BenchmarkConfig | None = None, cache: PlanCache | None = None, progress=None) -> StudyReport:
    cfg = config or BenchmarkConfig()
    cache = cache or PlanCache()
    mspec = cfg.model_spec()
    model = PCCModel(mspec)
    lib = get_library(mspec, cfg.n_lib, cfg.lib_seed)
    clib = None
    if "clustered" in cfg.methods:
        clib = get_clusters(lib, cfg.gamma, cfg.target_clusters)
    sym = mspec.symmetry
    bopts = BaselineOptions(lambda_tip=cfg.lambda_tip, max_iters=cfg.max_iters)
    specs = path_specs(cfg.classes, cfg.paths_per_class, cfg.path_seed, cfg.n)

    def one(spec):
        out = []
        for method in cfg.methods:
            if method in ("linear", "clustered"):
                m, sparse = _run_sampling(spec, model, lib, clib, method, sym, cfg.h, cache)
                out.append(_row(spec, method, m, sparse, sparse.evaluations))
            elif method == "optimization":
                path = cache.path(spec, model)
                t0 = time.perf_counter()
                dense = densify_baseline(solve_baseline(path, model, bopts), cfg.h, model)
                m = eval_plan(dense, path, model, compute_time_s=time.perf_counter() - t0)
                out.append(_row(spec, method, m))
            else:
                raise ValueError(f"unknown method {method!r}")
        if progress:
            progress(spec)
        return out

    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as ex:
            per_path = list(ex.map(one, specs))
    else:
        per_path = [one(s) for s in specs]
    rows = [r for group in per_path for r in group]

    aggregates = []
    for cls in cfg.classes:
        for method in cfg.methods:
            sel = [r for r in rows if r["class"] == cls and r["method"] == method]
            agg = {"class": cls, "method": method, "paths": len(sel)}
            for key in ("tip_dev_pct", "tip_dev_mean_pct", "shape_dev_pct", "sparse_dev_pct", "time_s"):
                s = summarize([r[key] for r in sel])
                agg[f"{key}_mean"] = s["mean"]
                agg[f"{key}_std"] = s["std"]
            agg["shape_dev_pooled_pct"] = float(np.concatenate([r["_steps"] for r in sel]).mean())
            aggregates.append(agg)
    for r in rows:
        r.pop("_steps")
    extra = {"clusters": None if clib is None else {"gamma": clib.gamma, "count": len(clib),
                                                    "max_size": int(clib.sizes.max())}}
    return StudyReport("benchmark", cfg.to_dict(), rows, aggregates, extra)


def aggregate(report: StudyReport, cls: str, method: str) -> dict:
    for a in report.aggregates:
        if a["class"] == cls and a["method"] == method:
            return a
    raise KeyError((cls, method))


def class_rows(report: StudyReport, cls: str, method: str) -> list[dict]:
    return [r for r in report.rows if r["class"] == cls and r["method"] == method]


__all__ = ["BenchmarkConfig", "METHODS", "aggregate", "class_rows", "run_benchmark"]
