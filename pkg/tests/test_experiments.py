import json
import time

import numpy as np
import pytest

from ftl_planner.experiments.ablations import AblationConfig, ablate_cluster, ablate_libsize, ablate_symmetry, loglog_slope
from ftl_planner.experiments.benchmark import BenchmarkConfig, aggregate, class_rows, run_benchmark
from ftl_planner.experiments.common import PlanCache, StudyReport, get_library, path_specs, summarize
from ftl_planner.experiments.validation import (
    binomial_sigma,
    convergence_study,
    coverage_study,
    lipschitz_probe,
    tip_exact_sweep,
)
from ftl_planner.forward_model import ModelSpec

TINY = dict(n_lib=300, paths_per_class=1)


def test_summarize_and_slope():
    s = summarize([1.0, 2.0, 6.0])
    assert s == {"mean": 3.0, "std": pytest.approx(np.std([1, 2, 6])), "median": 2.0, "count": 3}
    x = np.array([2, 4, 8, 16, 32])
    assert loglog_slope(x, 5.0 / x**2) == pytest.approx(-2.0)


def test_library_cache_prefixes():
    spec = ModelSpec()
    big = get_library(spec, 400, 99)
    small = get_library(spec, 100, 99)
    assert np.array_equal(small.points, big.points[:100])
    assert get_library(spec, 100, 99) is small


def test_path_specs_order():
    specs = path_specs(("C", "S"), 2, seed0=5)
    assert [(s.cls, s.seed) for s in specs] == [("C", 5), ("C", 6), ("S", 5), ("S", 6)]


def test_benchmark_smoke():
    t0 = time.perf_counter()
    rep = run_benchmark(BenchmarkConfig(classes=("C",), methods=("linear", "clustered"), **TINY))
    assert time.perf_counter() - t0 < 5.0
    assert len(rep.rows) == 2
    agg = aggregate(rep, "C", "linear")
    assert agg["paths"] == 1 and agg["tip_dev_pct_mean"] < 1e-9
    assert rep.extra["clusters"]["count"] >= 1


def test_benchmark_all_methods_rows():
    cfg = BenchmarkConfig(paths_per_class=2, n_lib=200, methods=("linear", "optimization"), n=6)
    rep = run_benchmark(cfg)
    assert len(rep.rows) == 3 * 2 * 2
    for cls in cfg.classes:
        assert len(class_rows(rep, cls, "optimization")) == 2
        opt = aggregate(rep, cls, "optimization")
        lin = aggregate(rep, cls, "linear")
        assert opt["tip_dev_pct_mean"] > 0 and lin["tip_dev_pct_mean"] < 1e-9
        assert np.isnan(opt["sparse_dev_pct_mean"])
        assert opt["shape_dev_pooled_pct"] > 0


def strip_times(d):
    d = json.loads(json.dumps(d, default=float))
    for r in d["rows"] + d["aggregates"]:
        for k in [k for k in r if k.startswith("time_s")]:
            r.pop(k)
    return d


def test_benchmark_deterministic():
    cfg = BenchmarkConfig(classes=("S", "Robot"), methods=("linear", "clustered"), **TINY)
    a = run_benchmark(cfg, PlanCache()).to_dict()
    b = run_benchmark(cfg, PlanCache()).to_dict()
    assert strip_times(a) == strip_times(b)


def test_threads_do_not_change_results():
    cfg = BenchmarkConfig(classes=("C", "S"), methods=("linear",), n_lib=200, paths_per_class=2)
    a = run_benchmark(cfg, PlanCache()).to_dict()
    cfg.threads = 3
    b = run_benchmark(cfg, PlanCache()).to_dict()
    assert strip_times(a) == strip_times(b)
    assert "threads" not in b["config"]


def test_report_write(tmp_path):
    rep = StudyReport("demo", {"n": 3}, [{"a": 0.1, "b": "x"}, {"a": 1 / 3, "b": "y"}], [{"m": np.float64(2.5)}])
    csv_path, json_path = rep.write(tmp_path)
    lines = csv_path.read_text().splitlines()
    assert lines[0].startswith("# schema_version=1")
    assert lines[2] == "a,b"
    assert float(lines[4].split(",")[0]) == 1 / 3
    d = json.loads(json_path.read_text())
    assert d["aggregates"][0]["m"] == 2.5 and d["config"] == {"n": 3}


def test_ablate_cluster_size_one_is_linear():
    cfg = AblationConfig(n_lib=300, paths_per_class=1)
    rep = ablate_cluster(cfg, sizes=(1, 5, 30))
    lin = {(r["class"], r["seed"]): r["sparse_dev_pct"] for r in rep.rows if r["variant"] == "linear"}
    one = {(r["class"], r["seed"]): r["sparse_dev_pct"] for r in rep.rows if r["variant"] == "size=1"}
    assert lin == one
    for r in rep.rows:
        assert r["sparse_dev_pct"] >= lin[(r["class"], r["seed"])] - 1e-12


def test_ablate_libsize_superset_monotone():
    cfg = AblationConfig(n_lib=800, paths_per_class=2)
    sizes = (100, 200, 400, 800)
    rep = ablate_libsize(cfg, sizes=sizes)
    for cls in cfg.classes:
        for seed in range(2):
            devs = [r["search_dev_pct"] for r in rep.rows
                    if r["class"] == cls and r["seed"] == seed and r["mode"] == "linear"]
            assert all(b <= a + 1e-12 for a, b in zip(devs, devs[1:]))
    assert set(rep.extra["time_slopes"]) == {"linear", "clustered"}


def test_ablate_symmetry_shares_sparse_plan():
    cfg = AblationConfig(n_lib=300, paths_per_class=1)
    rep = ablate_symmetry(cfg)
    for cls in cfg.classes:
        rows = [r for r in rep.rows if r["class"] == cls]
        assert len({r["sparse_dev_pct"] for r in rows}) == 1
        assert all(r["tip_dev_pct"] < 1e-9 for r in rows)
    assert rep.aggregates[-1]["class"] == "Overall"


def test_convergence_slope_on_curved_paths(sparse_plans, model):
    for plan in sparse_plans.values():
        res = convergence_study(plan, model)
        assert not res.floor
        assert res.slope <= -1.8
        assert res.ratio >= 100


def test_convergence_floor_on_straight_path(model, straight_plan):
    res = convergence_study(straight_plan, model)
    assert res.floor and res.slope is None


def test_coverage_trend():
    p = coverage_study(0.3, [10, 300, 3000, 30000], trials=20, probes=300)
    assert p[0] == 0.0 and p[-1] == 1.0
    for a, b in zip(p, p[1:]):
        assert b >= a - 2 * max(binomial_sigma(a, 20), binomial_sigma(b, 20))
    assert coverage_study(0.05, [1], trials=20)[0] == 0.0


def test_lipschitz_probe_is_finite_and_stable(small_lib, paths, model):
    coarse = lipschitz_probe(small_lib, model, paths["C"], 6, samples=15, delta=1e-3, seed=1)
    fine = lipschitz_probe(small_lib, model, paths["C"], 6, samples=15, delta=1e-4, seed=1)
    assert np.all(np.isfinite(coarse)) and np.all(np.isfinite(fine))
    assert fine.max() < 3 * coarse.max() + 1.0


def test_tip_exact_sweep(sparse_plans, model):
    assert tip_exact_sweep(sparse_plans.values(), model) < 1e-9
