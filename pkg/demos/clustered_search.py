"""
Trading accuracy for speed with clustered search
=================================================

Greedy threshold clustering groups similar shapes. The clustered search
scores one representative per cluster and then only the members of the best
cluster, so it touches a small fraction of the library.
"""

import time

from ftl_planner.experiments.paths import gen_s_curve
from ftl_planner.experiments.metrics import sparse_deviation_pct
from ftl_planner.forward_model import ModelSpec
from ftl_planner.planner import plan_sparse
from ftl_planner.shape_library import default_cluster_target, generate_library, suggest_threshold, threshold_cluster

lib = generate_library(ModelSpec(), 10000, seed=0)

# pick the radius that yields about 1.5 sqrt(N) clusters
gamma = suggest_threshold(lib, default_cluster_target(len(lib)))
clib = threshold_cluster(lib, gamma)
print(f"gamma={gamma:.2f}: {len(clib)} clusters, largest has {clib.sizes.max()} shapes")

path = gen_s_curve(seed=1)
for mode, source in (("linear", lib), ("clustered", clib)):
    t0 = time.perf_counter()
    plan = plan_sparse(source, path, mode)
    dt = time.perf_counter() - t0
    print(f"{mode:9s} {dt:6.2f} s  {plan.evaluations:7d} shape evaluations  "
          f"sparse deviation {sparse_deviation_pct(plan):.2f}%")

# with gamma = 0 every shape is its own cluster and the two searches agree
exact = plan_sparse(threshold_cluster(lib, 0.0), path, "clustered")
print("gamma=0 matches linear:", [e.library_index for e in exact.entries] ==
      [e.library_index for e in plan_sparse(lib, path, "linear").entries])
