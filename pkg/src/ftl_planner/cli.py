"""Command-line front end: gen-library, plan, benchmark, ablate, validate.

Exit codes: 0 success, 2 I/O error, 3 invalid input, 4 failed check under --strict.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import FTLError
from .forward_model import ModelSpec, PCCModel, SymmetryDescriptor
from .interpolation import interpolate, prealign_radial
from .planner import WaypointPath, plan_sparse
from .shape_library import (generate_library, load_clusters, load_library, save_library, sidecar_path,
                            suggest_threshold, threshold_cluster)

EXIT_OK, EXIT_IO, EXIT_INPUT, EXIT_CHECK = 0, 2, 3, 4


class CLIError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def resolve_threads(value: int | None) -> int:
    if value is not None:
        return max(1, value)
    env = os.environ.get("FTL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise CLIError(f"FTL_THREADS must be an integer, got {env!r}", EXIT_INPUT) from None
    return 1


def _write_atomic(path: Path, text: str) -> int:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_text(text)
        tmp.replace(path)
    except OSError as exc:
        raise CLIError(f"cannot write {path}: {exc}", EXIT_IO) from None
    return len(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, default=_json_default)


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _run_config(args) -> dict:
    # thread count is left out: results do not depend on it
    d = {k: v for k, v in vars(args).items() if k not in ("func", "threads")}
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in d.items()}


def _model_spec(args) -> ModelSpec:
    return ModelSpec(segment_count=args.segments, D=args.D, kappa_max=args.kappa_max,
                     symmetry=SymmetryDescriptor.parse(getattr(args, "symmetry", "continuous")))


# -- gen-library ---------------------------------------------------------------------


def cmd_gen_library(args) -> int:
    spec = _model_spec(args)
    lib = generate_library(spec, args.n, args.seed)
    clusters = None
    if args.cluster_target is not None or args.gamma is not None:
        gamma = args.gamma if args.gamma is not None else suggest_threshold(lib, args.cluster_target)
        clusters = threshold_cluster(lib, gamma)
    out = Path(args.out)
    if not out.parent.exists():
        raise CLIError(f"output directory {out.parent} does not exist", EXIT_IO)
    try:
        nbytes = save_library(lib, out, clusters)
    except OSError as exc:
        raise CLIError(f"cannot write {out}: {exc}", EXIT_IO) from None
    print(f"N_lib={len(lib)} D={lib.D} bounds=[{-spec.kappa_max:.6g}, {spec.kappa_max:.6g}]^{spec.dof} "
          f"bytes={nbytes} -> {out}")
    if clusters is not None:
        print(f"clusters={len(clusters)} gamma={clusters.gamma:.6g} -> {sidecar_path(out)}")
    return EXIT_OK


# -- plan -------------------------------------------------------------------------------


def _read_json(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CLIError(f"cannot read {path}: {exc}", EXIT_IO) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CLIError(f"{path} is not valid JSON: {exc}", EXIT_INPUT) from None


def load_path_file(path) -> WaypointPath:
    d = _read_json(path)
    try:
        return WaypointPath.from_dict(d if isinstance(d, dict) else {"waypoints": d})
    except (KeyError, TypeError, ValueError) as exc:
        raise CLIError(f"{path} does not hold a waypoint path: {exc}", EXIT_INPUT) from None


def _path_from_args(args, model) -> WaypointPath:
    from .experiments.paths import PathSpec, generate_path

    if args.path:
        return load_path_file(args.path)
    cls, _, seed = args.generator.partition(":")
    try:
        return generate_path(PathSpec(cls, int(seed or 0), args.n), model)
    except ValueError as exc:
        raise CLIError(f"bad generator {args.generator!r}: {exc}", EXIT_INPUT) from None


def cmd_plan(args) -> int:
    from .experiments.metrics import eval_plan

    if args.library:
        try:
            lib = load_library(args.library)
        except OSError as exc:
            raise CLIError(f"cannot read {args.library}: {exc}", EXIT_IO) from None
        except (json.JSONDecodeError, KeyError) as exc:
            raise CLIError(f"{args.library} is not a shape library: {exc}", EXIT_INPUT) from None
    else:
        lib = generate_library(_model_spec(args), args.n_lib, args.lib_seed)
    model = PCCModel(lib.spec)
    path = _path_from_args(args, model)
    if len(path) < 3:
        raise CLIError("planning needs at least three non-collinear active waypoints", EXIT_INPUT)
    target = lib
    if args.mode == "clustered":
        side = sidecar_path(args.library) if args.library else None
        if args.gamma is None and args.cluster_target is None and side is not None and side.exists():
            target = load_clusters(lib, side)
        else:
            gamma = args.gamma if args.gamma is not None else suggest_threshold(lib, args.cluster_target)
            target = threshold_cluster(lib, gamma)
    sym = SymmetryDescriptor.parse(args.symmetry)
    t0 = time.perf_counter()
    sparse = plan_sparse(target, path, args.mode)
    dense = interpolate(prealign_radial(sparse, sym, model, lib), args.h, model)
    elapsed = time.perf_counter() - t0
    metrics = eval_plan(dense, path, model, compute_time_s=elapsed).to_dict()
    if args.no_timing:
        metrics.pop("compute_time_s")
    doc = {
        "tool_version": __version__,
        "config": _run_config(args),
        "path": path.to_dict(),
        "sparse": sparse.to_dict(),
        "dense": dense.to_dict(),
        "metrics": metrics,
    }
    _write_atomic(Path(args.out), _dump(doc))
    print(f"{len(path)} waypoints, mode={args.mode}: tip_dev={metrics['tip_dev_pct']:.3g}% "
          f"shape_dev={metrics['shape_dev_pct']:.3g}% -> {args.out}")
    return EXIT_OK


# -- studies ----------------------------------------------------------------------------

PRESETS = {
    "table1": ("benchmark", {}),
    "figA1": ("cluster", {}),
    "figA2": ("libsize", {}),
    "fig4": ("libsize", {"dense": True}),
    "tableA1": ("symmetry", {}),
}


def _strip_timing(report):
    for r in report.rows:
        for k in [k for k in r if k.startswith("time")]:
            r.pop(k)
    for a in report.aggregates:
        for k in [k for k in a if k.startswith("time")]:
            a.pop(k)
    report.extra.pop("time_slopes", None)


def _emit(report, args, stem=None):
    if args.no_timing:
        _strip_timing(report)
    report.config["run"] = _run_config(args)
    try:
        csv_path, json_path = report.write(args.out, stem)
    except OSError as exc:
        raise CLIError(f"cannot write reports to {args.out}: {exc}", EXIT_IO) from None
    print(f"{report.study}: {len(report.rows)} rows -> {csv_path}, {json_path}")
    for a in report.aggregates:
        print("  " + " ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in a.items()))


def cmd_benchmark(args) -> int:
    from .experiments.benchmark import BenchmarkConfig, run_benchmark

    if args.preset and PRESETS[args.preset][0] != "benchmark":
        raise CLIError(f"preset {args.preset} belongs to `ablate`", EXIT_INPUT)
    cfg = BenchmarkConfig(n_lib=args.n_lib, lib_seed=args.lib_seed, gamma=args.gamma,
                          target_clusters=args.cluster_target, n=args.n, h=args.h,
                          classes=tuple(args.classes), paths_per_class=args.paths_per_class,
                          path_seed=args.path_seed, methods=tuple(args.methods), symmetry=args.symmetry,
                          D=args.D, threads=args.threads)
    report = run_benchmark(cfg)
    worst_tip = max((r["tip_dev_pct"] for r in report.rows if r["method"] != "optimization"), default=0.0)
    _emit(report, args, args.preset)
    if args.strict and worst_tip * 3.0 / 100.0 >= 1e-9:
        print(f"check failed: sampling tip deviation {worst_tip:.3g}%", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def cmd_ablate(args) -> int:
    from .experiments.ablations import AblationConfig, ablate_cluster, ablate_libsize, ablate_symmetry

    study, kw = args.study, {}
    if args.preset:
        study, kw = PRESETS[args.preset]
        if study == "benchmark":
            raise CLIError("preset table1 belongs to `benchmark`", EXIT_INPUT)
    if study is None:
        raise CLIError("give --study or --preset", EXIT_INPUT)
    cfg = AblationConfig(n_lib=args.n_lib, lib_seed=args.lib_seed, classes=tuple(args.classes),
                         paths_per_class=args.paths_per_class, path_seed=args.path_seed, n=args.n, h=args.h,
                         D=args.D)
    if study == "cluster":
        report = ablate_cluster(cfg)
    elif study == "libsize":
        report = ablate_libsize(cfg, dense=kw.get("dense", args.dense))
    else:
        report = ablate_symmetry(cfg)
    _emit(report, args, args.preset)
    return EXIT_OK


def cmd_validate(args) -> int:
    from .experiments.common import PlanCache, StudyReport, get_library, path_specs
    from .experiments.validation import (binomial_sigma, convergence_study, coverage_study, lipschitz_study,
                                         tip_exact_sweep)

    spec = ModelSpec(D=args.D)
    model = PCCModel(spec)
    checks = ["tip-exact", "convergence", "coverage", "lipschitz"] if args.check == "all" else [args.check]
    per_class = max(1, -(-args.paths // 3))
    specs = path_specs(per_class=per_class, seed0=args.path_seed)[: args.paths]
    cache = PlanCache()
    rows, failed = [], []
    needs_plans = {"tip-exact", "convergence"} & set(checks)
    plans = []
    if needs_plans or "lipschitz" in checks:
        lib = get_library(spec, args.n_lib, args.lib_seed)
    if needs_plans:
        cont = SymmetryDescriptor("continuous")
        plans = [prealign_radial(cache.sparse(ps, model, lib)[0], cont, model) for ps in specs]
    if "tip-exact" in checks:
        worst = tip_exact_sweep(plans, model, args.h)
        ok = worst < 1e-9
        rows.append({"check": "tip-exact", "value": worst, "threshold": 1e-9, "pass": ok})
    if "convergence" in checks:
        results = [convergence_study(p, model) for p in plans]
        slopes = [r.slope for r in results if not r.floor]
        frac = float(np.mean([s <= -1.8 for s in slopes])) if slopes else 1.0
        rows.append({"check": "convergence", "value": frac, "threshold": 0.9, "pass": frac >= 0.9,
                     "floor_paths": sum(r.floor for r in results)})
    if "coverage" in checks:
        n_values = (100, 300, 1000, 3000, 10000, 30000)
        probs = coverage_study(args.eps, n_values, trials=args.trials)
        tol = [2 * binomial_sigma(p, args.trials) for p in probs]
        mono = all(probs[k + 1] >= probs[k] - tol[k] - tol[k + 1] for k in range(len(probs) - 1))
        ok = mono and probs[-1] >= 0.95 and probs[0] < 0.5
        rows.append({"check": "coverage", "value": float(probs[-1]), "threshold": 0.95, "pass": ok,
                     "probabilities": probs.tolist()})
    if "lipschitz" in checks:
        est, ok = lipschitz_study(lib, model, [cache.path(ps, model) for ps in specs[:3]])
        rows.append({"check": "lipschitz", "value": float(est.max()), "threshold": "finite, stable within 2x",
                     "pass": ok, "estimates": est.tolist()})
    for r in rows:
        print(f"{r['check']}: {'PASS' if r['pass'] else 'FAIL'} value={r['value']:.4g} threshold={r['threshold']}")
        if not r["pass"]:
            failed.append(r["check"])
    report = StudyReport("validate", {"run": _run_config(args)}, rows, [])
    try:
        report.write(args.out, "validate")
    except OSError as exc:
        raise CLIError(f"cannot write reports to {args.out}: {exc}", EXIT_IO) from None
    if failed and args.strict:
        return EXIT_CHECK
    return EXIT_OK


# -- parser ----------------------------------------------------------------------------


def _add_model(p, symmetry=True):
    p.add_argument("--segments", type=int, default=3)
    p.add_argument("--D", type=int, default=60, help="backbone points minus one")
    p.add_argument("--kappa-max", type=float, default=float(np.pi / 2))
    if symmetry:
        p.add_argument("--symmetry", default="continuous", help="none | continuous | discrete:K | data_driven:GAMMA")


def _add_study(p):
    p.add_argument("--n-lib", type=int, default=20000)
    p.add_argument("--lib-seed", type=int, default=0)
    p.add_argument("--classes", nargs="+", default=["C", "S", "Robot"])
    p.add_argument("--path-seed", type=int, default=0)
    p.add_argument("--n", type=int, default=10, help="waypoints per path")
    p.add_argument("--h", type=int, default=10, help="interpolation steps per interval")
    p.add_argument("--D", type=int, default=60)
    p.add_argument("--out", type=Path, default=Path("reports"))
    p.add_argument("--no-timing", action="store_true", help="drop wall-clock columns so reruns are byte-identical")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ftl-plan", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--threads", type=int, default=None, help="worker cap (falls back to FTL_THREADS)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-library", help="sample and save a shape library")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--cluster-target", type=int, default=None, help="also write a cluster sidecar")
    p.add_argument("--gamma", type=float, default=None)
    _add_model(p, symmetry=False)
    p.set_defaults(func=cmd_gen_library)

    p = sub.add_parser("plan", help="plan one path")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--path", type=Path, help="JSON file with a waypoints array")
    src.add_argument("--generator", help="CLASS:SEED, e.g. C:3")
    p.add_argument("--library", type=Path, default=None)
    p.add_argument("--n-lib", type=int, default=20000, help="library size when no file is given")
    p.add_argument("--lib-seed", type=int, default=0)
    p.add_argument("--mode", choices=["linear", "clustered"], default="linear")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--cluster-target", type=int, default=None)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--h", type=int, default=10)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--no-timing", action="store_true")
    _add_model(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("benchmark", help="compare the linear, clustered and optimisation planners")
    p.add_argument("--preset", choices=["table1"], default=None)
    p.add_argument("--paths-per-class", type=int, default=40)
    p.add_argument("--methods", nargs="+", default=["linear", "clustered", "optimization"])
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--cluster-target", type=int, default=None)
    p.add_argument("--symmetry", default="continuous")
    p.add_argument("--strict", action="store_true", help="exit 4 unless sampling tip deviation is zero")
    _add_study(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("ablate", help="cluster / library-size / symmetry ablations")
    p.add_argument("--study", choices=["cluster", "libsize", "symmetry"], default=None)
    p.add_argument("--preset", choices=["figA1", "figA2", "fig4", "tableA1"], default=None)
    p.add_argument("--paths-per-class", type=int, default=15)
    p.add_argument("--dense", action="store_true", help="libsize: also record interpolated deviation")
    _add_study(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("validate", help="empirical checks of the guarantees")
    p.add_argument("--check", choices=["tip-exact", "convergence", "coverage", "lipschitz", "all"], default="all")
    p.add_argument("--paths", type=int, default=10)
    p.add_argument("--n-lib", type=int, default=5000)
    p.add_argument("--lib-seed", type=int, default=0)
    p.add_argument("--path-seed", type=int, default=0)
    p.add_argument("--h", type=int, default=10)
    p.add_argument("--D", type=int, default=60)
    p.add_argument("--eps", type=float, default=0.3, help="coverage radius in the unit-scaled box")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--out", type=Path, default=Path("reports"))
    p.add_argument("--strict", action="store_true", help="exit 4 when a check fails")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.threads = resolve_threads(args.threads)
        return args.func(args)
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (FTLError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
