"""Empirical checks of the planner's guarantees: convergence, coverage, Lipschitz, tip exactness."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ..interpolation import inter_step_tip_error, interpolate, tip_errors
from ..planner import SparsePlan, candidate
from ..shape_library import ShapeLibrary
from .ablations import loglog_slope

H_VALUES = (2, 4, 8, 16, 32)


@dataclass
class ConvergenceResult:
    h_values: tuple
    max_errors: np.ndarray
    slope: float | None
    floor: bool

    @property
    def ratio(self) -> float:
        """``error(h_min) / error(h_max)``."""
        return float(self.max_errors[0] / max(self.max_errors[-1], 1e-300))

    def to_dict(self) -> dict:
        return {"h_values": list(self.h_values), "max_errors": self.max_errors.tolist(),
                "slope": self.slope, "floor": self.floor}


def convergence_study(plan: SparsePlan, model, h_values=H_VALUES, beta_samples: int = 9,
                      floor_tol: float = 1e-12) -> ConvergenceResult:
    """Max inter-step tip error for each ``h`` and the log-log slope of the trend.

    If every error is below ``floor_tol`` times the path length the plan moves
    exactly along straight segments and no slope is reported.
    """
    errs = np.array([inter_step_tip_error(interpolate(plan, h, model), model, beta_samples).max()
                     for h in h_values])
    scale = max(plan.path.length, 1.0)
    if np.all(errs <= floor_tol * scale):
        return ConvergenceResult(tuple(h_values), errs, None, True)
    return ConvergenceResult(tuple(h_values), errs, loglog_slope(h_values, errs), False)


def coverage_study(eps: float, n_values, trials: int = 100, probes: int = 1000, dim: int = 6,
                   norm: str = "inf", seed: int = 0) -> np.ndarray:
    """Probability that ``n`` uniform samples in the unit cube cover ``probes`` uniform
    probe points within ``eps``; one entry per ``n``.

    Configurations are compared after scaling the sampling box to the unit cube.
    """
    p = np.inf if norm == "inf" else 2
    rng = np.random.default_rng(seed)
    out = []
    for n in n_values:
        hits = 0
        for _ in range(trials):
            tree = cKDTree(rng.random((n, dim)))
            d, _ = tree.query(rng.random((probes, dim)), p=p, distance_upper_bound=eps * (1 + 1e-12))
            hits += bool(np.all(d <= eps))
        out.append(hits / trials)
    return np.array(out)


def binomial_sigma(p: float, trials: int) -> float:
    return float(np.sqrt(max(p * (1 - p), 1e-12) / trials))


def lipschitz_probe(lib: ShapeLibrary, model, path, i: int, samples: int = 20, delta: float = 1e-4,
                    seed: int = 0) -> np.ndarray:
    """Ratios ``|E(q + d) - E(q)| / |d|`` for random library shapes and small perturbations."""
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(lib), size=min(samples, len(lib)), replace=False)
    base = [candidate(lib, int(k), path, i).deviation for k in idx]
    Q = lib.configs[idx]
    step = rng.normal(size=Q.shape)
    step *= delta / np.linalg.norm(step, axis=1, keepdims=True)
    lo, hi = lib.bounds[:, 0], lib.bounds[:, 1]
    Qp = np.clip(Q + step, lo, hi)
    pts, rots = model.shapes(Qp)
    pert = ShapeLibrary(lib.spec, None, lib.bounds, Qp, pts, rots)
    moved = [candidate(pert, k, path, i).deviation for k in range(len(idx))]
    dq = np.linalg.norm(Qp - Q, axis=1)
    return np.abs(np.array(moved) - np.array(base)) / np.maximum(dq, 1e-300)


LIPSCHITZ_DELTAS = (0.1, 0.01, 0.001)


def lipschitz_study(lib: ShapeLibrary, model, paths, deltas=LIPSCHITZ_DELTAS, samples: int = 20,
                    seed: int = 0) -> tuple[np.ndarray, bool]:
    """Largest deviation ratio for each step size, and whether refinement keeps it
    finite and within a factor of two between consecutive step sizes."""
    est = np.array([max(lipschitz_probe(lib, model, p, len(p), samples, d, seed).max() for p in paths)
                    for d in deltas])
    ratios = est[1:] / np.maximum(est[:-1], 1e-300)
    stable = bool(np.all(np.isfinite(est)) and np.all((ratios >= 0.5) & (ratios <= 2.0)))
    return est, stable


def tip_exact_sweep(plans, model, h: int = 10) -> float:
    """Largest tip error over every dense step of every plan."""
    worst = 0.0
    for plan in plans:
        worst = max(worst, float(tip_errors(interpolate(plan, h, model), model).max()))
    return worst


__all__ = ["ConvergenceResult", "H_VALUES", "LIPSCHITZ_DELTAS", "binomial_sigma", "convergence_study",
           "coverage_study", "lipschitz_probe", "lipschitz_study", "tip_exact_sweep"]
