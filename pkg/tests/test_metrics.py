import math
from dataclasses import replace

import numpy as np
import pytest

from ftl_planner.errors import ConsistencyError
from ftl_planner.experiments.metrics import eval_plan, path_prefix, sparse_deviation_pct
from ftl_planner.forward_model import ModelSpec, PCCModel
from ftl_planner.interpolation import DensePlan, interpolate, step_grid
from ftl_planner.planner import WaypointPath


def rigid_plan(path, h, configs, base_t, base_R=None):
    """Dense plan with given configs and base translations, tip poses left as identity."""
    interval, alpha = step_grid(len(path), h)
    N = interval.size
    base_R = np.tile(np.eye(3), (N, 1, 1)) if base_R is None else base_R
    return DensePlan(path, h, np.asarray(configs, float), base_R, np.asarray(base_t, float),
                     np.tile(np.eye(3), (N, 1, 1)), np.zeros((N, 3)), interval, alpha)


def test_prefix_rule():
    path = WaypointPath([[0, 0, 0], [0, 0, 1], [0, 0, 2]])
    pts, s = path_prefix(path, 0, 0.0)
    assert pts.tolist() == [[0, 0, 0]] and s == 0.0
    pts, s = path_prefix(path, 0, 0.5)
    assert pts.tolist() == [[0, 0, 0], [0, 0, 0.5]] and s == 0.5
    pts, s = path_prefix(path, 1, 1.0)
    assert pts.tolist() == [[0, 0, 0], [0, 0, 1], [0, 0, 2]] and s == 2.0


def test_hand_built_offset_plan(model):
    path = WaypointPath([[0, 0, 0], [0, 0, 0.15]])
    off = np.array([0.1, 0.0, 0.0])
    plan = rigid_plan(path, 1, np.zeros((2, 6)), [off + [0, 0, -3.0], off + [0, 0, 0.15 - 3.0]])
    m = eval_plan(plan, path, model)
    # step 0: only the tip is active, 0.1 each way
    d0 = 0.2
    # step 1: four active points at x = 0.1, z = 0, .05, .10, .15 against the two waypoints
    r = math.hypot(0.1, 0.05)
    d1 = (0.1 + r + r + 0.1) / 4 + 0.1
    assert m.shape_dev_pct == pytest.approx((d0 + d1) / 2 / 3 * 100, rel=1e-12)
    assert m.tip_dev_pct == pytest.approx(0.1 / 3 * 100, rel=1e-12)
    assert m.tip_dev_mean_pct == pytest.approx(0.1 / 3 * 100, rel=1e-12)


def test_shape_on_path_scores_zero(model):
    # straight robot sliding along a straight path sampled at its own point spacing
    path = WaypointPath([[0, 0, 0.05 * k] for k in range(61)])
    h = 1
    N = 61
    t = np.array([[0, 0, 0.05 * k - 3.0] for k in range(N)])
    m = eval_plan(rigid_plan(path, h, np.zeros((N, 6)), t), path, model)
    assert m.shape_dev_pct < 1e-9
    assert m.tip_dev_pct < 1e-9


def test_sampling_plan_tip_zero(sparse_plans, paths, model):
    for k, plan in sparse_plans.items():
        m = eval_plan(interpolate(plan, 10, model), paths[k], model)
        assert m.tip_dev_pct < 1e-9
        assert m.shape_dev_pct > 0
        assert m.step_shape_dev_pct.shape == (91,)
        assert "step_shape_dev_pct" not in m.to_dict()


def test_sparse_deviation_pct(sparse_plans):
    plan = sparse_plans["S"]
    assert sparse_deviation_pct(plan) == pytest.approx(plan.deviations.mean() / 3 * 100)


def test_consistency_errors(sparse_plans, paths, model):
    dense = interpolate(sparse_plans["C"], 10, model)
    with pytest.raises(ConsistencyError):
        eval_plan(dense, paths["S"], model)
    with pytest.raises(ConsistencyError):
        eval_plan(replace(dense, alpha=dense.alpha[::-1].copy()), paths["C"], model)
    short = replace(dense, configs=dense.configs[:-1], interval=dense.interval[:-1], alpha=dense.alpha[:-1])
    with pytest.raises(ConsistencyError):
        eval_plan(short, paths["C"], model)


def test_scale_invariance(sparse_plans, paths, model):
    # doubling every length and the robot leaves percentages unchanged
    dense = interpolate(sparse_plans["Robot"], 5, model)
    m1 = eval_plan(dense, paths["Robot"], model)
    big = PCCModel(ModelSpec(segment_length=2.0, kappa_max=np.pi / 4))
    path2 = WaypointPath(2 * paths["Robot"].waypoints)
    dense2 = replace(dense, path=path2, configs=dense.configs / 2, base_translations=2 * dense.base_translations,
                     desired_positions=2 * dense.desired_positions)
    m2 = eval_plan(dense2, path2, big, robot_length=6.0)
    assert m2.shape_dev_pct == pytest.approx(m1.shape_dev_pct, rel=1e-9)
    assert m2.tip_dev_pct == pytest.approx(m1.tip_dev_pct, abs=1e-9)
