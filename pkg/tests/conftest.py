import numpy as np
import pytest

from ftl_planner.experiments.paths import gen_c_curve, gen_robot_curve, gen_s_curve
from ftl_planner.forward_model import ModelSpec, PCCModel
from ftl_planner.geometry import Pose
from ftl_planner.planner import SparseEntry, SparsePlan, WaypointPath, plan_sparse
from ftl_planner.shape_library import generate_library


@pytest.fixture(scope="session")
def model():
    return PCCModel()


@pytest.fixture(scope="session")
def small_lib():
    return generate_library(ModelSpec(), 2000, seed=0)


@pytest.fixture(scope="session")
def paths(model):
    return {"C": gen_c_curve(1), "S": gen_s_curve(1), "Robot": gen_robot_curve(1, model)}


@pytest.fixture(scope="session")
def sparse_plans(small_lib, paths):
    return {k: plan_sparse(small_lib, p, "linear") for k, p in paths.items()}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def straight_plan():
    """Straight robot sliding along a straight path with a constant configuration."""
    path = WaypointPath([[0.0, 0.0, 0.3 * k] for k in range(5)])
    tip = Pose(np.eye(3), [0, 0, 3.0])
    entries = [SparseEntry(np.zeros(6), Pose(np.eye(3), w - [0, 0, 3.0]), 0, 0.0, 0, tip) for w in path.waypoints]
    return SparsePlan(path, entries)


_ACCEPTANCE: dict = {}


@pytest.fixture(scope="session")
def acceptance_record():
    """Stores one (passed, detail) line per acceptance criterion for the run summary."""

    def record(num: int, name: str, passed: bool, detail: str):
        _ACCEPTANCE[num] = (name, passed, detail)
        print(f"criterion {num} {name}: {'PASS' if passed else 'FAIL'} {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        name, passed, detail = _ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d} {name}: {'PASS' if passed else 'FAIL'}  {detail}")
