import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from causal_lab.achronal import chronological_future, build_splitting_surface  # noqa: E402
from causal_lab.distance import build_ladder  # noqa: E402
from causal_lab.experiments import make_graph  # noqa: E402
from causal_lab.metric_models import make_model  # noqa: E402
from causal_lab.time_functions import time_function_from_surface  # noqa: E402

MINK_WINDOW = [[-0.2, 1.2], [-0.6, 0.6]]


@pytest.fixture(scope="session")
def minkowski():
    return make_model("minkowski2d")


@pytest.fixture(scope="session")
def mink_grid():
    return make_graph("minkowski2d", {"window": MINK_WINDOW, "step": 0.05})


@pytest.fixture(scope="session")
def mink_row_split(mink_grid):
    g = mink_grid
    row = np.flatnonzero(np.abs(g.points[:, 0]) < 1e-9)
    res = build_splitting_surface(g, chronological_future(g, row))
    return res, time_function_from_surface(g, res.surface)


@pytest.fixture(scope="session")
def slit_grid():
    return make_graph("slit_minkowski", {"step": 0.1})


@pytest.fixture(scope="session")
def singular_ladder():
    return build_ladder(make_model("singular_wedge"), [0.1, 0.05, 0.025, 0.0125],
                        [[-0.25, 0.25], [-0.5, 1.0]])


@pytest.fixture(scope="session")
def singular_grid():
    return make_graph("singular_wedge", {"step": 0.025})


@pytest.fixture(scope="session")
def cylinder_grid():
    h = np.pi / 32
    return make_graph("slit_cylinder", {"step": [h, 1.02 * h]})
