import numpy as np
import pytest

import diffsemcom as dsc


@pytest.fixture(scope="session")
def sched():
    return dsc.build_schedule("scaled_linear", 1000, 8.5e-4, 0.012)


@pytest.fixture(scope="session")
def plan50(sched):
    return dsc.make_stride_plan(sched, 50)


@pytest.fixture(scope="session")
def std_normal_8():
    return dsc.GaussianMixtureModel.standard_normal(8)


def tight_wide_source(d):
    """Two-component source: one tight mode, one wide mode, unit power."""
    return dsc.GaussianMixtureModel(
        np.array([0.5, 0.5]),
        np.vstack([np.full(d, 0.9), np.full(d, -0.9)]),
        np.vstack([np.full(d, 0.05), np.full(d, 0.75)]),
    )


@pytest.fixture(scope="session")
def bimodal_64():
    return tight_wide_source(64)
