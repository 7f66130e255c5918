import numpy as np
import pytest

from frackac import make_constant, make_fbm_space, make_smooth


@pytest.fixture(scope="session")
def kernels():
    return {
        "constant": make_constant(1.0),
        "fbm_space": make_fbm_space(0.35),
        "smooth": make_smooth(1.0),
    }


def assert_within(value, target, tol, label=""):
    assert abs(value - target) <= tol, (
        f"{label}: |{value} - {target}| = {abs(value - target)} > {tol}"
    )


@pytest.fixture(autouse=True)
def _no_global_rng_dependence():
    # tests must seed their own generators; poison the legacy global
    np.random.seed(987654321)
    yield
