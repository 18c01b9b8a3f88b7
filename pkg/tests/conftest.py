import numpy as np
import pytest

from comreg.assets import default_model_path
from comreg.filterbank import builtin_bank
from comreg.phantom import make_phantom
from comreg.regressor import TransformRegressor, load_regressor


@pytest.fixture(scope="session")
def bank():
    return builtin_bank()


@pytest.fixture(scope="session")
def model():
    """The packaged regressor (accuracy-bearing tests)."""
    path = default_model_path()
    if not path.is_file():
        pytest.skip("packaged model not present; run scripts/build_assets.py")
    return load_regressor(path)


@pytest.fixture(scope="session")
def tiny_model():
    """A cheaply trained regressor for mechanism (not accuracy) tests."""
    return TransformRegressor(n_samples=4096, n_passes=2, seed=123).fit()


@pytest.fixture(scope="session")
def phantom240():
    return make_phantom(7, size=240)


class ConstantModel:
    """predict() stub returning one fixed parameter row."""

    def __init__(self, params6):
        self.params6 = np.asarray(params6, dtype=np.float64)

    def predict(self, X):
        X = np.atleast_2d(X)
        return np.tile(self.params6, (len(X), 1))


@pytest.fixture
def identity_stub():
    return ConstantModel([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])
