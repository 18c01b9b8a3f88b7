"""Packaged default assets: trained regressor and built-in filter bank."""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

from .filterbank import FilterBank, builtin_bank
from .regressor import TransformRegressor, load_regressor

DEFAULT_MODEL_RESOURCE = "regressor.zrm"


def default_model_path():
    return resources.files("comreg").joinpath("data", DEFAULT_MODEL_RESOURCE)


@lru_cache(maxsize=1)
def default_model() -> TransformRegressor:
    """The regressor shipped with the package (trained on synthetic
    correspondences by the train command)."""
    path = default_model_path()
    if not path.is_file():
        raise FileNotFoundError(
            f"packaged model missing at {path}; train one with 'comreg train'"
        )
    return load_regressor(path)


@lru_cache(maxsize=1)
def default_bank() -> FilterBank:
    return builtin_bank()
