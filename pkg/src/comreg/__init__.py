"""Training-free affine image registration.

Keypoints are centers of mass of thresholded convolutional feature
maps; a small MLP trained only on synthetic point correspondences
regresses the transform. See AffineRegistrator for the high-level API.
"""

__version__ = "0.1.0"

__all__ = [
    "AffineParams",
    "AffineRegistrator",
    "FilterBank",
    "MetricReport",
    "RegistrationResult",
    "TransformRegressor",
    "UncertaintyReport",
    "blacken",
    "bootstrap_estimate",
    "builtin_bank",
    "center_of_mass",
    "compute_all",
    "default_bank",
    "default_model",
    "dice",
    "estimate_uncertainty",
    "extract_features",
    "extract_keypoints",
    "generate_training_sample",
    "iterative_register",
    "least_squares_fit",
    "load_filter_bank",
    "load_raster",
    "load_regressor",
    "make_pair",
    "make_phantom",
    "mse",
    "mutual_information",
    "pair_keypoints",
    "predict_params",
    "preprocess",
    "random_affine",
    "register",
    "rescale01",
    "save_filter_bank",
    "save_raster",
    "save_regressor",
    "ssim",
    "threshold_map",
    "warp_affine",
]

_EXPORTS = {
    "AffineParams": "raster",
    "AffineRegistrator": "registration",
    "FilterBank": "filterbank",
    "MetricReport": "metrics",
    "RegistrationResult": "registration",
    "TransformRegressor": "regressor",
    "UncertaintyReport": "uncertainty",
    "blacken": "uncertainty",
    "bootstrap_estimate": "regressor",
    "builtin_bank": "filterbank",
    "center_of_mass": "keypoints",
    "compute_all": "metrics",
    "default_bank": "assets",
    "default_model": "assets",
    "dice": "metrics",
    "estimate_uncertainty": "uncertainty",
    "extract_features": "filterbank",
    "extract_keypoints": "keypoints",
    "generate_training_sample": "regressor",
    "iterative_register": "registration",
    "least_squares_fit": "regressor",
    "load_filter_bank": "filterbank",
    "load_raster": "raster",
    "load_regressor": "regressor",
    "make_pair": "phantom",
    "make_phantom": "phantom",
    "mse": "metrics",
    "mutual_information": "metrics",
    "pair_keypoints": "keypoints",
    "predict_params": "regressor",
    "preprocess": "raster",
    "random_affine": "raster",
    "register": "registration",
    "rescale01": "raster",
    "save_filter_bank": "filterbank",
    "save_raster": "raster",
    "save_regressor": "regressor",
    "ssim": "metrics",
    "threshold_map": "filterbank",
    "warp_affine": "raster",
}


def __getattr__(name):
    # Lazy imports keep `import comreg` light and let the CLI configure
    # thread counts before numpy loads.
    module_name = _EXPORTS.get(name)
    if module_name is None:
        raise AttributeError(f"module 'comreg' has no attribute {name!r}")
    from importlib import import_module

    module = import_module(f".{module_name}", __name__)
    value = getattr(module, name)
    globals()[name] = value
    return value
