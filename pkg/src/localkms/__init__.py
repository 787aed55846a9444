"""Numerical laboratory for thermal, LTE and local KMS structure of the free scalar field."""

from importlib.metadata import PackageNotFoundError, version

from .balanced import balanced_derivative, balanced_tensor
from .errors import LocalKMSError
from .lkms import (
    boundary_periodicity_check,
    check_lkms,
    cluster_check,
    detailed_balance_residual,
    kg_residual,
)
from .lte import check_affine_beta, check_lte, fit_mixed_measure
from .minkowski import InverseTemperatureVector, as_beta, minkowski_dot
from .states import HotBang, Kms, Mixed, PointwiseThermal, ThermalMeasure, Translated, Vacuum, wightman
from .thermo import stress_energy, theta, thermal_function

try:
    __version__ = version("localkms")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

__all__ = [
    "HotBang", "InverseTemperatureVector", "Kms", "LocalKMSError", "Mixed", "PointwiseThermal",
    "ThermalMeasure", "Translated", "Vacuum", "__version__", "as_beta", "balanced_derivative",
    "balanced_tensor", "boundary_periodicity_check", "check_affine_beta", "check_lkms", "check_lte",
    "cluster_check", "detailed_balance_residual", "fit_mixed_measure", "kg_residual", "minkowski_dot",
    "stress_energy", "thermal_function", "theta", "wightman",
]
