"""Work statistics of sudden quenches of optomechanical couplings.

Units: hbar = omega_m = 1.  Energies and work are in units of hbar*omega_m.
"""

from .analysis import (CoarseGrainedDensity, ThermoSummary, coarse_grain, exponential_tail_fit,
                       fluctuation_checks, smoothed_cdf_density)
from .distribution import CharFunctionSample, WorkDistribution
from .errors import QuenchError
from .fock import (CouplingKind, PhysicalParams, Truncation, choose_truncation,
                   displacement_overlap, squeeze_overlap, thermal_occupation, thermal_weight)
from .linear import chi_linear, delta_f_linear, moments_linear, work_distribution_linear
from .quadratic import (chi_quadratic, delta_f_quadratic, moments_quadratic, squeeze_factors,
                        work_distribution_quadratic)

__version__ = "0.1.0"

__all__ = [
    "CharFunctionSample",
    "CoarseGrainedDensity",
    "CouplingKind",
    "PhysicalParams",
    "QuenchError",
    "ThermoSummary",
    "Truncation",
    "WorkDistribution",
    "chi_linear",
    "chi_quadratic",
    "choose_truncation",
    "coarse_grain",
    "delta_f_linear",
    "delta_f_quadratic",
    "displacement_overlap",
    "exponential_tail_fit",
    "fluctuation_checks",
    "moments_linear",
    "moments_quadratic",
    "smoothed_cdf_density",
    "squeeze_factors",
    "squeeze_overlap",
    "thermal_occupation",
    "thermal_weight",
    "work_distribution_linear",
    "work_distribution_quadratic",
]
