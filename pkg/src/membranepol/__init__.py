"""Polarization tensors, effective admittivity and spectroscopic imaging of membrane-coated cells."""

import logging

from .bem import InvertibilityError, SingularSystemError
from .deformation import DeformationBudgetError, DeformationParams, sample_deformation
from .effective import (EffectiveTensor, NearSingularError, dilute_effective, effective_sweep,
                        periodic_effective, random_dilute_effective)
from .geometry import (CellConfiguration, Curve, GeometryError, make_circle, make_ellipse,
                       transform)
from .imaging import (AnisotropicTensorError, ProbeDomain, PulseSpec, SuspensionInclusion,
                      anisotropy_statistic, estimate_debye, estimate_debye_from_data,
                      forward_solve, imaging_functional, pulse_response)
from .media import (DegenerateMembraneError, FrequencyGrid, MembraneModel, admittivity_k0,
                    beta, beta_k0, beta_prime)
from .peaks import PeakNotFoundError
from .periodic import PeriodicGreen
from .polarization import (PolarizationOperator, PolarizationSpectrum, PolarizationTensor,
                           PositivityError, cell_spectrum, mwf_circle, mwf_peak_frequency,
                           polarization_tensor, shape_spectral_data, small_delta_tau, spectrum)

__version__ = "0.1.0"

logging.getLogger(__name__).addHandler(logging.NullHandler())

__all__ = [
    "AnisotropicTensorError", "CellConfiguration", "Curve", "DeformationBudgetError",
    "DeformationParams", "DegenerateMembraneError", "EffectiveTensor", "FrequencyGrid",
    "GeometryError", "InvertibilityError", "MembraneModel", "NearSingularError",
    "PeakNotFoundError", "PeriodicGreen", "PolarizationOperator", "PolarizationSpectrum",
    "PolarizationTensor", "PositivityError", "ProbeDomain", "PulseSpec", "SingularSystemError",
    "SuspensionInclusion", "admittivity_k0", "anisotropy_statistic", "beta", "beta_k0",
    "beta_prime", "cell_spectrum", "dilute_effective", "effective_sweep", "estimate_debye",
    "estimate_debye_from_data", "forward_solve", "imaging_functional", "make_circle",
    "make_ellipse", "mwf_circle", "mwf_peak_frequency", "periodic_effective",
    "polarization_tensor", "pulse_response", "random_dilute_effective", "sample_deformation",
    "shape_spectral_data", "small_delta_tau", "spectrum", "transform",
]
