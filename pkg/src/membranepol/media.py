"""Physical parameters of the cell model and the derived complex admittivities.

All frequencies are angular frequencies in rad/s.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

VACUUM_PERMITTIVITY = 8.85e-12

DEFAULT_OMEGA_MIN = 1e4
DEFAULT_OMEGA_MAX = 1e9
DEFAULT_GRID_POINTS = 200


class DegenerateMembraneError(ValueError):
    """Raised when the membrane admittivity vanishes identically."""


@dataclass(frozen=True)
class MembraneModel:
    """Conductivities, permittivities and membrane thickness of a cell suspension.

    The medium outside the cells and the cytoplasm share ``sigma0``/``eps0``.
    ``delta`` is measured in the length units of whatever curve the model is
    used with.
    """

    sigma0: float
    eps0: float
    sigma_m: float
    eps_m: float
    delta: float

    def __post_init__(self):
        if not self.sigma0 > 0:
            raise ValueError(f"sigma0 must be positive, got {self.sigma0}")
        if not self.sigma_m > 0:
            raise ValueError(f"sigma_m must be positive, got {self.sigma_m}")
        if not self.eps0 >= 0:
            raise ValueError(f"eps0 must be non-negative, got {self.eps0}")
        if not self.eps_m >= 0:
            raise ValueError(f"eps_m must be non-negative, got {self.eps_m}")
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")

    @classmethod
    def typical(cls, delta: float = 0.7e-3) -> "MembraneModel":
        """Typical eukaryotic-cell values (membrane thickness relative to cell size)."""
        return cls(
            sigma0=0.5,
            eps0=90 * VACUUM_PERMITTIVITY,
            sigma_m=1e-8,
            eps_m=3.5 * VACUUM_PERMITTIVITY,
            delta=delta,
        )

    def with_delta(self, delta: float) -> "MembraneModel":
        return replace(self, delta=delta)

    def scaled(self, s: float) -> "MembraneModel":
        """Model seen by a curve magnified by ``s`` (thickness in new length units)."""
        return replace(self, delta=self.delta * s)


def _check_omega(omega):
    if np.any(np.asarray(omega) <= 0):
        raise ValueError("omega must be positive")


def admittivity_k0(model: MembraneModel, omega):
    """Admittivity sigma0 + i omega eps0 of medium and cytoplasm."""
    _check_omega(omega)
    return model.sigma0 + 1j * np.asarray(omega, dtype=float) * model.eps0


def admittivity_km(model: MembraneModel, omega):
    _check_omega(omega)
    return model.sigma_m + 1j * np.asarray(omega, dtype=float) * model.eps_m


def beta(model: MembraneModel, omega):
    """Membrane parameter delta / k_m."""
    km = admittivity_km(model, omega)
    if np.any(km == 0):
        raise DegenerateMembraneError("membrane admittivity is zero")
    return model.delta / km


def beta_prime(model: MembraneModel, omega):
    """Coercivity constant delta (s0 sm + w^2 e0 em) / (sm^2 + w^2 em^2)."""
    _check_omega(omega)
    w2 = np.asarray(omega, dtype=float) ** 2
    den = model.sigma_m**2 + w2 * model.eps_m**2
    if np.any(den == 0):
        raise DegenerateMembraneError("membrane admittivity is zero")
    return model.delta * (model.sigma0 * model.sigma_m + w2 * model.eps0 * model.eps_m) / den


def beta_k0(model: MembraneModel, omega):
    """The product beta * k0 that enters every boundary operator."""
    return beta(model, omega) * admittivity_k0(model, omega)


@dataclass(frozen=True)
class FrequencyGrid:
    """Strictly increasing positive angular frequencies."""

    omegas: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.omegas, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("frequency grid must be a nonempty 1-D sequence")
        if np.any(w <= 0):
            raise ValueError("frequencies must be positive")
        if np.any(np.diff(w) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        w.setflags(write=False)
        object.__setattr__(self, "omegas", w)

    @classmethod
    def logspace(cls, omega_min=DEFAULT_OMEGA_MIN, omega_max=DEFAULT_OMEGA_MAX,
                 n=DEFAULT_GRID_POINTS) -> "FrequencyGrid":
        if not 0 < omega_min < omega_max:
            raise ValueError("need 0 < omega_min < omega_max")
        return cls(np.logspace(np.log10(omega_min), np.log10(omega_max), int(n)))

    def __len__(self):
        return self.omegas.size

    def __iter__(self):
        return iter(self.omegas)
