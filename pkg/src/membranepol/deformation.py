"""Random per-cell deformations of the reference cell.

Each cell is moved by a map that equals a smooth near-affine map

    z -> (R(theta) + E) z + t + sum_k a_k z^k / r_in^(k-1)

on a disk of radius ``r_in`` around the cell center and returns to the identity
at ``r_out``. The rotation enters as a twist ``y -> R(theta chi(|y|)) y`` with a
quintic cutoff ``chi``, which is area preserving for every angle; shear,
translation and bumps are blended in additively with the same cutoff. Because the map is the identity
near the boundary of the unit square, the cell average of its gradient is the
identity and the normalization ``det(E int grad Phi)^{-1}`` equals one.

Samples are drawn i.i.d. per cell (hence stationary under integer lattice
shifts) and accepted only if the Jacobian determinant, gradient norm and
displacement bounds hold on a verification grid. Accepted draws follow the
requested law conditioned on admissibility: the displacement bound truncates
large rotation angles, but the law stays symmetric about zero.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .geometry import CellConfiguration, Curve, GeometryError, _rotation

logger = logging.getLogger(__name__)

MAX_ATTEMPTS = 1000


class DeformationBudgetError(RuntimeError):
    """Rejection sampling exhausted its attempt budget."""


def _cutoff(r, r_in, r_out):
    """Quintic smoothstep: 1 for r <= r_in, 0 for r >= r_out, C^2 in between."""
    s = np.clip((r - r_in) / (r_out - r_in), 0.0, 1.0)
    return 1 - s**3 * (10 - 15 * s + 6 * s * s)


@dataclass(frozen=True)
class DeformationParams:
    """Bounds of the random deformation ensemble.

    ``rotation`` is the half-width of the uniform rotation angle; ``shear``
    bounds the entries of the symmetric traceless shear; ``translation`` bounds
    each component; ``bumps`` bounds the moduli of the conformal coefficients
    ``a_2, a_3, ...``.
    """

    center: tuple = (0.5, 0.5)
    r_in: float = 0.1
    r_out: float = 0.2
    rotation: float = 0.0
    shear: float = 0.0
    translation: float = 0.0
    bumps: tuple = ()
    kappa: float = 0.5
    kappa_prime: float = 3.0
    max_attempts: int = MAX_ATTEMPTS

    def __post_init__(self):
        if not 0 < self.r_in < self.r_out:
            raise ValueError("need 0 < r_in < r_out")
        c = np.asarray(self.center, dtype=float)
        if np.any(c - self.r_out <= 0) or np.any(c + self.r_out >= 1):
            raise ValueError("deformation support must lie inside the unit square")
        if min(self.rotation, self.shear, self.translation) < 0 or any(b < 0 for b in self.bumps):
            raise ValueError("amplitudes must be nonnegative")
        if not 0 < self.kappa <= 1 <= self.kappa_prime:
            raise ValueError("need 0 < kappa <= 1 <= kappa_prime")

    @property
    def is_zero(self) -> bool:
        return self.rotation == 0 and self.shear == 0 and self.translation == 0 \
            and not any(self.bumps)

    @property
    def is_rigid(self) -> bool:
        return self.shear == 0 and not any(self.bumps)


@dataclass(frozen=True)
class DeformationSample:
    params: DeformationParams
    rotation: float = 0.0
    shear: np.ndarray = field(default_factory=lambda: np.zeros((2, 2)))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(2))
    bumps: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    seed: int | None = None

    @property
    def affine(self) -> np.ndarray:
        """Linear part of the map on the inner disk."""
        return _rotation(self.rotation) + self.shear

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        c = np.asarray(self.params.center, dtype=float)
        y = x - c
        r = np.hypot(y[..., 0], y[..., 1])
        chi = _cutoff(r, self.params.r_in, self.params.r_out)
        ang = self.rotation * chi
        cs, sn = np.cos(ang), np.sin(ang)
        twisted = np.stack([cs * y[..., 0] - sn * y[..., 1], sn * y[..., 0] + cs * y[..., 1]],
                           axis=-1)
        extra = y @ self.shear.T + self.translation
        if self.bumps.size:
            z = y[..., 0] + 1j * y[..., 1]
            zs = z / self.params.r_in
            b = sum(a * zs ** (k + 2) for k, a in enumerate(self.bumps)) * self.params.r_in
            extra = extra + np.stack([b.real, b.imag], axis=-1)
        return c + twisted + chi[..., None] * extra

    def jacobian(self, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
        """Central-difference gradient of the map, shape (..., 2, 2)."""
        x = np.asarray(x, dtype=float)
        cols = []
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            cols.append((self(x + e) - self(x - e)) / (2 * h))
        return np.stack(cols, axis=-1)

    def check(self, dist: float, n_grid: int = 41) -> tuple[bool, str]:
        """Verify the determinant, gradient-norm and displacement bounds."""
        p = self.params
        c = np.asarray(p.center, dtype=float)
        s = np.linspace(-p.r_out, p.r_out, n_grid)
        pts = c + np.stack(np.meshgrid(s, s, indexing="ij"), axis=-1).reshape(-1, 2)
        jac = self.jacobian(pts)
        det = np.linalg.det(jac)
        if np.min(det) < p.kappa:
            return False, f"det grad Phi = {np.min(det):.3g} < kappa"
        fro = np.sqrt(np.sum(jac**2, axis=(-2, -1)))
        if np.max(fro) > p.kappa_prime:
            return False, f"|grad Phi| = {np.max(fro):.3g} > kappa'"
        disp = np.max(np.linalg.norm(self(pts) - pts, axis=-1))
        if disp > dist / 2:
            return False, f"displacement {disp:.3g} exceeds {dist / 2:.3g}"
        return True, "ok"

    def mean_gradient(self, n_gauss: int = 16) -> np.ndarray:
        """Cell average of grad Phi via oint over the unit square boundary of Phi n^T."""
        g, w = np.polynomial.legendre.leggauss(n_gauss)
        s, w = 0.5 * (g + 1), 0.5 * w
        total = np.zeros((2, 2))
        edges = [((s, np.zeros_like(s)), (0.0, -1.0)), ((np.ones_like(s), s), (1.0, 0.0)),
                 ((s, np.ones_like(s)), (0.0, 1.0)), ((np.zeros_like(s), s), (-1.0, 0.0))]
        for (ex, ey), nrm in edges:
            phi = self(np.column_stack([ex, ey]))
            total += np.outer(w @ phi, nrm)
        return total

    def apply(self, config: CellConfiguration) -> CellConfiguration:
        curves = [c.map_points(self) for c in config.curves]
        return CellConfiguration(curves, unit_cell=config.unit_cell, margin=config.margin)


def _boundary_distance(config: CellConfiguration) -> float:
    pts = config.stacked("points")
    return float(np.min(np.minimum(pts, 1.0 - pts)))


def sample_deformation(params: DeformationParams, rng: np.random.Generator | int | None = None,
                       config: CellConfiguration | None = None) -> DeformationSample:
    """Draw one admissible deformation by rejection sampling.

    ``rng`` is a numpy Generator or an integer seed. With ``config`` given the
    displacement bound uses its distance to the unit-square boundary and the
    deformed configuration must remain valid.
    """
    seed = rng if isinstance(rng, (int, np.integer)) else None
    rng = np.random.default_rng(rng)
    if params.is_zero:
        return DeformationSample(params, seed=seed)
    dist = _boundary_distance(config) if config is not None else params.r_out
    for attempt in range(params.max_attempts):
        theta = rng.uniform(-params.rotation, params.rotation) if params.rotation else 0.0
        a, b = rng.uniform(-params.shear, params.shear, size=2) if params.shear else (0.0, 0.0)
        shear = np.array([[a, b], [b, -a]])
        t = rng.uniform(-params.translation, params.translation, size=2) \
            if params.translation else np.zeros(2)
        bumps = np.array([bk * np.sqrt(rng.uniform()) * np.exp(2j * np.pi * rng.uniform())
                          for bk in params.bumps], dtype=complex)
        sample = DeformationSample(params, float(theta), shear, t, bumps, seed)
        ok, why = sample.check(dist)
        if ok and config is not None:
            try:
                sample.apply(config)
            except GeometryError as exc:
                ok, why = False, str(exc)
        if ok:
            return sample
        logger.debug("deformation attempt %d rejected: %s", attempt, why)
    raise DeformationBudgetError(
        f"no admissible deformation in {params.max_attempts} attempts; reduce the amplitudes")


def deformed_curve(curve: Curve, sample: DeformationSample) -> Curve:
    return curve.map_points(sample)
