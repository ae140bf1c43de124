"""Nystrom discretizations of Laplace layer potentials on smooth closed curves.

Conventions (G(x) = ln|x| / 2 pi):

* single layer      S[phi](x) = oint G(x - y) phi(y) ds(y)
* double layer      D[phi](x) = oint dG/dn_y(x - y) phi(y) ds(y), traces (-+1/2 + K)
* adjoint NP        K*[phi](x) = oint dG/dn_x(x - y) phi(y) ds(y), x on the curve
* hypersingular     L = d/dn D, realized through the Maue identity L = d/ds S d/ds

The logarithmic singularity of S on a curve is integrated with Kress product
quadrature; every other kernel is smooth on a smooth curve and uses the
trapezoid rule. With ``kernel="periodic"`` the smooth remainder R2 of the unit
torus Green function is added to every block.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla

from .geometry import CellConfiguration, Curve, as_configuration, differentiation_matrix
from .periodic import PeriodicGreen, default_periodic_green

logger = logging.getLogger(__name__)

KERNELS = ("free", "periodic")


class SingularSystemError(np.linalg.LinAlgError):
    """Dense system singular to working precision."""


class InvertibilityError(ValueError):
    """The operator I + alpha L is only guaranteed invertible for Re(alpha) > 0."""


@dataclass(frozen=True)
class OperatorMatrix:
    """Dense matrix acting on densities stacked curve by curve."""

    matrix: np.ndarray
    operator: str
    kernel: str
    sizes: tuple

    def __post_init__(self):
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] != sum(self.sizes):
            raise ValueError("operator matrix must be square with dimension sum(sizes)")

    def __matmul__(self, other):
        if isinstance(other, DensityGrid):
            return DensityGrid(self.matrix @ other.values, self.sizes)
        return self.matrix @ other

    @property
    def shape(self):
        return self.matrix.shape


@dataclass(frozen=True)
class DensityGrid:
    """Per-curve node values stacked into one vector (or several columns)."""

    values: np.ndarray
    sizes: tuple

    def __post_init__(self):
        if self.values.shape[0] != sum(self.sizes):
            raise ValueError("density length does not match node counts")

    def per_curve(self) -> list:
        return np.split(self.values, np.cumsum(self.sizes)[:-1], axis=0)


@dataclass(frozen=True)
class SolveResult:
    solution: np.ndarray
    residual: float
    rcond: float = field(default=np.nan)


def _kernel_check(kernel):
    if kernel not in KERNELS:
        raise ValueError(f"kernel must be one of {KERNELS}, got {kernel!r}")


@lru_cache(maxsize=32)
def kress_weights(n: int) -> np.ndarray:
    """Circulant weights R_j with oint ln(4 sin^2((t_i - s)/2)) f(s) ds = sum_j R_{i-j} f_j.

    Exact for trigonometric polynomials of degree < n/2 (``n`` even).
    """
    m = n // 2
    t = 2 * np.pi * np.arange(n) / n
    k = np.arange(1, m)
    r = -(2 * np.pi / m) * (np.cos(np.outer(t, k)) @ (1.0 / k)) - (np.pi / m**2) * np.cos(m * t)
    r.flags.writeable = False
    return r


def _circulant(vec):
    n = vec.size
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return vec[idx]


def _pairs(x, y):
    """Differences x_i - y_j and their squared norms."""
    d = x[:, None, :] - y[None, :, :]
    return d, np.sum(d * d, axis=-1)


def _periodic_green(pg):
    return pg if pg is not None else default_periodic_green()


# -- single layer ---------------------------------------------------------------

def _single_layer_self(c: Curve) -> np.ndarray:
    n = c.n
    h = 2 * np.pi / n
    d, r2 = _pairs(c.points, c.points)
    tdiff = c.t[:, None] - c.t[None, :]
    sin2 = 4 * np.sin(0.5 * tdiff) ** 2
    np.fill_diagonal(r2, 1.0)
    np.fill_diagonal(sin2, 1.0)
    smooth = 0.5 * np.log(r2) - 0.5 * np.log(sin2)
    np.fill_diagonal(smooth, np.log(c.speed))
    mat = 0.5 * _circulant(kress_weights(n)) + h * smooth
    return mat * c.speed[None, :] / (2 * np.pi)


def _single_layer_far(target: np.ndarray, src: Curve) -> np.ndarray:
    _, r2 = _pairs(target, src.points)
    return np.log(r2) / (4 * np.pi) * src.weights[None, :]


def single_layer_matrix(config, kernel: str = "free", pg: PeriodicGreen | None = None) -> OperatorMatrix:
    """Nystrom matrix of S on a configuration."""
    _kernel_check(kernel)
    config = as_configuration(config)
    curves = config.curves
    blocks = [[_single_layer_self(ci) if i == j else _single_layer_far(ci.points, cj)
               for j, cj in enumerate(curves)] for i, ci in enumerate(curves)]
    mat = np.block(blocks)
    if kernel == "periodic":
        pts = config.stacked("points")
        w = config.stacked("weights")
        d, _ = _pairs(pts, pts)
        r2 = _periodic_green(pg).r2(d.reshape(-1, 2)).reshape(d.shape[:2])
        mat = mat + r2 * w[None, :]
    return OperatorMatrix(mat, "single_layer", kernel, tuple(config.sizes))


def single_layer_eval(config, density, targets) -> np.ndarray:
    """S[density] at points off the curves (free-space kernel, trapezoid rule)."""
    config = as_configuration(config)
    targets = np.atleast_2d(targets)
    pts = config.stacked("points")
    w = config.stacked("weights")
    _, r2 = _pairs(targets, pts)
    return (np.log(r2) / (4 * np.pi) * w[None, :]) @ density


def single_layer_target_matrix(config, targets) -> np.ndarray:
    """Matrix mapping densities on the curves to S at off-curve targets."""
    config = as_configuration(config)
    _, r2 = _pairs(np.atleast_2d(targets), config.stacked("points"))
    return np.log(r2) / (4 * np.pi) * config.stacked("weights")[None, :]


def single_layer_normal_matrix(config, targets, target_normals) -> np.ndarray:
    """Matrix mapping densities to the derivative of S along ``target_normals`` off the curves."""
    config = as_configuration(config)
    d, r2 = _pairs(np.atleast_2d(targets), config.stacked("points"))
    ker = np.einsum("ijk,ik->ij", d, np.atleast_2d(target_normals)) / r2 / (2 * np.pi)
    return ker * config.stacked("weights")[None, :]


# -- double layer and adjoint --------------------------------------------------------

def _double_layer_free(config: CellConfiguration, adjoint: bool) -> np.ndarray:
    pts = config.stacked("points")
    nrm = config.stacked("normal")
    w = config.stacked("weights")
    kap = config.stacked("curvature")
    d, r2 = _pairs(pts, pts)  # x_i - y_j
    idx = np.arange(pts.shape[0])
    r2[idx, idx] = 1.0
    if adjoint:
        num = np.einsum("ijk,ik->ij", d, nrm)
    else:
        num = -np.einsum("ijk,jk->ij", d, nrm)
    ker = num / r2 / (2 * np.pi)
    ker[idx, idx] = kap / (4 * np.pi)
    return ker * w[None, :]


def _r2_pairs(config, pg, derivs):
    pts = config.stacked("points")
    d, _ = _pairs(pts, pts)
    vals = _periodic_green(pg).r2_derivatives(d.reshape(-1, 2))
    n = pts.shape[0]
    return vals[1].reshape(n, n, 2), vals[2].reshape(n, n, 2, 2)


def double_layer_matrix(config, kernel: str = "free", pg: PeriodicGreen | None = None) -> OperatorMatrix:
    """Matrix of the direct-value (principal) double layer K on the curves.

    Boundary traces of the double layer potential are ``(-/+ 1/2 I + K)``
    from outside/inside.
    """
    _kernel_check(kernel)
    config = as_configuration(config)
    mat = _double_layer_free(config, adjoint=False)
    if kernel == "periodic":
        grad, _ = _r2_pairs(config, pg, 1)
        nrm = config.stacked("normal")
        w = config.stacked("weights")
        mat = mat - np.einsum("ijk,jk->ij", grad, nrm) * w[None, :]
    return OperatorMatrix(mat, "double_layer", kernel, tuple(config.sizes))


def adjoint_double_layer_matrix(config, kernel: str = "free", pg: PeriodicGreen | None = None) -> OperatorMatrix:
    """Matrix of the Neumann-Poincare adjoint K* (normal derivative traces of S are +/-1/2 + K*)."""
    _kernel_check(kernel)
    config = as_configuration(config)
    mat = _double_layer_free(config, adjoint=True)
    if kernel == "periodic":
        grad, _ = _r2_pairs(config, pg, 1)
        nrm = config.stacked("normal")
        w = config.stacked("weights")
        mat = mat + np.einsum("ijk,ik->ij", grad, nrm) * w[None, :]
    return OperatorMatrix(mat, "adjoint_double_layer", kernel, tuple(config.sizes))


def double_layer_eval(config, density, targets) -> np.ndarray:
    """D[density] at points off the curves (free-space kernel)."""
    config = as_configuration(config)
    targets = np.atleast_2d(targets)
    pts = config.stacked("points")
    nrm = config.stacked("normal")
    w = config.stacked("weights")
    d, r2 = _pairs(targets, pts)
    ker = -np.einsum("ijk,jk->ij", d, nrm) / r2 / (2 * np.pi)
    return (ker * w[None, :]) @ density


# -- hypersingular ----------------------------------------------------------------

def arclength_derivative_matrix(config) -> np.ndarray:
    """Block-diagonal spectral d/ds = |x'|^{-1} d/dt."""
    config = as_configuration(config)
    blocks = [differentiation_matrix(c.n) / c.speed[:, None] for c in config.curves]
    return sla.block_diag(*blocks)


def hypersingular_operator(config, kernel: str = "free", pg: PeriodicGreen | None = None) -> OperatorMatrix:
    """Matrix of L = d/dn_x D (positive, self-adjoint; circle symbol |n| / (2 r0))."""
    _kernel_check(kernel)
    config = as_configuration(config)
    s = single_layer_matrix(config, "free").matrix
    ds = arclength_derivative_matrix(config)
    mat = ds @ s @ ds
    if kernel == "periodic":
        _, hess = _r2_pairs(config, pg, 2)
        nrm = config.stacked("normal")
        w = config.stacked("weights")
        mat = mat - np.einsum("ik,ijkl,jl->ij", nrm, hess, nrm) * w[None, :]
    return OperatorMatrix(mat, "hypersingular", kernel, tuple(config.sizes))


def hypersingular_matrix(config, kernel: str = "free", beta_k0: complex = 0.0,
                         pg: PeriodicGreen | None = None,
                         operator: OperatorMatrix | None = None) -> OperatorMatrix:
    """Matrix of I + beta_k0 L.

    ``operator`` may pass a precomputed L to avoid reassembly across frequencies.
    """
    if beta_k0 != 0 and not np.real(beta_k0) > 0:
        raise InvertibilityError(f"Re(beta k0) must be positive, got {beta_k0}")
    lop = operator if operator is not None else hypersingular_operator(config, kernel, pg)
    mat = np.eye(lop.shape[0]) + beta_k0 * lop.matrix
    return OperatorMatrix(mat, "identity_plus_hypersingular", lop.kernel, lop.sizes)


# -- dense solves -------------------------------------------------------------------

def solve(system, rhs, check_residual: float | None = None) -> SolveResult:
    """Dense LU solve with partial pivoting.

    Returns the solution together with the relative residual ||Ax - b|| / ||b||
    and the reciprocal 1-norm condition estimate.
    """
    a = system.matrix if isinstance(system, OperatorMatrix) else np.asarray(system)
    b = rhs.values if isinstance(rhs, DensityGrid) else np.asarray(rhs)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("system must be square")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("system or right-hand side has non-finite entries")
    lu, piv, info = _getrf(a)
    if info > 0:
        raise SingularSystemError("matrix is exactly singular")
    rcond = _rcond(lu, a)
    if rcond < np.finfo(float).eps:
        raise SingularSystemError(f"matrix singular to working precision (rcond={rcond:.2e})")
    x = sla.lu_solve((lu, piv), b)
    bn = np.linalg.norm(b)
    res = float(np.linalg.norm(a @ x - b) / bn) if bn > 0 else 0.0
    if check_residual is not None and res > check_residual:
        logger.warning("solve residual %.2e exceeds %.2e", res, check_residual)
    if isinstance(rhs, DensityGrid):
        x = DensityGrid(x, rhs.sizes)
    return SolveResult(x, res, rcond)


def _getrf(a):
    getrf, = sla.get_lapack_funcs(("getrf",), (a,))
    lu, piv, info = getrf(a, overwrite_a=False)
    return lu, piv, info


def _rcond(lu, a):
    gecon, = sla.get_lapack_funcs(("gecon",), (lu,))
    anorm = np.linalg.norm(a, 1)
    rcond, _ = gecon(lu, anorm, norm="1")
    return float(rcond)
