"""Membrane polarization tensor, its frequency spectrum and Debye relaxation times.

For boundary curves C (the rescaled cell boundary) and alpha = beta k0,

    M_ij = alpha oint_C n_j psi_i ds,    psi_i = -(I + alpha L)^{-1} n_i.

Because the discretized ``W L`` is symmetric (``W`` the quadrature weights), the
operator has a real orthonormal eigenbasis in the weighted inner product and

    M(alpha) = -alpha c^T diag(1 / (1 + alpha Lambda)) c,

which makes frequency sweeps cost one eigendecomposition. The direct LU route
is kept as an independent check.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import bem
from .geometry import CellConfiguration, as_configuration
from .media import FrequencyGrid, MembraneModel, beta_k0
from .peaks import count_interior_maxima, refine_peak

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-9
CONVERGENCE_TOL = 1e-8
MAX_NODES = 2048
PEAK_RTOL = 1e-6


class PositivityError(ArithmeticError):
    """Im M is not positive definite where it was required."""


@dataclass(frozen=True)
class PolarizationTensor:
    omega: float
    m: np.ndarray

    def __post_init__(self):
        m = np.array(self.m, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError("polarization tensor must be 2x2")
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    def asymmetry(self) -> float:
        nrm = np.linalg.norm(self.m)
        return float(abs(self.m[0, 1] - self.m[1, 0]) / nrm) if nrm > 0 else 0.0

    def is_symmetric(self, tol: float = SYMMETRY_TOL) -> bool:
        return self.asymmetry() <= tol

    def imag_eigenvalues(self) -> np.ndarray:
        return sym2_eigvalsh(self.m.imag)

    def imag_positive_definite(self) -> bool:
        return bool(self.imag_eigenvalues()[0] > 0)


def sym2_eigvalsh(a: np.ndarray) -> np.ndarray:
    """Eigenvalues (ascending) of a real symmetric 2x2 matrix, closed form.

    Accepts arrays of shape (..., 2, 2); the off-diagonal is symmetrized.
    """
    a = np.asarray(a, dtype=float)
    p = 0.5 * (a[..., 0, 0] + a[..., 1, 1])
    q = 0.5 * (a[..., 0, 0] - a[..., 1, 1])
    b = 0.5 * (a[..., 0, 1] + a[..., 1, 0])
    r = np.hypot(q, b)
    return np.stack([p - r, p + r], axis=-1)


def sym2_eigh(a: np.ndarray):
    """Closed-form eigenpairs of a real symmetric 2x2 matrix (columns are vectors)."""
    a = np.asarray(a, dtype=float)
    lam = sym2_eigvalsh(a)
    q = 0.5 * (a[0, 0] - a[1, 1])
    b = 0.5 * (a[0, 1] + a[1, 0])
    theta = 0.5 * np.arctan2(b, q)
    # the larger eigenvalue has eigenvector (cos theta, sin theta)
    v2 = np.array([np.cos(theta), np.sin(theta)])
    v1 = np.array([-v2[1], v2[0]])
    return lam, np.column_stack([v1, v2])


# -- closed form for the circle ---------------------------------------------------

def mwf_tensor(alpha, r0: float) -> np.ndarray:
    """-alpha pi r0 / (1 + alpha / (2 r0)) times the identity (array in alpha)."""
    alpha = np.asarray(alpha, dtype=complex)
    m = -alpha * np.pi * r0 / (1 + alpha / (2 * r0))
    return m[..., None, None] * np.eye(2)


def mwf_circle(model: MembraneModel, omega: float, r0: float) -> PolarizationTensor:
    """Closed-form tensor of a circular cell of radius ``r0`` (rescaled units)."""
    if not r0 > 0:
        raise ValueError("r0 must be positive")
    return PolarizationTensor(float(omega), mwf_tensor(beta_k0(model, omega), r0))


def mwf_imag(model: MembraneModel, omega, r0: float):
    """Im M_pp of the circle written out in the material constants."""
    if not r0 > 0:
        raise ValueError("r0 must be positive")
    w = np.asarray(omega, dtype=float)
    d = model.delta
    s0, e0, sm, em = model.sigma0, model.eps0, model.sigma_m, model.eps_m
    c = d / (2 * r0)
    num = np.pi * r0 * d * w * (em * s0 - e0 * sm)
    return num / ((sm + s0 * c) ** 2 + w**2 * (em + e0 * c) ** 2)


def mwf_peak_frequency(model: MembraneModel, r0: float) -> float:
    """Frequency maximizing Im M_pp of the circle."""
    c = model.delta / (2 * r0)
    return float((model.sigma_m + model.sigma0 * c) / (model.eps_m + model.eps0 * c))


# -- BEM routes ---------------------------------------------------------------------

def _resampled(config: CellConfiguration, n: int) -> CellConfiguration:
    return CellConfiguration([c.resample(n) for c in config.curves],
                             unit_cell=config.unit_cell, margin=config.margin)


def solve_tensor(config, alpha: complex, lop: bem.OperatorMatrix | None = None) -> np.ndarray:
    """M at one value of ``alpha = beta k0`` by a dense LU solve."""
    config = as_configuration(config)
    if alpha == 0:
        return np.zeros((2, 2), dtype=complex)
    system = bem.hypersingular_matrix(config, beta_k0=alpha, operator=lop)
    nrm = config.stacked("normal")
    w = config.stacked("weights")
    res = bem.solve(system, -nrm.astype(complex), check_residual=1e-10)
    psi = res.solution
    return alpha * (psi * w[:, None]).T @ nrm


class PolarizationOperator:
    """Weighted-symmetric eigendecomposition of L on a configuration.

    Parameters
    ----------
    config : CellConfiguration, Curve or sequence of Curve
        Boundaries in the units in which ``alpha`` is expressed.
    """

    def __init__(self, config):
        self.config = as_configuration(config)
        self.lop = bem.hypersingular_operator(self.config)
        w = self.config.stacked("weights")
        sw = np.sqrt(w)
        b = (sw[:, None] * self.lop.matrix) / sw[None, :]
        b = 0.5 * (b + b.T)
        lam, q = np.linalg.eigh(b)
        nrm = self.config.stacked("normal")
        self.eigenvalues = lam
        self.coefficients = q.T @ (sw[:, None] * nrm)

    @property
    def nodes(self) -> int:
        return max(self.config.sizes)

    def tensor(self, alpha) -> np.ndarray:
        """M for scalar or array ``alpha``; result has shape alpha.shape + (2, 2)."""
        alpha = np.asarray(alpha, dtype=complex)
        a = alpha[..., None]
        d = -a / (1 + a * self.eigenvalues)
        c = self.coefficients
        m = np.einsum("...k,ki,kj->...ij", d, c, c)
        return m

    def tensor_lu(self, alpha: complex) -> np.ndarray:
        return solve_tensor(self.config, alpha, self.lop)

    def normal_moment(self) -> np.ndarray:
        """P = oint n n^T ds."""
        return self.coefficients.T @ self.coefficients

    def l_moment(self) -> np.ndarray:
        """Q = oint n L[n]^T ds (symmetric, positive semidefinite)."""
        c = self.coefficients
        q = (c * self.eigenvalues[:, None]).T @ c
        return 0.5 * (q + q.T)


def converged_operator(config, alphas, tol: float = CONVERGENCE_TOL,
                       nodes: int | None = None, max_nodes: int = MAX_NODES) -> PolarizationOperator:
    """Operator whose M at the sample ``alphas`` is self-converged to ``tol``.

    With ``nodes`` given the curves are resampled to that count and no
    refinement takes place.
    """
    config = as_configuration(config)
    if nodes is not None:
        return PolarizationOperator(_resampled(config, nodes))
    alphas = np.atleast_1d(np.asarray(alphas, dtype=complex))
    op = PolarizationOperator(config)
    while True:
        n2 = 2 * op.nodes
        if n2 > max_nodes:
            logger.warning("node cap %d reached before M converged", max_nodes)
            return op
        fine = PolarizationOperator(_resampled(config, n2))
        m0, m1 = op.tensor(alphas), fine.tensor(alphas)
        scale = np.maximum(np.linalg.norm(m1, axis=(-2, -1)), np.finfo(float).tiny)
        err = float(np.max(np.linalg.norm(m1 - m0, axis=(-2, -1)) / scale))
        if err <= tol:
            return op
        logger.info("M self-convergence %.2e at N=%d; doubling", err, op.nodes)
        op = fine


def polarization_tensor(config, model: MembraneModel, omega: float,
                        nodes: int | None = None, refine: bool = True) -> PolarizationTensor:
    """Polarization tensor of the given boundaries by a dense LU solve.

    ``model.delta`` is the membrane thickness in the units of ``config``.
    """
    config = as_configuration(config)
    alpha = complex(beta_k0(model, omega))
    if not alpha.real > 0:
        raise bem.InvertibilityError(f"Re(beta k0) must be positive, got {alpha}")
    if nodes is not None:
        config = _resampled(config, nodes)
    elif refine:
        config = converged_operator(config, [alpha]).config
    return PolarizationTensor(float(omega), solve_tensor(config, alpha))


# -- spectrum ---------------------------------------------------------------------

@dataclass(frozen=True)
class PolarizationSpectrum:
    grid: FrequencyGrid
    tensors: np.ndarray
    lambda1: np.ndarray
    lambda2: np.ndarray
    tau1: float
    tau2: float
    nodes: int = 0
    peak_omegas: tuple = field(default=(np.nan, np.nan))

    @property
    def omegas(self) -> np.ndarray:
        return self.grid.omegas

    def tensor(self, k: int) -> PolarizationTensor:
        return PolarizationTensor(float(self.grid.omegas[k]), self.tensors[k])


def _imag_eig(op: PolarizationOperator, model: MembraneModel, omega, i: int) -> float:
    m = op.tensor(beta_k0(model, omega))
    return float(sym2_eigvalsh(m.imag)[i])


def _tensors(op: PolarizationOperator, alphas: np.ndarray, threads: int) -> np.ndarray:
    if threads <= 1 or alphas.size < 2 * threads:
        return op.tensor(alphas)
    chunks = np.array_split(alphas, threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(op.tensor, chunks))
    return np.concatenate(parts, axis=0)


def spectrum(config, model: MembraneModel, grid: FrequencyGrid | None = None,
             nodes: int | None = None, threads: int = 1,
             operator: PolarizationOperator | None = None,
             rtol: float = PEAK_RTOL) -> PolarizationSpectrum:
    """Tensors, Im M eigenvalues and Debye times over a frequency grid.

    Peak frequencies are found by a scan of ``grid`` followed by golden-section
    refinement in log omega to relative tolerance ``rtol``.

    Raises
    ------
    PositivityError
        If an eigenvalue of Im M is not positive.
    PeakNotFoundError
        If an eigenvalue peaks on the boundary of the grid.
    """
    grid = grid if grid is not None else FrequencyGrid.logspace()
    omegas = grid.omegas
    alphas = np.asarray(beta_k0(model, omegas), dtype=complex)
    if np.any(alphas.real <= 0):
        raise bem.InvertibilityError("Re(beta k0) must be positive on the grid")
    if operator is None:
        sample = alphas[[0, len(alphas) // 2, -1]]
        operator = converged_operator(config, sample, nodes=nodes)
    tensors = _tensors(operator, alphas, threads)
    lam = sym2_eigvalsh(tensors.imag)
    if np.any(lam[:, 0] <= 0):
        raise PositivityError("Im M is not positive definite on the grid")
    peaks = []
    for i in range(2):
        peaks.append(refine_peak(lambda w, i=i: _imag_eig(operator, model, w, i),
                                 omegas, lam[:, i], rtol=rtol))
    tensors.setflags(write=False)
    return PolarizationSpectrum(grid, tensors, lam[:, 0].copy(), lam[:, 1].copy(),
                                1.0 / peaks[0], 1.0 / peaks[1], operator.nodes, tuple(peaks))


def cell_spectrum(config: CellConfiguration, model: MembraneModel,
                  grid: FrequencyGrid | None = None, **kwargs) -> PolarizationSpectrum:
    """Spectrum of a unit-cell configuration.

    The boundaries are rescaled by ``1 / rho`` and ``model.delta`` is read as the
    thickness relative to the cell size (``delta / rho``).
    """
    return spectrum(config.rescaled(), model, grid, **kwargs)


def single_peak_check(spec: PolarizationSpectrum) -> bool:
    return count_interior_maxima(spec.lambda1) == 1 and count_interior_maxima(spec.lambda2) == 1


# -- beta-independent shape data and small-delta forms ----------------------------

@dataclass(frozen=True)
class ShapeSpectralData:
    l1: float
    l2: float
    arclength: float
    q: np.ndarray
    p: np.ndarray


def shape_spectral_data(config, operator: PolarizationOperator | None = None) -> ShapeSpectralData:
    """Eigenvalues ``l1 <= l2`` of Q = oint n L[n]^T ds, the arclength, Q and P."""
    op = operator if operator is not None else PolarizationOperator(config)
    q = op.l_moment()
    l1, l2 = sym2_eigvalsh(q)
    return ShapeSpectralData(float(l1), float(l2), op.config.arclength, q, op.normal_moment())


def small_delta_expansion(config, model: MembraneModel, omega: float,
                          form: str = "matrix",
                          operator: PolarizationOperator | None = None) -> np.ndarray:
    """Second-order small-thickness approximation of M.

    ``form="matrix"``: -alpha P + alpha^2 Q with P = oint n n^T ds, consistent
    with the exact circle result. ``form="scalar"``: -alpha |C| I - alpha^2 Q,
    a literal scalar first-order term kept for comparison only.
    """
    op = operator if operator is not None else PolarizationOperator(config)
    alpha = complex(beta_k0(model, omega))
    q = op.l_moment()
    if form == "matrix":
        return -alpha * op.normal_moment() + alpha**2 * q
    if form == "scalar":
        return -alpha * op.config.arclength * np.eye(2) - alpha**2 * q
    raise ValueError(f"unknown form {form!r}")


def _positive_root(a4: float, a2: float, a0: float) -> float:
    """Positive x solving a4 x^4 + a2 x^2 + a0 = 0 with a4 < 0 < a0."""
    assert a4 < 0 < a0, "product of roots in x^2 must be negative"
    disc = a2 * a2 - 4 * a4 * a0
    # numerically stable form of the positive root in x^2
    x2 = -2 * a0 / (a2 - np.sqrt(disc)) if a2 <= 0 else (-a2 - np.sqrt(disc)) / (2 * a4)
    return float(np.sqrt(x2))


def small_delta_tau(config, model: MembraneModel, form: str = "scalar",
                    operator: PolarizationOperator | None = None) -> tuple[float, float]:
    """Debye times from the small-thickness expansion of the Im M eigenvalues.

    Requires ``eps0 == 0``; with that, M depends on delta and sigma0 only through
    ``delta * sigma0``, so sigma0 is folded into the thickness.

    ``form="scalar"`` uses the quartic with the arclength as first-order
    coefficient, ``-e^4 |C| w^4 + 6 delta e^2 s l w^2 + s^4 |C|``, with ``l``
    taken from the larger eigenvalue of Q for the smaller eigenvalue of Im M.
    ``form="matrix"`` uses the quartic consistent with -alpha P + alpha^2 Q,
    ``-p e^4 w^4 + 6 delta s q e^2 w^2 + p s^4 - 2 delta s^3 q``, in the
    principal frame of Q.
    """
    if model.eps0 != 0:
        raise ValueError("small-delta Debye times assume eps0 = 0")
    op = operator if operator is not None else PolarizationOperator(config)
    d = model.delta * model.sigma0
    s, e = model.sigma_m, model.eps_m
    q = op.l_moment()
    lq, vq = sym2_eigh(q)
    taus = []
    if form == "scalar":
        length = op.config.arclength
        for l in (lq[1], lq[0]):
            w = _positive_root(-e**4 * length, 6 * d * e**2 * s * l, s**4 * length)
            taus.append(1.0 / w)
    elif form == "matrix":
        p = op.normal_moment()
        pairs = []
        for k in range(2):
            v = vq[:, k]
            pk = float(v @ p @ v)
            w = _positive_root(-pk * e**4, 6 * d * s * lq[k] * e**2, pk * s**4 - 2 * d * s**3 * lq[k])
            lam_peak = d * w * e * pk / (s * s + w * w * e * e)
            pairs.append((lam_peak, 1.0 / w))
        pairs.sort()
        taus = [pairs[0][1], pairs[1][1]]
    else:
        raise ValueError(f"unknown form {form!r}")
    return float(taus[0]), float(taus[1])


# -- anisotropy ----------------------------------------------------------------

def anisotropy_ratio(spec: PolarizationSpectrum) -> np.ndarray:
    """lambda1 / lambda2 per frequency."""
    if np.any(spec.lambda2 <= 0):
        raise PositivityError("lambda2 must be positive")
    return spec.lambda1 / spec.lambda2


@dataclass(frozen=True)
class AnisotropyFit:
    """Large-frequency fits of the anisotropy ratio.

    ``c_fit`` fits ``1 + c x`` with ``x = 1 / (s^2 + w^2 e^2)`` and is compared
    with ``c_formula = (l1 - l2) 2 delta s / |C|``. ``asymptote`` and
    ``c_fit_free`` fit ``r + c x``; the matching predictions from the matrix
    expansion -alpha P + alpha^2 Q are ``p_ratio`` and ``c_matrix``.
    """

    c_fit: float
    c_formula: float
    asymptote: float
    c_fit_free: float
    p_ratio: float
    c_matrix: float
    omega_min: float
    residual: float

    @property
    def relative_error(self) -> float:
        return abs(self.c_fit - self.c_formula) / abs(self.c_formula)

    @property
    def relative_error_matrix(self) -> float:
        return abs(self.c_fit_free - self.c_matrix) / abs(self.c_matrix)


def crossover_frequency(spec: PolarizationSpectrum) -> float:
    """Start of the large-frequency regime: the higher of the two peak frequencies."""
    return float(max(spec.peak_omegas))


def increases_beyond(spec: PolarizationSpectrum, omega: float) -> bool:
    r = anisotropy_ratio(spec)[spec.omegas >= omega]
    return bool(r.size > 1 and np.all(np.diff(r) > 0))


def fit_anisotropy(spec: PolarizationSpectrum, model: MembraneModel, config,
                   omega_min: float | None = None) -> AnisotropyFit:
    """Fit the large-frequency anisotropy ratio (``eps0 = 0``).

    ``config`` holds the boundaries the spectrum was computed on; frequencies
    at or above ``omega_min`` (default: the crossover) enter the fit.
    """
    if model.eps0 != 0:
        raise ValueError("the large-frequency anisotropy model assumes eps0 = 0")
    op = PolarizationOperator(config)
    data = shape_spectral_data(config, op)
    d = model.delta * model.sigma0
    s, e = model.sigma_m, model.eps_m
    c_formula = (data.l1 - data.l2) * 2 * d * s / data.arclength
    # principal frame of Q; order by the first-order coefficient p
    _, vq = sym2_eigh(data.q)
    pq = sorted((float(v @ data.p @ v), float(v @ data.q @ v)) for v in vq.T)
    (p1, q1), (p2, q2) = pq
    p_ratio = p1 / p2
    c_matrix = -p_ratio * 2 * d * s * (q1 / p1 - q2 / p2)
    w0 = crossover_frequency(spec) if omega_min is None else omega_min
    mask = spec.omegas >= w0
    if mask.sum() < 3:
        raise ValueError("not enough frequencies beyond the crossover to fit")
    x = 1.0 / (s * s + spec.omegas[mask] ** 2 * e * e)
    y = anisotropy_ratio(spec)[mask]
    c_fit = float(np.dot(x, y - 1.0) / np.dot(x, x))
    a = np.column_stack([np.ones_like(x), x])
    (r_inf, c_free), *_ = np.linalg.lstsq(a, y, rcond=None)
    resid = float(np.linalg.norm(y - 1.0 - c_fit * x) / np.sqrt(mask.sum()))
    return AnisotropyFit(c_fit, float(c_formula), float(r_inf), float(c_free),
                         p_ratio, float(c_matrix), float(w0), resid)
