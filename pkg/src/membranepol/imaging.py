"""Spectroscopic imaging of a suspension inclusion inside a disk.

The macroscopic potential solves ``div((1 + f M chi_D) grad u) = 0`` in a disk
``Omega`` with Neumann data ``g``. With the representation

    u = S_Omega[psi] + S_D[phi]

the transmission condition on dD and the Neumann condition on dOmega give

    ((k + 1)/2 - (k - 1) K*_D) phi - (k - 1) dS_Omega[psi]/dn = 0,
    (-1/2 + K*_Omega) psi + dS_D[phi]/dn                     = g,

with ``k = 1 + f mu``. The constant mode is fixed by a bordered system and the
boundary potential is then shifted to zero mean on dOmega.

From boundary data the imaging functional

    F(x) = 1/2 Im u(x) + 1/(2 pi) oint (x - y).n(x) / |x - y|^2 Im u(y) ds(y)

is formed; its frequency argmax gives the Debye time of the suspension.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from . import bem
from .geometry import CellConfiguration, Curve, GeometryError, make_circle
from .media import MembraneModel, beta_k0
from .peaks import PeakNotFoundError, coarse_argmax, golden_section_max, refine_peak
from .polarization import (PolarizationSpectrum, converged_operator,
                           mwf_tensor, sym2_eigh)

logger = logging.getLogger(__name__)

ISOTROPY_TOL = 1e-8
CLEARANCE = 1e-3
MEAN_TOL = 1e-12


class AnisotropicTensorError(ValueError):
    """The scalar forward solver was given an anisotropic tensor."""


# -- scene ----------------------------------------------------------------------

@dataclass(frozen=True)
class ProbeDomain:
    """Disk of radius ``radius`` centered at the origin, sampled at ``n_nodes`` points."""

    radius: float = 1.0
    n_nodes: int = 128

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("probe radius must be positive")
        object.__setattr__(self, "_curve", make_circle(self.radius, self.n_nodes))

    @property
    def curve(self) -> Curve:
        return self._curve

    def pattern(self, a) -> np.ndarray:
        """Current pattern g = a . n for a vector ``a``."""
        return self.curve.normal @ np.asarray(a, dtype=float)

    def check_pattern(self, g: np.ndarray) -> np.ndarray:
        g = np.asarray(g)
        if np.iscomplexobj(g):
            raise ValueError("current patterns must be real")
        g = g.astype(float)
        if g.shape[0] != self.n_nodes:
            raise ValueError("pattern length does not match the probe nodes")
        total = self.curve.weights @ g
        scale = max(1.0, float(np.max(np.abs(g))) * self.curve.arclength)
        if np.any(np.abs(total) > MEAN_TOL * scale):
            raise ValueError("current pattern must have zero mean on the boundary")
        return g

    def l2_norm(self, values: np.ndarray) -> float:
        return float(np.sqrt(self.curve.weights @ np.abs(values) ** 2))


@dataclass(frozen=True)
class SuspensionInclusion:
    """Region ``boundary`` filled with a suspension of volume fraction ``f``.

    ``tensor`` maps an angular frequency to the 2x2 polarization tensor M of
    the constituent cells.
    """

    boundary: Curve
    f: float
    tensor: Callable[[float], np.ndarray]
    label: str = ""

    def __post_init__(self):
        if not 0 <= self.f < 1:
            raise ValueError("volume fraction must lie in [0, 1)")

    def check_inside(self, probe: ProbeDomain) -> None:
        r = np.max(np.hypot(*self.boundary.points.T))
        if r >= probe.radius - CLEARANCE:
            raise GeometryError("inclusion must lie strictly inside the probe domain")

    @property
    def area(self) -> float:
        return self.boundary.area

    @classmethod
    def circular_cells(cls, boundary: Curve, f: float, model: MembraneModel, r0: float,
                       label: str = "") -> "SuspensionInclusion":
        """Cells of radius ``r0`` on the rescaled scale, closed-form tensor."""
        return cls(boundary, f, lambda w: mwf_tensor(beta_k0(model, w), r0), label)

    @classmethod
    def from_cells(cls, boundary: Curve, f: float, cells, model: MembraneModel,
                   label: str = "") -> "SuspensionInclusion":
        """Cells given by boundaries on the rescaled scale (a Curve or configuration)."""
        op = converged_operator(cells, beta_k0(model, np.array([1e4, 1e6, 1e9])))
        return cls(boundary, f, lambda w: op.tensor(beta_k0(model, w)), label)

    @classmethod
    def from_unit_cell(cls, boundary: Curve, cells: CellConfiguration, model: MembraneModel,
                       label: str = "") -> "SuspensionInclusion":
        """Suspension of a unit-cell configuration: f from the cell, M from its rescaling."""
        return cls.from_cells(boundary, cells.f, cells.rescaled(), model, label)


def scalar_mu(m: np.ndarray) -> complex:
    m = np.asarray(m, dtype=complex)
    mu = 0.5 * (m[0, 0] + m[1, 1])
    if np.linalg.norm(m - mu * np.eye(2)) > ISOTROPY_TOL * max(np.linalg.norm(m), 1e-300):
        raise AnisotropicTensorError("forward solver requires an isotropic tensor")
    return complex(mu)


# -- forward solver ---------------------------------------------------------------

@dataclass(frozen=True)
class ForwardSolution:
    omega: float
    u: np.ndarray
    shift: np.ndarray
    residual: float


class ForwardOperator:
    """Geometry blocks of the coupled boundary-integral system, reused across solves."""

    def __init__(self, probe: ProbeDomain, boundary: Curve | None):
        self.probe = probe
        self.boundary = boundary
        om = probe.curve
        self.k_omega = bem.adjoint_double_layer_matrix(om).matrix
        self.s_omega = bem.single_layer_matrix(om).matrix
        self.w_omega = om.weights
        if boundary is not None:
            self.k_d = bem.adjoint_double_layer_matrix(boundary).matrix
            self.t_omega_d = bem.single_layer_normal_matrix(boundary, om.points, om.normal)
            self.t_d_omega = bem.single_layer_normal_matrix(om, boundary.points, boundary.normal)
            self.s_omega_d = bem.single_layer_target_matrix(boundary, om.points)

    def solve(self, k_d: complex, g: np.ndarray, omega: float = np.nan) -> ForwardSolution:
        g = np.asarray(g, dtype=float)
        single = g.ndim == 1
        g2 = g[:, None] if single else g
        n_o = self.probe.n_nodes
        with_d = self.boundary is not None and k_d != 1
        n_d = self.boundary.n if with_d else 0
        size = n_o + n_d + 1
        a = np.zeros((size, size), dtype=complex)
        a[:n_o, :n_o] = -0.5 * np.eye(n_o) + self.k_omega
        a[:n_o, -1] = 1.0
        a[-1, :n_o] = self.w_omega
        if with_d:
            a[:n_o, n_o:n_o + n_d] = self.t_omega_d
            a[n_o:n_o + n_d, :n_o] = -(k_d - 1) * self.t_d_omega
            a[n_o:n_o + n_d, n_o:n_o + n_d] = 0.5 * (k_d + 1) * np.eye(n_d) - (k_d - 1) * self.k_d
        rhs = np.zeros((size, g2.shape[1]), dtype=complex)
        rhs[:n_o] = g2
        res = bem.solve(a, rhs, check_residual=1e-10)
        x = res.solution
        u = self.s_omega @ x[:n_o]
        if with_d:
            u = u + self.s_omega_d @ x[n_o:n_o + n_d]
        shift = (self.w_omega @ u) / self.w_omega.sum()
        u = u - shift[None, :]
        if single:
            u, shift = u[:, 0], shift[0]
        return ForwardSolution(float(omega), u, np.asarray(shift), res.residual)


def forward_solve(probe: ProbeDomain, inc: SuspensionInclusion | None, omega: float,
                  g: np.ndarray | None = None,
                  operator: ForwardOperator | None = None) -> ForwardSolution:
    """Boundary potential for Neumann data ``g`` (default ``g = n_1``).

    ``g`` may hold several patterns as columns. The inclusion tensor must be
    isotropic at ``omega``.
    """
    g = probe.pattern((1.0, 0.0)) if g is None else np.asarray(g)
    g = probe.check_pattern(g)
    if inc is None or inc.f == 0:
        k_d = 1.0
        boundary = None
    else:
        inc.check_inside(probe)
        k_d = 1 + inc.f * scalar_mu(inc.tensor(omega))
        boundary = inc.boundary
    op = operator if operator is not None else ForwardOperator(probe, boundary)
    return op.solve(k_d, g, omega)


def concentric_disk_mode1(radius_d: float, radius_omega: float, k: complex) -> complex:
    """Coefficient of cos(theta) in u on the outer circle for g = cos(theta).

    Inside ``A r cos``; outside ``(B r + C / r) cos``; continuity, flux
    transmission and the Neumann condition fix A, B, C.
    """
    rd, ro = radius_d, radius_omega
    mat = np.array([[rd, -rd, -1 / rd],
                    [k, -1, 1 / rd**2],
                    [0, 1, -1 / ro**2]], dtype=complex)
    a, b, c = np.linalg.solve(mat, np.array([0, 0, 1], dtype=complex))
    return complex(b * ro + c / ro)


# -- imaging functional -----------------------------------------------------------

def imaging_functional(u: np.ndarray, probe: ProbeDomain, g: np.ndarray | None = None) -> np.ndarray:
    """F = 1/2 Im u + K*[Im u] on the probe boundary (columns of ``u`` handled independently).

    The logarithmic term of the full identity carries the real pattern ``g``
    only, so it does not contribute to the imaginary part.
    """
    if g is not None and np.iscomplexobj(g):
        raise ValueError("the functional assumes a real current pattern")
    im = np.imag(np.asarray(u))
    k = bem.adjoint_double_layer_matrix(probe.curve).matrix
    return 0.5 * im + k @ im


def _polar_quadrature(boundary: Curve, n_radial: int, n_angular: int):
    """Nodes and weights on the region bounded by a star-shaped curve."""
    c = boundary.centroid
    b = boundary.resample(n_angular)
    s, ws = np.polynomial.legendre.leggauss(n_radial)
    s, ws = 0.5 * (s + 1), 0.5 * ws
    rel = b.points - c
    jac_t = np.abs(rel[:, 0] * b.dx[:, 1] - rel[:, 1] * b.dx[:, 0]) * (2 * np.pi / n_angular)
    pts = c + s[:, None, None] * rel[None, :, :]
    w = (ws * s)[:, None] * jac_t[None, :]
    return pts.reshape(-1, 2), w.reshape(-1)


def handside_rhs(probe: ProbeDomain, inc: SuspensionInclusion, omega: float, a,
                 sign: float = -1.0, n_radial: int = 64, n_angular: int = 64) -> np.ndarray:
    """First-order prediction of F for the pattern ``g = a . n``.

    ``sign * f / (2 pi) * int_D (Im M grad U) . (x - y) / |x - y|^2 dy`` with the
    background gradient ``grad U = a``. Green's identity gives ``sign = -1``.
    """
    y, w = _polar_quadrature(inc.boundary, n_radial, n_angular)
    v = np.imag(np.asarray(inc.tensor(omega), dtype=complex)) @ np.asarray(a, dtype=float)
    x = probe.curve.points
    d = x[:, None, :] - y[None, :, :]
    r2 = np.sum(d * d, axis=-1)
    integral = (d @ v / r2) @ w
    return sign * inc.f / (2 * np.pi) * integral


# -- Debye time from the functional -----------------------------------------------

@dataclass(frozen=True)
class DebyeEstimate:
    tau_hat: float
    omega_hat: float
    peak_value: float
    omegas: np.ndarray
    norms: np.ndarray


def functional_norm(probe: ProbeDomain, inc: SuspensionInclusion, omega: float,
                    g: np.ndarray | None = None,
                    operator: ForwardOperator | None = None) -> float:
    sol = forward_solve(probe, inc, omega, g, operator)
    return probe.l2_norm(imaging_functional(sol.u, probe))


def estimate_debye(probe: ProbeDomain, inc: SuspensionInclusion, omegas,
                   g: np.ndarray | None = None, rtol: float = 1e-6,
                   threads: int = 1) -> DebyeEstimate:
    """tau_hat = 1 / argmax ||F(., omega)|| from synthetic forward solves."""
    omegas = np.asarray(omegas, dtype=float)
    op = ForwardOperator(probe, inc.boundary if inc.f else None)

    def norm(w):
        return functional_norm(probe, inc, w, g, op)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            norms = np.array(list(pool.map(norm, omegas)))
    else:
        norms = np.array([norm(w) for w in omegas])
    w_hat = refine_peak(norm, omegas, norms, rtol=rtol)
    return DebyeEstimate(1.0 / w_hat, w_hat, norm(w_hat), omegas, norms)


def estimate_debye_from_data(omegas, u_data: np.ndarray, probe: ProbeDomain,
                             rtol: float = 1e-6) -> DebyeEstimate:
    """Debye estimate from measured boundary data ``u_data[k]`` at ``omegas[k]``.

    Between samples the functional norm is interpolated by a cubic spline in
    log omega; the peak is refined by golden section on the spline.
    """
    omegas = np.asarray(omegas, dtype=float)
    norms = np.array([probe.l2_norm(imaging_functional(u, probe)) for u in u_data])
    k = coarse_argmax(norms)
    spline = CubicSpline(np.log(omegas), norms)
    x = golden_section_max(lambda s: float(spline(s)), np.log(omegas[k - 1]),
                           np.log(omegas[k + 1]), tol=0.5 * rtol)
    return DebyeEstimate(float(np.exp(-x)), float(np.exp(x)), float(spline(x)), omegas, norms)


# -- pulsed selective imaging --------------------------------------------------------

@dataclass(frozen=True)
class PulseSpec:
    """Raised-cosine bandpass of width ``bandwidth`` centered at ``center`` (rad/s)."""

    center: float
    bandwidth: float
    n_times: int = 1001
    n_freq: int = 2049

    def __post_init__(self):
        if not 0 < self.bandwidth < 2 * self.center:
            raise ValueError("need 0 < bandwidth < 2 center (positive support)")

    @property
    def support(self) -> tuple[float, float]:
        return self.center - 0.5 * self.bandwidth, self.center + 0.5 * self.bandwidth

    def h_hat(self, omega) -> np.ndarray:
        x = (np.asarray(omega, dtype=float) - self.center) / self.bandwidth
        return np.where(np.abs(x) <= 0.5, 0.5 * (1 + np.cos(2 * np.pi * x)), 0.0)

    @property
    def times(self) -> np.ndarray:
        t_max = 20.0 / self.bandwidth
        return np.linspace(-t_max, t_max, self.n_times)


@dataclass(frozen=True)
class PulseResponse:
    times: np.ndarray
    responses: np.ndarray

    @property
    def sup_norms(self) -> np.ndarray:
        """max over t of the Frobenius norm of each time-domain tensor."""
        return np.max(np.linalg.norm(self.responses, axis=(-2, -1)), axis=1)


def _tensor_interpolant(spec: PolarizationSpectrum):
    x = np.log(spec.omegas)
    t = np.asarray(spec.tensors).reshape(len(x), 4)
    re, im = CubicSpline(x, t.real, axis=0), CubicSpline(x, t.imag, axis=0)
    return lambda w: (re(np.log(w)) + 1j * im(np.log(w))).reshape(-1, 2, 2)


def pulse_response(pulse: PulseSpec, spectra, h_hat: Callable | None = None) -> PulseResponse:
    """Time-domain tensors int h_hat(w) M_i(w) exp(i w t) dw for each spectrum.

    M is interpolated by cubic splines in log omega onto a uniform grid over the
    support of the pulse and integrated by the trapezoid rule.
    """
    lo, hi = pulse.support
    w = np.linspace(lo, hi, pulse.n_freq)
    hh = pulse.h_hat(w) if h_hat is None else np.asarray(h_hat(w), dtype=float)
    quad = np.full(w.size, w[1] - w[0])
    quad[[0, -1]] *= 0.5
    phase = np.exp(1j * np.outer(pulse.times, w)) * (quad * hh)[None, :]
    out = []
    for spec in spectra:
        if spec.omegas[0] > lo or spec.omegas[-1] < hi:
            raise ValueError("spectrum grid does not cover the pulse support")
        m = _tensor_interpolant(spec)(w)
        out.append(np.einsum("tk,kij->tij", phase, m))
    return PulseResponse(pulse.times, np.array(out))


def stationary_band_estimate(pulse: PulseSpec, spec: PolarizationSpectrum) -> float:
    """|M(center)| int h_hat dw (Frobenius norm)."""
    m = _tensor_interpolant(spec)(np.array([pulse.center]))[0]
    return float(np.linalg.norm(m) * 0.5 * pulse.bandwidth)


# -- anisotropy --------------------------------------------------------------------

@dataclass(frozen=True)
class AnisotropyStatistic:
    angles: np.ndarray
    values: np.ndarray
    s_min: float
    s_max: float
    ratio: float
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def anisotropy_statistic(probe: ProbeDomain, inc: SuspensionInclusion, omega: float,
                         angles: np.ndarray | None = None) -> AnisotropyStatistic:
    """S[a] = oint (a . n) F[a] ds over unit vectors ``a`` at ``angles``.

    Each principal axis q_k of Im M is solved as a scalar problem with
    ``mu_k = q_k^T M q_k``; responses are superposed linearly in ``a``. The
    ratio is ``min |S| / max |S|``.
    """
    if angles is None:
        angles = np.linspace(0, np.pi, 180, endpoint=False)
    angles = np.asarray(angles, dtype=float)
    inc.check_inside(probe)
    m = np.asarray(inc.tensor(omega), dtype=complex)
    lam, q = sym2_eigh(m.imag)
    op = ForwardOperator(probe, inc.boundary)
    fk = []
    for k in range(2):
        mu = complex(q[:, k] @ m @ q[:, k])
        sol = op.solve(1 + inc.f * mu, probe.pattern(q[:, k]), omega)
        fk.append(imaging_functional(sol.u, probe))
    fk = np.column_stack(fk)
    a = np.column_stack([np.cos(angles), np.sin(angles)])
    coef = a @ q
    g = probe.curve.normal @ a.T
    fa = fk @ coef.T
    s = np.abs(probe.curve.weights @ (g * fa))
    if not np.max(s) > 0:
        raise ArithmeticError("degenerate anisotropy statistic (max S = 0)")
    return AnisotropyStatistic(angles, s, float(s.min()), float(s.max()),
                               float(s.min() / s.max()), lam, q)


__all__ = [
    "AnisotropicTensorError", "AnisotropyStatistic", "DebyeEstimate", "ForwardOperator",
    "ForwardSolution", "PeakNotFoundError", "ProbeDomain", "PulseResponse", "PulseSpec",
    "SuspensionInclusion", "anisotropy_statistic", "concentric_disk_mode1", "estimate_debye",
    "estimate_debye_from_data", "forward_solve", "functional_norm", "handside_rhs",
    "imaging_functional", "pulse_response", "scalar_mu", "stationary_band_estimate",
]
