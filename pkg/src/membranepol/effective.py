"""Effective admittivity of a periodic or random dilute cell suspension.

Three evaluations of K* are provided:

* ``dilute``:   k0 (I + f M (I - f/2 M)^{-1}) with M from the rescaled cell;
* ``periodic``: k0 (I + alpha oint_Gamma psi_i n_j ds), psi_i = -(I + alpha L~)^{-1} n_i,
  with the unit-torus hypersingular operator L~ on the unit-cell boundaries;
* ``random``:   the dilute formula with M averaged over random deformations.

``model.delta`` is the membrane thickness relative to the cell size (the
thickness on the rescaled boundary ``Gamma / rho``). On the unit-cell
boundaries the thickness is therefore ``model.delta * rho``.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import bem
from .deformation import DeformationParams, sample_deformation
from .geometry import CellConfiguration, transform
from .media import MembraneModel, admittivity_k0, beta_k0
from .polarization import PolarizationOperator, converged_operator

logger = logging.getLogger(__name__)

MODES = ("dilute", "periodic", "random")
SYMMETRY_TOL = 1e-8
DEFAULT_SAMPLES = 64


class NearSingularError(ArithmeticError):
    """I - (f/2) M is singular to working precision."""


@dataclass(frozen=True)
class EffectiveTensor:
    omega: float
    k_star: np.ndarray
    mode: str
    f: float
    k0: complex
    n_samples: int = 0
    stderr: float = 0.0
    rho_factor: float = 1.0
    converged: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        k = np.array(self.k_star, dtype=complex)
        k.setflags(write=False)
        object.__setattr__(self, "k_star", k)

    def asymmetry(self) -> float:
        k = self.k_star
        return float(abs(k[0, 1] - k[1, 0]) / np.linalg.norm(k))

    def coercivity_band(self, n_dirs: int = 181) -> tuple[float, float]:
        """min and max over unit xi of Re(xi^T K* xi) / |k0|."""
        th = np.linspace(0, np.pi, n_dirs)
        xi = np.stack([np.cos(th), np.sin(th)], axis=-1)
        vals = np.einsum("ki,ij,kj->k", xi, self.k_star.real, xi) / abs(self.k0)
        return float(vals.min()), float(vals.max())


def resummed(k0: complex, f: float, m: np.ndarray) -> np.ndarray:
    """k0 (I + f M (I - f/2 M)^{-1})."""
    eye = np.eye(2)
    a = eye - 0.5 * f * m
    if np.linalg.cond(a) > 1 / np.finfo(float).eps:
        raise NearSingularError("I - (f/2) M is numerically singular")
    return k0 * (eye + f * m @ np.linalg.inv(a))


def _dilute_operator(config: CellConfiguration, model: MembraneModel, omegas) -> PolarizationOperator:
    alphas = np.atleast_1d(beta_k0(model, omegas))
    sample = alphas[[0, len(alphas) // 2, -1]]
    return converged_operator(config.rescaled(), sample)


def dilute_effective(config: CellConfiguration, model: MembraneModel, omega: float,
                     operator: PolarizationOperator | None = None) -> EffectiveTensor:
    """Dilute-limit K* from the polarization tensor of the rescaled cell.

    ``operator`` may pass a precomputed operator on ``config.rescaled()``.
    """
    k0 = complex(admittivity_k0(model, omega))
    if len(config) == 0:
        return EffectiveTensor(float(omega), k0 * np.eye(2), "dilute", 0.0, k0)
    op = operator if operator is not None else _dilute_operator(config, model, omega)
    m = op.tensor(complex(beta_k0(model, omega)))
    return EffectiveTensor(float(omega), resummed(k0, config.f, m), "dilute", config.f, k0)


def periodic_effective(config: CellConfiguration, model: MembraneModel, omega: float,
                       lop: bem.OperatorMatrix | None = None) -> EffectiveTensor:
    """K* from the periodic boundary-integral cell problem on the unit cell.

    ``lop`` may pass a precomputed periodic hypersingular operator.
    """
    k0 = complex(admittivity_k0(model, omega))
    if len(config) == 0:
        return EffectiveTensor(float(omega), k0 * np.eye(2), "periodic", 0.0, k0)
    if not config.unit_cell:
        raise ValueError("periodic evaluation needs a unit-cell configuration")
    alpha = complex(beta_k0(model.scaled(config.rho), omega))
    if lop is None:
        lop = bem.hypersingular_operator(config, "periodic")
    system = bem.hypersingular_matrix(config, "periodic", alpha, operator=lop)
    nrm = config.stacked("normal")
    w = config.stacked("weights")
    res = bem.solve(system, -nrm.astype(complex), check_residual=1e-10)
    m = alpha * (res.solution * w[:, None]).T @ nrm
    return EffectiveTensor(float(omega), k0 * (np.eye(2) + m), "periodic", config.f, k0)


class _Welford:
    """Running mean and sum of squared deviations of complex arrays."""

    def __init__(self, shape):
        self.n = 0
        self.mean = np.zeros(shape, dtype=complex)
        self.m2 = np.zeros(shape)

    def push(self, x):
        self.n += 1
        d = x - self.mean
        self.mean = self.mean + d / self.n
        self.m2 = self.m2 + (d * np.conj(x - self.mean)).real

    @property
    def variance(self):
        return self.m2 / (self.n - 1) if self.n > 1 else np.zeros_like(self.m2)


@dataclass(frozen=True)
class RandomEnsembleResult:
    """Per-frequency effective tensors plus the raw sample statistics of M."""

    tensors: list
    mean_m: np.ndarray
    var_m: np.ndarray
    rho_factor: float
    n_samples: int


def random_dilute_effective(config: CellConfiguration, params: DeformationParams,
                            model: MembraneModel, omegas, n_samples: int = DEFAULT_SAMPLES,
                            seed: int = 0, tol: float | None = None, nodes: int | None = None,
                            resum: bool = True, threads: int = 1) -> RandomEnsembleResult:
    """Monte-Carlo dilute K* over random deformations of the reference cell.

    Each sample deforms ``config``, rescales by the reference ``1 / rho`` and
    evaluates M. With ``resum=True`` the averaged tensor enters the same
    resummed formula as the dilute mode (so a zero-amplitude ensemble equals
    it exactly); ``resum=False`` uses the first-order ``k0 (I + rho_f f M)``.
    Samples are drawn sequentially from one generator and reduced in sample
    order, so results are reproducible for fixed ``seed`` and any ``threads``.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    if len(config) == 0:
        raise ValueError("random mode needs at least one cell")
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    rng = np.random.default_rng(seed)
    samples = [sample_deformation(params, rng, config) for _ in range(n_samples)]
    scale = 1.0 / config.rho
    alphas = np.asarray(beta_k0(model, omegas), dtype=complex)

    def tensor_of(sample):
        curves = [transform(c.map_points(sample), scale=scale) for c in config.curves]
        cfg = CellConfiguration(curves, unit_cell=False, margin=config.margin * scale)
        if nodes is not None:
            cfg = CellConfiguration([c.resample(nodes) for c in cfg.curves], unit_cell=False,
                                    margin=cfg.margin)
        return PolarizationOperator(cfg).tensor(alphas)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            ms = list(pool.map(tensor_of, samples))
    else:
        ms = [tensor_of(s) for s in samples]
    acc = _Welford((omegas.size, 2, 2))
    for m in ms:
        acc.push(m)
    if params.is_rigid:
        rho_factor = 1.0
    else:
        grad = np.mean([s.mean_gradient() for s in samples], axis=0)
        rho_factor = float(1.0 / np.linalg.det(grad))
    f_eff = rho_factor * config.f
    k0s = np.asarray(admittivity_k0(model, omegas), dtype=complex)
    out = []
    for k, w in enumerate(omegas):
        mbar = acc.mean[k]
        if resum:
            kst = resummed(k0s[k], f_eff, mbar)
        else:
            kst = k0s[k] * (np.eye(2) + f_eff * mbar)
        se = float(abs(k0s[k]) * f_eff * np.sqrt(np.max(acc.variance[k]) / n_samples))
        ok = tol is None or se <= tol
        if not ok:
            logger.warning("Monte-Carlo standard error %.3g exceeds tolerance %.3g at omega=%g",
                           se, tol, w)
        out.append(EffectiveTensor(float(w), kst, "random", config.f, complex(k0s[k]),
                                   n_samples, se, rho_factor, ok))
    return RandomEnsembleResult(out, acc.mean, acc.variance, rho_factor, n_samples)


def effective_sweep(config: CellConfiguration, model: MembraneModel, omegas, mode: str = "dilute",
                    threads: int = 1) -> list[EffectiveTensor]:
    """K* over frequencies for the dilute or periodic mode (operators assembled once)."""
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    if mode == "dilute":
        op = _dilute_operator(config, model, omegas) if len(config) else None

        def one(w):
            return dilute_effective(config, model, w, op)
    elif mode == "periodic":
        lop = bem.hypersingular_operator(config, "periodic") if len(config) else None

        def one(w):
            return periodic_effective(config, model, w, lop)
    else:
        raise ValueError(f"mode must be 'dilute' or 'periodic' here, got {mode!r}")
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, omegas))
    return [one(w) for w in omegas]
