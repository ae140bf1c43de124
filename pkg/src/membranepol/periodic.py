"""Laplace Green function of the unit torus by Ewald summation.

``G(x)`` solves ``Laplace G = delta_lattice - 1`` with zero mean over the unit
cell, so that near the origin

    G(x) = ln|x| / (2 pi) + R2(x),   R2(x) = R2(0) - |x|^2 / 4 + O(|x|^4).

Splitting with a Gaussian screen of width ``1/eta`` gives

    G(x) = -1/(4 pi) sum_n E1(eta^2 |x - n|^2)
           - 1/(4 pi^2) sum_{k != 0} exp(-pi^2 |k|^2 / eta^2) cos(2 pi k.x) / |k|^2
           + 1 / (4 eta^2).

The logarithm is removed analytically from the ``n = 0`` image through
``E1(z) = -gamma - ln z + Ein(z)`` so ``R2`` is evaluated without cancellation.
"""

from __future__ import annotations

import numpy as np
from scipy.special import exp1

EULER_GAMMA = 0.5772156649015329
TAIL_TOLERANCE = 1e-15


class EwaldTruncationError(ValueError):
    """Point outside the region for which the truncation radii were certified."""


def _ein(z):
    """Entire exponential integral Ein(z) = int_0^z (1 - e^-t)/t dt."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = z < 1.0
    zs = z[small]
    term = zs.copy()
    acc = zs.copy()
    for k in range(2, 30):
        term = -term * zs * (k - 1) / (k * k)
        acc += term
    out[small] = acc
    zl = z[~small]
    out[~small] = exp1(zl) + np.log(zl) + EULER_GAMMA
    return out


def _ein_g(s, a):
    """g(s) = (1 - exp(-a s)) / s and its derivative g'(s), stable at s -> 0."""
    s = np.asarray(s, dtype=float)
    g = np.empty_like(s)
    dg = np.empty_like(s)
    small = a * s < 1e-3
    ss = s[small]
    g[small] = a - a**2 * ss / 2 + a**3 * ss**2 / 6 - a**4 * ss**3 / 24
    dg[small] = -a**2 / 2 + a**3 * ss / 3 - a**4 * ss**2 / 8 + a**5 * ss**3 / 30
    sl = s[~small]
    em1 = -np.expm1(-a * sl)
    g[~small] = em1 / sl
    dg[~small] = (a * sl * np.exp(-a * sl) - em1) / sl**2
    return g, dg


class PeriodicGreen:
    """Ewald evaluator for the periodic Green function and its smooth remainder.

    Parameters
    ----------
    eta : float
        Gaussian splitting parameter (default sqrt(pi) balances the two sums).
    tol : float
        Bound on the truncation tail of each lattice sum.
    reach : float
        Largest |x_i| the truncation is certified for. Differences of points in
        the unit square satisfy ``|x_i| < 1``.
    """

    def __init__(self, eta: float = np.sqrt(np.pi), tol: float = TAIL_TOLERANCE,
                 reach: float = 1.0):
        if not eta > 0:
            raise ValueError("eta must be positive")
        self.eta = float(eta)
        self.tol = float(tol)
        self.reach = float(reach)
        self.real_radius = self._real_radius()
        self.spectral_radius = self._spectral_radius()
        r = np.arange(-self.real_radius, self.real_radius + 1)
        img = np.array([(i, j) for i in r for j in r if (i, j) != (0, 0)], dtype=float)
        self._images = img
        k = np.arange(-self.spectral_radius, self.spectral_radius + 1)
        ks = np.array([(i, j) for i in k for j in k if (i, j) != (0, 0)], dtype=float)
        k2 = np.sum(ks**2, axis=1)
        self._kvec = ks
        self._kcoef = np.exp(-np.pi**2 * k2 / self.eta**2) / k2
        self.r2_zero = float(self.r2(np.zeros((1, 2)))[0])

    # -- truncation ------------------------------------------------------------

    def real_tail_bound(self, p: int) -> float:
        """Bound on sum of E1 terms over images with |n|_inf > p for |x_i| <= reach."""
        a = self.eta**2
        total = 0.0
        for m in range(p + 1, p + 200):
            d = max(m - self.reach, 1e-300)
            z = a * d * d
            total += 8 * m * np.exp(-z) / z / (4 * np.pi)
        return total

    def spectral_tail_bound(self, p: int) -> float:
        total = 0.0
        for m in range(p + 1, p + 200):
            total += 8 * m * np.exp(-np.pi**2 * m * m / self.eta**2) / (m * m) / (4 * np.pi**2)
        return total

    def _real_radius(self) -> int:
        p = int(np.ceil(self.reach)) + 1
        while self.real_tail_bound(p) > self.tol:
            p += 1
        return p

    def _spectral_radius(self) -> int:
        p = 1
        while self.spectral_tail_bound(p) > self.tol:
            p += 1
        return p

    def _check(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[-1] != 2:
            raise ValueError("points must have a trailing dimension of 2")
        if np.any(np.abs(x) > self.reach + 1e-12):
            raise EwaldTruncationError(
                f"|x_i| exceeds {self.reach}; truncation tail not certified")
        return x

    # -- pieces ----------------------------------------------------------------

    def _spectral(self, x, derivs):
        phase = 2 * np.pi * x @ self._kvec.T
        c, s = np.cos(phase), np.sin(phase)
        val = -(c @ self._kcoef) / (4 * np.pi**2)
        out = [val]
        if derivs >= 1:
            out.append((s * self._kcoef) @ self._kvec / (2 * np.pi))
        if derivs >= 2:
            kk = self._kvec[:, :, None] * self._kvec[:, None, :]
            out.append(np.einsum("pk,kij->pij", c * self._kcoef, kk))
        return out

    def _images_sum(self, x, derivs):
        a = self.eta**2
        y = x[:, None, :] - self._images[None, :, :]
        r2 = np.sum(y**2, axis=-1)
        e = np.exp(-a * r2)
        val = -np.sum(exp1(a * r2), axis=1) / (4 * np.pi)
        out = [val]
        if derivs >= 1:
            out.append(np.sum(2 * y * (e / r2)[..., None], axis=1) / (4 * np.pi))
        if derivs >= 2:
            eye = np.eye(2)
            yy = y[..., :, None] * y[..., None, :]
            h = -2 * e[..., None, None] * (eye / r2[..., None, None]
                                           - 2 * (a / r2 + 1 / r2**2)[..., None, None] * yy)
            out.append(-np.sum(h, axis=1) / (4 * np.pi))
        return out

    def _origin(self, x, derivs):
        a = self.eta**2
        s = np.sum(x**2, axis=-1)
        val = -(_ein(a * s) - EULER_GAMMA - 2 * np.log(self.eta)) / (4 * np.pi)
        out = [val]
        if derivs >= 1:
            g, dg = _ein_g(s, a)
            out.append(-2 * x * g[:, None] / (4 * np.pi))
            if derivs >= 2:
                xx = x[:, :, None] * x[:, None, :]
                h = 2 * g[:, None, None] * np.eye(2) + 4 * dg[:, None, None] * xx
                out.append(-h / (4 * np.pi))
        return out

    def _combine(self, x, derivs):
        parts = [self._origin(x, derivs), self._images_sum(x, derivs), self._spectral(x, derivs)]
        out = [sum(p[i] for p in parts) for i in range(derivs + 1)]
        out[0] = out[0] + 1.0 / (4 * self.eta**2)
        return out

    # -- public API ----------------------------------------------------------------

    def r2(self, x) -> np.ndarray:
        """Smooth remainder R2(x) = G(x) - ln|x|/(2 pi)."""
        x = self._check(x)
        return self._combine(x, 0)[0]

    def r2_derivatives(self, x):
        """(R2, grad R2, Hessian R2) at points of shape (M, 2)."""
        x = self._check(x)
        return tuple(self._combine(x, 2))

    def green(self, x) -> np.ndarray:
        """Full periodic Green function G(x) for x away from lattice points."""
        x = self._check(x)
        r = np.hypot(x[:, 0], x[:, 1])
        return self._combine(x, 0)[0] + np.log(r) / (2 * np.pi)

    def green_derivatives(self, x):
        """(G, grad G, Hessian G) at points away from the lattice."""
        x = self._check(x)
        val, grad, hess = self._combine(x, 2)
        r2 = np.sum(x**2, axis=-1)
        val = val + 0.5 * np.log(r2) / (2 * np.pi)
        grad = grad + x / r2[:, None] / (2 * np.pi)
        xx = x[:, :, None] * x[:, None, :]
        hess = hess + (np.eye(2) / r2[:, None, None] - 2 * xx / r2[:, None, None] ** 2) / (2 * np.pi)
        return val, grad, hess


_DEFAULT = None


def default_periodic_green() -> PeriodicGreen:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = PeriodicGreen()
    return _DEFAULT
