"""Smooth closed curves sampled at equispaced parameter nodes, and cell configurations.

A curve is stored as its values at ``N`` nodes ``t_k = 2 pi k / N``; derivatives are
obtained by FFT differentiation, which is spectrally accurate for smooth curves and
pairs naturally with trapezoid/Nystrom quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

DEFAULT_NODES = 128
SEPARATION_MARGIN = 1e-3


class GeometryError(ValueError):
    """Invalid curve or configuration."""


def _is_power_of_two(n: int) -> bool:
    return n >= 4 and (n & (n - 1)) == 0


def nodes(n: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(n) / n


def spectral_derivative(values: np.ndarray, order: int = 1) -> np.ndarray:
    """Derivative in t of samples of a 2 pi-periodic function (along axis 0).

    The Nyquist mode is dropped for odd orders so that real data stays real and
    the differentiation matrix is exactly skew-symmetric.
    """
    n = values.shape[0]
    k = np.fft.fftfreq(n, d=1.0 / n)
    if order % 2 == 1:
        k[n // 2] = 0.0
    mult = (1j * k) ** order
    shape = (n,) + (1,) * (values.ndim - 1)
    out = np.fft.ifft(np.fft.fft(values, axis=0) * mult.reshape(shape), axis=0)
    if np.isrealobj(values):
        return out.real
    return out


def differentiation_matrix(n: int) -> np.ndarray:
    """Dense matrix of ``spectral_derivative`` for even ``n`` (skew-symmetric)."""
    h = 2.0 * np.pi / n
    j = np.arange(n)
    diff = j[:, None] - j[None, :]
    with np.errstate(divide="ignore"):
        mat = 0.5 * (-1.0) ** diff / np.tan(0.5 * diff * h)
    mat[diff == 0] = 0.0
    return mat


class Curve:
    """Closed, counterclockwise, regular curve given by samples at equispaced nodes.

    Parameters
    ----------
    points : array_like, shape (N, 2)
        Samples ``x(t_k)``; ``N`` must be a power of two.
    func : callable, optional
        Exact parameterization ``t -> (len(t), 2)`` used when resampling.
    validate : bool
        Run regularity, orientation and self-intersection checks.
    """

    def __init__(self, points, func: Callable[[np.ndarray], np.ndarray] | None = None,
                 validate: bool = True):
        pts = np.array(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise GeometryError("points must have shape (N, 2)")
        if not _is_power_of_two(pts.shape[0]):
            raise GeometryError(f"node count must be a power of two, got {pts.shape[0]}")
        pts.setflags(write=False)
        self.points = pts
        self.func = func
        if validate:
            self.validate()

    @classmethod
    def from_function(cls, func, n: int = DEFAULT_NODES, validate: bool = True) -> "Curve":
        return cls(func(nodes(n)), func=func, validate=validate)

    @classmethod
    def from_fourier(cls, cx: Sequence[complex], cy: Sequence[complex],
                     n: int = DEFAULT_NODES) -> "Curve":
        """Curve whose coordinates have complex Fourier coefficients ``c[m]``, m = 0..K.

        ``x(t) = Re sum_m c[m] e^{i m t}`` (and likewise for y).
        """
        cx = np.asarray(cx, dtype=complex)
        cy = np.asarray(cy, dtype=complex)

        def func(t):
            t = np.asarray(t, dtype=float)
            ex = np.exp(1j * np.outer(t, np.arange(cx.size)))
            ey = np.exp(1j * np.outer(t, np.arange(cy.size)))
            return np.column_stack([(ex @ cx).real, (ey @ cy).real])

        return cls.from_function(func, n)

    # -- derived quantities -------------------------------------------------

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @cached_property
    def t(self) -> np.ndarray:
        return nodes(self.n)

    @cached_property
    def dx(self) -> np.ndarray:
        """Tangent x'(t) at the nodes."""
        return spectral_derivative(self.points, 1)

    @cached_property
    def ddx(self) -> np.ndarray:
        return spectral_derivative(self.points, 2)

    @cached_property
    def speed(self) -> np.ndarray:
        return np.hypot(self.dx[:, 0], self.dx[:, 1])

    @cached_property
    def normal(self) -> np.ndarray:
        """Outward unit normal (counterclockwise orientation)."""
        return np.column_stack([self.dx[:, 1], -self.dx[:, 0]]) / self.speed[:, None]

    @cached_property
    def curvature(self) -> np.ndarray:
        d1, d2 = self.dx, self.ddx
        return (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / self.speed**3

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoid arclength weights ds_k = |x'(t_k)| 2 pi / N."""
        return self.speed * (2.0 * np.pi / self.n)

    @property
    def arclength(self) -> float:
        return float(self.weights.sum())

    @property
    def area(self) -> float:
        return enclosed_area(self)

    @property
    def centroid(self) -> np.ndarray:
        # Green's theorem: int x dA = 1/2 oint x^2 dy, int y dA = -1/2 oint y^2 dx
        x, y = self.points[:, 0], self.points[:, 1]
        h = 2.0 * np.pi / self.n
        cx = 0.5 * h * np.sum(x**2 * self.dx[:, 1])
        cy = -0.5 * h * np.sum(y**2 * self.dx[:, 0])
        return np.array([cx, cy]) / self.area

    def resample(self, n: int) -> "Curve":
        if n == self.n:
            return self
        if self.func is not None:
            return Curve(self.func(nodes(n)), func=self.func, validate=False)
        return Curve(fourier_resample(self.points, n), validate=False)

    def map_points(self, mapping: Callable[[np.ndarray], np.ndarray],
                   validate: bool = True) -> "Curve":
        """Image of the curve under a pointwise map of the plane."""
        func = None
        if self.func is not None:
            base = self.func
            func = lambda t: mapping(base(t))  # noqa: E731
        return Curve(mapping(self.points), func=func, validate=validate)

    # -- checks -------------------------------------------------------------

    def validate(self) -> None:
        if np.min(self.speed) <= 1e-12 * max(1.0, np.max(self.speed)):
            raise GeometryError("parameterization is not regular (x'(t) vanishes)")
        if self.area <= 0:
            raise GeometryError("curve must be counterclockwise (enclosed area <= 0)")
        if _self_intersects(self.points):
            raise GeometryError("curve self-intersects")

    def __repr__(self):
        return f"Curve(n={self.n}, area={self.area:.6g}, length={self.arclength:.6g})"


def fourier_resample(values: np.ndarray, n: int) -> np.ndarray:
    """Trigonometric interpolation of periodic samples onto ``n`` equispaced nodes."""
    m = values.shape[0]
    if n == m:
        return np.array(values, dtype=float)
    coef = np.fft.fft(values, axis=0) / m
    out = np.zeros((n,) + values.shape[1:], dtype=complex)
    h = min(m, n) // 2
    out[:h] = coef[:h]
    out[n - h + 1:] = coef[m - h + 1:]
    if m < n:
        # split the old Nyquist mode symmetrically
        out[h] = 0.5 * coef[h]
        out[n - h] = 0.5 * coef[h]
    else:
        out[h] = coef[h] + coef[m - h]
    return (np.fft.ifft(out, axis=0) * n).real


def _segments_intersect(p, q):
    """Boolean matrix of proper intersections between segments p[i] and q[j]."""
    a, b = p[:, 0][:, None, :], p[:, 1][:, None, :]
    c, d = q[:, 0][None, :, :], q[:, 1][None, :, :]

    def orient(u, v, w):
        return (v[..., 0] - u[..., 0]) * (w[..., 1] - u[..., 1]) - \
            (v[..., 1] - u[..., 1]) * (w[..., 0] - u[..., 0])

    o1, o2 = orient(a, b, c), orient(a, b, d)
    o3, o4 = orient(c, d, a), orient(c, d, b)
    return (o1 * o2 < 0) & (o3 * o4 < 0)


def _self_intersects(points: np.ndarray) -> bool:
    segs = np.stack([points, np.roll(points, -1, axis=0)], axis=1)
    hit = _segments_intersect(segs, segs)
    n = len(points)
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    adjacent = (np.abs(i - j) <= 1) | (np.abs(i - j) == n - 1)
    return bool(np.any(hit & ~adjacent))


def _point_in_polygon(pt: np.ndarray, poly: np.ndarray) -> bool:
    d = poly - pt
    ang = np.arctan2(d[:, 1], d[:, 0])
    turn = np.diff(np.concatenate([ang, ang[:1]]))
    turn = (turn + np.pi) % (2 * np.pi) - np.pi
    return abs(turn.sum()) > np.pi


# -- constructors -----------------------------------------------------------

def _rotation(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def make_circle(r0: float, n: int = DEFAULT_NODES, center=(0.0, 0.0)) -> Curve:
    """Circle of radius ``r0`` starting at angle zero, counterclockwise."""
    if not r0 > 0:
        raise GeometryError(f"radius must be positive, got {r0}")
    return make_ellipse(r0, r0, center=center, angle=0.0, n=n)


def make_ellipse(a: float, b: float, center=(0.0, 0.0), angle: float = 0.0,
                 n: int = DEFAULT_NODES) -> Curve:
    """Ellipse with semi-axes ``a`` (along the rotated x-axis) and ``b``."""
    if not (a > 0 and b > 0):
        raise GeometryError(f"semi-axes must be positive, got {a}, {b}")
    rot = _rotation(angle)
    c0 = np.asarray(center, dtype=float)

    def func(t):
        t = np.asarray(t, dtype=float)
        return np.column_stack([a * np.cos(t), b * np.sin(t)]) @ rot.T + c0

    return Curve.from_function(func, n)


@dataclass(frozen=True)
class Similarity:
    """Map x -> scale * R(rotation) x + translation."""

    translation: tuple = (0.0, 0.0)
    rotation: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise GeometryError(f"scale must be positive, got {self.scale}")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.scale * np.asarray(x) @ _rotation(self.rotation).T + np.asarray(self.translation)

    def compose(self, inner: "Similarity") -> "Similarity":
        """``self o inner``."""
        t = self.scale * _rotation(self.rotation) @ np.asarray(inner.translation) + \
            np.asarray(self.translation)
        return Similarity(tuple(t), self.rotation + inner.rotation, self.scale * inner.scale)


def transform(curve: Curve, translation=(0.0, 0.0), rotation: float = 0.0,
              scale: float = 1.0) -> Curve:
    """Apply x -> scale * R(rotation) x + translation to every point of the curve."""
    return curve.map_points(Similarity(tuple(translation), rotation, scale), validate=False)


def enclosed_area(curve: Curve) -> float:
    """Green's theorem area 1/2 oint (x dy - y dx) by the trapezoid rule."""
    x, dx = curve.points, curve.dx
    return float(0.5 * (2.0 * np.pi / curve.n) * np.sum(x[:, 0] * dx[:, 1] - x[:, 1] * dx[:, 0]))


# -- configurations -----------------------------------------------------------

class CellConfiguration:
    """One or more disjoint cells.

    With ``unit_cell=True`` the curves must lie strictly inside the unit square
    ``[0, 1]^2`` and the volume fraction ``f = rho^2`` is the total enclosed area.
    With ``unit_cell=False`` the curves are free-space boundaries (for example the
    rescaled boundary of a dilute cell) and only disjointness is enforced.
    """

    def __init__(self, curves: Sequence[Curve], unit_cell: bool = True,
                 margin: float = SEPARATION_MARGIN):
        self.curves = tuple(curves)
        self.unit_cell = unit_cell
        self.margin = margin
        self._validate()

    def _validate(self):
        for c in self.curves:
            if not isinstance(c, Curve):
                raise GeometryError("configuration entries must be Curve objects")
        for i, ci in enumerate(self.curves):
            for cj in self.curves[i + 1:]:
                d = np.min(np.linalg.norm(ci.points[:, None, :] - cj.points[None, :, :], axis=-1))
                if d <= self.margin:
                    raise GeometryError(f"cells closer than margin {self.margin} (distance {d:.3g})")
                if _point_in_polygon(ci.points[0], cj.points) or \
                        _point_in_polygon(cj.points[0], ci.points):
                    raise GeometryError("nested cells are not allowed")
        if self.unit_cell:
            for c in self.curves:
                lo, hi = c.points.min(axis=0), c.points.max(axis=0)
                if np.any(lo <= self.margin) or np.any(hi >= 1.0 - self.margin):
                    raise GeometryError("cell boundary must stay strictly inside the unit square")
            if self.curves and not 0.0 < self.f < 1.0:
                raise GeometryError(f"volume fraction must lie in (0, 1), got {self.f}")

    @property
    def area(self) -> float:
        return float(sum(c.area for c in self.curves))

    @property
    def rho(self) -> float:
        return float(np.sqrt(self.area))

    @property
    def f(self) -> float:
        return self.area

    @property
    def sizes(self) -> list[int]:
        return [c.n for c in self.curves]

    @property
    def size(self) -> int:
        return int(sum(self.sizes))

    @property
    def arclength(self) -> float:
        return float(sum(c.arclength for c in self.curves))

    def stacked(self, attr: str) -> np.ndarray:
        return np.concatenate([getattr(c, attr) for c in self.curves], axis=0)

    def rescaled(self) -> "CellConfiguration":
        """Curves scaled by ``1 / rho`` about the origin (unit total area)."""
        s = 1.0 / self.rho
        return CellConfiguration([transform(c, scale=s) for c in self.curves],
                                 unit_cell=False, margin=self.margin * s)

    def transformed(self, translation=(0.0, 0.0), rotation=0.0, scale=1.0) -> "CellConfiguration":
        return CellConfiguration([transform(c, translation, rotation, scale) for c in self.curves],
                                 unit_cell=False, margin=self.margin * scale)

    def resample(self, factor: int) -> "CellConfiguration":
        return CellConfiguration([c.resample(c.n * factor) for c in self.curves],
                                 unit_cell=self.unit_cell, margin=self.margin)

    def __len__(self):
        return len(self.curves)

    def __repr__(self):
        return f"CellConfiguration({len(self.curves)} curves, f={self.f:.4g}, unit_cell={self.unit_cell})"


def as_configuration(obj) -> CellConfiguration:
    """Accept a Curve, a sequence of curves, or a configuration."""
    if isinstance(obj, CellConfiguration):
        return obj
    if isinstance(obj, Curve):
        return CellConfiguration([obj], unit_cell=False)
    return CellConfiguration(list(obj), unit_cell=False)
