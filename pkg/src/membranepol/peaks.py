"""Peak location on a frequency sweep: coarse scan followed by golden-section refinement."""

from __future__ import annotations

from typing import Callable

import numpy as np

INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0


class PeakNotFoundError(RuntimeError):
    """The maximum of a sweep sits on the boundary of the frequency grid."""


def golden_section_max(func: Callable[[float], float], lo: float, hi: float,
                       tol: float = 1e-9, max_iter: int = 200) -> float:
    """Maximizer of a unimodal function on [lo, hi] to absolute tolerance ``tol``."""
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = func(c), func(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = func(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = func(d)
    return 0.5 * (a + b)


def coarse_argmax(values: np.ndarray) -> int:
    """Index of the largest sample; raises if it is an endpoint."""
    k = int(np.argmax(values))
    if k == 0 or k == len(values) - 1:
        raise PeakNotFoundError("maximum on the grid boundary; widen the frequency grid")
    return k


def count_interior_maxima(values: np.ndarray) -> int:
    v = np.asarray(values)
    return int(np.sum((v[1:-1] > v[:-2]) & (v[1:-1] >= v[2:])))


def refine_peak(func: Callable[[float], float], omegas: np.ndarray,
                values: np.ndarray | None = None, rtol: float = 1e-6) -> float:
    """Frequency maximizing ``func``: scan ``omegas``, then golden-section in log omega.

    ``rtol`` is the relative tolerance in omega.
    """
    omegas = np.asarray(omegas, dtype=float)
    if values is None:
        values = np.array([func(w) for w in omegas])
    k = coarse_argmax(values)
    lo, hi = np.log(omegas[k - 1]), np.log(omegas[k + 1])
    x = golden_section_max(lambda s: func(np.exp(s)), lo, hi, tol=0.5 * rtol)
    return float(np.exp(x))
