import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from membranepol.periodic import EwaldTruncationError, PeriodicGreen, default_periodic_green

pts = st.tuples(st.floats(0.05, 0.95), st.floats(0.05, 0.95))


def r2_quadratic_coefficient(pg):
    rng = np.random.default_rng(3)
    r = np.logspace(-3, -2, 25)
    th = rng.uniform(0, 2 * np.pi, r.size)
    x = np.column_stack([r * np.cos(th), r * np.sin(th)])
    y = pg.r2(x) - pg.r2_zero
    # R2 + r^2/4 is harmonic with the square lattice symmetry, so the next term is r^4 cos 4 theta
    a = np.column_stack([r**2, r**4 * np.cos(4 * th)])
    return np.linalg.lstsq(a, y, rcond=None)[0][0]


def test_r2_local_expansion():
    assert r2_quadratic_coefficient(default_periodic_green()) == pytest.approx(-0.25, abs=1e-6)


@given(pts)
def test_periodicity_and_evenness(p):
    pg = PeriodicGreen(reach=2.0)
    x = np.array([p])
    g = pg.green(x)[0]
    for shift in ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0)):
        assert pg.green(x + np.array(shift))[0] == pytest.approx(g, abs=1e-12)
    assert pg.green(-x)[0] == pytest.approx(g, abs=1e-12)


def test_splitting_parameter_independence():
    x = np.array([[0.3, 0.1], [0.5, 0.5], [0.01, -0.02], [0.9, 0.7]])
    a = PeriodicGreen(eta=np.sqrt(np.pi)).green(x)
    b = PeriodicGreen(eta=3.0).green(x)
    c = PeriodicGreen(eta=1.2).green(x)
    assert np.allclose(a, b, atol=1e-13) and np.allclose(a, c, atol=1e-13)


def test_laplacian_is_minus_one():
    pg = default_periodic_green()
    x = np.array([[0.0, 0.0], [0.2, 0.1], [0.4, -0.3]])
    _, _, hess = pg.r2_derivatives(x)
    assert np.allclose(np.trace(hess, axis1=1, axis2=2), -1.0, atol=1e-11)
    assert np.allclose(hess, np.transpose(hess, (0, 2, 1)), atol=1e-14)


def test_derivatives_match_finite_differences():
    pg = default_periodic_green()
    x = np.array([[0.23, -0.17]])
    val, grad, _ = pg.green_derivatives(x)
    h = 1e-5
    for k in range(2):
        e = np.zeros((1, 2))
        e[0, k] = h
        fd = (pg.green(x + e) - pg.green(x - e)) / (2 * h)
        assert grad[0, k] == pytest.approx(fd[0], abs=1e-9)
    assert val[0] == pytest.approx(pg.green(x)[0], abs=1e-15)


def test_zero_cell_mean():
    # G integrates to zero over the unit cell: quadrature of R2 plus the exact log integral
    pg = default_periodic_green()
    g, w = np.polynomial.legendre.leggauss(48)
    s = 0.5 * g
    xx, yy = np.meshgrid(s, s, indexing="ij")
    ww = np.outer(w, w).ravel() / 4
    mean_r2 = ww @ pg.r2(np.column_stack([xx.ravel(), yy.ravel()]))
    # int over [-1/2, 1/2]^2 of ln|x| = (ln 2)/2 ... closed form: -3/2 + pi/4 + ln(2)/2 - ln 2
    log_mean = (-3 + np.pi / 2 - np.log(2)) / 2
    assert mean_r2 + log_mean / (2 * np.pi) == pytest.approx(0.0, abs=1e-12)


def test_truncation_guard():
    with pytest.raises(EwaldTruncationError):
        default_periodic_green().green(np.array([[1.5, 0.0]]))
