import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from membranepol.media import (VACUUM_PERMITTIVITY, DegenerateMembraneError, FrequencyGrid,
                               MembraneModel, admittivity_k0, beta, beta_k0, beta_prime)


def test_k0_zero_permittivity():
    m = MembraneModel(0.5, 0.0, 1e-8, 1e-11, 1e-3)
    assert admittivity_k0(m, 1e6) == 0.5 + 0j


def test_k0_typical_values():
    # independent arithmetic: 1e6 * 90 * 8.85e-12
    m = MembraneModel.typical()
    expected = 0.5 + 1j * (1e6 * 90 * 8.85e-12)
    assert admittivity_k0(m, 1e6) == pytest.approx(expected, rel=1e-15)
    assert admittivity_k0(m, 1e6).imag == pytest.approx(7.965e-4, rel=1e-12)


def test_k0_unit():
    assert admittivity_k0(MembraneModel(1.0, 1.0, 1.0, 1.0, 0.1), 1.0) == 1 + 1j


def test_beta_conductive_membrane():
    m = MembraneModel(1.0, 0.0, 1.0, 0.0, 1.0)
    for w in (1.0, 1e3, 1e9):
        assert beta(m, w) == 1 + 0j


def test_beta_unit_case():
    assert beta(MembraneModel(1.0, 0.0, 1.0, 1.0, 2.0), 1.0) == pytest.approx(1 - 1j, abs=1e-15)


def test_beta_real_imag_split():
    m = MembraneModel.typical()
    w = 1e7
    den = m.sigma_m**2 + w**2 * m.eps_m**2
    expected = m.delta * m.sigma_m / den - 1j * m.delta * w * m.eps_m / den
    assert beta(m, w) == pytest.approx(expected, rel=1e-13)


def test_beta_prime_trivial():
    # eps_m = 0 leaves delta sigma0 sigma_m / sigma_m^2 for any eps0
    assert beta_prime(MembraneModel(1.0, 0.0, 1.0, 0.0, 1.0), 3.0) == pytest.approx(1.0)
    assert beta_prime(MembraneModel(1.0, 4.0, 1.0, 0.0, 1.0), 3.0) == pytest.approx(1.0)


def test_beta_prime_is_re_beta_k0():
    m = MembraneModel.typical()
    w = np.logspace(3, 10, 30)
    assert np.allclose(beta_prime(m, w), beta_k0(m, w).real, rtol=1e-12)


def test_degenerate_and_invalid():
    with pytest.raises(ValueError):
        MembraneModel(0.0, 0.0, 1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        MembraneModel(1.0, 0.0, 1.0, 0.0, -1.0)
    with pytest.raises(ValueError):
        beta(MembraneModel(1.0, 0.0, 1.0, 0.0, 1.0), -1.0)
    assert issubclass(DegenerateMembraneError, ValueError)


models = st.builds(
    MembraneModel,
    sigma0=st.floats(1e-3, 10.0),
    eps0=(st.just(0.0) | st.floats(0.1, 200.0)).map(lambda e: e * VACUUM_PERMITTIVITY),
    sigma_m=st.floats(1e-10, 1e-2),
    eps_m=(st.just(0.0) | st.floats(0.1, 20.0)).map(lambda e: e * VACUUM_PERMITTIVITY),
    delta=st.floats(1e-5, 1e-2),
)


@given(models, st.floats(1e3, 1e10))
def test_beta_prime_positive(m, w):
    assert beta_prime(m, w) > 0
    assert beta_k0(m, w).real > 0


@given(models)
def test_beta_limits(m):
    assert beta(m, 1e-12) == pytest.approx(m.delta / m.sigma_m, rel=1e-6)
    if m.eps_m > 0:
        w0 = 10 * m.sigma_m / m.eps_m
        w = w0 * np.logspace(0, 4, 20)
        mag = np.abs(beta(m, w))
        assert np.all(np.diff(mag) < 0)
        assert mag[-1] == pytest.approx(m.delta / (w[-1] * m.eps_m), rel=1e-2)


def test_frequency_grid():
    g = FrequencyGrid.logspace(1e4, 1e9, 200)
    assert len(g) == 200 and g.omegas[0] == pytest.approx(1e4) and g.omegas[-1] == pytest.approx(1e9)
    assert np.all(np.diff(g.omegas) > 0)
    for bad in ([], [1.0, 1.0], [-1.0, 2.0], [[1.0, 2.0]]):
        with pytest.raises(ValueError):
            FrequencyGrid(np.array(bad))
