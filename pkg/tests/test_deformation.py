import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from membranepol.deformation import (DeformationBudgetError, DeformationParams,
                                     sample_deformation)
from membranepol.geometry import CellConfiguration, make_ellipse

CELL = CellConfiguration([make_ellipse(0.1, 0.05, (0.5, 0.5), 0.0, 64)])


def test_zero_amplitude_is_identity():
    s = sample_deformation(DeformationParams(), 1, CELL)
    x = np.random.default_rng(0).uniform(0, 1, (50, 2))
    assert np.array_equal(s(x), x)
    assert np.allclose(np.linalg.det(s.jacobian(x)), 1.0, atol=1e-9)


@given(st.integers(0, 2**32))
def test_rotations_are_rigid_inside(seed):
    p = DeformationParams(rotation=np.pi)
    s = sample_deformation(p, seed, CELL)
    assert p.is_rigid
    # the twist is area preserving on the whole support, not only on the cell
    g = np.linspace(0.25, 0.75, 21)
    pts = np.stack(np.meshgrid(g, g), axis=-1).reshape(-1, 2)
    jac = s.jacobian(pts)
    assert np.allclose(np.linalg.det(jac), 1.0, atol=1e-7)
    inner = CELL.curves[0].points
    assert np.allclose(s(inner) - 0.5, (inner - 0.5) @ s.affine.T, atol=1e-14)
    assert np.allclose(s.mean_gradient(), np.eye(2), atol=1e-12)
    moved = s.apply(CELL)
    assert moved.area == pytest.approx(CELL.area, rel=1e-10)


@given(st.integers(0, 2**32))
def test_constraints_hold(seed):
    p = DeformationParams(rotation=0.5, shear=0.1, translation=0.02, bumps=(0.01,))
    s = sample_deformation(p, seed, CELL)
    ok, why = s.check(0.3, n_grid=61)
    assert ok, why
    assert np.allclose(s.mean_gradient(), np.eye(2), atol=1e-12)


def test_seeded_draw_is_reproducible():
    p = DeformationParams(rotation=1.0, shear=0.1, bumps=(0.01, 0.005))
    a, b = sample_deformation(p, 42, CELL), sample_deformation(p, 42, CELL)
    assert a.rotation == b.rotation
    assert np.array_equal(a.shear, b.shear) and np.array_equal(a.bumps, b.bumps)
    x = CELL.curves[0].points
    assert a(x).tobytes() == b(x).tobytes()


def test_budget_exhaustion():
    p = DeformationParams(shear=5.0, max_attempts=5)
    with pytest.raises(DeformationBudgetError):
        sample_deformation(p, 0, CELL)


def test_rotation_law_is_symmetric_and_admissible():
    # the displacement bound truncates large angles; what remains must be the
    # uniform law conditioned on admissibility, hence symmetric about zero
    p = DeformationParams(rotation=np.pi)
    rng = np.random.default_rng(3)
    th = np.array([sample_deformation(p, rng, CELL).rotation for _ in range(400)])
    assert abs(th.mean()) < 4 * th.std() / np.sqrt(th.size)
    assert abs(np.mean(np.sin(2 * th))) < 4 / np.sqrt(2 * th.size)
    small = DeformationParams(rotation=0.3)
    th = np.array([sample_deformation(small, rng, CELL).rotation for _ in range(400)])
    # small angles are never rejected, so the histogram is flat
    counts = np.histogram(th, bins=4, range=(-0.3, 0.3))[0]
    assert counts.min() > 70
