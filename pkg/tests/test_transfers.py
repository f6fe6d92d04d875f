import numpy as np
import pytest
from scipy.integrate import quad

from cutoffcontracts.transfers import StepTransfer, TransferValidationError


def test_cutoff_construction():
    t = StepTransfer.cutoff(1.5)
    assert t.is_cutoff
    assert t.cutoff_level == 1.5
    assert t(0.0) == 1.0
    assert t(1.49) == 1.0
    assert t(1.51) == 0.0
    assert t(-1.2) == 1.0


def test_zero_cutoff_degenerates():
    t = StepTransfer.cutoff(0.0)
    assert t(0.0) == 0.0 or t.x_max == 0.0


def test_from_cells_symmetry():
    t = StepTransfer.from_cells([1.0, 0.25, 0.0, 0.5], 2.0)
    xs = np.array([0.1, 0.6, 1.1, 1.7, 2.3])
    np.testing.assert_array_equal(t(xs), t(-xs))
    assert t(0.3) == 1.0
    assert t(0.6) == 0.25
    assert t(1.8) == 0.5
    assert t(2.5) == 0.0
    assert t.is_symmetric()


def test_validation_errors():
    with pytest.raises(TransferValidationError):
        StepTransfer([0.0, 1.0], [1.5])
    with pytest.raises(TransferValidationError):
        StepTransfer([0.0, 1.0], [-0.2])
    with pytest.raises(TransferValidationError):
        StepTransfer([1.0, 0.0], [0.5])
    with pytest.raises(TransferValidationError):
        StepTransfer([0.0, np.inf], [0.5])
    with pytest.raises(TransferValidationError):
        StepTransfer.cutoff(-1.0)


def test_shift_semantics():
    t = StepTransfer.cutoff(1.0).shifted(0.3)
    assert t(0.3) == 1.0
    assert t(1.29) == 1.0
    assert t(1.31) == 0.0
    assert not t.is_cutoff
    assert not t.is_symmetric()


def test_symmetrized_is_even_average():
    t = StepTransfer(np.array([0.0, 1.0, 2.0]), np.array([1.0, 0.5]))
    s = t.symmetrized()
    assert s.is_symmetric()
    xs = np.array([0.2, 0.7, 1.5, 2.4])
    np.testing.assert_allclose(s(xs), 0.5 * (t(xs) + t(-xs)), atol=1e-12)


def test_unit_interior_overlay():
    t = StepTransfer(np.array([-2.0, 2.0]), np.array([0.5]))
    a = t.with_unit_interior(1.0)
    assert a(0.5) == 1.0
    assert a(1.5) == 0.5
    assert a(2.5) == 0.0


def test_band_overlay_and_simplify():
    t = StepTransfer.cutoff(1.0).with_band_value(0.2, 0.3, 0.0).with_band_value(1.5, 1.8, 1.0)
    assert t(0.25) == 0.0
    assert t(-0.25) == 0.0
    assert t(0.5) == 1.0
    assert t(1.6) == 1.0
    assert t(1.4) == 0.0
    s = t.simplified()
    xs = np.linspace(-2.5, 2.5, 101)
    np.testing.assert_array_equal(s(xs), t(xs))
    assert s.values.size <= t.values.size


def test_truthful_value_matches_quadrature(gaussian):
    t = StepTransfer.from_cells([0.8, 0.1, 0.4], 1.8)
    for lam in (0.5, 1.0, 2.5):
        ref, _ = quad(
            lambda x: t(x) * gaussian.scaled_pdf(x, 0.0, lam),
            -1.8,
            1.8,
            points=list(t.edges),
            limit=200,
        )
        assert t.truthful_value(gaussian, lam) == pytest.approx(ref, abs=1e-8)


def test_min_step_and_x_max():
    t = StepTransfer.from_cells([1.0, 0.0], 1.0)
    assert t.x_max == 1.0
    assert t.min_step == pytest.approx(0.5)
