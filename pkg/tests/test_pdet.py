import numpy as np
import pytest

from btdet.errors import ContractError, SpectralPointError, StencilError, ZeroCrossingError
from btdet.odeprop import Interval, PotentialSpec
from btdet.pdet import (characteristic_det, constant_quotient, eval_path, log_derivative,
                        pdet_pair_regularized, pdet_quotient, pdet_ratio, pdet_regularized)
from btdet.triplets import ExtensionPair
from btdet.weyl import FreeHalfLineWeyl, IntervalWeyl, MatrixModelWeyl


def closed(z, h2, h1):
    m = 1j * np.sqrt(z + 0j)
    return (m - h2) / (m - h1)


@pytest.fixture
def robin():
    return ExtensionPair(2.0, 1.0, FreeHalfLineWeyl())


def test_ratio_closed_form(robin):
    for z in (-1.0, 1j, -3 + 0.2j, 5 + 5j):
        assert pdet_ratio(robin, z) == pytest.approx(closed(z, 2.0, 1.0), rel=1e-12)


def test_ratio_identity_pair_is_one():
    w = IntervalWeyl(PotentialSpec.zero(1, Interval(1.0)))
    B = np.array([[1.0, 0.2], [0.2, -1.0]])
    assert pdet_ratio(ExtensionPair(B, B, w), 2 + 1j) == pytest.approx(1.0)


def test_ratio_pole_raises():
    pair = ExtensionPair(2.0, -1.0, FreeHalfLineWeyl())
    with pytest.raises(SpectralPointError):
        pdet_ratio(pair, -1.0)


def test_ratio_finite_at_weyl_pole():
    # z = 1 is a Dirichlet eigenvalue of [0, pi]: M has a pole, Delta does not
    w = IntervalWeyl(PotentialSpec.zero(1, Interval(np.pi)))
    pair = ExtensionPair(np.diag([1.0, 2.0]), np.diag([0.5, 0.5]), w)
    v = pdet_ratio(pair, 1.0 + 0j)
    near = pdet_ratio(pair, 1.0 + 1e-7j)
    assert np.isfinite(v) and v == pytest.approx(near, rel=1e-5)


def test_quotient_identity():
    rng = np.random.default_rng(7)
    w = MatrixModelWeyl.random(rng, 2)
    pair = ExtensionPair(rng.standard_normal((2, 2)), rng.standard_normal((2, 2)) * 1j, w)
    z, zeta = 0.4 + 1j, -1.0 + 0.3j
    assert pdet_quotient(pair, z, zeta) == pytest.approx(pdet_ratio(pair, z) / pdet_ratio(pair, zeta),
                                                          rel=1e-10)


def test_regularized_forms_differ_by_constant(robin):
    zs = [-1.0, 1j, 2 + 3j, -4 + 0.5j]
    a = [pdet_pair_regularized(robin, 0.3, z) for z in zs]
    b = [pdet_ratio(robin, z) for z in zs]
    c, spread = constant_quotient(a, b)
    assert spread < 1e-12
    # det(mu - B') / det(mu - B) with mu = 0.3
    assert c == pytest.approx((0.3 - 1.0) / (0.3 - 2.0))


def test_regularized_single_operator():
    # det(I - (mu - B)^{-1}(mu - M)) with B = 0, mu = 1, M(-4) = -2
    assert pdet_regularized(0.0, 1.0, FreeHalfLineWeyl(), -4.0) == pytest.approx(-2.0)
    with pytest.raises(ContractError):
        pdet_regularized(1.0, 1.0, FreeHalfLineWeyl(), -4.0)


def test_characteristic_det_zero_at_eigenvalue():
    assert abs(characteristic_det(-1.0, FreeHalfLineWeyl(), -1.0)) < 1e-15


def test_log_derivative_against_closed_form(robin):
    z = 1 + 2j
    k = np.sqrt(z)
    m, dm = 1j * k, 1j / (2 * k)
    ref = dm / (m - 2.0) - dm / (m - 1.0)
    assert log_derivative(robin, z) == pytest.approx(ref, rel=1e-9)


def test_log_derivative_stencil_error():
    pair = ExtensionPair(2.0, -1.0, FreeHalfLineWeyl())
    with pytest.raises(StencilError):
        log_derivative(pair, -1.0 + 1e-6j)


def test_eval_path_line(robin):
    path = np.linspace(-5, 5, 40) + 1j
    dp = eval_path(robin, path)
    assert np.allclose(dp.values, closed(path, 2.0, 1.0), rtol=1e-12)
    assert np.allclose(np.exp(dp.log.values), dp.values, rtol=1e-10)
    assert np.all(np.abs(np.diff(dp.log.values.imag)) < np.pi)


def test_eval_path_winding_counts_zero_minus_pole():
    # around z = -1 with Delta_{-1 / 1}: one zero (A_{-1} eigenvalue)
    pair = ExtensionPair(-1.0, 1.0, FreeHalfLineWeyl())
    th = 2 * np.pi * np.arange(16) / 16
    dp = eval_path(pair, -1 + 0.5 * np.exp(1j * th), closed=True)
    assert dp.winding == pytest.approx(1.0)
    assert dp.refined_points >= 0


def test_eval_path_through_zero():
    pair = ExtensionPair(-1.0, 1.0, FreeHalfLineWeyl())
    with pytest.raises(ZeroCrossingError):
        eval_path(pair, [-2.0, -1.0, -0.5])


def test_parallel_matches_serial(robin):
    path = np.linspace(-5, 5, 64) + 0.5j
    a = eval_path(robin, path).values
    b = eval_path(robin, path, jobs=4).values
    assert np.array_equal(a, b)
