import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from btdet.errors import ContractError, DimensionError
from btdet.odeprop import HalfLine, Interval, PotentialSpec
from btdet.pdet import pdet_ratio
from btdet.triplets import (BoundaryOperator, ExtensionPair, OperatorClass, characteristic_function,
                            decompose, is_resolvent_point, j_matrix, j_unitary_defect, krein_correction,
                            random_j_unitary, swap_transform, transform_triplet)
from btdet.weyl import FreeHalfLineWeyl, IntervalWeyl, JostHalfLineWeyl, MatrixModelWeyl, gamma_field

from conftest import crandn


def test_classification():
    assert BoundaryOperator(np.diag([1.0, 2.0])).cls is OperatorClass.SELFADJOINT
    assert BoundaryOperator(1j).cls is OperatorClass.DISSIPATIVE
    assert BoundaryOperator(-1j).cls is OperatorClass.ACCUMULATIVE
    assert BoundaryOperator(np.diag([1j, -1j])).cls is OperatorClass.GENERAL
    assert BoundaryOperator(1j).is_dissipative() and not BoundaryOperator(1j).is_accumulative()


def test_boundary_operator_immutable():
    B = BoundaryOperator([[1.0]])
    with pytest.raises(AttributeError):
        B.B = np.eye(1)
    with pytest.raises(ValueError):
        B.B[0, 0] = 2.0


def test_adjoint_and_parts(rng):
    A = crandn(rng, 3, 3)
    B = BoundaryOperator(A)
    assert np.allclose(B.real + 1j * B.imag, A)
    assert np.allclose(B.adjoint().B, A.conj().T)


def test_pair_dimension_check():
    with pytest.raises(DimensionError):
        ExtensionPair(np.eye(2), np.eye(2), FreeHalfLineWeyl(1))


def test_resolvent_point():
    assert is_resolvent_point(1.0, -1.0)
    assert not is_resolvent_point(-1.0, -1.0)


def test_krein_trace_free_halfline():
    # tr((A_h - z)^{-1} - (A_D - z)^{-1}) for h = 1, z = -1 is 1/4
    z = -1.0 + 0j
    g = gamma_field(None, "halfline", z, n=1)
    K = krein_correction(g, g, 1.0, FreeHalfLineWeyl()(z))
    assert K.trace() == pytest.approx(0.25, abs=1e-5)
    assert K.rank() == 1


def test_krein_kernel_difference_rank():
    z = -2.0 + 0j
    g = gamma_field(None, "halfline", z, n=1, x=np.linspace(0, 20, 801))
    M = FreeHalfLineWeyl()(z)
    K = krein_correction(g, g, 1.0, M) - krein_correction(g, g, 3.0, M)
    assert K.rank() == 1


def test_j_unitary_generators(rng):
    for real in (False, True):
        X = random_j_unitary(3, rng, 0.5, real=real)
        assert j_unitary_defect(X) < 1e-12
    assert j_unitary_defect(swap_transform(2, 0.7)) < 1e-14
    assert j_matrix(1).shape == (2, 2)


def test_transform_rejects_non_j_unitary():
    with pytest.raises(ContractError):
        transform_triplet(np.diag([2.0, 1.0]), 1.0, 1j)


def test_swap_transform_inverts():
    B = np.array([[2.0, 1.0], [1.0, 3.0]])
    Bt, Mt = transform_triplet(swap_transform(2, 0.5), B, np.eye(2) * 1j)
    assert np.allclose(Bt, np.linalg.inv(0.5 * np.eye(2) - B))


def test_real_j_unitary_preserves_selfadjointness(rng):
    X = random_j_unitary(2, rng, 0.4, real=True)
    B = np.array([[1.0, 0.5], [0.5, -2.0]])
    Bt, _ = transform_triplet(X, B, 1j * np.eye(2))
    assert BoundaryOperator(Bt).is_selfadjoint


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_transform_quotient_is_constant(seed):
    r = np.random.default_rng(seed)
    w = MatrixModelWeyl.random(r, 2, k=4)
    B, Bp = crandn(r, 2, 2), crandn(r, 2, 2)
    X = random_j_unitary(2, r, 0.3)
    pair = ExtensionPair(Bp, B, w)
    qs = []
    for z in (0.3 + 1j, -1 + 2j, 2 + 0.5j):
        Bt, Mt = transform_triplet(X, B, w(z))
        Bpt, _ = transform_triplet(X, Bp, w(z))
        qs.append(np.linalg.det(Bpt - Mt) / np.linalg.det(Bt - Mt) / pdet_ratio(pair, z))
    qs = np.array(qs)
    assert np.abs(qs - qs[0]).max() <= 1e-8 * abs(qs[0])


def test_decompose():
    d = decompose(np.diag([1 + 2j, 3 - 1j, 0.5]))
    assert np.allclose(d.J, np.diag([1, -1, 1]))
    assert np.allclose(d.absB_I, np.diag([2, 1, 0]))
    assert np.allclose(d.sqrt_absB_I @ d.sqrt_absB_I, d.absB_I)
    assert np.allclose(d.B_I, d.J @ d.absB_I)


def test_characteristic_function_determinant():
    w = IntervalWeyl(PotentialSpec.zero(1, Interval(np.pi)))
    B = BoundaryOperator(1j * np.eye(2) + np.array([[0.3, 0.1], [0.1, 0.0]]))
    pair = ExtensionPair(B, B.adjoint(), w)
    for z in (1 + 1j, 3 + 0.2j):
        W = characteristic_function(B, w(z))
        assert np.linalg.det(W) == pytest.approx(pdet_ratio(pair, z), rel=1e-9)
        assert np.linalg.norm(W, 2) <= 1 + 1e-12  # contraction in the upper half-plane


def test_characteristic_function_halfline():
    w = JostHalfLineWeyl(PotentialSpec.square_well(0.5))
    B = BoundaryOperator(0.5 + 2j)
    z = -1.0 + 0.5j
    W = characteristic_function(B, w(z))
    assert np.linalg.det(W) == pytest.approx(pdet_ratio(ExtensionPair(B, B.adjoint(), w), z), rel=1e-9)
