import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from btdet.errors import ClassificationError, ContractError, ResolutionError, SpectralPointError
from btdet.odeprop import HalfLine, Interval, PotentialSpec
from btdet.oracle import (accumulative_identities, additive_pdet, discretize, krein_residual, matrix_ssf,
                          oracle_trace_diff, resolvent_trace, resolvent_trace_diff)
from btdet.pdet import log_derivative
from btdet.spectra import Contour, functional_trace, locate_eigenvalues
from btdet.triplets import ExtensionPair
from btdet.weyl import FreeHalfLineWeyl, IntervalWeyl


def test_resolution_limits():
    q = PotentialSpec.zero(1, Interval(1.0))
    with pytest.raises(ResolutionError):
        discretize(q, None, 8)
    with pytest.raises(ContractError):
        discretize(q, None, 5000)
    with pytest.raises(ContractError):
        discretize(q, np.eye(3), 100)


def test_hermitian_for_selfadjoint_boundary():
    q = PotentialSpec.from_callable(lambda x: np.array([[x, 0.2j], [-0.2j, 1.0]]), 2, Interval(1.0))
    B = np.random.default_rng(0).standard_normal((4, 4))
    A = discretize(q, B + B.T, 64)
    assert A.hermitian_defect < 1e-14
    assert discretize(q, 1j * np.eye(4), 64).hermitian_defect > 1e-3


def test_neumann_eigenvalues_second_order():
    q = PotentialSpec.zero(1, Interval(np.pi))
    errs = [abs(discretize(q, np.zeros((2, 2)), N).eigenvalues()[3] - 9.0) for N in (100, 200, 400)]
    assert 3.5 < errs[0] / errs[1] < 4.5 and 3.5 < errs[1] / errs[2] < 4.5


def test_dirichlet_eigenvalues():
    q = PotentialSpec.zero(1, Interval(np.pi))
    ev = discretize(q, None, 400).eigenvalues()[:3]
    assert np.allclose(ev, [1, 4, 9], rtol=1e-4)


def test_dissipative_oracle_eigenvalues_match_contour_search():
    q = PotentialSpec.zero(1, Interval(np.pi))
    B = 1j * np.eye(2)
    ev = discretize(q, B, 1000).eigenvalues()[:3]
    found = locate_eigenvalues(B, IntervalWeyl(q), (-1, 5, -0.5, 2.5))
    assert np.allclose(ev, [e.z for e in found][:3], atol=1e-4)


def test_interval_trace_difference_matches_weyl():
    q = PotentialSpec.from_callable(lambda x: np.array([[np.cos(2 * x)]]), 1, Interval(1.0))
    Bp, B = np.diag([1.0, 2.0]), np.array([[0.0, 0.5], [0.5, 0.0]])
    pair = ExtensionPair(Bp, B, IntervalWeyl(q))
    z = 1.0 + 2.0j
    ref = -log_derivative(pair, z)
    assert abs(oracle_trace_diff(q, Bp, B, z, N=1000) - ref) < 1e-6 * abs(ref)


def test_halfline_trace_difference_with_robin_tail():
    q = PotentialSpec.zero(1, HalfLine(1.0))
    pair = ExtensionPair(-1.0, 1.0, FreeHalfLineWeyl())
    z = 1.0 + 1.0j
    d = resolvent_trace_diff(discretize(q, -1.0, 1500, L=30, z_ref=z), discretize(q, 1.0, 1500, L=30, z_ref=z), z)
    ref = -log_derivative(pair, z)
    assert abs(d - ref) < 1e-3 * abs(ref)


def test_robin_tail_needs_reference():
    with pytest.raises(ContractError):
        discretize(PotentialSpec.zero(1, HalfLine(1.0)), 1.0, 100)


def test_resolvent_trace_at_eigenvalue():
    with pytest.raises(SpectralPointError):
        resolvent_trace(np.diag([1.0, 2.0]), 2.0)


def test_resolvent_trace_diff_dense_path():
    rng = np.random.default_rng(3)
    H = rng.standard_normal((80, 80))
    H = H + H.T
    Hp = H + np.diag(rng.standard_normal(80))  # every row differs
    z = 0.5 + 1j
    ref = np.trace(np.linalg.inv(Hp - z * np.eye(80))) - np.trace(np.linalg.inv(H - z * np.eye(80)))
    assert resolvent_trace_diff(Hp, H, z) == pytest.approx(ref, rel=1e-10)


def test_additive_pdet():
    assert additive_pdet([[0.0]], [[1.0]], 1j) == pytest.approx(1 + 1j)
    with pytest.raises(SpectralPointError):
        additive_pdet(np.diag([0.0, 1.0]), np.eye(2), 1.0)


def test_matrix_ssf_example():
    s = matrix_ssf(np.diag([0.0, 2.0]), np.diag([1.0, 0.0]))
    assert list(s(np.array([-1.0, 0.5, 1.5, 2.5]))) == [0, 1, 0, 0]
    assert s.integral == pytest.approx(1.0)


def test_matrix_ssf_needs_hermitian():
    with pytest.raises(ClassificationError):
        matrix_ssf(np.diag([0.0, 1j]), np.eye(2))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_matrix_ssf_trace_and_krein(seed, rank):
    r = np.random.default_rng(seed)
    A = r.standard_normal((6, 6))
    H = A + A.T
    P = r.standard_normal((6, rank))
    V = P @ np.diag(r.standard_normal(rank)) @ P.T
    s = matrix_ssf(H, V)
    assert abs(s.integral - np.trace(V)) <= 1e-12 * max(1, np.abs(V).sum())
    assert krein_residual(H, V, 1 + 2j) < 1e-9


def test_nonnegative_perturbation_gives_nonnegative_shift():
    r = np.random.default_rng(5)
    A = r.standard_normal((5, 5))
    v = r.standard_normal(5)
    s = matrix_ssf(A + A.T, np.outer(v, v))
    assert np.all(s(np.linspace(-10, 10, 2001)) >= 0)


def test_accumulative_identities_diagonal():
    r = accumulative_identities(np.diag([-1j, -2j]), np.diag([0.1, 0.0]))
    assert r["a"]["ok"] and r["b"]["ok"] and r["c"]["ok"]


def test_accumulative_sign_configuration():
    r = accumulative_identities(np.diag([0.0, 1.0]), np.diag([-0.1j, -0.05j]))
    assert r["sign"]["ok"] and r["b"]["ok"]
    assert r["b"]["integral"][1] == pytest.approx(-0.15, abs=1e-3)


def test_accumulative_requires_accumulative_h():
    with pytest.raises(ClassificationError):
        accumulative_identities(np.diag([1j]), np.diag([0.1]))


def test_real_omega_equals_counting_shift():
    r = np.random.default_rng(11)
    A = r.standard_normal((4, 4))
    H = A + A.T
    v = r.standard_normal(4)
    V = 0.3 * np.outer(v, v)
    out = accumulative_identities(H, V)
    s = matrix_ssf(H, V)
    t, om = out["omega"]["t"], out["omega"]["values"]
    far = np.min(np.abs(t[:, None] - s.jumps()[None]), axis=1) > 1e-3
    assert np.abs(om[far] - s(t[far])).max() < 1e-3


def test_functional_trace_on_oracle_matrices():
    q = PotentialSpec.zero(1, Interval(np.pi))
    H = discretize(q, np.zeros((2, 2)), 24).H
    Hp = discretize(q, np.diag([1.0, 0.5]), 24).H
    top = max(np.linalg.eigvalsh(H).max(), np.linalg.eigvalsh(Hp).max())
    z0 = -5.0 + 1.0j
    c = Contour.circle(top / 2, top / 2 + 2.0)
    val = functional_trace(lambda z: resolvent_trace_diff(Hp, H, z), lambda z: 1 / (z - z0), c,
                           spectra="interior")
    ref = resolvent_trace_diff(Hp, H, z0)
    assert abs(val - ref) < 1e-6 * abs(ref)


def test_alpha_identity_with_oracle_trace():
    from btdet.oracle import resolvent_trace
    from btdet.spectra import dissipative_decomposition
    q = PotentialSpec.zero(1, Interval(np.pi))
    w = IntervalWeyl(q)
    Hstar = discretize(q, -1j * np.eye(2), 2000).H
    model = dissipative_decomposition(1j * np.eye(2), w, (-5, 1700, -3, 3), np.linspace(-5, 20, 50),
                                      alpha_point=0.37, resolvent_trace=lambda a: resolvent_trace(Hstar, a))
    assert abs(model.alpha_identity - model.alpha) < 1e-3
