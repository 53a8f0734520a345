import numpy as np
import pytest

from btdet.errors import ContractError, DomainError
from btdet.odeprop import (HalfLine, Interval, PotentialSpec, fundamental_matrix, fundamental_solutions,
                           jost, jost_profile, load_potential_csv, wronskian_defect)
from btdet.suite import square_well_m


def test_potential_must_be_hermitian():
    with pytest.raises(ContractError):
        PotentialSpec.from_callable(lambda x: np.array([[0, 1], [0, 0]]), 2, Interval(1.0))


def test_support_validation():
    with pytest.raises(Exception):
        Interval(-1.0)


def test_zero_fundamental_solutions_closed_form():
    q = PotentialSpec.zero(1, Interval(2.0))
    z = 3.0 + 0.5j
    k = np.sqrt(z)
    p = fundamental_solutions(q, z)
    assert p.C[0, 0] == pytest.approx(np.cos(2 * k), rel=1e-12)
    assert p.S[0, 0] == pytest.approx(np.sin(2 * k) / k, rel=1e-12)
    assert p.Cp[0, 0] == pytest.approx(-k * np.sin(2 * k), rel=1e-12)


def test_integrator_agrees_with_constant_closed_form():
    Q = np.array([[1.0, 0.4 - 0.1j], [0.4 + 0.1j, -0.5]])
    qc = PotentialSpec.constant_potential(Q, Interval(1.3))
    qf = PotentialSpec.from_callable(lambda x: Q, 2, Interval(1.3))
    for z in (2.0 + 1j, -3 + 0.1j, 15.0 - 2j):
        a, b = fundamental_solutions(qc, z), fundamental_solutions(qf, z)
        assert np.abs(a.monodromy - b.monodromy).max() <= 2e-10 * max(1, np.abs(a.monodromy).max())


def test_wronskian_conserved():
    q = PotentialSpec.from_callable(lambda x: np.array([[np.sin(3 * x), 0.2], [0.2, x * x]]), 2,
                                    Interval(2.0))
    for z in (1 + 1j, 10 - 0.3j):
        p, pbar = fundamental_solutions(q, z), fundamental_solutions(q, np.conj(z))
        assert wronskian_defect(p, pbar) < 1e-10
    assert wronskian_defect(fundamental_solutions(q, 4.0)) < 1e-10


def test_fundamental_matrix_start_values():
    q = PotentialSpec.zero(1, Interval(1.0))
    C, Cp, S, Sp = fundamental_matrix(q, 2j, np.array([0.0, 0.5, 1.0]))
    assert C[0, 0, 0] == 1 and S[0, 0, 0] == 0 and Sp[0, 0, 0] == 1


def test_jost_zero_potential_exact():
    J = jost(PotentialSpec.zero(1, HalfLine(1.0)), -4.0)
    assert J.F0[0, 0] == 1
    assert J.F0p[0, 0] == pytest.approx(-2.0)


@pytest.mark.parametrize("z", [-1.0, 2j, 1 + 1j, -2 + 0.5j, 30 + 1e-4j, -0.001 + 1e-6j])
def test_jost_square_well(z):
    J = jost(PotentialSpec.square_well(0.5), z)
    m = J.F0p[0, 0] / J.F0[0, 0]
    assert abs(m - square_well_m(0.5, z)) <= 1e-9 * abs(square_well_m(0.5, z))


def test_jost_rejects_branch_cut():
    with pytest.raises(DomainError):
        jost(PotentialSpec.square_well(0.5), 2.0)


def test_jost_profile_matches_boundary_value():
    q = PotentialSpec.square_well(1.0, 2.0)
    z = 1 + 1j
    x = np.linspace(0, 2.0, 11)
    F = jost_profile(q, z, x)
    J = jost(q, z)
    assert np.allclose(F[0], J.F0, rtol=1e-8)
    k = np.sqrt(z)
    assert F[-1][0, 0] == pytest.approx(np.exp(1j * k * 2.0), rel=1e-10)


def test_from_samples_and_csv(tmp_path):
    x = np.linspace(0, 1, 11)
    path = tmp_path / "q.csv"
    with open(path, "w") as fh:
        fh.write("x,re,im\n")
        for t in x:
            fh.write(f"{t},{2 * t},0\n")
    q = load_potential_csv(path, Interval(1.0))
    assert q.channels == 1
    assert q.values(0.55)[0, 0] == pytest.approx(1.1)
    assert q.l1_norm_estimate == pytest.approx(1.0)


def test_csv_wrong_columns(tmp_path):
    path = tmp_path / "q.csv"
    path.write_text("0,1,0,1\n1,1,0,1\n")
    with pytest.raises(ContractError):
        load_potential_csv(path, Interval(1.0), n=1)
