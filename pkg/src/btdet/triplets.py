"""
Boundary operators and the algebra around them.

An extension is parameterized by a matrix ``B`` through
``dom(A_B) = ker(Gamma_1 - B Gamma_0)``.  This module classifies ``B``,
tests resolvent points, builds the Krein correction kernel, transforms
triplets by J-unitary block matrices and evaluates characteristic
functions.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .cxlinalg import as_cmat, solve
from .errors import ContractError, DimensionError, SingularityError, SpectralPointError

SELFADJOINT_TOL = 1e-12
J_UNITARY_TOL = 1e-10


class OperatorClass(str, enum.Enum):
    SELFADJOINT = "selfadjoint"
    DISSIPATIVE = "dissipative"
    ACCUMULATIVE = "accumulative"
    GENERAL = "general"


class BoundaryOperator:
    """Square complex matrix ``B`` parameterizing the extension ``A_B``.

    Parameters
    ----------
    B : array_like or scalar
    """

    __slots__ = ("B",)

    def __init__(self, B):
        if isinstance(B, BoundaryOperator):
            B = B.B
        a = as_cmat(B, square=True).copy()
        a.setflags(write=False)
        object.__setattr__(self, "B", a)

    def __setattr__(self, name, value):
        raise AttributeError("BoundaryOperator is immutable")

    def __repr__(self):
        return f"BoundaryOperator({self.cls.value}, m={self.m})"

    @property
    def m(self) -> int:
        return self.B.shape[0]

    @property
    def real(self):
        return 0.5 * (self.B + self.B.conj().T)

    @property
    def imag(self):
        return (self.B - self.B.conj().T) / 2j

    @property
    def cls(self) -> OperatorClass:
        scale = max(1.0, float(np.abs(self.B).max()))
        BI = self.imag
        if np.linalg.norm(BI, 2) * 2 <= SELFADJOINT_TOL * scale:
            return OperatorClass.SELFADJOINT
        mu = np.linalg.eigvalsh(0.5 * (BI + BI.conj().T))
        if mu.min() >= -SELFADJOINT_TOL * scale:
            return OperatorClass.DISSIPATIVE
        if mu.max() <= SELFADJOINT_TOL * scale:
            return OperatorClass.ACCUMULATIVE
        return OperatorClass.GENERAL

    @property
    def is_selfadjoint(self):
        return self.cls is OperatorClass.SELFADJOINT

    def is_dissipative(self):
        return self.cls in (OperatorClass.SELFADJOINT, OperatorClass.DISSIPATIVE)

    def is_accumulative(self):
        return self.cls in (OperatorClass.SELFADJOINT, OperatorClass.ACCUMULATIVE)

    def adjoint(self) -> "BoundaryOperator":
        return BoundaryOperator(self.B.conj().T)


def _bo(B):
    return B if isinstance(B, BoundaryOperator) else BoundaryOperator(B)


@dataclass(frozen=True)
class ExtensionPair:
    """Ordered pair ``(A_{B'}, A_B)`` sharing a Weyl function.

    Determinants are always ``Delta_{B'/B}``: the perturbed extension
    comes first.
    """

    Bprime: BoundaryOperator
    B: BoundaryOperator
    weyl: object

    def __post_init__(self):
        object.__setattr__(self, "Bprime", _bo(self.Bprime))
        object.__setattr__(self, "B", _bo(self.B))
        if self.Bprime.m != self.B.m:
            raise DimensionError("boundary operators differ in size")
        dim = getattr(self.weyl, "dim", self.B.m)
        if dim != self.B.m:
            raise DimensionError(f"Weyl function has size {dim}, boundary operators {self.B.m}")

    @property
    def m(self):
        return self.B.m

    def swapped(self):
        return ExtensionPair(self.B, self.Bprime, self.weyl)

    def adjoint(self):
        return ExtensionPair(self.Bprime.adjoint(), self.B.adjoint(), self.weyl)

    @property
    def selfadjoint(self):
        return self.Bprime.is_selfadjoint and self.B.is_selfadjoint


def is_resolvent_point(B, Mz, rtol=1e-10) -> bool:
    """True iff ``sigma_min(B - M(z)) > rtol * ||B - M(z)||``.

    Examples
    --------
    >>> is_resolvent_point(1.0, -1.0)
    True
    >>> is_resolvent_point(-1.0, -1.0)
    False
    """
    D = _bo(B).B - as_cmat(Mz, square=True)
    s = np.linalg.svd(D, compute_uv=False)
    return bool(s[0] > 0 and s[-1] > rtol * s[0])


# --------------------------------------------------------------------------
# Krein correction
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class KreinKernel:
    """Kernel ``K(x, y) = phi_z(x) R phi_zbar(y)^*`` with ``R = (B - M(z))^{-1}``.

    Stored in factored form; :meth:`matrix` materializes it.
    """

    x: np.ndarray
    left: np.ndarray   # (N, n, m): phi_z(x) R
    right: np.ndarray  # (N, n, m): phi_zbar(y)

    def matrix(self):
        """Kernel on the grid as an ``(N n, N n)`` array."""
        N, n, m = self.left.shape
        return self.left.reshape(N * n, m) @ self.right.reshape(N * n, m).conj().T

    def diagonal(self):
        """``tr K(x, x)`` along the grid."""
        return np.einsum("xia,xia->x", self.left, self.right.conj())

    def trace(self) -> complex:
        """Trapezoidal quadrature of the diagonal."""
        return complex(np.trapezoid(self.diagonal(), self.x))

    def __sub__(self, other: "KreinKernel"):
        if not np.array_equal(self.x, other.x):
            raise ContractError("kernels live on different grids")
        return KreinKernel(self.x, np.concatenate([self.left, -other.left], axis=2),
                           np.concatenate([self.right, other.right], axis=2))

    def rank(self, tol=1e-10) -> int:
        """Numerical rank, from the QR factors of the two sides."""
        from .cxlinalg import svd_rank
        N, n, m = self.left.shape
        _, rl = np.linalg.qr(self.left.reshape(N * n, m))
        _, rr = np.linalg.qr(self.right.reshape(N * n, m))
        return svd_rank(rl @ rr.conj().T, tol)


def krein_correction(g_z, g_zbar, B, Mz) -> KreinKernel:
    """Krein correction ``gamma(z) (B - M(z))^{-1} gamma(zbar)^*`` on a grid.

    Represents ``(A_B - z)^{-1} - (A_0 - z)^{-1}`` with ``A_0 = ker Gamma_0``.

    Parameters
    ----------
    g_z, g_zbar : GammaSample
        Defect solutions at ``z`` and ``conj(z)`` on the same grid.
    B : BoundaryOperator or array_like
    Mz : array_like
        ``M(z)``.
    """
    B = _bo(B)
    if not np.array_equal(g_z.x, g_zbar.x):
        raise ContractError("gamma samples must share a grid")
    if not is_resolvent_point(B, Mz):
        raise SpectralPointError("B - M(z) is singular")
    R = solve(B.B - as_cmat(Mz), np.eye(B.m))
    return KreinKernel(g_z.x, g_z.basis @ R, g_zbar.basis)


# --------------------------------------------------------------------------
# transforms
# --------------------------------------------------------------------------

def j_matrix(m):
    """``J = [[0, -iI], [iI, 0]]`` of size ``2m``."""
    eye = np.eye(m)
    z = np.zeros((m, m))
    return np.block([[z, -1j * eye], [1j * eye, z]])


def j_unitary_defect(X) -> float:
    X = as_cmat(X, square=True)
    m = X.shape[0] // 2
    J = j_matrix(m)
    return float(np.linalg.norm(X.conj().T @ J @ X - J, 2) / max(1.0, np.linalg.norm(X, 2) ** 2))


def random_j_unitary(m, rng, scale=0.5, real=False):
    """Random J-unitary ``2m x 2m`` matrix ``expm(i J H)`` with ``H`` Hermitian.

    With ``real=True`` the blocks are real (``expm(E S)`` with ``S`` real
    symmetric and ``E = [[0, I], [-I, 0]]``), which maps selfadjoint
    parameters to selfadjoint parameters.
    """
    if real:
        S = rng.standard_normal((2 * m, 2 * m))
        S = scale * (S + S.T) / 2
        E = np.block([[np.zeros((m, m)), np.eye(m)], [-np.eye(m), np.zeros((m, m))]])
        return sla.expm(E @ S).astype(complex)
    H = rng.standard_normal((2 * m, 2 * m)) + 1j * rng.standard_normal((2 * m, 2 * m))
    H = scale * (H + H.conj().T) / 2
    return sla.expm(1j * j_matrix(m) @ H)


def _mobius(X, T):
    m = T.shape[0]
    X11, X12, X21, X22 = X[:m, :m], X[:m, m:], X[m:, :m], X[m:, m:]
    num = X11 @ T + X12
    den = X21 @ T + X22
    try:
        return solve(den.T, num.T).T
    except SingularityError as exc:
        raise SingularityError(f"transform denominator singular: {exc}", exc.condition) from None


def transform_triplet(X, B, Mz, tol=J_UNITARY_TOL):
    """Transform the boundary parameter and Weyl function by a J-unitary ``X``.

    With ``X = [[X11, X12], [X21, X22]]`` the new triplet has
    ``(Gamma_1', Gamma_0') = X (Gamma_1, Gamma_0)``, so that ::

        B~ = (X11 B + X12)(X21 B + X22)^{-1}
        M~ = (X11 M + X12)(X21 M + X22)^{-1}

    Raises
    ------
    ContractError
        If ``X* J X = J`` fails by more than `tol`.
    SingularityError
        If a denominator is singular.
    """
    X = as_cmat(X, square=True)
    B = _bo(B).B
    Mz = as_cmat(Mz, square=True)
    if X.shape[0] != 2 * B.shape[0] or Mz.shape != B.shape:
        raise DimensionError("X must be 2m x 2m for m x m boundary data")
    dfct = j_unitary_defect(X)
    if dfct > tol:
        raise ContractError(f"X is not J-unitary (defect {dfct:.2e})")
    return _mobius(X, B), _mobius(X, Mz)


def swap_transform(m, mu):
    """``X = [[0, I], [-I, mu I]]``: maps ``B`` to ``(mu - B)^{-1}``."""
    eye = np.eye(m)
    return np.block([[np.zeros((m, m)), eye], [-eye, mu * eye]]).astype(complex)


# --------------------------------------------------------------------------
# real/imaginary parts and characteristic function
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Decomposition:
    B_R: np.ndarray
    B_I: np.ndarray
    J: np.ndarray
    absB_I: np.ndarray
    sqrt_absB_I: np.ndarray


def decompose(B, tol=1e-12) -> Decomposition:
    """Real and imaginary parts with the polar data of ``B_I = J |B_I|``.

    ``J`` is the sign of ``B_I`` on its range and the identity on its
    kernel.

    Examples
    --------
    >>> d = decompose(1j * np.eye(2))
    >>> np.allclose(d.B_I, np.eye(2)), np.allclose(d.J, np.eye(2))
    (True, True)
    """
    B = _bo(B)
    B_R, B_I = B.real, B.imag
    mu, U = np.linalg.eigh(0.5 * (B_I + B_I.conj().T))
    scale = max(1.0, float(np.abs(B.B).max()))
    sgn = np.where(np.abs(mu) <= tol * scale, 1.0, np.sign(mu))
    Uh = U.conj().T
    J = (U * sgn) @ Uh
    absI = (U * np.abs(mu)) @ Uh
    sq = (U * np.sqrt(np.abs(mu))) @ Uh
    return Decomposition(B_R, B_I, J, absI, sq)


def characteristic_function(B, Mz):
    """``W(z) = I + 2i |B_I|^{1/2} (B* - M(z))^{-1} |B_I|^{1/2} J``.

    ``det W(z)`` equals ``Delta_{B/B*}(z)``; for dissipative ``B`` the
    matrix is contractive in the upper half-plane.
    """
    B = _bo(B)
    Mz = as_cmat(Mz, square=True)
    d = decompose(B)
    D = B.B.conj().T - Mz
    if not is_resolvent_point(B.adjoint(), Mz):
        raise SpectralPointError("B* - M(z) is singular")
    R = solve(D, d.sqrt_absB_I)
    return np.eye(B.m) + 2j * d.sqrt_absB_I @ R @ d.J
