"""
Dense complex linear algebra helpers.

Determinants and solves go through a pivoted LU factorization so that the
phase of the determinant is accumulated pivot by pivot.  Paths of
determinant values are turned into continuous logarithms by
:func:`unwrap_log_det`, which only validates and never refines.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import DimensionError, RefinementNeeded, SingularityError, ZeroCrossingError

#: condition estimate above which a matrix is reported singular
COND_LIMIT = 1e12


def as_cmat(m, square=False):
    """Return `m` as a finite complex 2-D array.

    Scalars and 1-D inputs are promoted to ``(1, 1)`` and ``(k, 1)``.
    """
    a = np.asarray(m, dtype=complex)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(-1, 1)
    elif a.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    if square and a.shape[0] != a.shape[1]:
        raise DimensionError(f"square matrix required, got shape {a.shape}")
    return a


def sqrt_upper(z):
    """Square root on the branch ``Im sqrt(z) >= 0`` (cut along ``[0, inf)``)."""
    k = np.sqrt(np.asarray(z, dtype=complex))
    return np.where(k.imag < 0, -k, k) if k.ndim else (-k if k.imag < 0 else k)


def _lu(m):
    # exact singularity is reported through the condition estimate instead
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(m, check_finite=False)
    return lu, piv


def _pivot_sign(piv):
    return -1.0 if np.count_nonzero(piv != np.arange(piv.size)) % 2 else 1.0


def det(m) -> complex:
    """Determinant via LU with partial pivoting.

    Parameters
    ----------
    m : array_like
        Square complex matrix.

    Returns
    -------
    complex
        Product of the pivots times the permutation sign.
    """
    a = as_cmat(m, square=True)
    if a.shape[0] == 1:
        return complex(a[0, 0])
    lu, piv = _lu(a)
    return complex(_pivot_sign(piv) * np.prod(np.diag(lu)))


def logdet(m) -> complex:
    """Principal-branch-free log of det: sum of pivot logs plus permutation phase.

    The imaginary part is not reduced to ``(-pi, pi]``; it is only useful
    for magnitudes or as a seed.  Use :func:`unwrap_log_det` for paths.
    """
    a = as_cmat(m, square=True)
    lu, piv = _lu(a)
    d = np.diag(lu)
    if np.any(d == 0):
        raise SingularityError("matrix is exactly singular", condition=np.inf)
    s = np.log(d.astype(complex)).sum()
    if _pivot_sign(piv) < 0:
        s += 1j * np.pi
    return complex(s)


def condition_estimate(m) -> float:
    """LAPACK 1-norm reciprocal condition estimate, inverted."""
    a = as_cmat(m, square=True)
    lu, _ = _lu(a)
    return _cond_from_lu(a, lu)


def _cond_from_lu(a, lu):
    if np.any(np.diag(lu) == 0):
        return np.inf
    anorm = np.linalg.norm(a, 1)
    if anorm == 0:
        return np.inf
    rcond, info = sla.lapack.zgecon(lu, anorm, norm="1")
    return np.inf if rcond == 0 else 1.0 / rcond


def solve(m, rhs, cond_limit=COND_LIMIT, check=True):
    """Solve ``m x = rhs`` for square `m`.

    Parameters
    ----------
    m : array_like
        Square complex matrix.
    rhs : array_like
        Right-hand side, vector or matrix.
    cond_limit : float
        Reject `m` when its condition estimate exceeds this value.
    check : bool
        Verify ``||m x - rhs|| <= 1e-10 ||rhs||`` (Frobenius norms) and do
        one step of iterative refinement if needed.

    Raises
    ------
    SingularityError
        If the condition estimate exceeds `cond_limit` or the residual
        check fails after refinement.
    """
    a = as_cmat(m, square=True)
    b = np.asarray(rhs, dtype=complex)
    vec = b.ndim == 1
    b2 = b.reshape(-1, 1) if vec else b
    if b2.shape[0] != a.shape[0]:
        raise DimensionError(f"rhs has {b2.shape[0]} rows, matrix has {a.shape[0]}")
    lu, piv = _lu(a)
    cond = _cond_from_lu(a, lu)
    if not cond <= cond_limit:
        raise SingularityError(f"matrix is singular to tolerance (cond ~ {cond:.3g})", condition=cond)
    x = sla.lu_solve((lu, piv), b2, check_finite=False)
    if check:
        bn = np.linalg.norm(b2)
        r = b2 - a @ x
        if np.linalg.norm(r) > 1e-10 * bn:
            x = x + sla.lu_solve((lu, piv), r, check_finite=False)
            r = b2 - a @ x
            if np.linalg.norm(r) > 1e-10 * bn:
                raise SingularityError("solve residual above 1e-10 after refinement", condition=cond)
    return x.ravel() if vec else x


def svd_rank(m, tol, scale=None) -> int:
    """Number of singular values above ``tol * scale``.

    `scale` defaults to the largest singular value of `m`.  Passing an
    explicit scale is useful when `m` is a difference of two large terms
    (e.g. ``B - M(z)``) and should be compared to their size instead.
    """
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    s = np.linalg.svd(as_cmat(m), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    ref = s[0] if scale is None else scale
    return int(np.count_nonzero(s > tol * ref))


def hermitian_defect(m) -> float:
    """Spectral norm of ``m - m*``."""
    a = as_cmat(m, square=True)
    return float(np.linalg.norm(a - a.conj().T, 2))


def real_imag_parts(m):
    """Return ``((m + m*)/2, (m - m*)/(2i))``."""
    a = as_cmat(m, square=True)
    return 0.5 * (a + a.conj().T), (a - a.conj().T) / 2j


@dataclass(frozen=True)
class BranchLog:
    """Continuous logarithm of a sequence of nonzero determinants.

    Attributes
    ----------
    path : ndarray
        Evaluation points, in order.
    values : ndarray
        ``log`` values with continuous imaginary part.
    offset : int
        Net number of ``2 pi`` turns absorbed relative to the principal
        branch at the final point.
    """

    path: np.ndarray
    values: np.ndarray
    offset: int

    def exp(self):
        return np.exp(self.values)

    @property
    def increment(self) -> complex:
        return complex(self.values[-1] - self.values[0])

    @property
    def winding(self) -> float:
        """Imaginary increment divided by ``2 pi`` (not rounded)."""
        return float(self.increment.imag / (2 * np.pi))


def unwrap_log_det(path, dets, seed=0j, max_jump=np.pi) -> BranchLog:
    """Continue ``log det`` along a path.

    Parameters
    ----------
    path : array_like
        Complex points, in traversal order.
    dets : array_like
        Determinant values at the points; none may vanish.
    seed : complex
        The first value is ``log|dets[0]| + i arg`` with ``arg`` the
        representative of ``angle(dets[0])`` nearest to ``Im seed``.
    max_jump : float
        Largest allowed phase increment between consecutive points;
        increments of at least this size raise :class:`RefinementNeeded`.

    Returns
    -------
    BranchLog
    """
    z = np.asarray(path, dtype=complex).ravel()
    d = np.asarray(dets, dtype=complex).ravel()
    if z.shape != d.shape:
        raise DimensionError("path and dets differ in length")
    if d.size == 0:
        return BranchLog(z, d.copy(), 0)
    zero = np.flatnonzero(~np.isfinite(d) | (d == 0))
    if zero.size:
        raise ZeroCrossingError(f"determinant vanishes at path index {zero[0]}", index=int(zero[0]))
    base = np.angle(d[0])
    s = np.imag(seed)
    arg0 = base + 2 * np.pi * np.round((s - base) / (2 * np.pi))
    steps = np.angle(d[1:] / d[:-1])
    bad = np.flatnonzero(np.abs(steps) >= max_jump - 1e-9)
    if bad.size:
        k = int(bad[0]) + 1
        raise RefinementNeeded(
            f"phase jump {steps[bad[0]]:.4f} at path index {k} is too large to unwrap", index=k)
    args = arg0 + np.concatenate(([0.0], np.cumsum(steps)))
    vals = np.log(np.abs(d)) + 1j * args
    offset = int(np.round((args[-1] - np.angle(d[-1])) / (2 * np.pi)))
    return BranchLog(z, vals, offset)
