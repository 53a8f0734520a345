"""
Perturbation determinants of pairs of extensions.

For a pair ``(A_{B'}, A_B)`` with Weyl function ``M``::

    Delta_{B'/B}(z) = det(B' - M(z)) / det(B - M(z))
                    = det(I + (B' - B)(B - M(z))^{-1})

:func:`pdet_ratio` evaluates this through the boundary matrices
``M = T1 T0^{-1}``, i.e. as ``det(B' T0 - T1) / det(B T0 - T1)``, which
stays finite at poles of ``M``.  The regularized forms use the literal
``M``-based expressions.  Multiplicative constants relating different
forms are never normalized away.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cxlinalg import BranchLog, as_cmat, condition_estimate, det, solve, unwrap_log_det
from .errors import (ContractError, RefinementNeeded, SingularityError,
                     SpectralPointError, StencilError, ZeroCrossingError)
from .triplets import ExtensionPair, _bo

COND_POLE = 1e12
ZERO_GUARD = 1e-12


def characteristic_det(B, w, z) -> complex:
    """``det(B T0(z) - T1(z))``, entire in ``z`` for interval problems.

    Its zeros are the eigenvalues of ``A_B`` (with multiplicity).
    """
    T0, T1 = w.boundary_matrices(z)
    return det(_bo(B).B @ T0 - T1)


def characteristic_det_many(B, w, zs):
    zs = np.asarray(zs, dtype=complex).ravel()
    T0, T1 = w.boundary_matrices_many(zs)
    return np.linalg.det(_bo(B).B[None] @ T0 - T1)


def pdet_ratio(pair: ExtensionPair, z) -> complex:
    """``det(B' - M(z)) / det(B - M(z))``.

    Raises
    ------
    SpectralPointError
        If ``z`` is numerically an eigenvalue of ``A_B`` (a pole).

    Examples
    --------
    Free half-line, Robin parameters 2 over 1 at ``z = -1``:

    >>> from btdet.weyl import FreeHalfLineWeyl
    >>> pdet_ratio(ExtensionPair(2.0, 1.0, FreeHalfLineWeyl()), -1.0)
    (1.5+0j)
    """
    T0, T1 = pair.weyl.boundary_matrices(z)
    den_m = pair.B.B @ T0 - T1
    cond = condition_estimate(den_m)
    if not cond <= COND_POLE:
        raise SpectralPointError(f"z={complex(z)} is a pole (eigenvalue of A_B), cond ~ {cond:.2e}",
                                 condition=cond)
    return det(pair.Bprime.B @ T0 - T1) / det(den_m)


def pdet_ratio_many(pair: ExtensionPair, zs):
    """Vectorized :func:`pdet_ratio` without the per-point condition check."""
    zs = np.asarray(zs, dtype=complex).ravel()
    T0, T1 = pair.weyl.boundary_matrices_many(zs)
    num = np.linalg.det(pair.Bprime.B[None] @ T0 - T1)
    den = np.linalg.det(pair.B.B[None] @ T0 - T1)
    if np.any(den == 0):
        j = int(np.flatnonzero(den == 0)[0])
        raise SpectralPointError(f"pole at z={zs[j]}")
    return num / den


def _regularizer(B, mu):
    B = _bo(B)
    m = B.m
    P = mu * np.eye(m) - B.B
    try:
        return solve(P, np.eye(m))
    except SingularityError as exc:
        raise ContractError(f"mu = {mu} is not in the resolvent set of B") from exc


def pdet_regularized(B, mu, w, z) -> complex:
    """``det(I - (mu - B)^{-1} (mu - M(z)))``.

    Represents ``Delta_{A_B/A_0}`` (``A_0 = ker Gamma_0``) in the
    transformed triplet, up to a ``z``-independent constant.

    Examples
    --------
    >>> from btdet.weyl import FreeHalfLineWeyl
    >>> complex(np.round(pdet_regularized(0.0, 1.0, FreeHalfLineWeyl(), -4.0), 12))
    (-2+0j)
    """
    mu = float(mu)
    Pinv = _regularizer(B, mu)
    Mz = as_cmat(w(z))
    m = Mz.shape[0]
    return det(np.eye(m) - Pinv @ (mu * np.eye(m) - Mz))


def pdet_regularized_many(B, mu, w, zs):
    Pinv = _regularizer(B, float(mu))
    Ms = w.evaluate_many(zs)
    m = Ms.shape[-1]
    return np.linalg.det(np.eye(m) - Pinv[None] @ (mu * np.eye(m) - Ms))


def pdet_pair_regularized(pair: ExtensionPair, mu, z) -> complex:
    """Quotient of the regularized determinants of ``B'`` and ``B``."""
    mu = float(mu)
    Pp = _regularizer(pair.Bprime, mu)
    P = _regularizer(pair.B, mu)
    Mz = as_cmat(pair.weyl(z))
    m = Mz.shape[0]
    R = mu * np.eye(m) - Mz
    den = det(np.eye(m) - P @ R)
    if den == 0:
        raise SpectralPointError(f"z={complex(z)} is a pole")
    return det(np.eye(m) - Pp @ R) / den


def pdet_quotient(pair: ExtensionPair, z, zeta) -> complex:
    """Right-hand side of the two-point quotient identity.

    Returns ``det(I + (M(z) - M(zeta)) (B - M(z))^{-1} (B' - B) (B' - M(zeta))^{-1})``,
    which equals ``Delta(z) / Delta(zeta)``.
    """
    Mz, Mw = as_cmat(pair.weyl(z)), as_cmat(pair.weyl(zeta))
    B, Bp = pair.B.B, pair.Bprime.B
    m = B.shape[0]
    left = solve(B - Mz, np.eye(m))
    right = solve(Bp - Mw, np.eye(m))
    return det(np.eye(m) + (Mz - Mw) @ left @ (Bp - B) @ right)


def _evaluator(pair, form, jobs=1):
    """Return ``zs -> Delta(zs)`` for the requested form."""
    if form in ("ratio", None):
        def f(zs):
            try:
                return pdet_ratio_many(pair, zs)
            except (SpectralPointError, SingularityError, np.linalg.LinAlgError):
                return np.array([pdet_ratio(pair, z) for z in zs])
    else:
        kind, mu = form
        if kind != "regularized":
            raise ContractError(f"unknown determinant form {form!r}")

        def f(zs):
            a = pdet_regularized_many(pair.Bprime, mu, pair.weyl, zs)
            b = pdet_regularized_many(pair.B, mu, pair.weyl, zs)
            return a / b
    if jobs and jobs > 1:
        def par(zs, f=f):
            zs = np.asarray(zs, dtype=complex).ravel()
            chunks = np.array_split(zs, min(jobs, max(1, zs.size)))
            with ThreadPoolExecutor(jobs) as ex:
                parts = list(ex.map(f, chunks))
            return np.concatenate(parts) if parts else np.zeros(0, complex)
        return par
    return f


@dataclass(frozen=True)
class DetPath:
    """Determinant values along a path with a continuous logarithm."""

    pair: ExtensionPair
    path: np.ndarray
    values: np.ndarray
    log: BranchLog
    refined_points: int = 0

    @property
    def winding(self) -> float:
        return self.log.winding


def continue_log(f, path, seed=0j, max_jump=np.pi / 2, max_rounds=40, guard=ZERO_GUARD,
                 closed=False):
    """Evaluate ``f`` on `path`, inserting midpoints until phase steps are small.

    Parameters
    ----------
    f : callable
        Vectorized ``zs -> values``.
    path : array_like
        Ordered complex points.
    closed : bool
        Treat the path as a closed loop; the returned log then includes the
        final point ``path[0]`` again.

    Returns
    -------
    values : ndarray
        ``f`` at the original points (plus the closing point).
    log : BranchLog
        Continuous logarithm at those points.
    extra : int
        Number of inserted points.
    """
    z = np.asarray(path, dtype=complex).ravel()
    if closed:
        z = np.concatenate([z, z[:1]])
    v = np.asarray(f(z), dtype=complex)
    orig = np.ones(z.size, dtype=bool)
    for _ in range(max_rounds):
        small = np.flatnonzero(np.abs(v) < guard)
        if small.size:
            j = int(small[0])
            raise ZeroCrossingError(f"|Delta| < {guard:g} near path point {np.cumsum(orig)[j] - 1}",
                                    index=int(np.cumsum(orig)[j] - 1))
        steps = np.abs(np.angle(v[1:] / v[:-1]))
        bad = np.flatnonzero(steps >= max_jump)
        if bad.size == 0:
            break
        mids = 0.5 * (z[bad] + z[bad + 1])
        vm = np.asarray(f(mids), dtype=complex)
        z = np.insert(z, bad + 1, mids)
        v = np.insert(v, bad + 1, vm)
        orig = np.insert(orig, bad + 1, False)
    else:
        j = int(np.cumsum(orig)[bad[0]] - 1)
        raise RefinementNeeded(f"phase still jumps after {max_rounds} refinement rounds near path point {j}",
                               index=j)
    full = unwrap_log_det(z, v, seed=seed, max_jump=np.pi)
    log = BranchLog(z[orig], full.values[orig], full.offset)
    return v[orig], log, int((~orig).sum())


def eval_path(pair: ExtensionPair, path, form="ratio", seed=0j, jobs=1, closed=False) -> DetPath:
    """Evaluate ``Delta`` along a path with a branch-continued logarithm.

    Parameters
    ----------
    pair : ExtensionPair
    path : array_like
        Ordered complex points avoiding zeros and poles.
    form : "ratio" or ("regularized", mu)
    seed : complex
        Branch seed for the first logarithm value.
    jobs : int
        Threads used for point evaluation.

    Raises
    ------
    ZeroCrossingError
        When ``|Delta|`` falls below the guard on the path.
    """
    f = _evaluator(pair, form, jobs)
    try:
        vals, log, extra = continue_log(f, path, seed=seed, closed=closed)
    except SpectralPointError as exc:
        raise ZeroCrossingError(f"path passes through a pole: {exc}") from exc
    pts = log.path
    return DetPath(pair, pts, vals, log, extra)


def log_derivative(pair: ExtensionPair, z, step=None, form="ratio") -> complex:
    """``d/dz log Delta(z)`` by a 4-point complex central difference.

    Equals ``tr((A_B - z)^{-1} - (A_{B'} - z)^{-1})``.  The default step is
    ``1e-4 max(1, |z|)``; the stencil error is ``O(step^4)``.

    Raises
    ------
    StencilError
        If a stencil point is a pole or a zero.
    """
    z = complex(z)
    h = 1e-4 * max(1.0, abs(z)) if step is None else float(step)
    f = _evaluator(pair, form)
    pts = z + np.array([h, -h, 1j * h, -1j * h, 0])
    try:
        v = np.array([f([p])[0] for p in pts])
    except (SpectralPointError, SingularityError) as exc:
        raise StencilError(f"pole inside the stencil at z={z}: {exc}") from exc
    if np.any(np.abs(v) < ZERO_GUARD) or not np.all(np.isfinite(v)):
        raise StencilError(f"zero inside the stencil at z={z}")
    lg = np.log(v[:4] / v[4])
    if np.any(np.abs(lg.imag) > np.pi / 2):
        raise StencilError(f"stencil too wide for the phase variation at z={z}")
    return complex((lg[0] - lg[1] - 1j * (lg[2] - lg[3])) / (4 * h))


def constant_quotient(a, b):
    """Mean and relative spread of the pointwise quotient ``a / b``."""
    q = np.asarray(a, dtype=complex) / np.asarray(b, dtype=complex)
    c = q.mean()
    return complex(c), float(np.abs(q - c).max() / abs(c))
