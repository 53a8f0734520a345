"""
Spectral quantities derived from perturbation determinants.

* zero/pole counting by the argument principle (:func:`count_zeros`) and
  eigenvalue location by recursive contour subdivision
  (:func:`locate_eigenvalues`);
* spectral shift functions from boundary values of ``log Delta`` on
  ``t + i eps`` ladders (:func:`spectral_shift`, :func:`complex_shift`)
  and the trace-formula check (:func:`trace_formula_residual`);
* Blaschke products and the factorization of ``Delta_{B/B*}`` for
  dissipative extensions with discrete spectrum
  (:func:`dissipative_decomposition`);
* contour-integral traces ``tr(phi(A') - phi(A))``
  (:func:`functional_trace`).

Shift functions are normalized so that ``xi = (1/pi) Im log Delta``.  In
this normalization ::

    int xi(t) / (t - z)^2 dt = d/dz log Delta(z)
                             = tr((A - z)^{-1} - (A' - z)^{-1})

and a single eigenvalue added to ``A'`` makes ``xi`` drop by one.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .cxlinalg import sqrt_upper, svd_rank
from .errors import (BtdetError, ClassificationError, ContractError, CoverageError, DomainError,
                     InconclusiveError, RefinementNeeded, SpectralPointError, ZeroCrossingError)
from .pdet import _evaluator, characteristic_det_many, continue_log, log_derivative
from .triplets import BoundaryOperator, ExtensionPair, OperatorClass, _bo

log = logging.getLogger(__name__)

DEFAULT_LADDER = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)


# --------------------------------------------------------------------------
# contours and winding numbers
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Contour:
    """Closed, positively oriented contour.

    Build with :meth:`circle`, :meth:`polyline` or :meth:`rectangle`.
    """

    kind: str
    center: complex = 0j
    radius: float = 1.0
    vertices: tuple = ()
    samples: int = 64

    @classmethod
    def circle(cls, center, radius, samples=64):
        if radius <= 0:
            raise ContractError("radius must be positive")
        return cls("circle", complex(center), float(radius), (), int(samples))

    @classmethod
    def polyline(cls, vertices, samples=64):
        v = tuple(complex(p) for p in vertices)
        if len(v) < 3:
            raise ContractError("a polyline contour needs at least three vertices")
        area = 0.5 * sum((a.conjugate() * b).imag for a, b in zip(v, v[1:] + v[:1]))
        if area <= 0:
            raise ContractError("polyline contour must be positively oriented")
        return cls("polyline", vertices=v, samples=int(samples))

    @classmethod
    def rectangle(cls, x0, x1, y0, y1, samples=64):
        return cls.polyline([complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)],
                            samples)

    def points(self, n=None):
        """``n`` points in traversal order (the closing point is not repeated)."""
        n = self.samples if n is None else int(n)
        if self.kind == "circle":
            return self.center + self.radius * np.exp(2j * np.pi * np.arange(n) / n)
        v = np.array(self.vertices + self.vertices[:1])
        lengths = np.abs(np.diff(v))
        per = np.maximum(2, np.round(n * lengths / lengths.sum()).astype(int))
        pts = [v[k] + (v[k + 1] - v[k]) * np.arange(per[k]) / per[k] for k in range(len(lengths))]
        return np.concatenate(pts)

    @property
    def diameter(self):
        if self.kind == "circle":
            return 2 * self.radius
        v = np.array(self.vertices)
        return float(np.abs(v[:, None] - v[None, :]).max())


def winding_number(f, contour: Contour, samples=None, max_doublings=8, residual=0.05):
    """Certified winding number of ``f`` along `contour`.

    Samples are doubled until two consecutive rounded windings agree with
    residual at most `residual`.
    """
    n = contour.samples if samples is None else samples
    prev = None
    last = None
    for _ in range(max_doublings + 1):
        _, lg, _ = continue_log(f, contour.points(n), closed=True)
        w = lg.winding
        r = abs(w - round(w))
        last = w
        if r <= residual:
            k = int(round(w))
            if prev == k:
                return k
            prev = k
        else:
            prev = None
        n *= 2
    raise InconclusiveError(f"winding not certified (last value {last:.4f}) after {max_doublings} doublings")


def count_zeros(path_eval, c: Contour, max_doublings=8) -> int:
    """Zeros minus poles of ``path_eval`` inside `c`.

    Parameters
    ----------
    path_eval : callable
        ``z -> Delta(z)``; vectorized callables are used as such, scalar
        ones are mapped point by point.
    c : Contour

    Raises
    ------
    InconclusiveError
        If the winding residual stays above 0.05.
    """
    return winding_number(_vectorize(path_eval), c, max_doublings=max_doublings)


def _vectorize(f):
    def g(zs):
        zs = np.asarray(zs, dtype=complex).ravel()
        try:
            out = np.asarray(f(zs), dtype=complex)
            if out.shape == zs.shape:
                return out
        except (TypeError, ValueError):
            pass
        return np.array([complex(f(z)) for z in zs])
    return g


# --------------------------------------------------------------------------
# eigenvalue location
# --------------------------------------------------------------------------

class Eigenvalue(NamedTuple):
    z: complex
    algebraic: int
    geometric: int


class EigenvalueList(list):
    """List of :class:`Eigenvalue` with the cells that could not be resolved."""

    def __init__(self, items=(), unresolved=()):
        super().__init__(items)
        self.unresolved = list(unresolved)

    @property
    def complete(self):
        return not self.unresolved


def _newton(f, z0, k, scale, tol, maxit=60):
    z = complex(z0)
    h = 1e-6 * scale
    for _ in range(maxit):
        v = f(np.array([z, z + h, z - h, z + 1j * h, z - 1j * h]))
        d = (v[1] - v[2] - 1j * (v[3] - v[4])) / (4 * h)
        if d == 0 or not np.isfinite(d):
            return z, False
        step = k * v[0] / d
        z = z - step
        if abs(step) <= tol:
            return z, True
        h = max(min(h, 10 * abs(step)), 1e-9 * scale)
    return z, False


def geometric_multiplicity(B, w, z, tol=1e-7) -> int:
    """``dim ker(B T0(z) - T1(z))`` (equal to ``dim ker(B - M(z))`` off ``sigma(A_0)``)."""
    B = _bo(B).B
    T0, T1 = w.boundary_matrices(z)
    D = B @ T0 - T1
    scale = max(1.0, np.linalg.norm(B @ T0, 2), np.linalg.norm(T1, 2))
    return B.shape[0] - svd_rank(D, tol, scale=scale)


def locate_eigenvalues(B, w, region, tol=1e-8, max_depth=12, samples=64, char=None):
    """Eigenvalues of ``A_B`` inside a rectangle.

    Zeros of the characteristic determinant ``det(B T0 - T1)`` are isolated
    by argument-principle subdivision and then polished with a
    multiplicity-aware Newton iteration.

    Parameters
    ----------
    B : BoundaryOperator or array_like
    w : WeylMap
    region : (x0, x1, y0, y1)
        Rectangle whose boundary is free of spectrum.
    tol : float
        Target accuracy of each eigenvalue.
    max_depth : int
        Subdivision budget; cells still unresolved are reported on
        ``result.unresolved``.
    char : callable, optional
        Vectorized replacement for the characteristic determinant.

    Returns
    -------
    EigenvalueList
        Entries ``(z, algebraic, geometric)`` sorted by real part.
    """
    x0, x1, y0, y1 = map(float, region)
    if not (x1 > x0 and y1 > y0):
        return EigenvalueList()
    Bop = _bo(B)
    f = char if char is not None else (lambda zs: characteristic_det_many(Bop, w, zs))
    scale = max(abs(x1 - x0), abs(y1 - y0))
    found, unresolved = [], []

    def polish(cell, k):
        cx, cy = 0.5 * (cell[0] + cell[1]), 0.5 * (cell[2] + cell[3])
        z, ok = _newton(f, complex(cx, cy), k, scale, tol * 1e-2)
        inside = (cell[0] - 1e-9 * scale <= z.real <= cell[1] + 1e-9 * scale
                  and cell[2] - 1e-9 * scale <= z.imag <= cell[3] + 1e-9 * scale)
        if not (ok and inside):
            return None
        # confirm the multiplicity on a small circle
        r = min(cell[1] - cell[0], cell[3] - cell[2]) * 0.25
        r = max(r, 1e3 * tol)
        try:
            kk = winding_number(f, Contour.circle(z, r, samples=32))
        except BtdetError:
            return None
        if kk != k:
            return None
        return z

    def recurse(cell, count, depth):
        if count == 0:
            return
        diam = max(cell[1] - cell[0], cell[3] - cell[2])
        if count == 1 or diam < 1e-4 * scale or depth >= 3:
            z = polish(cell, count)
            if z is not None:
                found.append(Eigenvalue(complex(z), count, geometric_multiplicity(Bop, w, z)))
                return
        if depth >= max_depth:
            unresolved.append({"cell": tuple(cell), "count": count})
            return
        # off-centre split so that zeros on the symmetry lines are unlikely
        xm = cell[0] + 0.5123 * (cell[1] - cell[0])
        ym = cell[2] + 0.4871 * (cell[3] - cell[2])
        subs = [(cell[0], xm, cell[2], ym), (xm, cell[1], cell[2], ym),
                (cell[0], xm, ym, cell[3]), (xm, cell[1], ym, cell[3])]
        counts = []
        for s in subs:
            try:
                counts.append(winding_number(f, Contour.rectangle(*s, samples=samples)))
            except (ZeroCrossingError, RefinementNeeded, InconclusiveError):
                counts.append(None)
        if None in counts or sum(counts) != count:
            # split line through a zero: nudge and retry once at this depth
            xm = cell[0] + 0.4637 * (cell[1] - cell[0])
            ym = cell[2] + 0.5389 * (cell[3] - cell[2])
            subs = [(cell[0], xm, cell[2], ym), (xm, cell[1], cell[2], ym),
                    (cell[0], xm, ym, cell[3]), (xm, cell[1], ym, cell[3])]
            try:
                counts = [winding_number(f, Contour.rectangle(*s, samples=samples)) for s in subs]
            except BtdetError:
                unresolved.append({"cell": tuple(cell), "count": count})
                return
            if sum(counts) != count:
                unresolved.append({"cell": tuple(cell), "count": count})
                return
        for s, c in zip(subs, counts):
            recurse(s, c, depth + 1)

    total = winding_number(f, Contour.rectangle(x0, x1, y0, y1, samples=max(samples, 128)))
    if total < 0:
        raise ContractError("characteristic determinant has poles in the region")
    recurse((x0, x1, y0, y1), total, 0)
    found.sort(key=lambda e: (e.z.real, e.z.imag))
    return EigenvalueList(found, unresolved)


# --------------------------------------------------------------------------
# shift functions
# --------------------------------------------------------------------------

@dataclass
class ShiftSample:
    """Spectral shift function on a real grid.

    Attributes
    ----------
    t_grid : ndarray
    eps_ladder : tuple of float
        Decreasing offsets used for the boundary values.
    values : ndarray
        Extrapolated ``xi(t)`` (real) or ``omega(t)`` (complex).
    branch_offset : int
        Integer ``n`` subtracted so that the left end sits near zero.
    per_eps : ndarray
        Unextrapolated values, one row per ladder entry.
    residual : ndarray
        ``|value(eps_1) - value(eps_2)|`` for the two smallest offsets.
    flagged : ndarray of bool
        Points whose residual exceeds 1e-3.
    """

    t_grid: np.ndarray
    eps_ladder: tuple
    values: np.ndarray
    branch_offset: int
    per_eps: np.ndarray
    residual: np.ndarray
    flagged: np.ndarray
    kind: str = "real"
    notes: dict = field(default_factory=dict)

    @property
    def window(self):
        return float(self.t_grid[0]), float(self.t_grid[-1])


def _real_grid_check(t):
    t = np.asarray(t, dtype=float).ravel()
    if t.size < 2 or np.any(np.diff(t) <= 0):
        raise ContractError("t_grid must be strictly increasing")
    return t


def _ladder(eps_ladder):
    eps = tuple(sorted((float(e) for e in eps_ladder), reverse=True))
    if len(eps) < 2 or eps[-1] <= 0:
        raise ContractError("need at least two positive ladder offsets")
    return eps


def _extrapolate(per_eps, eps):
    e1, e2 = eps[-1], eps[-2]
    v1, v2 = per_eps[-1], per_eps[-2]
    val = v1 + e1 * (v1 - v2) / (e2 - e1)
    return val, np.abs(v1 - v2)


def _continued_imag_log(f, t, eps):
    """Continuous ``log f(t + i eps)`` along the grid (seeded on the principal branch)."""
    _, lg, _ = continue_log(f, t + 1j * eps)
    return lg.values


def shift_grid(lo, hi, n=4000, focus=(), min_gap=1e-7, cluster=200, tail_start=None):
    """Real grid for shift functions.

    Uniform on ``[lo, tail_start]``, geometric on ``[tail_start, hi]``, and
    geometrically clustered (down to `min_gap`) on both sides of each
    `focus` point (eigenvalues, thresholds).
    """
    lo, hi = float(lo), float(hi)
    ts = hi if tail_start is None else min(float(tail_start), hi)
    n_tail = 0 if ts >= hi else n // 4
    parts = [np.linspace(lo, ts, n - n_tail)]
    if n_tail:
        parts.append(ts + np.geomspace(1e-3 * max(1.0, abs(ts)), hi - ts, n_tail))
    offs = np.geomspace(min_gap, 1.0, cluster)
    for f in focus:
        parts += [f - offs, f + offs]
    t = np.unique(np.concatenate(parts))
    t = t[(t >= lo) & (t <= hi)]
    keep = np.concatenate([[True], np.diff(t) > 1e-12 * np.maximum(1.0, np.abs(t[1:]))])
    return t[keep]


def spectral_shift(pair: ExtensionPair, t_grid, eps_ladder=DEFAULT_LADDER, jobs=1) -> ShiftSample:
    """Spectral shift function ``xi = (1/pi) Im log Delta(t + i0)``.

    For each ladder offset the logarithm is continued along the grid; the
    two smallest offsets are combined by linear extrapolation in ``eps``.
    The integer branch offset is fixed so that the left end of the grid
    sits in ``[-1/2, 1/2]``.

    Parameters
    ----------
    pair : ExtensionPair
        Both boundary operators selfadjoint.
    t_grid : array_like
        Strictly increasing real points.
    eps_ladder : sequence of float

    Raises
    ------
    ClassificationError
        If either boundary operator is not selfadjoint.
    """
    if not pair.selfadjoint:
        raise ClassificationError("spectral_shift needs a selfadjoint pair")
    t = _real_grid_check(t_grid)
    eps = _ladder(eps_ladder)
    f = _evaluator(pair, "ratio", jobs)
    rows = np.array([_continued_imag_log(f, t, e).imag / np.pi for e in eps])
    n = int(np.round(rows[-1, 0]))
    rows = rows - n
    val, res = _extrapolate(rows, eps)
    return ShiftSample(t, eps, val, n, rows, res, res > 1e-3, "real")


def complex_shift(pair: ExtensionPair, t_grid, eps_ladder=DEFAULT_LADDER, jobs=1,
                  sign_tol=1e-6) -> ShiftSample:
    """Complex shift function for a pair with an accumulative member.

    With ``B3 = Re(B') + i Im(B)`` the representative ::

        omega(t) = (1/pi) [Im log Delta_{B3/B}(t + i0) - i log|Delta_{B'/B3}(t + i0)|]

    is returned.  It satisfies the same trace formula as the real shift
    function.  When ``B`` is selfadjoint and ``B'`` accumulative,
    ``Im omega <= 0``; violations beyond `sign_tol` are recorded in
    ``notes["sign_violations"]``.  ``omega`` is one representative, not a
    unique function.
    """
    Bp, B = pair.Bprime, pair.B
    if not Bp.is_accumulative() and not B.is_accumulative():
        raise ClassificationError("complex_shift needs an accumulative boundary operator")
    if not (B.is_accumulative() or B.is_selfadjoint) or not Bp.is_accumulative():
        raise ClassificationError("expected accumulative B' against an accumulative or selfadjoint B")
    t = _real_grid_check(t_grid)
    eps = _ladder(eps_ladder)
    B3 = BoundaryOperator(Bp.real + 1j * B.imag)
    from .weyl import CachedWeyl
    shared = CachedWeyl(pair.weyl)
    p_real = ExtensionPair(B3, B, shared)
    p_imag = ExtensionPair(Bp, B3, shared)
    fr = _evaluator(p_real, "ratio", jobs)
    fi = _evaluator(p_imag, "ratio", jobs)
    re_rows = np.array([_continued_imag_log(fr, t, e).imag / np.pi for e in eps])
    n = int(np.round(re_rows[-1, 0]))
    re_rows = re_rows - n
    im_rows = np.array([-np.log(np.abs(fi(t + 1j * e))) / np.pi for e in eps])
    rows = re_rows + 1j * im_rows
    val, res = _extrapolate(rows, eps)
    sample = ShiftSample(t, eps, val, n, rows, res, res > 1e-3, "complex")
    if B.is_selfadjoint:
        bad = np.flatnonzero(val.imag > sign_tol)
        sample.notes["sign_violations"] = int(bad.size)
        if bad.size:
            log.warning("complex shift: Im omega > %g at %d points", sign_tol, bad.size)
    return sample


@dataclass(frozen=True)
class TraceResidual:
    """Outcome of :func:`trace_formula_residual`."""

    max_residual: float
    residuals: np.ndarray
    quadrature: np.ndarray
    reference: np.ndarray
    window: tuple
    tail_estimate: np.ndarray

    def __float__(self):
        return self.max_residual


def _tail_integral(t_end, xi_end, slope, z, n=400):
    """``int xi(t)/(t - z)^2`` beyond `t_end` for ``xi ~ xi_end (t/t_end)^slope``.

    Integrates over ``(t_end, inf)`` when ``t_end > 0`` and over
    ``(-inf, t_end)`` when ``t_end < 0``; midpoint rule in ``u = t_end/t``.
    """
    u = (np.arange(n) + 0.5) / n
    tt = t_end / u
    jac = abs(t_end) / u ** 2
    model = xi_end * u ** (-slope)
    return complex(np.sum(model / (tt - z) ** 2 * jac) / n)


def _tail_slope(seg_t, seg_v, cap):
    """Log-log slope of ``|xi|`` against ``|t|`` on a grid segment, clipped at `cap`."""
    ok = (np.abs(seg_v) > 0) & (seg_t != 0)
    if ok.sum() < 2 or np.ptp(np.log(np.abs(seg_t[ok]))) == 0:
        return cap
    slope = float(np.polyfit(np.log(np.abs(seg_t[ok])), np.log(np.abs(seg_v[ok])), 1)[0])
    return min(slope, cap)


def trace_formula_residual(pair: ExtensionPair, xi: ShiftSample, z_samples, tail="model",
                           coverage_tol=0.1) -> TraceResidual:
    """Compare ``int xi/(t - z)^2`` with ``d/dz log Delta`` at sample points.

    Equivalently ``-int xi/(t - z)^2`` against
    ``tr((A' - z)^{-1} - (A - z)^{-1})``.  The integral is trapezoidal on
    ``xi.t_grid``.  Beyond the ends ``xi`` is continued by power laws fitted
    to the outer tenth of the grid (slope at most ``-1/2`` on the right and
    at most ``0`` on the left, which covers constant continuation).  With
    ``tail="none"`` the continuation is only used to estimate what was
    left out.

    Returns
    -------
    TraceResidual
        ``max_residual`` is the worst relative residual.

    Raises
    ------
    CoverageError
        If the estimated tail exceeds `coverage_tol` times the value.
    """
    t = xi.t_grid
    vals = xi.values
    zs = np.atleast_1d(np.asarray(z_samples, dtype=complex))
    if np.any(zs.imag == 0):
        raise ContractError("z_samples must be off the real axis")
    L, R = t[0], t[-1]
    k = max(2, int(0.1 * t.size))
    right_slope = _tail_slope(t[-k:], vals[-k:], -0.5) if R > 0 else None
    left_slope = _tail_slope(t[:k], vals[:k], 0.0) if L < 0 else None
    quad, ref, tails = [], [], []
    for z in zs:
        q = np.trapezoid(vals / (t - z) ** 2, t)
        tr = 0j
        if right_slope is not None and vals[-1] != 0:
            tr += _tail_integral(R, vals[-1], right_slope, z)
        if left_slope is not None and vals[0] != 0:
            tr += _tail_integral(L, vals[0], left_slope, z)
        if tail == "model":
            q = q + tr
        quad.append(q)
        ref.append(log_derivative(pair, z))
        tails.append(abs(tr))
    quad, ref, tails = np.array(quad), np.array(ref), np.array(tails)
    res = np.abs(quad - ref) / np.maximum(np.abs(ref), 1e-300)
    ratio = tails / np.maximum(np.abs(ref), 1e-300)
    if np.any(ratio > coverage_tol):
        raise CoverageError(f"tail contribution up to {ratio.max():.2e} of the value; widen the window",
                            suggested_window=(L - (R - L), R + 4 * (R - L)))
    return TraceResidual(float(res.max()), res, quad, ref, (float(L), float(R)), tails)


# --------------------------------------------------------------------------
# dissipative extensions
# --------------------------------------------------------------------------

@dataclass
class DissipativeModel:
    """Factorization data of ``Delta_{B/B*}`` for a dissipative extension.

    ``Delta(z) ~ c * Blaschke_+(z) / Blaschke_-(z) * exp(i alpha z)``.
    """

    eigs_plus: list
    eigs_minus: list
    alpha: float
    c: complex
    fit_residual: float = 0.0
    modulus_defect: float = 0.0
    alpha_identity: Optional[float] = None
    real_eigenvalues: list = field(default_factory=list)
    unresolved: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    @property
    def blaschke_sum(self) -> float:
        return float(sum(m * z.imag / (1 + abs(z) ** 2) for z, m in self.eigs_plus))


def _blaschke_factor(zk, z):
    zk = complex(zk)
    if zk == 1j:
        gam = 0.0
    else:
        gam = -np.angle((1j - zk) / (1j - zk.conjugate()))
    return np.exp(1j * gam) * (z - zk) / (z - zk.conjugate())


def blaschke(model, z):
    """Finite Blaschke product of ``model.eigs_plus`` at `z`.

    Each factor ``e^{i g} (z - z_k)/(z - conj z_k)`` is normalized to be
    positive at ``z = i``.  Accepts a :class:`DissipativeModel` or a list
    of ``(z_k, m_k)`` pairs.

    Examples
    --------
    >>> abs(blaschke([(1j, 1)], 3j) - 0.5) < 1e-15
    True
    """
    zeros = model.eigs_plus if isinstance(model, DissipativeModel) else list(model)
    z = np.asarray(z, dtype=complex)
    out = np.ones_like(z)
    for zk, m in zeros:
        if np.any(z == np.conj(zk)):
            raise DomainError(f"z is a pole of the Blaschke product ({np.conj(zk)})")
        out = out * _blaschke_factor(zk, z) ** int(m)
    return out if out.ndim else complex(out)


def _blaschke_minus(zeros, z):
    """Product over lower half-plane zeros, factors normalized positive at ``-i``."""
    z = np.asarray(z, dtype=complex)
    out = np.ones_like(z)
    for zk, m in zeros:
        zk = complex(zk)
        gam = -np.angle((-1j - zk) / (-1j - zk.conjugate())) if zk != -1j else 0.0
        out = out * (np.exp(1j * gam) * (z - zk) / (z - zk.conjugate())) ** int(m)
    return out


def dissipative_decomposition(B, w, region, real_grid, eps_ladder=DEFAULT_LADDER, fit_grid=None,
                              alpha_point=None, resolvent_trace=None, tol=1e-8):
    """Factorize ``Delta_{B/B*}`` for a dissipative extension with discrete spectrum.

    Parameters
    ----------
    B : BoundaryOperator or array_like
        Non-selfadjoint boundary operator.
    w : WeylMap
    region : (x0, x1, y0, y1)
        Rectangle searched for eigenvalues of ``A_B`` and ``A_{B*}``.
    real_grid : array_like
        Real points for the modulus check ``| |Delta(t + i0)| - 1 |``.
    fit_grid : array_like, optional
        Upper half-plane points for the ``alpha, c`` least-squares fit;
        defaults to 24 points with ``|z|`` between 2 and 20.
    alpha_point : float, optional
        Real point ``a`` for the trace identity
        ``alpha/2 = Im tr (A_{B*} - a)^{-1} - sum m Im 1/(a - z_k)``.
    resolvent_trace : callable, optional
        ``a -> tr (A_{B*} - a)^{-1}`` (e.g. from an oracle matrix).  By
        default ``Im tr`` is obtained from the Weyl function as
        ``-Im d/dz log det(B* T0 - T1)``, valid when ``det T0`` is real on
        the real axis.

    Returns
    -------
    DissipativeModel
    """
    B = _bo(B)
    if B.is_selfadjoint:
        return DissipativeModel([], [], 0.0, 1.0 + 0j)
    ev = locate_eigenvalues(B, w, region, tol=tol)
    ev_star = locate_eigenvalues(B.adjoint(), w, region, tol=tol)
    scale = max(1.0, max((abs(e.z) for e in ev), default=1.0))
    real_eigs = [e for e in ev if abs(e.z.imag) <= 1e-8 * scale]
    plus = [(e.z, e.algebraic) for e in ev if e.z.imag > 1e-8 * scale]
    minus = [(e.z, e.algebraic) for e in ev if e.z.imag < -1e-8 * scale]
    pair = ExtensionPair(B, B.adjoint(), w)
    f = _evaluator(pair, "ratio")

    # modulus on the real axis
    t = _real_grid_check(real_grid)
    eps = _ladder(eps_ladder)
    rows = np.array([np.abs(f(t + 1j * e)) for e in eps])
    mod, _ = _extrapolate(rows, eps)
    defect = float(np.abs(mod - 1).max())

    # alpha, c fit
    if fit_grid is None:
        r = np.geomspace(2.0, 20.0, 24)
        th = np.linspace(0.3 * np.pi, 0.7 * np.pi, 24)
        fit_grid = r * np.exp(1j * th)
    zf = np.asarray(fit_grid, dtype=complex)
    if np.any(zf.imag <= 0):
        raise ContractError("fit grid must lie in the upper half-plane")

    def g(zs):
        zs = np.asarray(zs, dtype=complex)
        return f(zs) / (blaschke(plus, zs) / _blaschke_minus(minus, zs))

    _, lg, _ = continue_log(g, zf)
    L = lg.values
    A = np.zeros((2 * zf.size, 3))
    A[:zf.size, 0] = -zf.imag
    A[:zf.size, 1] = 1.0
    A[zf.size:, 0] = zf.real
    A[zf.size:, 2] = 1.0
    rhs = np.concatenate([L.real, L.imag])
    coef, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    alpha = float(coef[0])
    c = complex(np.exp(coef[1] + 1j * coef[2]))
    fit_res = float(np.abs(A @ coef - rhs).max())
    if fit_res > 1e-4:
        log.warning("dissipative fit residual %.2e: possible missing eigenvalues", fit_res)

    alpha_id = None
    if alpha_point is not None:
        a = float(alpha_point)
        if resolvent_trace is None:
            from .pdet import characteristic_det
            h = 1e-4 * max(1.0, abs(a))
            st = a + np.array([h, -h, 1j * h, -1j * h])
            v = np.array([characteristic_det(B.adjoint(), w, s) for s in st])
            v0 = characteristic_det(B.adjoint(), w, a)
            lv = np.log(v / v0)
            dlog = (lv[0] - lv[1] - 1j * (lv[2] - lv[3])) / (4 * h)
            im_tr = -dlog.imag
        else:
            im_tr = complex(resolvent_trace(a)).imag
        s = sum(m * (1.0 / (a - zk)).imag for zk, m in plus + minus)
        alpha_id = float(2 * (im_tr - s))
    return DissipativeModel(plus, minus, alpha, c, fit_res, defect, alpha_id,
                            [e.z for e in real_eigs], ev.unresolved + ev_star.unresolved,
                            {"adjoint_eigs": [(e.z, e.algebraic) for e in ev_star]})


def completeness_indicator(model: DissipativeModel, tol=1e-4) -> bool:
    """True iff ``|alpha| <= tol`` (root vectors complete)."""
    return bool(abs(model.alpha) <= tol)


# --------------------------------------------------------------------------
# functional calculus
# --------------------------------------------------------------------------

def _circle_rule(c: Contour, n):
    th = 2 * np.pi * np.arange(n) / n
    z = c.center + c.radius * np.exp(1j * th)
    dz = 1j * c.radius * np.exp(1j * th) * (2 * np.pi / n)
    return z, dz


def _polyline_rule(c: Contour, n):
    v = np.array(c.vertices + c.vertices[:1])
    xg, wg = np.polynomial.legendre.leggauss(16)
    per = max(1, n // (16 * (len(v) - 1)))
    zs, dzs = [], []
    for a, b in zip(v[:-1], v[1:]):
        for j in range(per):
            lo = a + (b - a) * j / per
            hi = a + (b - a) * (j + 1) / per
            zs.append(0.5 * (lo + hi) + 0.5 * (hi - lo) * xg)
            dzs.append(0.5 * (hi - lo) * wg)
    return np.concatenate(zs), np.concatenate(dzs)


def functional_trace(pair_or_trace, phi: Callable, c: Contour, spectra="exterior", tol=1e-10,
                     max_doublings=10) -> complex:
    """``tr(phi(A') - phi(A))`` by a contour integral of the resolvent difference.

    Parameters
    ----------
    pair_or_trace : ExtensionPair or callable
        Either a pair (the integrand ``tr((A'-z)^{-1} - (A-z)^{-1})`` is
        ``-log_derivative``) or a callable returning that trace at `z`.
    phi : callable
        Holomorphic near the contour and on the side holding the spectra.
    c : Contour
    spectra : {"exterior", "interior"}
        Where the spectra lie relative to `c`.  With ``"exterior"`` the
        result is ``(1/2 pi i) int phi(z) tr(R'(z) - R(z)) dz``; with
        ``"interior"`` the sign is reversed (Riesz-Dunford).

    Raises
    ------
    RefinementNeeded
        If doubling the nodes does not reach `tol`.
    """
    if isinstance(pair_or_trace, ExtensionPair):
        pair = pair_or_trace

        def tr(z):
            return -log_derivative(pair, z)
    else:
        tr = pair_or_trace
    if spectra not in ("exterior", "interior"):
        raise ContractError("spectra must be 'exterior' or 'interior'")
    sign = 1.0 if spectra == "exterior" else -1.0
    rule = _circle_rule if c.kind == "circle" else _polyline_rule
    n = max(16, c.samples)
    prev = None
    history = []
    for _ in range(max_doublings + 1):
        z, dz = rule(c, n)
        vals = np.array([complex(phi(p)) * complex(tr(p)) for p in z])
        I = sign * np.sum(vals * dz) / (2j * np.pi)
        history.append(I)
        if prev is not None and abs(I - prev) <= tol * max(1.0, abs(I)):
            return complex(I)
        prev = I
        n *= 2
    raise RefinementNeeded(f"contour quadrature not converged: last values {history[-3:]}")
