"""
Matrix solutions of ``-f'' + Q f = z f``.

Two propagators are provided:

* :func:`fundamental_solutions` integrates the canonical pair ``C, S``
  (``C(0) = I, C'(0) = 0``, ``S(0) = 0, S'(0) = I``) across ``[0, b]``
  with an adaptive embedded Runge-Kutta pair (scipy's DOP853).  Constant
  potentials use the exact trigonometric form instead.
* :func:`jost` solves the Volterra equation for the Jost solution
  ``F(z, x) ~ exp(i sqrt(z) x)`` on the half-line by backward fixed-point
  iteration.

Throughout, ``sqrt(z)`` is taken with ``Im sqrt(z) >= 0``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.integrate import solve_ivp
from scipy.signal import lfilter

from .cxlinalg import sqrt_upper
from .errors import ContractError, ConvergenceError, DomainError, StiffnessError


@dataclass(frozen=True)
class Interval:
    """Support ``[0, b]``."""

    b: float

    def __post_init__(self):
        if not self.b > 0:
            raise ContractError("interval length must be positive")


@dataclass(frozen=True)
class HalfLine:
    """Support ``[0, inf)``; the potential is treated as zero beyond `R`."""

    R: float

    def __post_init__(self):
        if not self.R > 0:
            raise ContractError("half-line cutoff must be positive")


Support = Union[Interval, HalfLine]


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """Hermitian ``n x n`` matrix potential on an interval or the half-line.

    Use the constructors :meth:`zero`, :meth:`constant_potential`,
    :meth:`square_well`, :meth:`from_callable` and :meth:`from_samples`
    rather than building instances directly.

    Attributes
    ----------
    channels : int
    support : Interval or HalfLine
    values : callable
        ``x -> Q(x)``, an ``(n, n)`` complex array.  Must return zero
        beyond a half-line cutoff.
    l1_norm_estimate : float
        Estimate of ``int ||Q(x)|| dx`` over the support.
    constant : ndarray or None
        Set when `Q` is constant on the support; enables closed forms.
    breakpoints : tuple of float
        Interior points where `Q` may jump.  Integrators stop there.
    """

    channels: int
    support: Support
    values: Callable[[float], np.ndarray]
    l1_norm_estimate: float
    constant: Optional[np.ndarray] = None
    breakpoints: tuple = ()
    label: str = "potential"

    def __post_init__(self):
        if self.channels < 1:
            raise ContractError("channels must be positive")
        if not np.isfinite(self.l1_norm_estimate) or self.l1_norm_estimate < 0:
            raise ContractError("potential needs a finite l1 norm estimate")
        for x in self.sample_points(33):
            Q = np.asarray(self.values(x), dtype=complex)
            if Q.shape != (self.channels, self.channels):
                raise ContractError(f"Q({x}) has shape {Q.shape}")
            if np.abs(Q - Q.conj().T).max() > 1e-12 * max(1.0, np.abs(Q).max()):
                raise ContractError(f"Q({x}) is not Hermitian")

    @property
    def length(self) -> float:
        return self.support.b if isinstance(self.support, Interval) else self.support.R

    @property
    def is_halfline(self) -> bool:
        return isinstance(self.support, HalfLine)

    @property
    def is_zero(self) -> bool:
        return self.constant is not None and not np.any(self.constant)

    def sample_points(self, k):
        pts = np.linspace(0.0, self.length, k)
        return np.unique(np.concatenate([pts, np.asarray(self.breakpoints, float)]))

    def segments(self):
        """Breakpoint-delimited subintervals of ``[0, length]``."""
        inner = [x for x in sorted(self.breakpoints) if 0 < x < self.length]
        edges = [0.0] + inner + [self.length]
        return list(zip(edges[:-1], edges[1:]))

    def on_grid(self, x):
        """Stack ``Q`` over an array of points, shape ``(len(x), n, n)``."""
        if self.constant is not None:
            out = np.broadcast_to(self.constant, (len(x),) + self.constant.shape).copy()
            if self.is_halfline:
                out[np.asarray(x) > self.length] = 0
            return out
        return np.array([np.asarray(self.values(t), dtype=complex) for t in x])

    # constructors -------------------------------------------------------
    @classmethod
    def zero(cls, n, support):
        return cls.constant_potential(np.zeros((n, n)), support, label="zero")

    @classmethod
    def constant_potential(cls, Q, support, label="constant"):
        Q = np.array(Q, dtype=complex, ndmin=2)
        n = Q.shape[0]
        L = support.b if isinstance(support, Interval) else support.R
        if isinstance(support, HalfLine):
            def values(x, Q=Q, L=L):
                return Q if x <= L else np.zeros_like(Q)
        else:
            def values(x, Q=Q):
                return Q
        Q.setflags(write=False)
        return cls(n, support, values, float(np.linalg.norm(Q, 2) * L), constant=Q, label=label)

    @classmethod
    def square_well(cls, v, width=1.0, n=1):
        """Half-line potential ``Q = -v`` on ``[0, width]`` and zero beyond."""
        return cls.constant_potential(-v * np.eye(n), HalfLine(width), label="square_well")

    @classmethod
    def from_callable(cls, f, n, support, l1_norm_estimate=None, breakpoints=(), label="callable"):
        L = support.b if isinstance(support, Interval) else support.R

        def values(x):
            if isinstance(support, HalfLine) and x > L:
                return np.zeros((n, n), dtype=complex)
            return np.asarray(f(x), dtype=complex).reshape(n, n)

        if l1_norm_estimate is None:
            xs = np.linspace(0, L, 401)
            l1_norm_estimate = float(np.trapezoid([np.linalg.norm(values(x), 2) for x in xs], xs))
        return cls(n, support, values, l1_norm_estimate, breakpoints=tuple(breakpoints), label=label)

    @classmethod
    def from_samples(cls, x, Q, support, label="samples"):
        """Piecewise-linear interpolation of samples ``Q[k] = Q(x[k])``."""
        x = np.asarray(x, dtype=float)
        Q = np.asarray(Q, dtype=complex)
        if Q.ndim == 1:
            Q = Q[:, None, None]
        if x.ndim != 1 or Q.shape[0] != x.size or np.any(np.diff(x) <= 0):
            raise ContractError("samples need strictly increasing x and one matrix per point")
        n = Q.shape[1]
        flat = Q.reshape(x.size, -1)
        L = support.b if isinstance(support, Interval) else support.R

        def values(t):
            if isinstance(support, HalfLine) and t > L:
                return np.zeros((n, n), dtype=complex)
            re = [np.interp(t, x, flat[:, j].real) for j in range(n * n)]
            im = [np.interp(t, x, flat[:, j].imag) for j in range(n * n)]
            return (np.array(re) + 1j * np.array(im)).reshape(n, n)

        norms = np.linalg.norm(Q, 2, axis=(1, 2))
        mask = x <= L
        l1 = float(np.trapezoid(norms[mask], x[mask])) if mask.sum() > 1 else 0.0
        return cls(n, support, values, l1, label=label)


def load_potential_csv(path, support, n=None):
    """Read potential samples from CSV.

    Columns are ``x`` followed by ``Re Q_ij, Im Q_ij`` pairs in
    lexicographic ``(i, j)`` order.  A header row is skipped when its first
    field is not numeric.
    """
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or not rec[0].strip():
                continue
            try:
                rows.append([float(v) for v in rec])
            except ValueError:
                if rows:
                    raise
    data = np.array(rows, dtype=float)
    ncols = data.shape[1] - 1
    if n is None:
        n = int(round(np.sqrt(ncols / 2)))
    if 2 * n * n != ncols:
        raise ContractError(f"expected {2 * n * n} value columns, found {ncols}")
    vals = data[:, 1::2] + 1j * data[:, 2::2]
    return PotentialSpec.from_samples(data[:, 0], vals.reshape(-1, n, n), support, label=str(path))


# --------------------------------------------------------------------------
# fundamental solutions on an interval
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FundamentalPair:
    """Canonical solutions and derivatives at the right endpoint."""

    z: complex
    C: np.ndarray
    Cp: np.ndarray
    S: np.ndarray
    Sp: np.ndarray

    @property
    def monodromy(self):
        return np.block([[self.C, self.S], [self.Cp, self.Sp]])


def wronskian_defect(p: FundamentalPair, pbar: Optional[FundamentalPair] = None) -> float:
    """``|| C(zbar)* S'(z) - C'(zbar)* S(z) - I ||`` (conserved for Hermitian Q).

    With `pbar` omitted the pair itself is used, which is only meaningful
    for real `z`.
    """
    q = p if pbar is None else pbar
    n = p.C.shape[0]
    W = q.C.conj().T @ p.Sp - q.Cp.conj().T @ p.S
    return float(np.abs(W - np.eye(n)).max())


def _constant_blocks(Q, z, x):
    """Closed-form C, C', S, S' for constant Hermitian Q at the points `x`."""
    lam, U = np.linalg.eigh(Q)
    s = np.sqrt(z - lam.astype(complex))
    x = np.atleast_1d(np.asarray(x, dtype=float))[:, None]
    sx = s[None, :] * x
    cos = np.cos(sx)
    sinc = x * np.sinc(sx / np.pi)  # sin(s x)/s, entire in s
    msin = -s[None, :] ** 2 * sinc  # -s sin(s x)
    Uh = U.conj().T

    def conj(d):
        return np.einsum("ij,kj,jl->kil", U, d, Uh)

    return conj(cos), conj(msin), conj(sinc), conj(cos)


def fundamental_matrix(q: PotentialSpec, z, x, rtol=1e-12, atol=1e-13, z_cap=None):
    """``C, C', S, S'`` at the sorted points `x` in ``[0, b]``.

    Returns four arrays of shape ``(len(x), n, n)``.
    """
    z = complex(z)
    x = np.asarray(x, dtype=float)
    if z_cap is not None and abs(z) > z_cap:
        raise StiffnessError(f"|z| = {abs(z):.3g} exceeds the cap {z_cap:.3g}", suggested_cap=z_cap)
    if q.constant is not None:
        return _constant_blocks(q.constant, z, x)
    n = q.channels
    if np.any(np.diff(x) < 0) or x.min() < 0 or x.max() > q.length * (1 + 1e-14):
        raise ContractError("points must be sorted inside the support")

    def rhs(t, y):
        Y = y.reshape(2 * n, 2 * n)
        top = Y[n:]
        bottom = (np.asarray(q.values(t), dtype=complex) - z * np.eye(n)) @ Y[:n]
        return np.concatenate([top, bottom]).ravel()

    y = np.eye(2 * n, dtype=complex).ravel()
    out = np.empty((x.size, 2 * n, 2 * n), dtype=complex)
    filled = np.zeros(x.size, dtype=bool)
    at0 = x == 0
    out[at0] = np.eye(2 * n)
    filled |= at0
    for a, b in q.segments():
        sel = np.flatnonzero((x > a) & (x <= b) & ~filled)
        sol = solve_ivp(rhs, (a, b), y, method="DOP853", rtol=rtol, atol=atol,
                        t_eval=np.unique(np.concatenate([x[sel], [b]])))
        if sol.status != 0:
            cap = max(abs(z) / 4, 1.0)
            raise StiffnessError(f"integration failed at z={z}: {sol.message}", suggested_cap=cap)
        Ys = sol.y.T.reshape(-1, 2 * n, 2 * n)
        tk = sol.t
        for j in sel:
            out[j] = Ys[np.searchsorted(tk, x[j])]
        filled[sel] = True
        y = sol.y[:, -1]
    return out[:, :n, :n], out[:, n:, :n], out[:, :n, n:], out[:, n:, n:]


def fundamental_solutions(q: PotentialSpec, z, z_cap=None, rtol=1e-12, atol=1e-13) -> FundamentalPair:
    """Canonical solutions ``C(z, b), C'(z, b), S(z, b), S'(z, b)``.

    Parameters
    ----------
    q : PotentialSpec
        Potential on an interval ``[0, b]``.
    z : complex
        Spectral parameter.
    z_cap : float, optional
        Refuse ``|z|`` above this value (the integrator needs about
        ``sqrt|z| b`` steps per digit).

    Returns
    -------
    FundamentalPair

    Raises
    ------
    StiffnessError
        When the adaptive step underflows.
    """
    if q.is_halfline:
        raise ContractError("fundamental_solutions needs interval support")
    C, Cp, S, Sp = fundamental_matrix(q, z, [q.length], rtol=rtol, atol=atol, z_cap=z_cap)
    return FundamentalPair(complex(z), C[0], Cp[0], S[0], Sp[0])


# --------------------------------------------------------------------------
# Jost solutions on the half-line
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class JostValue:
    """Jost solution data at ``x = 0``.

    Attributes
    ----------
    z : complex
    F0, F0p : ndarray
        ``F(z, 0)`` and ``F'(z, 0)``.
    iterations : int
        Fixed-point sweeps on the finest grid.
    residual : float
        Sup-norm defect of the discrete Volterra equation at ``x = 0``.
    discretization_error : float
        Change in ``(F0, F0p)`` between the two grids used for Richardson
        extrapolation (an error estimate for the unextrapolated values).
    history : tuple of float
        Sup-norm update sizes per sweep on the finest grid.
    """

    z: complex
    F0: np.ndarray
    F0p: np.ndarray
    iterations: int
    residual: float
    discretization_error: float = 0.0
    history: tuple = field(default=(), repr=False)


def _grid(q: PotentialSpec, k, points_per_unit):
    """Piecewise-uniform grid of ``[0, R]`` with breakpoints as nodes."""
    pieces = []
    for a, b in q.segments():
        m = max(8, int(np.ceil((b - a) * points_per_unit)))
        pieces.append(np.linspace(a, b, m + 1))
    return pieces


def _volterra(q: PotentialSpec, k, pieces, tol, max_iter):
    """Fixed-point solve of ``m = I + K m`` on the given grid pieces.

    Returns ``m(0)``, ``I(0)`` (so that ``F'(0) = i k m(0) - I(0)``), the
    residual, iteration count and update history.
    """
    n = q.channels
    eye = np.eye(n, dtype=complex)
    Qs = [q.on_grid(p) for p in pieces]
    ms = [np.broadcast_to(eye, (p.size, n, n)).copy() for p in pieces]
    history = []

    def apply_K(ms):
        # sweep pieces from the right; carry I(x), P(x) across breakpoints
        out_K, out_I = [None] * len(pieces), [None] * len(pieces)
        carry_I = np.zeros((n, n), dtype=complex)
        carry_P = np.zeros((n, n), dtype=complex)
        carry_D = np.zeros((n, n), dtype=complex)
        for j in range(len(pieces) - 1, -1, -1):
            x = pieces[j]
            h = x[1] - x[0]
            a = np.exp(2j * k * h)
            u = Qs[j] @ ms[j]
            # local trapezoid pieces, u_i on [x_i, x_{i+1}]
            loc = 0.5 * h * (u[:-1] + a * u[1:])
            rev = loc[::-1].reshape(loc.shape[0], -1)
            Irev = lfilter([1.0], [1.0, -a], rev, axis=0)
            powers = a ** np.arange(1, loc.shape[0] + 1)
            Irev = Irev + powers[:, None] * carry_I.reshape(1, -1)
            I = np.concatenate([Irev[::-1].reshape(-1, n, n), carry_I[None]], axis=0)
            locP = 0.5 * h * (u[:-1] + u[1:])
            P = np.concatenate([np.cumsum(locP[::-1], axis=0)[::-1] + carry_P, carry_P[None]], axis=0)
            # (I - P)/(2ik) without cancellation at small k:
            # D_i = a D_{i+1} + phi(h) (P_{i+1} + h u_{i+1} / 2),  phi(s) = (e^{2iks} - 1)/(2ik)
            phi = h if k == 0 else np.expm1(2j * k * h) / (2j * k)
            r = (phi * (P[1:] + 0.5 * h * u[1:]))[::-1].reshape(loc.shape[0], -1)
            Drev = lfilter([1.0], [1.0, -a], r, axis=0) + powers[:, None] * carry_D.reshape(1, -1)
            D = np.concatenate([Drev[::-1].reshape(-1, n, n), carry_D[None]], axis=0)
            out_K[j] = D
            out_I[j] = I
            carry_I, carry_P, carry_D = I[0], P[0], D[0]
        return out_K, out_I

    it = 0
    for it in range(1, max_iter + 1):
        K, I = apply_K(ms)
        new = [eye + Kj for Kj in K]
        step = max(np.abs(a - b).max() for a, b in zip(new, ms))
        history.append(float(step))
        ms = new
        scale = max(1.0, max(np.abs(m).max() for m in ms))
        if step <= tol * scale:
            break
    else:
        raise ConvergenceError(f"Volterra iteration did not converge in {max_iter} sweeps",
                               residual=history[-1])
    K, I = apply_K(ms)
    residual = float(np.abs(ms[0][0] - eye - K[0][0]).max())
    return ms[0][0], I[0][0], residual, it, tuple(history)


def jost(q: PotentialSpec, z, points_per_unit=None, tol=1e-14, max_iter=2000,
         extrapolate=True) -> JostValue:
    """Jost solution boundary data ``F(z, 0)`` and ``F'(z, 0)``.

    The normalized function ``m(x) = exp(-i k x) F(z, x)`` with
    ``k = sqrt(z)`` solves ::

        m(x) = I + int_x^R (exp(2ik(t - x)) - 1) / (2ik) Q(t) m(t) dt

    whose kernel is bounded for ``Im k >= 0``.  The integral is discretized
    with the trapezoid rule on a breakpoint-aligned grid and iterated to a
    fixed point.  Two grids (``h`` and ``h/2``) are combined by Richardson
    extrapolation.

    Parameters
    ----------
    q : PotentialSpec
        Half-line potential.
    z : complex
        Spectral parameter off ``[0, inf)``.
    points_per_unit : int, optional
        Grid density on the coarse grid; chosen from ``|k|`` by default.

    Raises
    ------
    DomainError
        If `z` lies on ``[0, inf)``.
    ConvergenceError
        If the fixed-point iteration stalls.
    """
    if not q.is_halfline:
        raise ContractError("jost needs half-line support")
    z = complex(z)
    if z.imag == 0 and z.real >= 0:
        raise DomainError(f"z = {z} lies on the branch cut [0, inf)")
    k = complex(sqrt_upper(z))
    n = q.channels
    if q.is_zero:
        return JostValue(z, np.eye(n, dtype=complex), 1j * k * np.eye(n), 0, 0.0)
    if points_per_unit is None:
        points_per_unit = int(min(2e4, max(400, 60 * abs(k), 40 * q.l1_norm_estimate / q.length)))
    coarse = _volterra(q, k, _grid(q, k, points_per_unit), tol, max_iter)
    if not extrapolate:
        m0, I0, res, it, hist = coarse
        return JostValue(z, m0, 1j * k * m0 - I0, it, res, 0.0, hist)
    fine = _volterra(q, k, _grid(q, k, 2 * points_per_unit), tol, max_iter)
    m0c, I0c = coarse[0], coarse[1]
    m0f, I0f, res, it, hist = fine
    m0 = (4 * m0f - m0c) / 3
    I0 = (4 * I0f - I0c) / 3
    F0p = 1j * k * m0 - I0
    err = float(max(np.abs(m0f - m0c).max(), np.abs((I0f - I0c)).max()))
    return JostValue(z, m0, F0p, it, max(res, coarse[2]), err, hist)


def jost_profile(q: PotentialSpec, z, x):
    """Jost solution ``F(z, x)`` at the points `x`, shape ``(len(x), n, n)``.

    Integrates ``m'' + 2ik m' = Q m`` for ``m = exp(-ikx) F`` backward from
    the cutoff with DOP853; that direction is stable because the second
    free solution ``exp(-2ikx)`` decays as ``x`` decreases.  Beyond the
    cutoff ``m = I`` exactly.
    """
    z = complex(z)
    if z.imag == 0 and z.real >= 0:
        raise DomainError(f"z = {z} lies on the branch cut [0, inf)")
    k = complex(sqrt_upper(z))
    n = q.channels
    x = np.asarray(x, dtype=float)
    phase = np.exp(1j * k * x)[:, None, None]
    eye = np.eye(n, dtype=complex)
    if q.is_zero:
        return phase * eye

    def rhs(t, y):
        mm = y[:n * n].reshape(n, n)
        dm = y[n * n:].reshape(n, n)
        d2 = np.asarray(q.values(t), dtype=complex) @ mm - 2j * k * dm
        return np.concatenate([dm.ravel(), d2.ravel()])

    vals = np.empty((x.size, n, n), dtype=complex)
    done = x > q.length
    vals[done] = eye
    y = np.concatenate([eye.ravel(), np.zeros(n * n, dtype=complex)])
    for a, b in q.segments()[::-1]:
        sel = np.flatnonzero((x >= a) & (x <= b) & ~done)
        teval = np.unique(np.concatenate([x[sel], [a]]))[::-1]
        sol = solve_ivp(rhs, (b, a), y, method="DOP853", rtol=1e-12, atol=1e-13, t_eval=teval)
        if sol.status != 0:
            raise StiffnessError(f"Jost profile integration failed: {sol.message}")
        for j in sel:
            idx = int(np.argmin(np.abs(sol.t - x[j])))
            vals[j] = sol.y[:n * n, idx].reshape(n, n)
        done[sel] = True
        y = sol.y[:, -1]
    return phase * vals
