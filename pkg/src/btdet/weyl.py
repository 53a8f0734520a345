"""
Weyl functions of the Sturm-Liouville boundary triplets.

Half-line, boundary space ``C^n``::

    Gamma_0 f = f(0),            Gamma_1 f = f'(0)

Interval ``[0, b]``, boundary space ``C^{2n}``::

    Gamma_0 f = (f(b), -f(0)),   Gamma_1 f = (-f'(b), -f'(0))

For every source the Weyl function is produced as ``M = T1 T0^{-1}``
where ``T0`` and ``T1`` are the boundary values of a basis of defect
solutions.  :meth:`WeylMap.boundary_matrices` exposes the pair itself;
on an interval both entries are entire in ``z``, which lets callers
build pole-free characteristic determinants ``det(B T0 - T1)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from .cxlinalg import as_cmat, solve, sqrt_upper
from .errors import ContractError, DimensionError, DomainError, SingularityError, SpectralPointError
from .odeprop import (FundamentalPair, HalfLine, Interval, PotentialSpec, fundamental_matrix,
                      fundamental_solutions, jost, jost_profile)


def _check_off_cut(z):
    z = complex(z)
    if z.imag == 0 and z.real >= 0:
        raise DomainError(f"z = {z} lies on the branch cut [0, inf)")
    return z


def _right_divide(T1, T0, what="T0"):
    """``T1 @ inv(T0)`` with a singularity check."""
    try:
        return solve(T0.T, T1.T).T
    except SingularityError as exc:
        raise SpectralPointError(f"{what} is singular: {exc}", condition=exc.condition) from None


class WeylMap:
    """Evaluator ``z -> M(z)``.

    Subclasses implement :meth:`boundary_matrices`.  Instances are
    immutable.

    Attributes
    ----------
    dim : int
        Size of ``M(z)``.
    source : str
    singular_hints : tuple of float
        Real points where ``M`` is known (or suspected) to have poles.
    """

    source = "abstract"
    kind = "halfline"

    def __init__(self, dim, singular_hints=()):
        self.dim = int(dim)
        self.singular_hints = tuple(sorted(float(t) for t in singular_hints))

    def __call__(self, z):
        return self.evaluate(z)

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim})"

    def boundary_matrices(self, z):
        """``(T0, T1)`` with ``M(z) = T1 @ inv(T0)``."""
        raise NotImplementedError

    @property
    def entire(self) -> bool:
        """True when ``T0, T1`` are entire functions of ``z``."""
        return False

    def evaluate(self, z):
        T0, T1 = self.boundary_matrices(z)
        return _right_divide(T1, T0)

    def boundary_matrices_many(self, zs):
        pairs = [self.boundary_matrices(z) for z in np.ravel(zs)]
        return np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs])

    def evaluate_many(self, zs):
        return np.array([self.evaluate(z) for z in np.ravel(zs)])

    def with_hints(self, hints):
        """Copy with extra singular hints (instances are never mutated)."""
        new = object.__new__(type(self))
        new.__dict__.update(self.__dict__)
        new.singular_hints = tuple(sorted(set(self.singular_hints) | {float(t) for t in hints}))
        return new


class FreeHalfLineWeyl(WeylMap):
    """``M(z) = i sqrt(z) I_n`` (zero potential on the half-line)."""

    source = "free_halfline"

    def __init__(self, n=1):
        super().__init__(n)
        self.n = n

    def boundary_matrices(self, z):
        z = _check_off_cut(z)
        k = complex(sqrt_upper(z))
        eye = np.eye(self.n, dtype=complex)
        return eye, 1j * k * eye

    def evaluate(self, z):
        return weyl_free_halfline(z, self.n)

    def boundary_matrices_many(self, zs):
        zs = np.asarray(zs, dtype=complex).ravel()
        if np.any((zs.imag == 0) & (zs.real >= 0)):
            raise DomainError("evaluation point on the branch cut [0, inf)")
        k = sqrt_upper(zs)
        eye = np.eye(self.n, dtype=complex)
        T0 = np.broadcast_to(eye, (zs.size, self.n, self.n)).copy()
        return T0, 1j * k[:, None, None] * eye

    def evaluate_many(self, zs):
        return self.boundary_matrices_many(zs)[1]


class JostHalfLineWeyl(WeylMap):
    """``M(z) = F'(z, 0) F(z, 0)^{-1}`` from the Jost solution."""

    source = "jost_halfline"

    def __init__(self, q: PotentialSpec, singular_hints=(), **jost_kw):
        if not q.is_halfline:
            raise ContractError("JostHalfLineWeyl needs a half-line potential")
        super().__init__(q.channels, singular_hints)
        self.q = q
        self.jost_kw = jost_kw

    def boundary_matrices(self, z):
        J = jost(self.q, z, **self.jost_kw)
        return J.F0, J.F0p


class IntervalWeyl(WeylMap):
    """Weyl function of the interval triplet, ``dim = 2n``.

    With the defect basis ``f = C xi + S eta``::

        T0 = [[C(b), S(b)], [-I, 0]],   T1 = [[-C'(b), -S'(b)], [0, -I]]
    """

    source = "interval"
    kind = "interval"

    def __init__(self, q: PotentialSpec, singular_hints=None, z_cap=None):
        if q.is_halfline:
            raise ContractError("IntervalWeyl needs interval support")
        if singular_hints is None:
            singular_hints = dirichlet_hints(q)
        super().__init__(2 * q.channels, singular_hints)
        self.q = q
        self.z_cap = z_cap

    @property
    def entire(self):
        return True

    @staticmethod
    def _assemble(C, Cp, S, Sp):
        n = C.shape[-1]
        eye = np.broadcast_to(np.eye(n), C.shape)
        zero = np.zeros_like(C)
        T0 = np.concatenate([np.concatenate([C, S], -1), np.concatenate([-eye, zero], -1)], -2)
        T1 = np.concatenate([np.concatenate([-Cp, -Sp], -1), np.concatenate([zero, -eye], -1)], -2)
        return T0, T1

    def fundamental(self, z) -> FundamentalPair:
        return fundamental_solutions(self.q, z, z_cap=self.z_cap)

    def boundary_matrices(self, z):
        p = self.fundamental(z)
        return self._assemble(p.C, p.Cp, p.S, p.Sp)

    def boundary_matrices_many(self, zs):
        zs = np.asarray(zs, dtype=complex).ravel()
        Q = self.q.constant
        if Q is None:
            return super().boundary_matrices_many(zs)
        b = self.q.length
        lam, U = np.linalg.eigh(Q)
        s = np.sqrt(zs[:, None] - lam[None, :].astype(complex))
        cos = np.cos(s * b)
        sinc = b * np.sinc(s * b / np.pi)
        msin = -s ** 2 * sinc
        Uh = U.conj().T

        def conj(d):
            return np.einsum("ij,kj,jl->kil", U, d, Uh)

        return self._assemble(conj(cos), conj(msin), conj(sinc), conj(cos))

    def evaluate(self, z):
        return weyl_interval(self.q, z, z_cap=self.z_cap)

    def evaluate_many(self, zs):
        T0, T1 = self.boundary_matrices_many(zs)
        return np.array([_right_divide(a, b, "T0 (Dirichlet spectrum)") for a, b in zip(T1, T0)])


class TabulatedWeyl(WeylMap):
    """Weyl function known only at finitely many points.

    Determinant code only ever evaluates at tabulated points;
    :meth:`interpolate` is for plotting and is never used by evaluation.
    """

    source = "tabulated"

    def __init__(self, points, values, singular_hints=()):
        pts = np.asarray(points, dtype=complex).ravel()
        vals = np.asarray(values, dtype=complex)
        if vals.ndim == 1:
            vals = vals[:, None, None]
        if vals.shape[0] != pts.size or vals.shape[1] != vals.shape[2]:
            raise ContractError("need one square matrix per tabulated point")
        super().__init__(vals.shape[1], singular_hints)
        self.points = pts
        self.values = vals

    def _index(self, z):
        z = complex(z)
        d = np.abs(self.points - z)
        j = int(np.argmin(d))
        if d[j] > 1e-14 * max(1.0, abs(z)):
            raise DomainError(f"z = {z} is not a tabulated point")
        return j

    def boundary_matrices(self, z):
        return np.eye(self.dim, dtype=complex), self.values[self._index(z)].copy()

    def evaluate(self, z):
        return self.values[self._index(z)].copy()

    def interpolate(self, z):
        """Piecewise-linear interpolation along the tabulation order (plots only)."""
        s = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(self.points)))])
        z = complex(z)
        j = int(np.argmin(np.abs(self.points - z)))
        t = s[j]
        flat = self.values.reshape(self.points.size, -1)
        out = [np.interp(t, s, flat[:, i].real) + 1j * np.interp(t, s, flat[:, i].imag)
               for i in range(flat.shape[1])]
        return np.array(out).reshape(self.dim, self.dim)


class MatrixModelWeyl(WeylMap):
    """Finite-dimensional Nevanlinna model ``M(z) = R + G* (H - z)^{-1} G``.

    ``H`` (``k x k``) and ``R`` (``m x m``) are Hermitian and ``G`` is
    ``k x m``.  Useful as a cheap, exactly Nevanlinna fixture; its poles are
    the eigenvalues of ``H``.
    """

    source = "matrix-model"
    kind = "model"

    def __init__(self, H, G, R=None):
        H = as_cmat(H, square=True)
        G = as_cmat(G)
        if G.shape[0] != H.shape[0]:
            raise DimensionError("G must have as many rows as H")
        m = G.shape[1]
        R = np.zeros((m, m), dtype=complex) if R is None else as_cmat(R, square=True)
        if R.shape != (m, m):
            raise DimensionError("R must be m x m")
        self.H = 0.5 * (H + H.conj().T)
        self.G = G
        self.R = 0.5 * (R + R.conj().T)
        super().__init__(m, np.linalg.eigvalsh(self.H))

    @classmethod
    def random(cls, rng, m, k=6, scale=1.0):
        H = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
        G = rng.standard_normal((k, m)) + 1j * rng.standard_normal((k, m))
        R = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        return cls(scale * (H + H.conj().T) / 2, G, (R + R.conj().T) / 2)

    def evaluate(self, z):
        z = complex(z)
        k = self.H.shape[0]
        return self.R + self.G.conj().T @ solve(self.H - z * np.eye(k), self.G)

    def boundary_matrices(self, z):
        return np.eye(self.dim, dtype=complex), self.evaluate(z)

    def evaluate_many(self, zs):
        zs = np.asarray(zs, dtype=complex).ravel()
        k = self.H.shape[0]
        A = self.H[None] - zs[:, None, None] * np.eye(k)
        X = np.linalg.solve(A, np.broadcast_to(self.G, (zs.size,) + self.G.shape))
        return self.R[None] + self.G.conj().T[None] @ X

    def boundary_matrices_many(self, zs):
        Ms = self.evaluate_many(zs)
        return np.broadcast_to(np.eye(self.dim, dtype=complex), Ms.shape).copy(), Ms


class CachedWeyl(WeylMap):
    """Memoizing wrapper; lets several pairs share one set of evaluations."""

    def __init__(self, inner: WeylMap):
        super().__init__(inner.dim, inner.singular_hints)
        self.inner = inner
        self.kind = inner.kind
        self.source = inner.source
        self._memo = {}

    @property
    def entire(self):
        return self.inner.entire

    def boundary_matrices(self, z):
        z = complex(z)
        if z not in self._memo:
            self._memo[z] = self.inner.boundary_matrices(z)
        return self._memo[z]

    def boundary_matrices_many(self, zs):
        zs = np.asarray(zs, dtype=complex).ravel()
        todo = np.array([z for z in dict.fromkeys(zs.tolist()) if z not in self._memo], dtype=complex)
        if todo.size:
            T0, T1 = self.inner.boundary_matrices_many(todo)
            for z, a, b in zip(todo.tolist(), T0, T1):
                self._memo[z] = (a, b)
        got = [self._memo[z] for z in zs.tolist()]
        return np.array([g[0] for g in got]), np.array([g[1] for g in got])


def dirichlet_hints(q: PotentialSpec, count=40):
    """Dirichlet eigenvalues of a constant interval potential (else empty)."""
    if q.constant is None or q.is_halfline:
        return ()
    lam = np.linalg.eigvalsh(q.constant)
    k = np.arange(1, count + 1)
    return tuple(np.sort((lam[:, None] + (np.pi * k[None, :] / q.length) ** 2).ravel()))


def weyl_free_halfline(z, n=1):
    """Free half-line Weyl function ``i sqrt(z) I_n``.

    Examples
    --------
    >>> weyl_free_halfline(-1.0)
    array([[-1.+0.j]])
    """
    z = _check_off_cut(z)
    return 1j * complex(sqrt_upper(z)) * np.eye(n, dtype=complex)


def weyl_halfline(q: PotentialSpec, z, **jost_kw):
    """Half-line Weyl function ``F'(z,0) F(z,0)^{-1}``.

    Raises
    ------
    SpectralPointError
        If ``F(z, 0)`` is singular (``z`` is a pole of ``M``).
    """
    z = _check_off_cut(z)
    J = jost(q, z, **jost_kw)
    return _right_divide(J.F0p, J.F0, "F(z, 0)")


def weyl_interval(q: PotentialSpec, z, z_cap=None):
    """Interval Weyl function assembled as ``T1 T0^{-1}`` (``2n x 2n``).

    Raises
    ------
    SpectralPointError
        If ``S(z, b)`` is singular (``z`` is a Dirichlet eigenvalue).
    """
    p = fundamental_solutions(q, z, z_cap=z_cap)
    T0, T1 = IntervalWeyl._assemble(p.C, p.Cp, p.S, p.Sp)
    return _right_divide(T1, T0, "T0 (Dirichlet spectrum)")


def interval_block_formula(p: FundamentalPair, zbar_pair: FundamentalPair | None = None):
    """Weyl matrix from the closed block expression (cross-check only).

    The blocks are ``-S'S^{-1}``, ``-S(zbar)^{-*}``, ``-S^{-1}`` and
    ``+S^{-1}C``.  The upper right block agrees with direct assembly by
    the Wronskian identity; the lower right block carries the opposite
    sign to direct assembly.  `zbar_pair` is the pair at ``conj(z)``; when
    omitted, the equivalent ``C' - S' S^{-1} C`` is used.
    """
    Sinv = np.linalg.inv(p.S)
    if zbar_pair is None:
        u12 = -(p.Cp - p.Sp @ Sinv @ p.C)
    else:
        u12 = np.linalg.inv(zbar_pair.S.conj().T)
    return -np.block([[p.Sp @ Sinv, u12], [Sinv, -Sinv @ p.C]])


# --------------------------------------------------------------------------
# gamma field
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GammaSample:
    """Defect solutions ``gamma(z) e_j`` sampled on a spatial grid.

    Attributes
    ----------
    z : complex
    x : ndarray
        Grid, shape ``(N,)``.
    basis : ndarray
        Shape ``(N, n, m)``: column ``j`` is ``gamma(z) e_j`` as an
        ``n``-vector function of ``x``.
    kind : str
        ``"halfline"`` or ``"interval"``.
    """

    z: complex
    x: np.ndarray
    basis: np.ndarray
    kind: str
    derivative: np.ndarray | None = field(default=None, repr=False)

    def gamma0(self):
        """``Gamma_0`` applied to each column, shape ``(m, m)``."""
        if self.kind == "halfline":
            return self.basis[0]
        return np.concatenate([self.basis[-1], -self.basis[0]], axis=0)

    def gram(self, other: "GammaSample"):
        """``gamma(other.z)^* gamma(self.z)`` by Simpson quadrature."""
        if not np.array_equal(self.x, other.x):
            raise ContractError("gamma samples live on different grids")
        integrand = np.einsum("xia,xib->xab", other.basis.conj(), self.basis)
        return simpson(integrand, x=self.x, axis=0)


def default_gamma_grid(w_or_q, z, points=4001, tail=1e-16):
    """Spatial grid for :func:`gamma_field`.

    Half-line grids extend until ``exp(-2 Im sqrt(z) x)`` drops below
    `tail`.
    """
    q = w_or_q.q if hasattr(w_or_q, "q") else w_or_q
    if q is not None and not q.is_halfline:
        return np.linspace(0.0, q.length, points)
    k = complex(sqrt_upper(complex(z)))
    if k.imag <= 0:
        raise DomainError("half-line defect solutions need Im sqrt(z) > 0")
    R = 0.0 if q is None else q.length
    X = R + np.log(1.0 / tail) / (2 * k.imag)
    return np.linspace(0.0, X, points)


def gamma_field(q: PotentialSpec | None, kind, z, x=None, n=None):
    """Sample ``gamma(z) = (Gamma_0 restricted to ker(A* - z))^{-1}``.

    Parameters
    ----------
    q : PotentialSpec or None
        ``None`` means the free half-line with `n` channels.
    kind : {"halfline", "interval"}
    z : complex
    x : array_like, optional
        Spatial grid; see :func:`default_gamma_grid`.

    Returns
    -------
    GammaSample
    """
    z = complex(z)
    if kind == "halfline":
        if q is not None and not q.is_halfline:
            raise ContractError("half-line gamma field needs a half-line potential")
        z = _check_off_cut(z)
        if x is None:
            x = default_gamma_grid(q, z)
        x = np.asarray(x, dtype=float)
        if q is None or q.is_zero:
            nn = n if q is None else q.channels
            k = complex(sqrt_upper(z))
            basis = np.exp(1j * k * x)[:, None, None] * np.eye(nn)
            return GammaSample(z, x, basis, kind)
        F = jost_profile(q, z, x)
        F0 = F[0] if x[0] == 0 else jost_profile(q, z, [0.0])[0]
        try:
            F0inv = solve(F0, np.eye(q.channels))
        except SingularityError as exc:
            raise SpectralPointError(f"F(z, 0) singular at z={z}") from exc
        return GammaSample(z, x, F @ F0inv, kind)
    if kind != "interval":
        raise ContractError(f"unknown triplet kind {kind!r}")
    if q is None or q.is_halfline:
        raise ContractError("interval gamma field needs an interval potential")
    if x is None:
        x = default_gamma_grid(q, z)
    x = np.asarray(x, dtype=float)
    C, Cp, S, Sp = fundamental_matrix(q, z, x)
    T0, _ = IntervalWeyl._assemble(C[-1], Cp[-1], S[-1], Sp[-1])
    if not (x[0] == 0 and np.isclose(x[-1], q.length)):
        raise ContractError("interval grid must span [0, b]")
    try:
        T0inv = solve(T0, np.eye(T0.shape[0]))
    except SingularityError as exc:
        raise SpectralPointError(f"T0 singular at z={z} (Dirichlet spectrum)") from exc
    CS = np.concatenate([C, S], axis=-1)
    return GammaSample(z, x, CS @ T0inv, kind)


# --------------------------------------------------------------------------
# Nevanlinna diagnostics
# --------------------------------------------------------------------------

@dataclass
class HerglotzReport:
    """Per-point Nevanlinna diagnostics.

    ``min_eig[k]`` is the smallest eigenvalue of ``Im M(z_k)`` and
    ``sym_defect[k]`` is ``||M(conj z_k) - M(z_k)*||``; failed evaluations
    leave ``nan`` and an entry in ``errors``.
    """

    grid: np.ndarray
    min_eig: np.ndarray
    sym_defect: np.ndarray
    tol: float
    errors: dict

    @property
    def flags(self):
        bad = (self.min_eig < -self.tol) | (self.sym_defect > self.tol)
        return bad | np.isnan(self.min_eig) | np.isnan(self.sym_defect)

    @property
    def ok(self) -> bool:
        return not np.any(self.flags)

    def summary(self):
        return {"points": int(self.grid.size), "flagged": int(self.flags.sum()),
                "worst_min_eig": float(np.nanmin(self.min_eig)) if self.grid.size else 0.0,
                "worst_sym_defect": float(np.nanmax(self.sym_defect)) if self.grid.size else 0.0}


def herglotz_report(w: WeylMap, grid, tol=1e-8) -> HerglotzReport:
    """Check ``Im M(z) >= 0`` and ``M(conj z) = M(z)*`` on an upper half-plane grid."""
    grid = np.asarray(grid, dtype=complex).ravel()
    if np.any(grid.imag <= 0):
        raise ContractError("herglotz_report needs points with Im z > 0")
    mins = np.full(grid.size, np.nan)
    sym = np.full(grid.size, np.nan)
    errors = {}
    for j, z in enumerate(grid):
        try:
            Mz = as_cmat(w(z))
            Mb = as_cmat(w(np.conj(z)))
        except Exception as exc:  # propagated per point, not fatal
            errors[j] = repr(exc)
            continue
        imM = (Mz - Mz.conj().T) / 2j
        mins[j] = np.linalg.eigvalsh(imM).min()
        sym[j] = np.linalg.norm(Mb - Mz.conj().T, 2)
    return HerglotzReport(grid, mins, sym, tol, errors)


def detect_singular_hints(w: WeylMap, t_grid, eps=1e-9, threshold=1e8):
    """Return a copy of `w` with real points where ``||M(t + i eps)|| > threshold``."""
    hits = []
    for t in np.asarray(t_grid, dtype=float):
        try:
            if np.linalg.norm(w(t + 1j * eps), 2) > threshold:
                hits.append(t)
        except SingularityError:
            hits.append(t)
    return w.with_hints(hits)
