"""
Brute-force reference computations.

:func:`discretize` builds a dense second-order finite-difference matrix for
``-f'' + Q f`` with the boundary condition ``Gamma_1 f = B Gamma_0 f``
imposed through ghost cells.  The grid is cell-centred,
``x_j = (j - 1/2) h``, and boundary traces are taken as ::

    f(0) ~ (f_0 + f_1)/2,      f'(0) ~ (f_1 - f_0)/h

(similarly at the right end), which keeps the scheme second order and
makes the discrete Green identity exact, so selfadjoint ``B`` gives a
Hermitian matrix.

The remaining functions work on plain matrices: resolvent-trace
differences, additive perturbation determinants, the exact eigenvalue
counting shift function and the accumulative-perturbation identities.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .cxlinalg import as_cmat, det, hermitian_defect, solve, sqrt_upper
from .errors import ClassificationError, ContractError, ResolutionError, SingularityError, SpectralPointError
from .odeprop import PotentialSpec
from .triplets import BoundaryOperator

N_MAX = 4000


@dataclass(frozen=True, eq=False)
class OracleMatrix:
    """Dense discretization of an extension ``A_B``.

    Attributes
    ----------
    H : ndarray
        ``(N n, N n)`` matrix, unknowns ordered cell by cell.
    x : ndarray
        Cell centres.
    h : float
    N : int
    n : int
        Channels.
    domain : str
        ``"interval"`` or ``"halfline"`` (truncated).
    boundary : dict
        Description of the imposed conditions.
    """

    H: np.ndarray
    x: np.ndarray
    h: float
    N: int
    n: int
    domain: str
    boundary: dict = field(default_factory=dict)

    @property
    def hermitian_defect(self) -> float:
        return hermitian_defect(self.H) / max(1.0, np.linalg.norm(self.H, 2))

    def eigenvalues(self):
        """Eigenvalues sorted by real part (``eigvalsh`` when Hermitian)."""
        if np.abs(self.H - self.H.conj().T).max() <= 1e-12 * max(1.0, np.abs(self.H).max()):
            return np.sort(np.linalg.eigvalsh(0.5 * (self.H + self.H.conj().T)))
        ev = np.linalg.eigvals(self.H)
        return ev[np.lexsort((ev.imag, ev.real))]


def _ghost_map(P, R):
    """Solve ``P u + R v = 0`` for the ghost values ``u = G v``."""
    try:
        return -solve(P, R)
    except SingularityError as exc:
        raise ContractError(f"boundary condition cannot be imposed on this mesh: {exc}") from None


def discretize(q: PotentialSpec, B=None, N=2000, L=None, tail="robin", z_ref=None) -> OracleMatrix:
    """Finite-difference matrix of ``A_B``.

    Parameters
    ----------
    q : PotentialSpec
        Interval or half-line potential.
    B : BoundaryOperator, array_like or None
        Boundary operator (``2n x 2n`` on an interval, ``n x n`` on the
        half-line).  ``None`` selects the Dirichlet extension
        ``ker Gamma_0``.
    N : int
        Number of cells, ``16 <= N <= 4000``.
    L : float, optional
        Truncation length for half-line problems (default: cutoff + 20).
    tail : {"robin", "dirichlet"}
        Half-line truncation condition.  ``"robin"`` imposes
        ``f'(L) = i sqrt(z_ref) f(L)``, the decay of the free Jost solution
        at the reference point `z_ref`.
    z_ref : complex
        Reference spectral parameter for the Robin tail.

    Returns
    -------
    OracleMatrix
    """
    N = int(N)
    if N < 16:
        raise ResolutionError(f"N = {N} is below the minimum of 16 cells")
    if N > N_MAX:
        raise ContractError(f"N = {N} exceeds the dense cap of {N_MAX}")
    n = q.channels
    eye = np.eye(n)
    zero = np.zeros((n, n))
    if q.is_halfline:
        Lh = q.length + 20.0 if L is None else float(L)
        if Lh < q.length:
            raise ContractError("truncation length shorter than the potential support")
        h = Lh / N
        # left end: f'(0) = B f(0)
        if B is None:
            G0 = -eye
            left = {"type": "dirichlet"}
        else:
            Bm = BoundaryOperator(B).B
            if Bm.shape != (n, n):
                raise ContractError(f"half-line B must be {n}x{n}")
            G0 = _ghost_map(-eye / h - 0.5 * Bm, eye / h - 0.5 * Bm)
            left = {"type": "robin", "B": Bm.tolist()}
        if tail == "dirichlet":
            GN = -eye
            right = {"type": "dirichlet", "L": Lh}
        elif tail == "robin":
            if z_ref is None:
                raise ContractError("a Robin tail needs z_ref")
            kap = 1j * complex(sqrt_upper(complex(z_ref)))
            GN = ((1 / h + kap / 2) / (1 / h - kap / 2)) * eye
            right = {"type": "robin", "L": Lh, "z_ref": [complex(z_ref).real, complex(z_ref).imag]}
        else:
            raise ContractError(f"unknown tail {tail!r}")
        # ghost map on v = [f_1; f_N]
        G = np.block([[G0, zero], [zero, GN]])
        domain = "halfline"
        boundary = {"left": left, "right": right}
    else:
        h = q.length / N
        P0 = np.block([[zero, 0.5 * eye], [-0.5 * eye, zero]])
        R0 = np.block([[zero, 0.5 * eye], [-0.5 * eye, zero]])
        P1 = np.block([[zero, -eye / h], [eye / h, zero]])
        R1 = np.block([[zero, eye / h], [-eye / h, zero]])
        if B is None:
            G = _ghost_map(P0, R0)
            boundary = {"type": "dirichlet"}
        else:
            Bm = BoundaryOperator(B).B
            if Bm.shape != (2 * n, 2 * n):
                raise ContractError(f"interval B must be {2 * n}x{2 * n}")
            G = _ghost_map(P1 - Bm @ P0, R1 - Bm @ R0)
            boundary = {"type": "B", "B": Bm.tolist()}
        domain = "interval"
    x = (np.arange(1, N + 1) - 0.5) * h
    Qs = q.on_grid(x)
    size = N * n
    H = np.zeros((size, size), dtype=complex)
    d = 1.0 / h ** 2
    for j in range(N):
        s = slice(j * n, (j + 1) * n)
        H[s, s] = 2 * d * eye + Qs[j]
        if j > 0:
            H[s, (j - 1) * n:j * n] = -d * eye
        if j < N - 1:
            H[s, (j + 1) * n:(j + 2) * n] = -d * eye
    # ghost contributions: f_0 = G[0] v, f_{N+1} = G[1] v with v = [f_1; f_N]
    first, last = slice(0, n), slice((N - 1) * n, N * n)
    H[first, first] += -d * G[:n, :n]
    H[first, last] += -d * G[:n, n:]
    H[last, first] += -d * G[n:, :n]
    H[last, last] += -d * G[n:, n:]
    H.setflags(write=False)
    faces = np.asarray(q.breakpoints, dtype=float) / h
    boundary["aligned"] = bool(np.all(np.abs(faces - np.round(faces)) < 1e-9))
    return OracleMatrix(H, x, h, N, n, domain, boundary)


def _matrix(A):
    return A.H if isinstance(A, OracleMatrix) else as_cmat(A, square=True)


def _lu_checked(A, z, cond_limit):
    from .cxlinalg import _lu
    lu, piv = _lu(A - z * np.eye(A.shape[0]))
    anorm = np.linalg.norm(A - z * np.eye(A.shape[0]), 1)
    rcond, _ = sla.lapack.zgecon(lu, anorm, norm="1")
    if rcond == 0 or 1 / rcond > cond_limit:
        raise SpectralPointError(f"z = {z} is numerically in the spectrum (cond ~ {1 / max(rcond, 1e-300):.2e})")
    return lu, piv


def resolvent_trace_diff(Hp, H, z, cond_limit=1e12) -> complex:
    """``tr((Hp - z)^{-1} - (H - z)^{-1})`` by dense LU solves.

    When ``H - Hp`` is supported on few rows the identity
    ``R' - R = R' (H - Hp) R`` is used, which needs only a handful of
    right-hand sides.
    """
    A1, A0 = _matrix(Hp), _matrix(H)
    if A1.shape != A0.shape:
        raise ContractError("matrices live on different meshes")
    z = complex(z)
    lu1 = _lu_checked(A1, z, cond_limit)
    lu0 = _lu_checked(A0, z, cond_limit)
    D = A0 - A1
    rows = np.flatnonzero(np.abs(D).max(axis=1) > 0)
    size = A0.shape[0]
    if rows.size == 0:
        return 0j
    if rows.size <= 64:
        # tr(R'DR) = tr(D R R') ; only the rows in `rows` of D are nonzero
        E = np.zeros((size, rows.size), dtype=complex)
        E[rows, np.arange(rows.size)] = 1.0
        X = sla.lu_solve(lu1, E)          # R' e_rows
        Y = sla.lu_solve(lu0, X)          # R R' e_rows
        return complex(np.einsum("ij,ji->", D[rows], Y))
    I = np.eye(size)
    return complex(np.trace(sla.lu_solve(lu1, I)) - np.trace(sla.lu_solve(lu0, I)))


def oracle_trace_diff(q, Bprime, B, z, N=3000, L=None, extrapolate=True) -> complex:
    """``tr((A_{B'} - z)^{-1} - (A_B - z)^{-1})`` from discretizations.

    With `extrapolate` the ``N`` and ``N/2`` meshes are combined by
    Richardson extrapolation (the scheme is second order when the
    potential breakpoints sit on cell faces).
    """
    def one(n_cells):
        Hp = discretize(q, Bprime, n_cells, L=L, z_ref=z)
        H = discretize(q, B, n_cells, L=L, z_ref=z)
        return resolvent_trace_diff(Hp, H, z)
    fine = one(N)
    if not extrapolate:
        return fine
    coarse = one(N // 2)
    return (4 * fine - coarse) / 3


def resolvent_trace(H, z, cond_limit=1e12) -> complex:
    """``tr (H - z)^{-1}``."""
    A = _matrix(H)
    lu = _lu_checked(A, complex(z), cond_limit)
    return complex(np.trace(sla.lu_solve(lu, np.eye(A.shape[0]))))


def additive_pdet(H, V, z) -> complex:
    """``det(I + V (H - z)^{-1})``.

    Examples
    --------
    >>> additive_pdet([[0.0]], [[1.0]], 1j)
    (1+1j)
    """
    H, V = as_cmat(H, square=True), as_cmat(V, square=True)
    z = complex(z)
    try:
        R = solve(H - z * np.eye(H.shape[0]), np.eye(H.shape[0]))
    except SingularityError as exc:
        raise SpectralPointError(f"z = {z} is in the spectrum of H") from exc
    return det(np.eye(H.shape[0]) + V @ R)


def additive_pdet_many(H, V, zs):
    H, V = as_cmat(H, square=True), as_cmat(V, square=True)
    zs = np.asarray(zs, dtype=complex).ravel()
    m = H.shape[0]
    A = H[None] - zs[:, None, None] * np.eye(m)
    R = np.linalg.solve(A, np.broadcast_to(np.eye(m), A.shape))
    return np.linalg.det(np.eye(m) + V[None] @ R)


@dataclass(frozen=True)
class MatrixSSF:
    """Exact shift function ``xi(t) = #{eig H <= t} - #{eig (H + V) <= t}``.

    This is nonnegative for ``V >= 0`` and integrates to ``tr V``.
    """

    eig_H: np.ndarray
    eig_Hp: np.ndarray
    trace_V: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        a = np.searchsorted(self.eig_H, t, side="right")
        b = np.searchsorted(self.eig_Hp, t, side="right")
        return a - b

    @property
    def integral(self) -> float:
        """``int xi dt = sum eig(H + V) - sum eig(H)``."""
        return float(np.sum(self.eig_Hp) - np.sum(self.eig_H))

    def cauchy(self, z) -> complex:
        """``int xi(t) (t - z)^{-2} dt`` evaluated exactly on the steps."""
        z = complex(z)
        return complex(np.sum(1.0 / (self.eig_H - z)) - np.sum(1.0 / (self.eig_Hp - z)))

    def jumps(self):
        return np.sort(np.concatenate([self.eig_H, self.eig_Hp]))


def matrix_ssf(H, V) -> MatrixSSF:
    """Exact spectral shift function of the Hermitian pair ``(H + V, H)``."""
    H, V = as_cmat(H, square=True), as_cmat(V, square=True)
    for name, A in (("H", H), ("V", V)):
        if hermitian_defect(A) > 1e-12 * max(1.0, np.abs(A).max()):
            raise ClassificationError(f"{name} must be Hermitian")
    H = 0.5 * (H + H.conj().T)
    V = 0.5 * (V + V.conj().T)
    return MatrixSSF(np.linalg.eigvalsh(H), np.linalg.eigvalsh(H + V), float(np.trace(V).real))


def krein_residual(H, V, z) -> float:
    """Relative defect of ``tr((H+V-z)^{-1} - (H-z)^{-1}) = -int xi/(t-z)^2``."""
    s = matrix_ssf(H, V)
    direct = resolvent_trace_diff(as_cmat(H) + as_cmat(V), H, z)
    return abs(direct + s.cauchy(z)) / max(abs(direct), 1e-300)


def trace_norm(V) -> float:
    return float(np.linalg.svd(as_cmat(V), compute_uv=False).sum())


def _real_window(H, V, width, n, focus_extra=()):
    from .spectra import shift_grid
    ev = np.concatenate([np.linalg.eigvals(as_cmat(H)), np.linalg.eigvals(as_cmat(H) + as_cmat(V))])
    focus = np.unique(np.round(np.concatenate([ev.real, focus_extra]), 12))
    lo, hi = focus.min() - width, focus.max() + width
    inner = max(10.0, 0.01 * width)
    core = shift_grid(focus.min() - inner, focus.max() + inner, n, focus=focus, min_gap=1e-8, cluster=400)
    offs = np.geomspace(inner, width, n // 4)
    return np.unique(np.concatenate([focus.min() - offs[::-1], core, focus.max() + offs])), (lo, hi)


def accumulative_identities(H, V, ys=(1e2, 1e3, 1e4), width=1e4, n=4000,
                            eps_ladder=(1e-4, 1e-5, 1e-6), z_samples=(1 + 2j, 3j, -1 + 1j)) -> dict:
    """Check the additive identities for an accumulative pair ``(H + V, H)``.

    (a) ``y^2 tr((H'-iy)^{-1} V (H-iy)^{-1}) -> -tr V`` (extrapolated in
        ``1/y`` from the values at `ys`);
    (b) ``int omega dt = tr V`` with ::

            omega = (1/pi)[Im log det(I + V_R (H-t-i0)^{-1})
                           - i log|det(I + i V_I (K-t-i0)^{-1})|],   K = H + V_R

        integrated over ``[-width, width]`` around the spectra with a
        ``c/t^2`` tail correction;
    (c) ``tr((H'-z)^{-1} - (H-z)^{-1}) = -int omega/(t-z)^2`` at `z_samples`.

    When ``H`` is Hermitian and ``V_I <= 0`` also reports ``max Im omega``
    (expected ``<= 0``).

    Returns
    -------
    dict
    """
    from .pdet import continue_log
    H, V = as_cmat(H, square=True), as_cmat(V, square=True)
    HI = (H - H.conj().T) / 2j
    if np.linalg.eigvalsh(HI).max() > 1e-12:
        raise ClassificationError("H must be accumulative (Im H <= 0)")
    Hp = H + V
    Hp_acc = np.linalg.eigvalsh((Hp - Hp.conj().T) / 2j).max() <= 1e-12
    VR = 0.5 * (V + V.conj().T)
    VI = (V - V.conj().T) / 2j
    K = H + VR
    trV = complex(np.trace(V))
    nrm = trace_norm(V)
    m = H.shape[0]
    out = {"trace_V": [trV.real, trV.imag], "trace_norm_V": nrm, "Hp_accumulative": bool(Hp_acc)}

    # (a)
    vals = []
    for y in ys:
        z = 1j * y
        R = solve(H - z * np.eye(m), np.eye(m))
        Rp = solve(Hp - z * np.eye(m), np.eye(m))
        vals.append(y ** 2 * np.trace(Rp @ V @ R))
    u = 1.0 / np.asarray(ys, dtype=float)
    coef = np.polyfit(u, np.asarray(vals), len(ys) - 1)
    lim = complex(coef[-1])
    err_a = abs(lim + trV)
    out["a"] = {"values": [[v.real, v.imag] for v in vals], "limit": [lim.real, lim.imag],
                "error": err_a, "ok": bool(err_a <= 1e-4 * max(nrm, 1e-300))}

    # (b) omega on a graded real grid
    t, window = _real_window(H, V, width, n)
    eps = sorted(eps_ladder, reverse=True)
    rows = []
    for e in eps:
        def fr(zs):
            return additive_pdet_many(H, VR, zs)
        _, lg, _ = continue_log(fr, t + 1j * e)
        re = lg.values.imag / np.pi
        im = -np.log(np.abs(additive_pdet_many(K, 1j * VI, t + 1j * e))) / np.pi
        rows.append(re + 1j * im)
    rows = np.array(rows)
    nshift = np.round(rows[-1, 0].real)
    rows = rows - nshift
    e1, e2 = eps[-1], eps[-2]
    omega = rows[-1] + e1 * (rows[-1] - rows[-2]) / (e2 - e1)
    integral = np.trapezoid(omega, t)
    tail = omega[-1] * t[-1] - omega[0] * t[0]  # c/t^2 continuation on both sides
    integral_total = complex(integral + tail)
    err_b = abs(integral_total - trV)
    out["b"] = {"integral": [integral_total.real, integral_total.imag], "tail": [complex(tail).real, complex(tail).imag],
                "window": list(window), "error": err_b, "ok": bool(err_b <= 1e-3)}

    # (c) trace formula
    res = []
    for z in z_samples:
        direct = resolvent_trace_diff(Hp, H, z)
        quad = -np.trapezoid(omega / (t - z) ** 2, t)
        res.append(abs(direct - quad) / max(abs(direct), 1e-300))
    out["c"] = {"residuals": [float(r) for r in res], "max": float(max(res)), "ok": bool(max(res) <= 1e-3)}

    if hermitian_defect(H) <= 1e-12 and np.linalg.eigvalsh(VI).max() <= 1e-12:
        mx = float(omega.imag.max())
        out["sign"] = {"max_im_omega": mx, "ok": bool(mx <= 1e-6)}
    out["omega"] = {"t": t, "values": omega}
    return out
