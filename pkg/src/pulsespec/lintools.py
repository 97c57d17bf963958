"""Linear non-autonomous ODE tools with a complex spectral parameter.

Two layers live here.  The public operations (``evolve``, dichotomies,
bounded solutions, ``minimal_opening``) accept coefficient callables.  The
sampled layer (``SampledSystem`` and the shooting solvers) works on stage
coefficients precomputed on a grid and is what the Evans and Riccati code
uses for speed; it runs on the compiled kernels when available.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from . import _rk, kernels
from .errors import (AccuracyError, AssumptionViolation, ConditioningError, EvaluationError,
                     NotHyperbolicError, RejectionError, StiffnessError)


# ------------------------------------------------------------------ evolve

@dataclass(frozen=True)
class TransferMatrix:
    x0: float
    x1: float
    matrix: np.ndarray
    error_estimate: float


def _as_matrix_fn(coeffs, lam):
    if lam is None:
        return coeffs
    return lambda x: coeffs(x, lam)


def evolve(coeffs, x0, x1, tol=1e-11, lam=None) -> TransferMatrix:
    """Evolution operator T(x1, x0) of phi' = A(x) phi by adaptive DOP853.

    The error estimate is the difference to a second solve at 100x tighter
    tolerance.
    """
    f = _as_matrix_fn(coeffs, lam)
    A0 = np.asarray(f(x0), dtype=complex)
    if A0.ndim != 2 or A0.shape[0] != A0.shape[1]:
        raise ValueError("coefficients must be square matrices")
    if not np.all(np.isfinite(A0)):
        raise EvaluationError(f"non-finite coefficient at x = {x0}")
    k = A0.shape[0]
    if x1 == x0:
        return TransferMatrix(x0, x1, np.eye(k, dtype=complex), 0.0)

    def rhs(x, y):
        A = np.asarray(f(x), dtype=complex)
        return (A @ y.reshape(k, k)).ravel()

    def run(rtol):
        sol = solve_ivp(rhs, (x0, x1), np.eye(k, dtype=complex).ravel(), method="DOP853",
                        rtol=rtol, atol=rtol * 1e-3)
        if sol.status != 0:
            raise StiffnessError(f"integration failed: {sol.message}")
        y = sol.y[:, -1].reshape(k, k)
        if not np.all(np.isfinite(y)):
            raise EvaluationError("non-finite evolution operator")
        return y

    T = run(tol)
    T_ref = run(max(tol * 1e-2, 2.3e-14))
    err = float(np.max(np.abs(T - T_ref)))
    return TransferMatrix(x0, x1, T_ref, err)


# --------------------------------------------------------- spectral split

def spectral_bases(A, gap_tol=1e-8):
    """Orthonormal bases of the stable and unstable spectral subspaces."""
    A = np.asarray(A, dtype=complex)
    w, V = np.linalg.eig(A)
    re = w.real
    if np.min(np.abs(re)) <= gap_tol:
        raise NotHyperbolicError(f"eigenvalue within {gap_tol:g} of the imaginary axis: {w[np.argmin(np.abs(re))]}")
    s = re < 0
    Es = np.linalg.qr(V[:, s])[0] if np.any(s) else np.zeros((A.shape[0], 0), complex)
    Eu = np.linalg.qr(V[:, ~s])[0] if np.any(~s) else np.zeros((A.shape[0], 0), complex)
    return Es, Eu, float(np.min(np.abs(re)))


def asymptotic_spectral_split(A, gap_tol=1e-8):
    """Spectral projections (P_s, P_u) of a hyperbolic matrix and the gap.

    The gap alpha is the smallest |Re| over the spectrum.
    """
    A = np.asarray(A, dtype=complex)
    Es, Eu, alpha = spectral_bases(A, gap_tol)
    B = np.hstack([Es, Eu])
    Binv = np.linalg.inv(B)
    ks = Es.shape[1]
    Ps = Es @ Binv[:ks]
    Pu = np.eye(A.shape[0]) - Ps
    return Ps, Pu, alpha


# -------------------------------------------------------- minimal opening

def _orth(M, name):
    M = np.asarray(M, dtype=complex)
    if M.ndim == 1:
        M = M[:, None]
    if M.shape[1] == 0:
        raise AssumptionViolation(f"{name} is empty")
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    if s[-1] <= 1e-12 * max(1.0, s[0]):
        raise AssumptionViolation(f"{name} is rank deficient (sigma_min = {s[-1]:.3g})")
    return U


def minimal_opening(M, N) -> float:
    """Minimal opening between span(M) and span(N).

    inf |x - y| over x in M, y in N with max(|x|, |y|) = 1.  This equals the
    sine of the smallest principal angle; it is evaluated as s*sqrt(2 - s^2)
    with s the smallest singular value of [Q_M, Q_N], which keeps accuracy
    for nearly intersecting subspaces and is symmetric in its arguments.
    """
    QM = _orth(M, "M")
    QN = _orth(N, "N")
    C = np.hstack([QM, QN])
    if C.shape[1] > C.shape[0]:
        return 0.0
    s = np.linalg.svd(C, compute_uv=False)[-1]
    return float(s * np.sqrt(max(0.0, 2.0 - s * s)))


# ------------------------------------------------------- sampled systems

def uniform_grid(x0, x1, h):
    n = max(1, int(np.ceil(abs(x1 - x0) / h - 1e-9)))
    return np.linspace(x0, x1, n + 1)


def sample_stages(fn, x, shape_check=None):
    """Evaluate a vectorised matrix function at all stage points of grid x."""
    xs = _rk.stage_points(x)
    try:
        vals = np.asarray(fn(xs))
        ok = vals.shape[:2] == xs.shape
    except Exception:
        ok = False
    if not ok:
        flat = [np.asarray(fn(float(t))) for t in xs.ravel()]
        vals = np.stack(flat).reshape(xs.shape + flat[0].shape)
    vals = np.asarray(vals, dtype=complex)
    if not np.all(np.isfinite(vals)):
        raise EvaluationError("non-finite coefficient on the grid")
    return vals


@dataclass
class SampledSystem:
    """phi' = A(x) phi (+ F(x)) sampled at the DOP853 stage points of a grid."""

    x: np.ndarray
    A: np.ndarray
    F: np.ndarray | None = None

    @property
    def h(self):
        return np.diff(self.x)

    @property
    def k(self):
        return self.A.shape[2]

    def step_maps(self):
        return kernels.step_maps(self.A, self.h, _rk.A, _rk.B)

    def step_affine(self):
        return kernels.step_affine(self.A, self.F, self.h, _rk.A, _rk.B)

    @classmethod
    def from_callable(cls, coeffs, x, inhom=None):
        A = sample_stages(coeffs, x)
        F = None if inhom is None else sample_stages(inhom, x)
        return cls(np.asarray(x, dtype=float), A, F)


def segment_starts(N, every):
    every = max(1, int(every))
    st = list(range(0, N, every))
    st.append(N)
    return np.asarray(st)


def _perm_sign(perm):
    perm = np.asarray(perm)
    seen = np.zeros(len(perm), dtype=bool)
    sign = 1
    for i in range(len(perm)):
        if not seen[i]:
            j = i
            length = 0
            while not seen[j]:
                seen[j] = True
                j = perm[j]
                length += 1
            if length % 2 == 0:
                sign = -sign
    return sign


def sparse_logdet(K):
    """(phase, log|det|) of a sparse square matrix through SuperLU."""
    K = sp.csc_matrix(K)
    try:
        lu = spla.splu(K, permc_spec="COLAMD", diag_pivot_thresh=1.0)
    except RuntimeError:
        return 0.0 + 0.0j, -np.inf
    d = lu.U.diagonal()
    if np.any(d == 0):
        return 0.0 + 0.0j, -np.inf
    logabs = float(np.sum(np.log(np.abs(d))))
    phase = np.prod(d / np.abs(d)) * _perm_sign(lu.perm_r) * _perm_sign(lu.perm_c)
    return complex(phase), logabs


def _block_bidiagonal(P, extra_rows):
    """Continuity rows phi_{j+1} - P_j phi_j = 0 stacked over segments.

    Returns a lil-free COO triplet (rows, cols, vals) for S*k rows and
    (S+1)*k columns.
    """
    S, k, _ = P.shape
    rows, cols, vals = [], [], []
    ii, jj = np.meshgrid(np.arange(k), np.arange(k), indexing="ij")
    for j in range(S):
        r0 = j * k
        rows.append((r0 + ii).ravel())
        cols.append((j * k + jj).ravel())
        vals.append(-P[j].ravel())
        rows.append(r0 + np.arange(k))
        cols.append((j + 1) * k + np.arange(k))
        vals.append(np.ones(k, dtype=complex))
    return rows, cols, vals


def floquet_matrix(P, gamma):
    """Multiple-shooting matrix whose determinant is det(M - gamma I).

    M = P[S-1] ... P[0].  The column ordering puts phi_0 first; the sign of
    the block permutation (-1)^(k^2 S) is returned alongside.
    """
    S, k, _ = P.shape
    rows, cols, vals = _block_bidiagonal(P, None)
    r0 = S * k
    rows.append(r0 + np.arange(k))
    cols.append(S * k + np.arange(k))
    vals.append(np.ones(k, dtype=complex))
    rows.append(r0 + np.arange(k))
    cols.append(np.arange(k))
    vals.append(-gamma * np.ones(k, dtype=complex))
    n = (S + 1) * k
    K = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    sign = -1 if (k * k * S) % 2 else 1
    return K, sign


def floquet_logdet(P, gamma):
    """(phase, log|.|) of det(P[S-1]...P[0] - gamma I) without forming the product."""
    K, sign = floquet_matrix(P, gamma)
    phase, logabs = sparse_logdet(K)
    return phase * sign, logabs


def solve_shooting(P, p, left=None, right=None, gamma=None):
    """Solve the affine multiple-shooting system for segment boundary values.

    Continuity: phi_{j+1} = P_j phi_j + p_j.  Boundary rows are either
    ``left = (L, l)`` and ``right = (Rr, r)`` meaning L phi_0 = l and
    Rr phi_S = r, or ``gamma`` for phi_S - gamma phi_0 = 0.  Returns an array
    (S+1, k, c).
    """
    S, k, _ = P.shape
    c = p.shape[2]
    rows, cols, vals = _block_bidiagonal(P, None)
    rhs = np.zeros(((S + 1) * k, c), dtype=complex)
    rhs[:S * k] = p.reshape(S * k, c)
    r0 = S * k
    if gamma is not None:
        rows.append(r0 + np.arange(k))
        cols.append(S * k + np.arange(k))
        vals.append(np.ones(k, dtype=complex))
        rows.append(r0 + np.arange(k))
        cols.append(np.arange(k))
        vals.append(-gamma * np.ones(k, dtype=complex))
    else:
        L, lvec = left
        Rr, rvec = right
        nl = L.shape[0]
        if nl + Rr.shape[0] != k:
            raise AssumptionViolation("boundary rows do not match the system size (Fredholm index nonzero)")
        ii, jj = np.meshgrid(np.arange(nl), np.arange(k), indexing="ij")
        rows.append((r0 + ii).ravel())
        cols.append(jj.ravel())
        vals.append(np.asarray(L, dtype=complex).ravel())
        rhs[r0:r0 + nl] = lvec
        nr = Rr.shape[0]
        ii, jj = np.meshgrid(np.arange(nr), np.arange(k), indexing="ij")
        rows.append((r0 + nl + ii).ravel())
        cols.append((S * k + jj).ravel())
        vals.append(np.asarray(Rr, dtype=complex).ravel())
        rhs[r0 + nl:] = rvec
    n = (S + 1) * k
    K = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    try:
        lu = spla.splu(K)
    except RuntimeError as exc:
        raise ConditioningError(f"shooting matrix is singular: {exc}") from None
    sol = lu.solve(rhs)
    if not np.all(np.isfinite(sol)):
        raise ConditioningError("shooting solve produced non-finite values")
    return sol.reshape(S + 1, k, c)


def fill_nodes(R, r, starts, boundary):
    """All node values from segment boundary values by re-applying step maps.

    Each segment is swept from its own start, so errors do not accumulate
    across segments.
    """
    N, k, _ = R.shape
    c = boundary.shape[2]
    out = np.empty((N + 1, k, c), dtype=complex)
    S = len(starts) - 1
    lengths = np.diff(starts)
    M = int(lengths.max())
    cur = boundary[:S].copy()
    out[starts[:-1]] = cur
    for t in range(M):
        active = np.nonzero(lengths > t)[0]
        idx = starts[active] + t
        nxt = np.matmul(R[idx], cur[active])
        if r is not None:
            nxt = nxt + r[idx]
        cur[active] = nxt
        out[idx + 1] = nxt
    out[N] = boundary[S]
    return out


# ----------------------------------------------------------- dichotomies

@dataclass
class DichotomyFrame:
    """Stable/unstable bases at a base point with empirical decay constants.

    ``log_scale`` records the log-determinant of the triangular factors
    discarded while renormalising the propagated basis, so determinants built
    from ``stable_basis`` / ``unstable_basis`` can be rescaled consistently.
    """

    x: float
    stable_basis: np.ndarray
    unstable_basis: np.ndarray
    projection: np.ndarray
    K: float
    mu: float
    side: str = "line"
    log_scale: float = 0.0
    eta: float | None = None
    grid: np.ndarray | None = None
    stable_nodes: np.ndarray | None = None
    unstable_nodes: np.ndarray | None = None
    extras: dict = field(default_factory=dict)

    def projection_at(self, i):
        """Dichotomy projection at grid node i (needs the stored node frames)."""
        if self.stable_nodes is None or self.unstable_nodes is None:
            raise ValueError("frame does not carry node data")
        B = np.hstack([self.stable_nodes[i], self.unstable_nodes[i]])
        ks = self.stable_nodes.shape[2]
        Binv = np.linalg.inv(B)
        return self.stable_nodes[i] @ Binv[:ks]


def _complement(Q):
    k, r = Q.shape
    full = np.linalg.qr(np.hstack([Q, np.eye(k, dtype=complex)]))[0]
    return full[:, r:k]


def _procrustes(B, ref):
    """Rotate orthonormal B inside its span to be closest to ref."""
    U, _, Vh = np.linalg.svd(B.conj().T @ ref)
    return B @ (U @ Vh)


def _fit_decay(dist, growth):
    """Fit (K, mu) with growth <= log K - mu*dist for sampled log-growth."""
    dist = np.asarray(dist, float)
    growth = np.asarray(growth, float)
    mask = dist > 0
    if not np.any(mask):
        return 1.0, 0.0
    mu = max(0.0, -np.polyfit(dist[mask], growth[mask], 1)[0]) if mask.sum() > 2 else 0.0
    K = float(np.exp(max(0.0, np.max(growth + mu * dist))))
    return K, float(mu)


def dichotomy_halfline(coeffs, lam=None, side="plus", window=30.0, h=0.05, renorm_dx=1.0,
                       asymptotic_basis=None, previous=None, keep_nodes=False, gap_tol=1e-8):
    """Half-line dichotomy frame at x = 0.

    For ``side='plus'`` the stable subspace of the asymptotic matrix at
    x = window is swept back to 0; the unstable part at 0 is its orthogonal
    complement.  ``side='minus'`` mirrors this from x = -window.
    ``asymptotic_basis`` may supply the starting basis (for an analytic
    normalisation in lam); ``previous`` fixes the phase within the span by
    aligning with a frame from a nearby lam.
    """
    f = _as_matrix_fn(coeffs, lam)
    if side not in ("plus", "minus"):
        raise ValueError("side must be 'plus' or 'minus'")
    X = float(window)
    x_far = X if side == "plus" else -X
    A_inf = np.asarray(f(x_far), dtype=complex)
    Es, Eu, alpha = spectral_bases(A_inf, gap_tol)
    start = Es if side == "plus" else Eu
    if asymptotic_basis is not None:
        start = np.asarray(asymptotic_basis, dtype=complex)
    x = uniform_grid(x_far, 0.0, h)
    sys = SampledSystem.from_callable(f, x)
    R = sys.step_maps()
    every = max(1, int(round(renorm_dx / h)))
    Y, logs = kernels.frame_sweep(R, start, every)
    B = Y[-1]
    if previous is not None:
        ref = previous.stable_basis if side == "plus" else previous.unstable_basis
        B = _procrustes(B, ref)
    comp = _complement(B)
    # growth of the swept frame, measured away from the base point
    dist = np.abs(x - 0.0)
    growth = -(logs[-1] - logs) / max(1, B.shape[1])
    K, mu = _fit_decay(np.abs(x[-1] - x)[::-1], growth[::-1])
    mu = min(mu, alpha) if mu > 0 else alpha
    P = B @ B.conj().T
    if side == "plus":
        stable, unstable = B, comp
        proj = P
    else:
        stable, unstable = comp, B
        proj = np.eye(B.shape[0]) - P
    frame = DichotomyFrame(0.0, stable, unstable, proj, K, mu, side=side, log_scale=float(logs[-1]),
                           extras={"alpha": alpha, "asymptotic": A_inf})
    if keep_nodes:
        frame.grid = x
        frame.extras["swept_nodes"] = Y
        frame.extras["swept_logs"] = logs
        frame.extras["step_maps"] = R
    return frame


def dichotomy_line(coeffs, lam, frame_plus: DichotomyFrame, frame_minus: DichotomyFrame,
                   opening_tol=1e-6) -> DichotomyFrame:
    """Paste half-line frames at 0 into a dichotomy on the line, or reject.

    Projection is onto E^s_+(0) along E^u_-(0).
    """
    if frame_plus.x != frame_minus.x:
        raise ValueError("frames must share the base point")
    Bs = frame_plus.stable_basis
    Bu = frame_minus.unstable_basis
    if Bs.shape[1] + Bu.shape[1] != Bs.shape[0]:
        raise AssumptionViolation("stable and unstable dimensions are not complementary")
    eta = minimal_opening(Bs, Bu)
    if eta < opening_tol:
        raise RejectionError(f"subspaces nearly intersect (opening {eta:.3g}); lam is eigenvalue-adjacent",
                             opening=eta)
    B = np.hstack([Bs, Bu])
    Binv = np.linalg.inv(B)
    P = Bs @ Binv[:Bs.shape[1]]
    K = max(frame_plus.K, frame_minus.K) * max(1.0, np.linalg.norm(P, 2))
    mu = min(frame_plus.mu, frame_minus.mu)
    return DichotomyFrame(frame_plus.x, Bs, Bu, P, K, mu, side="line", eta=eta,
                          log_scale=frame_plus.log_scale + frame_minus.log_scale)


@dataclass
class BoundedSolution:
    grid: np.ndarray
    samples: np.ndarray
    sup_norm: float
    stages: np.ndarray | None = None
    residual: float | None = None

    def integrate(self, fn):
        """RK-weight quadrature of fn(stage_x, stage_values) over the grid."""
        xs = _rk.stage_points(self.grid)
        w = _rk.quad_weights(self.grid)
        vals = fn(xs, self.stages)
        return np.tensordot(w, vals, axes=([0, 1], [0, 1]))


def _bc_rows(A_inf, keep, gap_tol=1e-8):
    """Rows L with L x = 0 iff x lies in the ``keep`` spectral subspace."""
    Es, Eu, _ = spectral_bases(A_inf, gap_tol)
    E = Eu if keep == "unstable" else Es
    return _complement(E).conj().T


def solve_line_bvp(sys: SampledSystem, every=20, gap_tol=1e-8, A_left=None, A_right=None,
                   F_left=None, F_right=None):
    """Unique bounded solution of phi' = A phi + F on the sampled window.

    Far-field conditions: phi(-X) - phi_inf lies in E^u(A_-) and
    phi(X) - phi_inf lies in E^s(A_+), with phi_inf = -A_inf^{-1} F_inf.
    Returns (node values, stage values).
    """
    R, r = sys.step_affine()
    N = R.shape[0]
    starts = segment_starts(N, every)
    P, p = kernels.chain_affine(R, r, starts)
    Am = sys.A[0, 0] if A_left is None else A_left
    Ap = sys.A[-1, -1] if A_right is None else A_right
    Fm = sys.F[0, 0] if F_left is None else F_left
    Fp = sys.F[-1, -1] if F_right is None else F_right
    Lrows = _bc_rows(Am, "unstable", gap_tol)
    Rrows = _bc_rows(Ap, "stable", gap_tol)
    phim = -np.linalg.solve(Am, Fm)
    phip = -np.linalg.solve(Ap, Fp)
    bnd = solve_shooting(P, p, left=(Lrows, Lrows @ phim), right=(Rrows, Rrows @ phip))
    nodes = fill_nodes(R, r, starts, bnd)
    stages = kernels.stage_values(sys.A, sys.F, sys.h, _rk.A, _rk.B, nodes[:-1])
    return nodes, stages


def bounded_inhom_solution(coeffs, inhom, line_frame: DichotomyFrame | None = None, lam=None,
                           window=30.0, h=0.05, opening_tol=1e-6, every=20) -> BoundedSolution:
    """Unique bounded solution of phi' = A(x) phi + f(x) on the line.

    The solution is computed on [-window, window] by multiple shooting with
    far-field projection conditions, which is equivalent to the
    variation-of-constants formula for the line dichotomy.  When no line
    frame is passed one is built and the opening is checked.
    """
    f = _as_matrix_fn(coeffs, lam)
    g = inhom
    if line_frame is None:
        fp = dichotomy_halfline(f, side="plus", window=window, h=h)
        fm = dichotomy_halfline(f, side="minus", window=window, h=h)
        line_frame = dichotomy_line(f, None, fp, fm, opening_tol)
    elif line_frame.eta is not None and line_frame.eta < opening_tol:
        raise RejectionError("line dichotomy opening below tolerance", opening=line_frame.eta)
    x = uniform_grid(-window, window, h)
    F0 = np.asarray(g(x[0]), dtype=complex)
    squeeze = F0.ndim == 1
    gg = (lambda t: np.asarray(g(t))[..., None]) if squeeze else g
    sys = SampledSystem.from_callable(f, x, gg)
    nodes, stages = solve_line_bvp(sys, every=every)
    if squeeze:
        nodes = nodes[..., 0]
        stages = stages[..., 0]
    sup = float(np.max(np.linalg.norm(nodes.reshape(len(x), -1), axis=1)))
    return BoundedSolution(x, nodes, sup, stages)


def central_difference(y, h, order=8):
    """Derivative of uniformly sampled data by central differences.

    Interior nodes use the centred stencil of the requested order; the
    ``order // 2`` nodes at each end use one-sided stencils of the same
    width.
    """
    y = np.asarray(y)
    n = y.shape[0]
    half = order // 2
    if n < order + 1:
        raise ValueError("not enough samples for the stencil")
    offs = np.arange(-half, half + 1)
    w = _fd_weights(offs)
    out = np.empty_like(y, dtype=np.result_type(y, float))
    for j, o in enumerate(offs):
        out[half:n - half] = out[half:n - half] + w[j] * y[half + o:n - half + o] if j else w[j] * y[half + o:n - half + o]
    for i in list(range(half)) + list(range(n - half, n)):
        lo = min(max(0, i - half), n - order - 1)
        o = np.arange(lo, lo + order + 1) - i
        wi = _fd_weights(o)
        out[i] = np.tensordot(wi, y[lo:lo + order + 1], axes=(0, 0))
    return out / h


def _fd_weights(offsets):
    """First-derivative finite-difference weights on integer offsets."""
    offsets = np.asarray(offsets, dtype=float)
    m = len(offsets)
    V = np.vander(offsets, m, increasing=True).T
    rhs = np.zeros(m)
    rhs[1] = 1.0
    return np.linalg.solve(V, rhs)
