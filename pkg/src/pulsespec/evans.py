"""Evans-type functions of the periodic pulse and of its singular limit.

Every value is returned as ``value * exp(scaling_ledger)`` split into a
complex mantissa and a real log-scale, so values at distant lambda can be
compared through ratios and arguments without overflow.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.integrate import quad

from . import _rk, kernels
from .errors import (AssumptionViolation, ConditioningError, NotHyperbolicError, PoleProximityError)
from .lintools import (_bc_rows, fill_nodes, floquet_logdet, minimal_opening, segment_starts, solve_shooting,
                       spectral_bases, uniform_grid)
from .model import ModelSpec, eval_nonlinearities
from .profile import FastHomoclinic, PulseProfile, SingularOrbit, SlowSegment

KINDS = ("full", "fast_reduced", "slow_reduced", "reduced_product", "slow_factor", "fast_factor")


@dataclass(frozen=True)
class EvansValue:
    lam: complex
    gamma: complex
    value: complex
    scaling_ledger: float
    kind: str
    flags: tuple = ()

    def total(self):
        """value * exp(ledger); may overflow for long windows."""
        return self.value * np.exp(self.scaling_ledger)

    def log(self):
        return np.log(self.value) + self.scaling_ledger

    def ratio(self, other):
        return self.value / other.value * np.exp(self.scaling_ledger - other.scaling_ledger)

    def conj(self):
        return EvansValue(np.conj(self.lam), np.conj(self.gamma), np.conj(self.value), self.scaling_ledger,
                          self.kind, self.flags)


def _normalize(value, ledger):
    """Move |value| into the ledger so that |value| is 1 (or 0)."""
    a = abs(value)
    if a == 0 or not np.isfinite(a):
        return complex(value), float(ledger)
    return complex(value / a), float(ledger + np.log(a))


# ------------------------------------------------------------ fast limit

class FastLimit:
    """Stage samples of the fast limit coefficients along the homoclinic.

    The grid runs from X down to 0; by evenness of v_h the same samples
    serve the half line x < 0 when the grid is mirrored.
    """

    def __init__(self, model: ModelSpec, hom: FastHomoclinic, h=0.05, X=None):
        self.model = model
        self.hom = hom
        X = hom.X if X is None else X
        self.X = float(X)
        self.x = uniform_grid(self.X, 0.0, h)
        self.h = np.diff(self.x)
        xs = _rk.stage_points(self.x)
        v, _ = hom.state(xs)
        u = np.broadcast_to(hom.u0, xs.shape + (model.m,))
        nl = eval_nonlinearities(model, u, v, 0.0, check_domain=False)
        self.Gv, self.Gu = nl.G_v, nl.G_u
        self.H2u, self.H2v = nl.H2_u, nl.H2_v
        n, m = model.n, model.m
        nl0 = eval_nonlinearities(model, hom.u0, np.zeros(n), 0.0)
        self.Gv_inf, self.Gu_inf = nl0.G_v, nl0.G_u
        base = np.zeros(xs.shape + (2 * n, 2 * n), dtype=complex)
        base[..., :n, n:] = np.diag(1.0 / model.D2)
        base[..., n:, :n] = self.Gv
        self.base = base
        F = np.zeros(xs.shape + (2 * n, m), dtype=complex)
        F[..., n:, :] = self.Gu
        self.F = F
        self.weights = np.abs(self.h)[:, None] * _rk.B[None, :]
        self.every = max(1, int(round(1.0 / h)))

    def A(self, lam):
        A = self.base.copy()
        n = self.model.n
        A[..., n:, :n] += lam * np.eye(n)
        return A

    def A_inf(self, lam):
        n = self.model.n
        A = np.zeros((2 * n, 2 * n), dtype=complex)
        A[:n, n:] = np.diag(1.0 / self.model.D2)
        A[n:, :n] = self.Gv_inf + lam * np.eye(n)
        return A

    def sqrt_rate(self, lam, gap_tol=1e-8):
        """S = sqrtm(D2^-1 (dvG(u0,0,0) + lam)) on the principal branch."""
        n = self.model.n
        M = np.diag(1.0 / self.model.D2) @ (self.Gv_inf + lam * np.eye(n))
        S = sla.sqrtm(M.astype(complex)) if n > 1 else np.sqrt(M.astype(complex))
        ev = np.linalg.eigvals(S)
        if np.min(ev.real) <= gap_tol:
            raise NotHyperbolicError(f"lam = {lam} lies outside the region where the fast far field is hyperbolic")
        return S

    def sweeps(self, lam):
        """Stable (from +X) and unstable (from -X) frames swept to 0."""
        n = self.model.n
        S = self.sqrt_rate(lam)
        D2 = np.diag(self.model.D2)
        bs = np.vstack([np.eye(n), -D2 @ S]).astype(complex)
        bu = np.vstack([np.eye(n), D2 @ S]).astype(complex)
        A = self.A(lam)
        Rs = kernels.step_maps(A, self.h, _rk.A, _rk.B)
        Ys, ls = kernels.frame_sweep(Rs, bs, self.every)
        # x -> -x maps the stable sweep onto the unstable one with q -> -q,
        # so the unstable frame is the reflected stable frame of the same steps
        refl = np.concatenate([np.ones(n), -np.ones(n)])
        Yu = Ys * refl[None, :, None]
        lu = ls
        return S, Rs, Ys, ls, Yu, lu


def _auto_h(lam, h):
    """Halve the step until h * sqrt(|lam| + 1) stays below 0.4."""
    r = np.sqrt(abs(complex(lam)) + 1.0)
    while h * r > 0.4:
        h = h / 2
    return h


def _fast_cache(model, hom, h=0.05, lam=0.0):
    h = _auto_h(lam, h)
    key = ("fast", h, id(model))
    store = hom.__dict__.setdefault("_caches", {})
    if key not in store:
        store[key] = FastLimit(model, hom, h)
    return store[key]


def evans_fast_reduced(model: ModelSpec, hom: FastHomoclinic, lam, h=0.05) -> EvansValue:
    """E_f0(lam) = det(B^u(0), B^s(0)) for the fast limit problem.

    Bases start from the analytic eigenvectors [I; -/+ D2 S(lam)] at +/-X.
    The factor exp(2 X tr S) picked up along the sweeps is removed, which
    keeps the function analytic and free of fast phase rotation.
    """
    lam = complex(lam)
    fl = _fast_cache(model, hom, h, lam)
    S, _, Ys, ls, Yu, lu = fl.sweeps(lam)
    B = np.hstack([Yu[-1], Ys[-1]])
    val = np.linalg.det(B)
    trS = np.trace(S) if np.ndim(S) == 2 else complex(S)
    ledger = ls[-1] + lu[-1] - 2 * fl.X * trS.real
    val = val * np.exp(-2j * fl.X * trS.imag)
    val, ledger = _normalize(val, ledger)
    return EvansValue(lam, 0j, val, ledger, "fast_reduced")


def fast_eigenfunction(model: ModelSpec, hom: FastHomoclinic, lam, h=0.05):
    """Bounded solution of the fast limit problem at a simple real zero (n = 1).

    Returns (x, v, stage_x, stage_v, weights) on the full line, normalized to
    unit L2 norm with positive value at x = 0 (or positive slope if odd).
    """
    if model.n != 1:
        raise AssumptionViolation("eigenfunction extraction is implemented for n = 1")
    fl = _fast_cache(model, hom, h, lam)
    S, Rs, Ys, ls, _, _ = fl.sweeps(complex(lam))
    nodes = Ys[..., 0] * np.exp(ls - ls[-1])[:, None]
    A = fl.A(complex(lam))
    stages = kernels.stage_values(A, None, fl.h, _rk.A, _rk.B, nodes[:-1, :, None])[..., 0]
    v0, q0 = nodes[-1]
    even = abs(q0) <= abs(v0)
    # fix the phase so the function is real
    ph = v0 if even else q0
    nodes = nodes / ph * abs(ph)
    stages = stages / ph * abs(ph)
    w = fl.weights
    norm2 = 2 * np.sum(w * np.abs(stages[..., 0]) ** 2)
    c = 1.0 / np.sqrt(norm2)
    xs = _rk.stage_points(fl.x)
    return {"x": fl.x, "v": nodes[:, 0] * c, "q": nodes[:, 1] * c, "stage_x": xs,
            "stage_v": stages[..., 0] * c, "weights": w, "parity": 1 if even else -1}


# -------------------------------------------------------------- Melnikov

def _half_line_inhom(fl: FastLimit, lam, opening_tol=1e-6):
    """Even bounded solution of Omega' = A22 Omega + A21 on the half line."""
    n, m = fl.model.n, fl.model.m
    A = fl.A(lam)
    R, r = kernels.step_affine(A, fl.F, fl.h, _rk.A, _rk.B)
    N = R.shape[0]
    starts = segment_starts(N, fl.every)
    P, p = kernels.chain_affine(R, r, starts)
    Ainf = fl.A_inf(lam)
    Finf = np.zeros((2 * n, m), dtype=complex)
    Finf[n:] = fl.Gu_inf
    phi_inf = -np.linalg.solve(Ainf, Finf)
    Lrows = _bc_rows(Ainf, "stable")
    Rrows = np.hstack([np.zeros((n, n)), np.eye(n)]).astype(complex)
    # opening between the swept stable space at 0 and the reflection-fixed space q = 0
    _, _, Ys, _, _, _ = fl.sweeps(lam)
    fix = np.vstack([np.eye(n), np.zeros((n, n))])
    eta = minimal_opening(Ys[-1], fix)
    if eta < opening_tol:
        raise PoleProximityError(f"lam = {lam} is within the pole guard of a fast eigenvalue (opening {eta:.3g})",
                                 opening=eta)
    bnd = solve_shooting(P, p, left=(Lrows, Lrows @ phi_inf), right=(Rrows, np.zeros((n, m))))
    nodes = fill_nodes(R, r, starts, bnd)
    stages = kernels.stage_values(A, fl.F, fl.h, _rk.A, _rk.B, nodes[:-1])
    return nodes, stages, eta


def melnikov_G(model: ModelSpec, hom: FastHomoclinic, lam, line_frame=None, h=0.05, opening_tol=1e-6,
               return_vin=False):
    """Melnikov matrix G(lam) = int dH2/du + dH2/dv V_in over the pulse.

    The default path solves the even half-line problem (the homoclinic is
    symmetric), which is regular at lam = 0.  Passing ``line_frame`` selects
    the full-line bounded solution instead.
    """
    lam = complex(lam)
    if model.weak_coupling:
        # H2 = 0: the integrand vanishes and G is regular at every fast eigenvalue
        G = np.zeros((model.m, model.m), dtype=complex)
        return (G, {"x": None, "V_in": None, "opening": None}) if return_vin else G
    if line_frame is not None:
        return _melnikov_line(model, hom, lam, line_frame, h, opening_tol, return_vin)
    fl = _fast_cache(model, hom, h, lam)
    n, m = model.n, model.m
    nodes, stages, eta = _half_line_inhom(fl, lam, opening_tol)
    V = stages[..., :n, :]
    integrand = fl.H2u + np.matmul(fl.H2v, V)
    G = 2 * np.einsum("ns,nsij->ij", fl.weights, integrand)
    if return_vin:
        return G, {"x": fl.x, "V_in": nodes[:, :n, :], "opening": eta}
    return G


def _melnikov_line(model, hom, lam, line_frame, h, opening_tol, return_vin):
    from .lintools import SampledSystem, solve_line_bvp
    if line_frame.eta is not None and line_frame.eta < opening_tol:
        raise PoleProximityError("line dichotomy opening below tolerance", opening=line_frame.eta)
    n, m = model.n, model.m
    x = uniform_grid(-hom.X, hom.X, h)
    xs = _rk.stage_points(x)
    v, _ = hom.state(xs)
    u = np.broadcast_to(hom.u0, xs.shape + (m,))
    nl = eval_nonlinearities(model, u, v, 0.0, check_domain=False)
    A = np.zeros(xs.shape + (2 * n, 2 * n), dtype=complex)
    A[..., :n, n:] = np.diag(1.0 / model.D2)
    A[..., n:, :n] = nl.G_v + lam * np.eye(n)
    F = np.zeros(xs.shape + (2 * n, m), dtype=complex)
    F[..., n:, :] = nl.G_u
    sys = SampledSystem(x, A, F)
    nodes, stages = solve_line_bvp(sys, every=max(1, int(round(1.0 / h))))
    w = _rk.quad_weights(x)
    G = np.einsum("ns,nsij->ij", w, nl.H2_u + np.matmul(nl.H2_v, stages[..., :n, :]))
    if return_vin:
        return G, {"x": x, "V_in": nodes[:, :n, :], "opening": line_frame.eta}
    return G


# ------------------------------------------------------------- slow limit

class SlowLimit:
    """Stage samples of dH1/du along the slow segment on a grid."""

    def __init__(self, model: ModelSpec, slow: SlowSegment, x0, x1, n_steps=800):
        self.model = model
        self.x = np.linspace(x0, x1, n_steps + 1)
        self.h = np.diff(self.x)
        xs = _rk.stage_points(self.x)
        us, _ = slow.state(xs)
        nl = eval_nonlinearities(model, us[..., None], np.zeros(xs.shape + (model.n,)), 0.0, check_domain=False)
        m = model.m
        base = np.zeros(xs.shape + (2 * m, 2 * m), dtype=complex)
        base[..., :m, m:] = np.diag(1.0 / model.D1)
        base[..., m:, :m] = nl.H1_u
        self.base = base
        self.H1 = nl.H1
        self.H1u = nl.H1_u

    def A(self, lam):
        A = self.base.copy()
        m = self.model.m
        A[..., m:, :m] += lam * np.eye(m)
        return A

    def transfer(self, lam):
        R = kernels.step_maps(self.A(lam), self.h, _rk.A, _rk.B)
        return kernels.chain(R, np.array([0, R.shape[0]]))[0]


def _slow_cache(model, slow, which="full", n_steps=800):
    key = (which, n_steps, id(model))
    store = slow.__dict__.setdefault("_caches", {})
    if key not in store:
        if which == "full":
            store[key] = SlowLimit(model, slow, 0.0, 2 * slow.L0, n_steps)
        else:
            store[key] = SlowLimit(model, slow, slow.L0, 0.0, n_steps // 2)
    return store[key]


@dataclass
class SlowReducedIngredients:
    G_matrix: np.ndarray
    Upsilon: np.ndarray
    T_slow: np.ndarray
    V_in: object = None


def slow_ingredients(model: ModelSpec, orbit: SingularOrbit, lam, h=0.05, G=None) -> SlowReducedIngredients:
    m = model.m
    lam = complex(lam)
    if G is None:
        G, info = melnikov_G(model, orbit.homoclinic, lam, h=h, return_vin=True)
    else:
        info = None
    Ups = np.eye(2 * m, dtype=complex)
    Ups[m:, :m] = G
    T = _slow_cache(model, orbit.slow).transfer(lam)
    return SlowReducedIngredients(np.asarray(G), Ups, T, info)


def evans_slow_reduced(model: ModelSpec, orbit: SingularOrbit, lam, gamma, h=0.05) -> EvansValue:
    """E_s0(lam, gamma) = det(Upsilon(lam) T_s(2 L0, 0, lam) - gamma I)."""
    ing = slow_ingredients(model, orbit, lam, h)
    M = ing.Upsilon @ ing.T_slow - complex(gamma) * np.eye(2 * model.m)
    return EvansValue(complex(lam), complex(gamma), complex(np.linalg.det(M)), 0.0, "slow_reduced")


def slow_boundary_value(model: ModelSpec, orbit: SingularOrbit, lam):
    """u(2 L0, lam) for the slow limit solution with u(0) = 0, u'(0) = 1 (m = 1)."""
    T = _slow_cache(model, orbit.slow).transfer(complex(lam))
    D1 = float(model.D1[0])
    return complex((T @ np.array([0.0, D1]))[0])


def trace_criterion(model: ModelSpec, orbit: SingularOrbit, lam, imag_tol=1e-10, h=0.05):
    """t(lam) = tr(Upsilon T_s) and whether it lies in [-2, 2] (m = 1)."""
    if model.m != 1:
        raise AssumptionViolation("the trace criterion needs m = 1")
    ing = slow_ingredients(model, orbit, lam, h)
    t = complex(np.trace(ing.Upsilon @ ing.T_slow))
    in_band = abs(t.imag) <= imag_tol * (1 + abs(t)) and -2.0 <= t.real <= 2.0
    return {"t": t, "in_band": bool(in_band), "G": complex(ing.G_matrix[0, 0])}


def reversible_pair(model: ModelSpec, orbit: SingularOrbit, lam):
    """Symmetric and antisymmetric slow solutions about L0 sampled on [L0, 0].

    Returns (x, Y) with Y[:, :, 0] = (u+, p+), Y[:, :, 1] = (u-, p-).
    """
    sl = _slow_cache(model, orbit.slow, which="half")
    R = kernels.step_maps(sl.A(complex(lam)), sl.h, _rk.A, _rk.B)
    D1 = float(model.D1[0])
    Y0 = np.array([[1.0, 0.0], [0.0, D1]], dtype=complex)
    Y = np.empty((R.shape[0] + 1, 2, 2), dtype=complex)
    Y[0] = Y0
    for i in range(R.shape[0]):
        Y[i + 1] = R[i] @ Y[i]
    return sl.x, Y


def trace_criterion_reversible(model: ModelSpec, orbit: SingularOrbit, lam, w_tol=1e-12, imag_tol=1e-10,
                               h=0.05, G=None):
    """t(lam) from the symmetric/antisymmetric pair u_+/- (m = 1).

    With p = D1 u', t = (2/W)[p+ u- + u+ p- - G u+ u-] at xi = 0, where
    W = u+ p- - p+ u- is the (constant) Wronskian.
    """
    if model.m != 1:
        raise AssumptionViolation("the trace criterion needs m = 1")
    if not orbit.slow.symmetric:
        raise AssumptionViolation("slow segment is not symmetric about L0")
    lam = complex(lam)
    if G is None:
        G = complex(melnikov_G(model, orbit.homoclinic, lam, h=h)[0, 0])
    _, Y = reversible_pair(model, orbit, lam)
    (up, um), (pp, pm) = Y[-1]
    W = up * pm - pp * um
    if abs(W) < w_tol:
        raise ConditioningError(f"Wronskian {abs(W):.3g} below tolerance")
    t = 2.0 / W * (pp * um + up * pm - G * up * um)
    in_band = abs(t.imag) <= imag_tol * (1 + abs(t)) and -2.0 <= t.real <= 2.0
    Wall = Y[:, 0, 0] * Y[:, 1, 1] - Y[:, 1, 0] * Y[:, 0, 1]
    return {"t": complex(t), "in_band": bool(in_band), "W": complex(W),
            "W_drift": float(np.max(np.abs(Wall - Wall[0])))}


def evans_reduced(model: ModelSpec, orbit: SingularOrbit, lam, gamma, h=0.05, pole_guard=None,
                  fast_zeros=()) -> EvansValue:
    """E_0 = (-gamma)^n E_f0 E_s0 with a flag near known fast zeros."""
    ef = evans_fast_reduced(model, orbit.homoclinic, lam, h)
    es = evans_slow_reduced(model, orbit, lam, gamma, h)
    flags = ()
    if pole_guard is not None and any(abs(complex(lam) - z) < pole_guard for z in fast_zeros):
        flags = ("near_fast_zero",)
    val = (-complex(gamma)) ** model.n * ef.value * es.value
    return EvansValue(complex(lam), complex(gamma), val, ef.scaling_ledger, "reduced_product", flags)


# ----------------------------------------------------------- full problem

class StabilityProblem:
    """Coefficients of the linearization about a periodic pulse on its grid.

    Variables (u, p, v, q) with p = D1 u_x / sqrt(eps); the coefficient is
    A(x) = A0(x) + lam * E, sampled at the stage points of every grid step.
    """

    def __init__(self, model: ModelSpec, profile: PulseProfile):
        self.model = model
        self.profile = profile
        eps = profile.eps
        self.eps = eps
        self.delta = np.sqrt(eps)
        m, n = model.m, model.n
        Y = profile.stage_states(model)
        u, v = Y[..., :m], Y[..., 2 * m:2 * m + n]
        nl = eval_nonlinearities(model, u, v, eps, check_domain=False)
        self.nl = nl
        self.u_stage = u
        k = 2 * (m + n)
        d = self.delta
        A = np.zeros(Y.shape[:2] + (k, k))
        iu, ip = slice(0, m), slice(m, 2 * m)
        iv, iq = slice(2 * m, 2 * m + n), slice(2 * m + n, k)
        A[..., iu, ip] = d * np.diag(1.0 / model.D1)
        A[..., ip, iu] = d * (eps * nl.H1_u + nl.H2_u)
        A[..., ip, iv] = d * (eps * nl.H1_v + nl.H2_v)
        A[..., iv, iq] = np.diag(1.0 / model.D2)
        A[..., iq, iu] = nl.G_u
        A[..., iq, iv] = nl.G_v
        self.A0 = A
        E = np.zeros((k, k))
        E[ip, iu] = d * eps * np.eye(m)
        E[iq, iv] = np.eye(n)
        self.E = E
        self.h = np.diff(profile.grid)
        self.N = len(self.h) // 2
        self.k = k
        self.blocks = (iu, ip, iv, iq)
        # far-field G_v(u, 0, 0) for the gauge
        nl0 = eval_nonlinearities(model, u, np.zeros_like(v), 0.0, check_domain=False)
        self.Gv0 = nl0.G_v
        self.weights = _rk.quad_weights(profile.grid)

    def A(self, lam):
        return self.A0 + complex(lam) * self.E

    def step_maps(self, lam):
        return kernels.step_maps(self.A(lam), self.h, _rk.A, _rk.B)

    def starts(self, every):
        half = segment_starts(self.N, every)
        return np.concatenate([half, self.N + half[1:]])

    def gauge(self, lam):
        """Integral of tr sqrt(D2^-1 (dvG(u,0,0) + lam)) over the period."""
        n = self.model.n
        M = self.Gv0 / self.model.D2[None, None, :, None] + complex(lam) * np.eye(n) / self.model.D2[:, None]
        if n == 1:
            tr = np.sqrt(M[..., 0, 0].astype(complex))
        else:
            flat = M.reshape(-1, n, n).astype(complex)
            tr = np.array([np.trace(sla.sqrtm(a)) for a in flat]).reshape(M.shape[:2])
        return complex(np.sum(self.weights * tr))


def _stability(model, profile):
    store = profile.__dict__.setdefault("_caches", {})
    key = ("stab", id(model))
    if key not in store:
        store[key] = StabilityProblem(model, profile)
    return store[key]


def evans_full(profile: PulseProfile, model: ModelSpec, lam, gamma, method="shooting", every=20,
               gauge=False) -> EvansValue:
    """E_eps(lam, gamma) = det(T(0, -L) - gamma T(0, L)).

    ``method='shooting'`` evaluates det(M - gamma I) / det T(L, 0) with the
    monodromy M never formed (sparse multiple-shooting determinant), which
    stays accurate for long periods.  ``method='direct'`` multiplies out the
    two evolution operators and is meant for moderate L only.  With
    ``gauge=True`` the value is multiplied by exp(-gauge(lam)) (analytic,
    zero-free), which removes the fast phase rotation in lam.
    """
    lam, gamma = complex(lam), complex(gamma)
    sp_ = _stability(model, profile)
    R = sp_.step_maps(lam)
    starts = sp_.starts(every)
    P = kernels.chain(R, starts)
    nseg_half = int(np.searchsorted(starts, sp_.N))
    if method == "shooting":
        phase, logabs = floquet_logdet(P, gamma)
        sgn_r, log_r = 1.0 + 0j, 0.0
        for j in range(nseg_half, len(P)):
            s, l = np.linalg.slogdet(P[j])
            sgn_r *= s
            log_r += l
        val = phase / sgn_r
        ledger = logabs - log_r
    elif method == "direct":
        T_left = np.eye(sp_.k, dtype=complex)
        for j in range(nseg_half):
            T_left = P[j] @ T_left
        T_right = np.eye(sp_.k, dtype=complex)
        for j in range(nseg_half, len(P)):
            T_right = P[j] @ T_right
        if not np.all(np.isfinite(T_left)) or not np.all(np.isfinite(T_right)):
            raise ConditioningError("evolution operator overflow; use method='shooting' or the factorized path")
        if np.linalg.cond(T_right) > 1e12:
            raise ConditioningError("T(L, 0) is too ill-conditioned for the direct method; use 'shooting'")
        Minv = np.linalg.solve(T_right, np.eye(sp_.k))
        s, l = np.linalg.slogdet(T_left - gamma * Minv)
        val, ledger = s, l
    else:
        raise ValueError(f"unknown method {method!r}")
    if gauge:
        g = sp_.gauge(lam)
        val = val * np.exp(-1j * g.imag)
        ledger = ledger - g.real
    if not np.isfinite(ledger):
        val, ledger = 0j, 0.0
    return EvansValue(lam, gamma, complex(val), float(ledger), "full")


def evans_factorized(profile: PulseProfile, model: ModelSpec, lam, gamma, every=20, transform=None):
    """Slow and fast factors E_s,eps and E_f,eps from the Riccati diagonalization.

    Returns (slow, fast, product) EvansValues; the product equals the full
    Evans function because det H = 1 and H is periodic.
    """
    from .riccati import diagonalize, riccati_transform

    lam, gamma = complex(lam), complex(gamma)
    sp_ = _stability(model, profile)
    if transform is None:
        transform = riccati_transform(model, profile, lam)
    diag = diagonalize(transform)
    out = []
    for kind, Ast in (("slow_factor", diag.slow_stages), ("fast_factor", diag.fast_stages)):
        R = kernels.step_maps(Ast, sp_.h, _rk.A, _rk.B)
        P = kernels.chain(R, sp_.starts(every))
        nseg_half = int(np.searchsorted(sp_.starts(every), sp_.N))
        phase, logabs = floquet_logdet(P, gamma)
        sgn_r, log_r = 1.0 + 0j, 0.0
        for j in range(nseg_half, len(P)):
            s, l = np.linalg.slogdet(P[j])
            sgn_r *= s
            log_r += l
        out.append(EvansValue(lam, gamma, complex(phase / sgn_r), float(logabs - log_r), kind))
    es, ef = out
    prod = EvansValue(lam, gamma, es.value * ef.value, es.scaling_ledger + ef.scaling_ledger, "full")
    return es, ef, prod
