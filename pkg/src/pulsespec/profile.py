"""Singular periodic orbit and the periodic pulse at finite eps.

The singular orbit is a fast homoclinic pulse in (v, q) at u = u0 glued to a
slow segment of the Hamiltonian slow flow.  The periodic pulse is computed by
reversible half-period multiple shooting started from the singular orbit.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq, root

from . import _rk, kernels
from .errors import (AccuracyError, AssumptionViolation, DegenerateSegmentWarning, GluingError,
                     NoConnectingOrbitError, NoHomoclinicError, NotHyperbolicError, ShootingError)
from .model import ModelSpec, eval_nonlinearities, existence_jacobian, existence_rhs, reversor

_GL_X, _GL_W = np.polynomial.legendre.leggauss(40)


# ------------------------------------------------------------ homoclinic

@dataclass
class FastHomoclinic:
    """Symmetric homoclinic of D2 v'' = G(u0, v, 0) sampled on [-X, X].

    ``state(x)`` evaluates (v, q) at arbitrary points from the dense output
    of the integrator, using the linear tail beyond the integration window.
    """

    u0: np.ndarray
    grid: np.ndarray
    v_h: np.ndarray
    q_h: np.ndarray
    decay_rate: float
    X: float
    _dense: object = field(repr=False, default=None)
    _x_start: float = 0.0
    _tail: tuple = field(repr=False, default=None)
    residual: float = 0.0

    def state(self, x):
        """(v, q) at points x, shape x.shape + (n,) each."""
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        sgn = np.where(x < 0, -1.0, 1.0)
        flat = ax.ravel()
        n = self.v_h.shape[1]
        v = np.empty((flat.size, n))
        q = np.empty((flat.size, n))
        inside = flat <= self._x_start
        if np.any(inside):
            y = self._dense(flat[inside])
            v[inside] = y[:n].T
            q[inside] = y[n:].T
        if np.any(~inside):
            w, rate = self._tail
            e = np.exp(-rate * (flat[~inside] - self._x_start))
            v[~inside] = e[:, None] * w[:n][None, :]
            q[~inside] = e[:, None] * w[n:][None, :]
        v = v.reshape(x.shape + (n,))
        q = q.reshape(x.shape + (n,)) * sgn[..., None]
        return v, q


def _fast_linearization(model, u0):
    nl = eval_nonlinearities(model, np.asarray(u0, float), np.zeros(model.n), 0.0)
    n = model.n
    A = np.zeros((2 * n, 2 * n))
    A[:n, n:] = np.diag(1.0 / model.D2)
    A[n:, :n] = nl.G_v
    return A


def _fast_rhs(model, u0):
    n = model.n
    u0 = np.asarray(u0, float)

    def rhs(x, y):
        v, q = y[:n], y[n:]
        g = model.G(u0, v, 0.0)[0]
        return np.concatenate([q / model.D2, np.asarray(g, float).reshape(n)])

    return rhs


def solve_fast_homoclinic(model: ModelSpec, u0, X=None, tol=1e-10, h=0.05,
                          amplitude=1e-7) -> FastHomoclinic:
    """Homoclinic orbit of the fast limit system, symmetric about x = 0.

    The orbit is integrated backward from a small point on the stable
    eigendirection of the origin until q vanishes, then shifted and mirrored.
    For n = 1 the event locates the symmetric crossing directly; for n > 1
    the stable coordinates are adjusted by a root solve so that q = 0.
    """
    u0 = np.atleast_1d(np.asarray(u0, dtype=float))
    n = model.n
    A = _fast_linearization(model, u0)
    w, V = np.linalg.eig(A)
    if np.min(np.abs(w.real)) < 1e-10:
        raise AssumptionViolation("origin of the fast system is not hyperbolic")
    stable = np.argsort(w.real)[:n]
    if np.any(w[stable].real >= 0):
        raise NotHyperbolicError("fast origin lacks an n-dimensional stable subspace")
    rate = float(np.min(-w[stable].real))
    if X is None:
        X = max(30.0, 10.0 / rate)
    rhs = _fast_rhs(model, u0)
    rtol = min(1e-12, tol * 1e-2)

    def q_zero(x, y):
        return np.sum(y[n:] * np.sign(np.where(y[:n] == 0, 1.0, y[:n])))

    q_zero.terminal = True
    q_zero.direction = 0

    def shoot(c):
        y0 = (V[:, stable].real @ c)
        if y0[:n].sum() < 0:
            y0 = -y0
        sol = solve_ivp(rhs, (0.0, -10.0 * X), y0, method="DOP853", rtol=rtol, atol=1e-15 * amplitude,
                        events=q_zero if n == 1 else None, dense_output=True)
        return y0, sol

    if n == 1:
        y0, sol = shoot(np.array([amplitude / max(1e-300, abs(V[0, stable[0]].real))]))
        if sol.status != 1 or len(sol.t_events[0]) == 0:
            raise NoHomoclinicError("backward orbit from the stable direction never reached q = 0",
                                    residual=float("inf"))
        x_ev = float(sol.t_events[0][-1])
    else:
        def resid(z):
            c, T = z[:n], z[n]
            c = amplitude * c / np.linalg.norm(c)
            y0 = V[:, stable].real @ c
            s = solve_ivp(rhs, (0.0, -T), y0, method="DOP853", rtol=rtol, atol=1e-15)
            return s.y[n:, -1]
        guess_T = np.log(1.0 / amplitude) / rate
        best = None
        for T0 in (guess_T, 0.8 * guess_T, 1.2 * guess_T):
            z0 = np.concatenate([np.ones(n) / np.sqrt(n), [T0]])
            r = root(lambda z: np.concatenate([resid(z), [np.linalg.norm(z[:n]) - 1.0]]),
                     z0, method="hybr", tol=tol)
            if r.success:
                best = r
                break
        if best is None:
            raise NoHomoclinicError("Newton on stable coordinates did not converge", residual=float("nan"))
        c = amplitude * best.x[:n] / np.linalg.norm(best.x[:n])
        y0, sol = shoot(c)
        sol = solve_ivp(rhs, (0.0, -best.x[n]), y0, method="DOP853", rtol=rtol, atol=1e-15, dense_output=True)
        x_ev = -float(best.x[n])
    span = -x_ev
    dense0 = sol.sol

    def dense(s):
        # s measured from the pulse centre, s in [0, span]
        return dense0(np.asarray(s) + x_ev)

    hom = FastHomoclinic(u0=u0, grid=np.zeros(0), v_h=np.zeros((0, n)), q_h=np.zeros((0, n)),
                         decay_rate=rate, X=float(X))
    hom._dense = dense
    hom._x_start = span
    hom._tail = (y0, rate)
    grid = uniform_grid_sym(X, h)
    v, q = hom.state(grid)
    hom.grid, hom.v_h, hom.q_h = grid, v, q
    res = homoclinic_residual(model, hom)
    hom.residual = res
    tail = float(np.linalg.norm(np.concatenate([v[-1], q[-1]])))
    if res > max(1e-6, 1e3 * tol):
        raise NoHomoclinicError(f"homoclinic ODE residual {res:.3g}", residual=res)
    if tail > 1e-6:
        warnings.warn(f"homoclinic tail {tail:.3g} at X = {X}; increase X", RuntimeWarning)
    return hom


def uniform_grid_sym(X, h):
    k = max(1, int(np.ceil(X / h - 1e-9)))
    half = np.linspace(0.0, X, k + 1)
    return np.concatenate([-half[:0:-1], half])


def homoclinic_residual(model, hom):
    """Max residual of the fast ODE at the grid, relative to the orbit size."""
    n = model.n
    v, q = hom.v_h, hom.q_h
    g = model.G(np.broadcast_to(hom.u0, v.shape[:-1] + (model.m,)), v, 0.0)[0]
    # derivative of the dense-output interpolant by a five-point stencil
    dx = 1e-3
    pts = [hom.state(hom.grid + k * dx) for k in (-2, -1, 1, 2)]
    dv = (pts[0][0] - 8 * pts[1][0] + 8 * pts[2][0] - pts[3][0]) / (12 * dx)
    dq = (pts[0][1] - 8 * pts[1][1] + 8 * pts[2][1] - pts[3][1]) / (12 * dx)
    scale = 1.0 + np.max(np.abs(v))
    r1 = np.max(np.abs(dv - q / model.D2))
    r2 = np.max(np.abs(dq - g))
    return float(max(r1, r2) / scale)


# ------------------------------------------------------- take-off value

def takeoff_integral(model: ModelSpec, hom: FastHomoclinic, tol=1e-10, return_error=False):
    """J(u0): integral of H2(u0, v_h) over the half line x < 0."""
    n, m = model.n, model.m
    u0 = hom.u0

    def integrand(x, i):
        v, _ = hom.state(np.array([x]))
        return float(model.H2(u0[None, :], v, )[0][0, i])

    J = np.zeros(m)
    err = 0.0
    X = hom._x_start
    breaks = np.linspace(0.0, X, 9)
    for i in range(m):
        tot = 0.0
        for a, b in zip(breaks[:-1], breaks[1:]):
            val, e = quad(integrand, a, b, args=(i,), epsabs=1e-14, epsrel=1e-13, limit=200)
            tot += val
            err += e
        J[i] = tot
    # tail beyond the integration window: H2 decays at least like v
    vX, _ = hom.state(np.array([X]))
    tail = float(np.max(np.abs(model.H2(u0[None, :], vX)[0]))) / hom.decay_rate
    err += tail
    if err > max(tol, 1e-8 * (1.0 + np.max(np.abs(J)))):
        raise AccuracyError(f"take-off quadrature error {err:.3g} exceeds tolerance")
    return (J, err) if return_error else J


def takeoff_derivative(model: ModelSpec, u0, step=1e-3, **kw):
    """dJ/du at u0 (m = 1) from homoclinics at nearby base points.

    Fourth-order central differences.  Used for G0 = 2 J'(u0).
    """
    u0 = float(np.atleast_1d(u0)[0])
    vals = {}
    for k in (-2, -1, 1, 2):
        hom = solve_fast_homoclinic(model, [u0 + k * step], **kw)
        vals[k] = float(takeoff_integral(model, hom)[0])
    return (vals[-2] - 8 * vals[-1] + 8 * vals[1] - vals[2]) / (12 * step)


# ----------------------------------------------------------- slow segment

@dataclass
class SlowSegment:
    """Slow orbit on [0, 2 L0] from take-off (u0, J) to touch-down (u0, -J).

    The turning point u1 (p = 0) is reached at xi = L0.
    """

    u0: float
    u1: float
    L0: float
    J0: float
    grid: np.ndarray
    u_s: np.ndarray
    p_s: np.ndarray
    D1: float
    symmetric: bool = True
    energy_drift: float = 0.0
    _dense: object = field(repr=False, default=None)

    @property
    def L0_check(self):
        return self.L0

    def state(self, xi):
        """(u_s, p_s) at arbitrary xi in [0, 2 L0] using the reflection about L0."""
        xi = np.asarray(xi, dtype=float)
        s = xi - self.L0
        y = self._dense(np.abs(s).ravel())
        u = y[0].reshape(xi.shape)
        p = (y[1] * np.sign(s).ravel()).reshape(xi.shape)
        p = np.where(s == 0, 0.0, p)
        return u, p


def _mean_on(f, a, b):
    """Mean of f over [a, b] by Gauss-Legendre (no cancellation for short intervals)."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    t = 0.5 * (b - a)[..., None] * _GL_X + 0.5 * (a + b)[..., None]
    return 0.5 * np.sum(_GL_W * f(t), axis=-1)


def _slow_H1(model):
    def h1(u):
        u = np.asarray(u, float)
        val = model.H1(u[..., None], np.zeros(u.shape + (model.n,)), 0.0)[0]
        return np.asarray(val, float)[..., 0]
    return h1


def solve_slow_segment(model: ModelSpec, u0, J0, tol=1e-10, transv_tol=1e-10) -> SlowSegment:
    """Slow segment of the Hamiltonian slow system for m = 1."""
    if model.m != 1:
        raise AssumptionViolation("automatic slow segments require m = 1")
    u0 = float(np.atleast_1d(u0)[0])
    J = float(np.atleast_1d(J0)[0])
    D1 = float(model.D1[0])
    h1 = _slow_H1(model)
    lo, hi = float(model.domain_box[0][0]), float(model.domain_box[1][0])

    def F(u):
        return (u - u0) * _mean_on(h1, u0, u)

    def energy(u):
        return J * J + 2 * D1 * F(u)

    if abs(J) > transv_tol:
        direction = np.sign(J)
    else:
        warnings.warn("take-off value vanishes: segment starts at a turning point", DegenerateSegmentWarning)
        direction = np.sign(h1(np.array(u0)))
        if direction == 0:
            raise NoConnectingOrbitError("u0 is an equilibrium of the slow flow")
    # bracket the turning point by marching away from u0
    step = 1e-3 * max(1.0, abs(u0))
    a = u0
    ua = None
    while True:
        b = a + direction * step
        if b < lo or b > hi:
            raise NoConnectingOrbitError("no turning point inside the domain box")
        if energy(b) <= 0:
            ua = (a, b)
            break
        a = b
        step *= 1.3
    u1 = brentq(energy, min(ua), max(ua), xtol=1e-15, rtol=1e-15, maxiter=200)
    if abs(h1(np.array(u1))) <= transv_tol:
        raise NoConnectingOrbitError("slow flow has an equilibrium at the turning point")
    if abs(J) > transv_tol and abs(h1(np.array(u0)) * 0 + (u1 - u0) * J) <= 0:
        warnings.warn("transversality (u1 - u0) J > 0 fails", DegenerateSegmentWarning)
    sigma = np.sign(u0 - u1)

    # time of flight, both end singularities removed by u = anchor + s^2 substitutions
    umid = 0.5 * (u0 + u1)

    def near_u1(s):
        u = u1 + sigma * s * s
        return 2 * D1 / np.sqrt(2 * D1 * sigma * _mean_on(h1, u1, u))

    def near_u0(s):
        u = u0 - sigma * s * s
        E = J * J - 2 * D1 * sigma * s * s * _mean_on(h1, u, u0)
        return 2 * D1 * s / np.sqrt(E) if J != 0 else 2 * D1 / np.sqrt(-2 * D1 * sigma * _mean_on(h1, u, u0))

    smid = np.sqrt(abs(umid - u1))
    L_a, e_a = quad(lambda s: float(near_u1(np.array(s))), 0.0, smid, epsabs=1e-14, epsrel=1e-13, limit=200)
    L_b, e_b = quad(lambda s: float(near_u0(np.array(s))), 0.0, np.sqrt(abs(u0 - umid)),
                    epsabs=1e-14, epsrel=1e-13, limit=200)
    L0 = L_a + L_b
    if e_a + e_b > max(tol, 1e-9 * L0):
        raise AccuracyError(f"time-of-flight quadrature error {e_a + e_b:.3g}")

    def rhs(xi, y):
        return [y[1] / D1, float(h1(np.array(y[0])))]

    sol = solve_ivp(rhs, (0.0, L0), [u1, 0.0], method="DOP853", rtol=1e-13, atol=1e-14, dense_output=True)
    dense = sol.sol
    seg = SlowSegment(u0=u0, u1=float(u1), L0=float(L0), J0=J, grid=np.zeros(0), u_s=np.zeros(0),
                      p_s=np.zeros(0), D1=D1)
    seg._dense = dense
    grid = np.linspace(0.0, 2 * L0, 801)
    u, p = seg.state(grid)
    seg.grid, seg.u_s, seg.p_s = grid, u, p
    H = p * p / (2 * D1) - (u - u0) * _mean_on(h1, u0, u)
    seg.energy_drift = float(np.max(np.abs(H - H[0])))
    return seg


# -------------------------------------------------------- singular orbit

@dataclass
class SingularOrbit:
    homoclinic: FastHomoclinic
    slow: SlowSegment
    J0: float
    p0: float = 0.0
    touchdown: float = 0.0
    defect: float = 0.0

    @property
    def u0(self):
        return self.slow.u0

    @property
    def L0(self):
        return self.slow.L0


def assemble_singular_orbit(hom: FastHomoclinic, slow: SlowSegment, match_tol=1e-7, J0=None) -> SingularOrbit:
    """Glue the homoclinic and the slow segment after checking the touch-down."""
    J = slow.J0 if J0 is None else float(np.atleast_1d(J0)[0])
    uE, pE = slow.state(np.array(2 * slow.L0))
    defect = float(max(abs(float(pE) + J), abs(float(uE) - slow.u0), abs(float(hom.u0[0]) - slow.u0)))
    if defect > match_tol:
        raise GluingError(f"touch-down mismatch {defect:.3g}", defect=defect)
    return SingularOrbit(homoclinic=hom, slow=slow, J0=J, p0=0.0, touchdown=-J, defect=defect)


def singular_orbit(model: ModelSpec, u0, **kw) -> SingularOrbit:
    """Homoclinic, take-off value and slow segment at u0 in one call."""
    hom = solve_fast_homoclinic(model, [u0], **kw)
    J = float(takeoff_integral(model, hom)[0])
    with warnings.catch_warnings():
        if model.weak_coupling:
            warnings.simplefilter("ignore", DegenerateSegmentWarning)
        slow = solve_slow_segment(model, u0, J)
    return assemble_singular_orbit(hom, slow)


# --------------------------------------------------------- periodic pulse

@dataclass
class PulseProfile:
    """2 L_eps periodic stationary pulse on the grid [-L_eps, L_eps]."""

    eps: float
    L_eps: float
    grid: np.ndarray
    u: np.ndarray
    p: np.ndarray
    v: np.ndarray
    q: np.ndarray
    shooting_residual: float = 0.0
    model: ModelSpec | None = field(default=None, repr=False, compare=False)
    _stages: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def m(self):
        return self.u.shape[1]

    @property
    def n(self):
        return self.v.shape[1]

    @property
    def states(self):
        return np.concatenate([self.u, self.p, self.v, self.q], axis=1)

    @property
    def h(self):
        return float(self.grid[1] - self.grid[0])

    def stage_states(self, model=None):
        """Existence-ODE states at the DOP853 stage points of every grid step.

        Each step is re-integrated from its left node, so the linearized
        problems see a state sequence consistent with the discrete flow.
        """
        if self._stages is None:
            model = model or self.model
            if model is None:
                raise ValueError("a model is required to rebuild stage states")
            self._stages = _rk_stage_states(model, self.eps, self.states[:-1], np.diff(self.grid))
        return self._stages


def _rk_stage_states(model, eps, y0, h):
    """Stage states of one nonlinear DOP853 step from each row of y0."""
    s = _rk.N_STAGES
    K = np.empty((y0.shape[0], s, y0.shape[1]))
    Y = np.empty_like(K)
    hh = h[:, None]
    for i in range(s):
        yi = y0 + hh * np.einsum("j,njd->nd", _rk.A[i, :i], K[:, :i]) if i else y0.copy()
        Y[:, i] = yi
        K[:, i] = existence_rhs(model, eps, yi)
    return Y


def _rk_sweep(model, eps, y, h, M):
    """M nonlinear DOP853 steps from every row of y; returns end states and stage states."""
    S = y.shape[0]
    stages = np.empty((S, M, _rk.N_STAGES, y.shape[1]))
    hh = np.full(S, h)
    cur = y.copy()
    for t in range(M):
        Y = _rk_stage_states(model, eps, cur, hh)
        stages[:, t] = Y
        K = existence_rhs(model, eps, Y)
        cur = cur + h * np.einsum("i,nid->nd", _rk.B, K)
    return cur, stages


def _initial_guess(model, eps, orbit: SingularOrbit, x):
    """Composite singular-orbit approximation on x >= 0."""
    hom, slow = orbit.homoclinic, orbit.slow
    J = orbit.J0
    xi = np.clip(eps * x, 0.0, 2 * slow.L0)
    us, ps = slow.state(xi)
    v, q = hom.state(x)
    # p picks up the pulse integral: -J + int_0^x H2(u0, v_h) + p_s(eps x)
    u0 = hom.u0
    h2 = model.H2(np.broadcast_to(u0, v.shape[:-1] + (model.m,)), v)[0][..., 0]
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (h2[1:] + h2[:-1]) * np.diff(x))])
    p = ps - J + cum
    return np.stack([us, p, v[..., 0], q[..., 0]], axis=-1)


def shoot_periodic_orbit(model: ModelSpec, eps, orbit: SingularOrbit, tol=1e-9, h=0.05, seg_dx=1.0,
                         max_iter=30, L_guess=None) -> PulseProfile:
    """Reversible half-period shooting for the 2 L_eps periodic pulse.

    Unknowns are the states at segment boundaries on [0, L] and L itself.
    Conditions: p = q = 0 at x = 0 and x = L, u(0) = u0 and continuity.  The
    step count is fixed, so the step size h = L / N moves with L.
    """
    if model.m != 1 or model.n != 1:
        raise AssumptionViolation("periodic shooting is implemented for m = n = 1")
    if eps <= 0:
        raise ValueError("eps must be positive")
    d = 4
    L = orbit.L0 / eps if L_guess is None else float(L_guess)
    M = max(1, int(round(seg_dx / h)))
    S = max(2, int(np.ceil(L / (M * h))))
    N = S * M
    xs = np.linspace(0.0, L, S + 1)
    Y = _initial_guess(model, eps, orbit, xs)
    u0 = orbit.u0

    def residual(Y, L):
        hh = L / N
        end, stages = _rk_sweep(model, eps, Y[:-1], hh, M)
        F = np.concatenate([
            (end - Y[1:]).ravel(),
            [Y[0, 1], Y[0, 3], Y[0, 0] - u0, Y[-1, 1], Y[-1, 3]],
        ])
        return F, stages

    def jacobian(Y, L, stages):
        hh = L / N
        Jst = existence_jacobian(model, eps, stages.reshape(-1, _rk.N_STAGES, d))
        R = kernels.step_maps(Jst.astype(complex), np.full(S * M, hh), _rk.A, _rk.B).real
        starts = np.arange(0, S * M + 1, M)
        P = kernels.chain(R.astype(complex), starts).real
        dL = 1e-7 * L
        Fp, _ = residual(Y, L + dL)
        Fm, _ = residual(Y, L - dL)
        col_L = (Fp - Fm) / (2 * dL)
        rows, cols, vals = [], [], []
        ii, jj = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
        for j in range(S):
            rows.append((j * d + ii).ravel())
            cols.append((j * d + jj).ravel())
            vals.append(P[j].ravel())
            rows.append(j * d + np.arange(d))
            cols.append((j + 1) * d + np.arange(d))
            vals.append(-np.ones(d))
        r0 = S * d
        bc = [(r0, 1), (r0 + 1, 3), (r0 + 2, 0)]
        for r, c in bc:
            rows.append([r])
            cols.append([c])
            vals.append([1.0])
        rows.append([r0 + 3])
        cols.append([S * d + 1])
        vals.append([1.0])
        rows.append([r0 + 4])
        cols.append([S * d + 3])
        vals.append([1.0])
        nunk = (S + 1) * d + 1
        Jm = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                           shape=(nunk, nunk)).tolil()
        Jm[:, nunk - 1] = col_L[:, None]
        return Jm.tocsc()

    F, stages = residual(Y, L)
    norm = np.max(np.abs(F))
    for it in range(max_iter):
        if norm < tol:
            break
        Jm = jacobian(Y, L, stages)
        try:
            delta = spla.spsolve(Jm, -F)
        except RuntimeError:
            raise ShootingError("singular shooting Jacobian", residual=norm,
                                hint="try a larger eps or an eps ladder") from None
        lam = 1.0
        while lam > 1e-4:
            Yn = Y + lam * delta[:-1].reshape(S + 1, d)
            Ln = L + lam * delta[-1]
            try:
                Fn, st_n = residual(Yn, Ln)
                nn = np.max(np.abs(Fn))
            except Exception:
                nn = np.inf
            if np.isfinite(nn) and nn < (1 - 0.25 * lam) * norm or (nn < tol):
                break
            lam *= 0.5
        else:
            raise ShootingError(f"Newton line search failed at residual {norm:.3g}", residual=norm,
                                hint="use an eps ladder (shoot_ladder) from larger eps")
        Y, L, F, stages, norm = Yn, Ln, Fn, st_n, nn
    if norm >= tol:
        raise ShootingError(f"Newton did not converge (residual {norm:.3g})", residual=norm,
                            hint="use an eps ladder (shoot_ladder) from larger eps")
    hh = L / N
    # node values on [0, L] from the converged segments
    nodes = np.empty((N + 1, d))
    cur = Y[:-1].copy()
    nodes[0::M][:S] = cur
    for t in range(M):
        Yst = _rk_stage_states(model, eps, cur, np.full(S, hh))
        K = existence_rhs(model, eps, Yst)
        cur = cur + hh * np.einsum("i,nid->nd", _rk.B, K)
        if t < M - 1:
            nodes[np.arange(S) * M + t + 1] = cur
    nodes[N] = Y[-1]
    nodes[0, 1] = nodes[0, 3] = 0.0
    Rv = reversor(model)
    full = np.concatenate([(nodes[:0:-1] * Rv), nodes])
    x = np.concatenate([-np.linspace(0.0, L, N + 1)[:0:-1], np.linspace(0.0, L, N + 1)])
    x[N] = 0.0
    prof = PulseProfile(eps=float(eps), L_eps=float(L), grid=x, u=full[:, :1], p=full[:, 1:2],
                        v=full[:, 2:3], q=full[:, 3:4], shooting_residual=float(norm), model=model)
    return prof


def shoot_ladder(model: ModelSpec, eps_list, orbit: SingularOrbit, **kw):
    """Profiles along a decreasing eps ladder, each L seeded from the previous rung."""
    eps_list = list(eps_list)
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps ladder must be strictly decreasing")
    out = []
    Lslow = orbit.L0
    for eps in eps_list:
        prof = shoot_periodic_orbit(model, eps, orbit, L_guess=Lslow / eps, **kw)
        Lslow = prof.L_eps * eps
        out.append(prof)
    return out


def profile_distance_to_singular(prof: PulseProfile, orbit: SingularOrbit):
    """|state(0) - (u0, p0, v_h(0), q_h(0))| at the pulse centre."""
    i0 = int(np.argmin(np.abs(prof.grid)))
    ref = np.array([orbit.u0, orbit.p0, orbit.homoclinic.state(np.array([0.0]))[0][0, 0], 0.0])
    return float(np.linalg.norm(prof.states[i0] - ref))


# ------------------------------------------------------------ file format

def write_profile(prof: PulseProfile, path):
    """Columnar text: header key=value lines, then x, u, p, v, q per row."""
    with open(path, "w") as fh:
        fh.write(f"m={prof.m}\n")
        fh.write(f"n={prof.n}\n")
        fh.write(f"eps={prof.eps!r}\n")
        fh.write(f"L_eps={prof.L_eps!r}\n")
        fh.write(f"grid_size={len(prof.grid)}\n")
        fh.write(f"shooting_residual={prof.shooting_residual!r}\n")
        data = np.column_stack([prof.grid, prof.states])
        for row in data:
            fh.write(" ".join(repr(float(t)) for t in row) + "\n")


def read_profile(path, model=None) -> PulseProfile:
    header = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if "=" in line:
                k, v = line.split("=", 1)
                header[k.strip()] = v.strip()
            else:
                rows.append([float(t) for t in line.split()])
    try:
        m, n = int(header["m"]), int(header["n"])
        size = int(header["grid_size"])
        data = np.array(rows, dtype=float)
        if data.shape != (size, 1 + 2 * m + 2 * n):
            raise ValueError(f"expected {size} rows of {1 + 2 * m + 2 * n} columns")
    except (KeyError, ValueError) as exc:
        from .errors import ConfigError
        raise ConfigError(f"malformed profile file {path}: {exc}") from None
    return PulseProfile(eps=float(header["eps"]), L_eps=float(header["L_eps"]), grid=data[:, 0],
                        u=data[:, 1:1 + m], p=data[:, 1 + m:1 + 2 * m], v=data[:, 1 + 2 * m:1 + 2 * m + n],
                        q=data[:, 1 + 2 * m + n:], shooting_residual=float(header.get("shooting_residual", 0.0)),
                        model=model)
