"""Reaction-diffusion model class and the generalized Gierer-Meinhardt family.

A model is a pair of diffusion matrices together with three nonlinearities

    u_t = D1 u_xixi - H1(u, v, eps) - H2(u, v) / eps
    v_t = eps^2 D2 v_xixi - G(u, v, eps)

given as evaluator callbacks that return a value and both partial Jacobians.
Evaluators must accept batched inputs: ``u`` of shape (..., m) and ``v`` of
shape (..., n).
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .errors import DomainError, EvaluationError

Evaluator = Callable[..., tuple]


class Nonlinearities(NamedTuple):
    H1: np.ndarray
    H2: np.ndarray
    G: np.ndarray
    H1_u: np.ndarray
    H1_v: np.ndarray
    H2_u: np.ndarray
    H2_v: np.ndarray
    G_u: np.ndarray
    G_v: np.ndarray


@dataclass(frozen=True)
class ModelSpec:
    """Immutable description of a slow-fast reaction-diffusion model.

    Parameters
    ----------
    m, n : int
        Number of slow (u) and fast (v) components.
    D1, D2 : array_like
        Diagonals of the diffusion matrices.
    H1, G : callable
        ``f(u, v, eps) -> (value, d/du, d/dv)``.
    H2 : callable
        ``f(u, v) -> (value, d/du, d/dv)``.
    domain_box : tuple
        ``(u_lo, u_hi, v_lo, v_hi)``, each an array of matching length.
    """

    m: int
    n: int
    D1: np.ndarray
    D2: np.ndarray
    H1: Evaluator
    H2: Evaluator
    G: Evaluator
    domain_box: tuple
    name: str = "custom"
    params: dict = field(default_factory=dict)
    weak_coupling: bool = False

    def __post_init__(self):
        object.__setattr__(self, "D1", np.asarray(self.D1, dtype=float).reshape(self.m))
        object.__setattr__(self, "D2", np.asarray(self.D2, dtype=float).reshape(self.n))
        lo_u, hi_u, lo_v, hi_v = (np.asarray(b, dtype=float) for b in self.domain_box)
        object.__setattr__(
            self,
            "domain_box",
            (lo_u.reshape(self.m), hi_u.reshape(self.m), lo_v.reshape(self.n), hi_v.reshape(self.n)),
        )

    @property
    def dim(self):
        return 2 * (self.m + self.n)

    def fingerprint(self):
        payload = json.dumps(
            {"name": self.name, "m": self.m, "n": self.n, "D1": self.D1.tolist(),
             "D2": self.D2.tolist(), "params": self.params},
            sort_keys=True, default=str,
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _check_domain(model, u, v):
    lo_u, hi_u, lo_v, hi_v = model.domain_box
    for name, arr, lo, hi in (("u", u, lo_u, hi_u), ("v", v, lo_v, hi_v)):
        bad = (arr < lo) | (arr > hi)
        if np.any(bad):
            idx = np.argwhere(bad)[0]
            comp = int(idx[-1])
            val = float(arr[tuple(idx)])
            raise DomainError(
                f"{name}[{comp}] = {val:.6g} outside domain [{lo[comp]:.6g}, {hi[comp]:.6g}]",
                coordinate=f"{name}[{comp}]", value=val,
            )


def eval_nonlinearities(model: ModelSpec, u, v, eps=0.0, check_domain=True) -> Nonlinearities:
    """Values and all six partial-derivative blocks at (u, v, eps)."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if check_domain:
        _check_domain(model, u, v)
    h1, h1u, h1v = model.H1(u, v, eps)
    h2, h2u, h2v = model.H2(u, v)
    g, gu, gv = model.G(u, v, eps)
    out = Nonlinearities(*(np.asarray(a, dtype=float) for a in (h1, h2, g, h1u, h1v, h2u, h2v, gu, gv)))
    for name, arr in zip(out._fields, out):
        if not np.all(np.isfinite(arr)):
            raise EvaluationError(f"non-finite {name} at u={u.ravel()[:4]}, v={v.ravel()[:4]}")
    return out


# ---------------------------------------------------------------- GM family

def _powd(x, a):
    """x**a and its derivative, exact at x = 0 for integer exponents."""
    if a == 0:
        return np.ones_like(x), np.zeros_like(x)
    if a == 1:
        return x.copy(), np.ones_like(x)
    if float(a).is_integer() and a > 1:
        ai = int(a)
        return x ** ai, ai * x ** (ai - 1)
    return x ** a, a * x ** (a - 1)


_SLOW_VARIANTS = ("mu", "minus_mu", "sin", "custom")


@dataclass(frozen=True)
class GMParams:
    """Generalized Gierer-Meinhardt model with slow nonlinearity f.

    ``variant`` selects f(u) = mu u ("mu", slowly linear saddle case),
    f(u) = -mu u ("minus_mu", center case), f(u) = sin u ("sin"), or a user
    pair ``(f, fprime)`` ("custom").  ``coupling`` multiplies H2; setting it
    to zero gives the weakly coupled model H2 = 0.
    """

    alpha1: float = 0.0
    alpha2: float = 2.0
    beta1: int = 2
    beta2: int = 2
    variant: str = "mu"
    mu: float = 1.0
    f: Callable | None = None
    fprime: Callable | None = None
    coupling: float = 1.0
    u_range: tuple = (-50.0, 50.0)
    v_range: tuple = (-50.0, 50.0)

    def __post_init__(self):
        if int(self.beta1) != self.beta1 or int(self.beta2) != self.beta2:
            raise ValueError("beta1 and beta2 must be integers")
        if self.beta1 < 2 or self.beta2 < 2:
            raise ValueError("beta1, beta2 must be >= 2")
        if self.variant not in _SLOW_VARIANTS:
            raise ValueError(f"unknown slow variant {self.variant!r}")
        if self.variant == "custom" and (self.f is None or self.fprime is None):
            raise ValueError("custom variant needs f and fprime")

    def slow_f(self):
        mu = float(self.mu)
        if self.variant == "mu":
            return (lambda u: mu * u), (lambda u: mu * np.ones_like(u))
        if self.variant == "minus_mu":
            return (lambda u: -mu * u), (lambda u: -mu * np.ones_like(u))
        if self.variant == "sin":
            return np.sin, np.cos
        return self.f, self.fprime

    def to_model(self) -> ModelSpec:
        a1, a2 = float(self.alpha1), float(self.alpha2)
        b1, b2 = int(self.beta1), int(self.beta2)
        f, fp = self.slow_f()
        c = float(self.coupling)
        lo = self.u_range[0]
        if not (a1.is_integer() and a2.is_integer()):
            lo = max(lo, 1e-8)

        def H1(u, v, eps):
            u1 = u[..., 0]
            val = np.asarray(f(u1), dtype=float)[..., None]
            du = np.asarray(fp(u1), dtype=float)[..., None, None]
            dv = np.zeros(u.shape[:-1] + (1, 1))
            return val, du, dv

        def H2(u, v):
            u1, v1 = u[..., 0], v[..., 0]
            pa, dpa = _powd(u1, a1)
            pb, dpb = _powd(v1, b1)
            val = (-c * pa * pb)[..., None]
            du = (-c * dpa * pb)[..., None, None]
            dv = (-c * pa * dpb)[..., None, None]
            return val, du, dv

        def G(u, v, eps):
            u1, v1 = u[..., 0], v[..., 0]
            pa, dpa = _powd(u1, a2)
            pb, dpb = _powd(v1, b2)
            val = (v1 - pa * pb)[..., None]
            du = (-dpa * pb)[..., None, None]
            dv = (1.0 - pa * dpb)[..., None, None]
            return val, du, dv

        params = {"alpha1": a1, "alpha2": a2, "beta1": b1, "beta2": b2,
                  "variant": self.variant, "mu": float(self.mu), "coupling": c}
        return ModelSpec(
            m=1, n=1, D1=[1.0], D2=[1.0], H1=H1, H2=H2, G=G,
            domain_box=([lo], [self.u_range[1]], [self.v_range[0]], [self.v_range[1]]),
            name="gierer_meinhardt", params=params, weak_coupling=(c == 0.0),
        )


def gierer_meinhardt(**kwargs) -> ModelSpec:
    return GMParams(**kwargs).to_model()


# ------------------------------------------------------------ validation

@dataclass(frozen=True)
class Violation:
    invariant: str
    u: tuple
    v: tuple
    detail: str


@dataclass
class ValidationReport:
    violations: list

    def __bool__(self):
        return not self.violations

    def kinds(self):
        return sorted({v.invariant for v in self.violations})


def _sample_box(model, rng, count):
    lo_u, hi_u, lo_v, hi_v = model.domain_box
    # keep samples in a moderate window so polynomial terms stay representable
    clip = lambda lo, hi: (np.maximum(lo, -5.0), np.minimum(hi, 5.0))
    lu, hu = clip(lo_u, hi_u)
    lv, hv = clip(lo_v, hi_v)
    u = rng.uniform(lu, hu, size=(count, model.m))
    v = rng.uniform(lv, hv, size=(count, model.n))
    return u, v


def finite_difference_partials(model, u, v, eps, step=1e-6):
    """Central-difference Jacobian blocks used to check the analytic ones."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    m, n = model.m, model.n
    blocks = {k: [] for k in ("H1_u", "H1_v", "H2_u", "H2_v", "G_u", "G_v")}
    for which, dim in (("u", m), ("v", n)):
        cols = {k: [] for k in ("H1", "H2", "G")}
        for j in range(dim):
            du = np.zeros(m)
            dv = np.zeros(n)
            hj = step * max(1.0, abs((u if which == "u" else v)[j]))
            (du if which == "u" else dv)[j] = hj
            p = eval_nonlinearities(model, u + du, v + dv, eps, check_domain=False)
            q = eval_nonlinearities(model, u - du, v - dv, eps, check_domain=False)
            for key in cols:
                cols[key].append((getattr(p, key) - getattr(q, key)) / (2 * hj))
        for key in cols:
            blocks[f"{key}_{which}"] = np.stack(cols[key], axis=-1)
    return blocks


def validate_model(model: ModelSpec, sample_count: int = 100, eps: float = 0.0, seed: int = 0,
                   fd_rtol: float = 1e-5, check_partials: bool = True) -> ValidationReport:
    """Sample the domain box and report violated structural assumptions."""
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = np.random.default_rng(seed)
    out = []
    if np.any(model.D1 <= 0) or np.any(model.D2 <= 0):
        out.append(Violation("diffusion", (), (), "diffusion diagonals must be positive"))
    u, v = _sample_box(model, rng, sample_count)
    zero_v = np.zeros((sample_count, model.n))
    nl0 = eval_nonlinearities(model, u, zero_v, 0.0, check_domain=False)
    nle = eval_nonlinearities(model, u, zero_v, eps, check_domain=False)
    for i in range(sample_count):
        wu, wv = tuple(u[i]), tuple(zero_v[i])
        scale = 1.0 + np.max(np.abs(u[i]))
        if np.max(np.abs(nl0.H2[i])) > 1e-12 * scale:
            out.append(Violation("S1:H2(u,0)=0", wu, wv, f"H2 = {nl0.H2[i]}"))
        if np.max(np.abs(nle.G[i])) > 1e-12 * scale:
            out.append(Violation("S1:G(u,0)=0", wu, wv, f"G = {nle.G[i]}"))
        gv = nl0.G_v[i]
        sym = 0.5 * (gv + gv.T)
        if np.min(np.linalg.eigvalsh(sym)) <= 0:
            out.append(Violation("S2:Re dvG(u,0,0)>0", wu, wv, f"dvG = {gv.tolist()}"))
    if check_partials:
        for i in range(min(sample_count, 20)):
            nl = eval_nonlinearities(model, u[i], v[i], eps, check_domain=False)
            fd = finite_difference_partials(model, u[i], v[i], eps)
            for key, approx in fd.items():
                exact = getattr(nl, key)
                err = np.max(np.abs(exact - approx))
                if err > fd_rtol * (1.0 + np.max(np.abs(exact))):
                    out.append(Violation(f"partials:{key}", tuple(u[i]), tuple(v[i]), f"max err {err:.3g}"))
    return ValidationReport(out)


# ------------------------------------------------ existence vector field

def split_state(model, y):
    m, n = model.m, model.n
    return y[..., :m], y[..., m:2 * m], y[..., 2 * m:2 * m + n], y[..., 2 * m + n:]


def existence_rhs(model: ModelSpec, eps: float, y, check_domain=True):
    """Right-hand side of the stationary problem in the fast variable x.

    D1 u' = eps p, p' = eps H1 + H2, D2 v' = q, q' = G.
    """
    y = np.asarray(y, dtype=float)
    u, p, v, q = split_state(model, y)
    nl = eval_nonlinearities(model, u, v, eps, check_domain=check_domain)
    return np.concatenate([eps * p / model.D1, eps * nl.H1 + nl.H2, q / model.D2, nl.G], axis=-1)


def existence_jacobian(model: ModelSpec, eps: float, y, check_domain=True):
    y = np.asarray(y, dtype=float)
    m, n = model.m, model.n
    u, p, v, q = split_state(model, y)
    nl = eval_nonlinearities(model, u, v, eps, check_domain=check_domain)
    d = 2 * (m + n)
    J = np.zeros(y.shape[:-1] + (d, d))
    iu, ip, iv, iq = slice(0, m), slice(m, 2 * m), slice(2 * m, 2 * m + n), slice(2 * m + n, d)
    J[..., iu, ip] = np.diag(eps / model.D1)
    J[..., ip, iu] = eps * nl.H1_u + nl.H2_u
    J[..., ip, iv] = eps * nl.H1_v + nl.H2_v
    J[..., iv, iq] = np.diag(1.0 / model.D2)
    J[..., iq, iu] = nl.G_u
    J[..., iq, iv] = nl.G_v
    return J


def reversor(model: ModelSpec):
    """The involution (u, p, v, q) -> (u, -p, v, -q) as a sign vector."""
    m, n = model.m, model.n
    return np.concatenate([np.ones(m), -np.ones(m), np.ones(n), -np.ones(n)])
