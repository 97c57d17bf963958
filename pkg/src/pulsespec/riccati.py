"""Riccati block diagonalization of the slow-fast linear stability problem.

With delta = sqrt(eps) the linearization reads

    s' = delta (A11 s + A12 f),    f' = A21 s + A22 f,

and the substitution (s, f) = H (s_hat, f_hat),
H = [[I, -delta S], [U, I - delta U S]], decouples it when

    U' = A22 U - delta U A11 - delta U A12 U + A21,
    S' = delta (A11 + A12 U) S - S (A22 - delta U A12) - A12.

U is computed as the fixed point of a Picard map whose every step is a
periodic linear solve; S then solves a linear equation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _rk, kernels
from .errors import ConditioningError, ContractionError
from .lintools import _fit_decay, fill_nodes, segment_starts, solve_shooting
from .model import ModelSpec, eval_nonlinearities


@dataclass
class SlowFastBlocks:
    """Stage samples of the four coefficient blocks on a common grid."""

    eps: float
    grid: np.ndarray
    A11: np.ndarray
    A12: np.ndarray
    A21: np.ndarray
    A22: np.ndarray
    period: float | None = None
    lam: complex = 0j

    @property
    def delta(self):
        return float(np.sqrt(self.eps))

    @property
    def h(self):
        return np.diff(self.grid)

    def check(self):
        N, s = self.A11.shape[:2]
        m2, n2 = self.A11.shape[2], self.A22.shape[2]
        shapes = {"A11": (m2, m2), "A12": (m2, n2), "A21": (n2, m2), "A22": (n2, n2)}
        for name, shp in shapes.items():
            arr = getattr(self, name)
            if arr.shape != (N, s) + shp:
                raise ValueError(f"{name} has shape {arr.shape}, expected {(N, s) + shp}")
        if len(self.grid) != N + 1:
            raise ValueError("grid does not match the number of steps")

    def periodicity_defect(self):
        """Largest jump of the coefficients between the two ends of the grid."""
        if self.period is None:
            return 0.0
        return float(max(np.max(np.abs(getattr(self, b)[0, 0] - getattr(self, b)[-1, -1]))
                         for b in ("A11", "A12", "A21", "A22")))


def stability_blocks(model: ModelSpec, profile, lam) -> SlowFastBlocks:
    """Blocks of the linearization about a periodic pulse (slow rows divided by delta)."""
    from .evans import _stability

    sp_ = _stability(model, profile)
    A = sp_.A(lam)
    m2 = 2 * model.m
    d = sp_.delta
    return SlowFastBlocks(eps=profile.eps, grid=profile.grid, A11=A[..., :m2, :m2] / d, A12=A[..., :m2, m2:] / d,
                          A21=A[..., m2:, :m2], A22=A[..., m2:, m2:], period=2 * profile.L_eps, lam=complex(lam))


def limit_blocks(model: ModelSpec, hom, grid, lam, period=None) -> SlowFastBlocks:
    """eps = 0 blocks: the fast limit coefficients along the homoclinic on ``grid``."""
    m, n = model.m, model.n
    xs = _rk.stage_points(grid)
    v, _ = hom.state(xs)
    u = np.broadcast_to(hom.u0, xs.shape + (m,))
    nl = eval_nonlinearities(model, u, v, 0.0, check_domain=False)
    A22 = np.zeros(xs.shape + (2 * n, 2 * n), dtype=complex)
    A22[..., :n, n:] = np.diag(1.0 / model.D2)
    A22[..., n:, :n] = nl.G_v + complex(lam) * np.eye(n)
    A21 = np.zeros(xs.shape + (2 * n, 2 * m), dtype=complex)
    A21[..., n:, :m] = nl.G_u
    A11 = np.zeros(xs.shape + (2 * m, 2 * m), dtype=complex)
    A11[..., :m, m:] = np.diag(1.0 / model.D1)
    A11[..., m:, :m] = nl.H2_u
    A12 = np.zeros(xs.shape + (2 * m, 2 * n), dtype=complex)
    A12[..., m:, :n] = nl.H2_v
    return SlowFastBlocks(0.0, np.asarray(grid, float), A11, A12, A21, A22, period, complex(lam))


@dataclass
class RiccatiTransform:
    blocks: SlowFastBlocks
    U: np.ndarray
    S: np.ndarray
    U_stages: np.ndarray
    S_stages: np.ndarray
    iteration_count: int
    contraction_ratio: float
    increments: list = field(default_factory=list)
    U_bound: float | None = None
    S_bound: float | None = None

    @property
    def grid(self):
        return self.blocks.grid


def _periodic_affine(A, F, h, every):
    """Periodic solution of Z' = A Z + F on the sampled grid (node and stage values)."""
    R, r = kernels.step_affine(A, F, h, _rk.A, _rk.B)
    starts = segment_starts(R.shape[0], every)
    P, p = kernels.chain_affine(R, r, starts)
    bnd = solve_shooting(P, p, gamma=1.0)
    nodes = fill_nodes(R, r, starts, bnd)
    stages = kernels.stage_values(A, F, h, _rk.A, _rk.B, nodes[:-1])
    return nodes, stages


def _line_affine(A, F, h, every):
    from .lintools import SampledSystem, solve_line_bvp
    x = np.concatenate([[0.0], np.cumsum(h)])
    return solve_line_bvp(SampledSystem(x, A, F), every=every)


def _inhom_solve(blocks, F, every):
    if blocks.period is not None:
        return _periodic_affine(blocks.A22, F, blocks.h, every)
    return _line_affine(blocks.A22, F, blocks.h, every)


def solve_riccati_U(blocks: SlowFastBlocks, tol=1e-12, max_iter=60, every=20):
    """Picard iteration for U seeded with the eps = 0 bounded solution.

    Returns (U_nodes, U_stages, iterations, contraction_ratio, increments).
    """
    blocks.check()
    d = blocks.delta
    nodes, stages = _inhom_solve(blocks, blocks.A21, every)
    if d == 0.0:
        return nodes, stages, 1, 0.0, [0.0]
    incs = []
    for it in range(1, max_iter + 1):
        F = blocks.A21 - d * np.matmul(stages, blocks.A11) - d * np.matmul(np.matmul(stages, blocks.A12), stages)
        new_nodes, new_stages = _inhom_solve(blocks, F, every)
        inc = float(np.max(np.abs(new_nodes - nodes)))
        incs.append(inc)
        nodes, stages = new_nodes, new_stages
        if len(incs) >= 3 and incs[-1] > incs[-2] > incs[-3] and incs[-1] > 1e-8:
            raise ContractionError(f"Picard map is not contracting (ratio {incs[-1] / incs[-2]:.3g}); "
                                   f"eps = {blocks.eps} is above the empirical threshold",
                                   ratio=incs[-1] / incs[-2])
        if inc < tol * (1 + np.max(np.abs(nodes))):
            break
    else:
        raise ContractionError(f"Picard iteration did not reach tol after {max_iter} steps",
                               ratio=incs[-1] / incs[-2] if len(incs) > 1 else float("nan"))
    # asymptotic rate from the tail of the increment sequence
    tail = [v for v in incs if v > 0][-4:]
    ratio = float((tail[-1] / tail[0]) ** (1.0 / (len(tail) - 1))) if len(tail) > 1 else 0.0
    return nodes, stages, it, ratio, incs


def _sylvester_solve(blocks, Left, Right, F, every=20):
    """Bounded (periodic) solution of X' = Left X - X Right + F by vectorization."""
    r, c = F.shape[-2], F.shape[-1]
    I_r, I_c = np.eye(r), np.eye(c)
    # column-major vec: vec(L X - X R) = (I kron L - R^T kron I) vec X
    K = np.einsum("ab,nsij->nsaibj", I_c, Left).reshape(F.shape[:2] + (r * c, r * c))
    K = K - np.einsum("nsba,ij->nsaibj", Right, I_r).reshape(K.shape)
    f = np.swapaxes(F, -1, -2).reshape(F.shape[:2] + (r * c, 1))
    if blocks.period is not None:
        nodes, stages = _periodic_affine(K, f, blocks.h, every)
    else:
        nodes, stages = _line_affine(K, f, blocks.h, every)
    unvec = lambda a: np.swapaxes(a[..., 0].reshape(a.shape[:-2] + (c, r)), -1, -2)
    return unvec(nodes), unvec(stages)


def solve_riccati_U_newton(blocks: SlowFastBlocks, tol=1e-12, max_iter=30, every=20, seed=None):
    """Newton iteration for the bounded U, for eps above the Picard threshold.

    Each step solves the linearized equation
    Z' = (A22 - d U_k A12) Z - Z d (A11 + A12 U_k) + A21 + d U_k A12 U_k.
    """
    d = blocks.delta
    if seed is None:
        nodes, stages = _inhom_solve(blocks, blocks.A21, every)
    else:
        nodes, stages = seed
    incs = []
    for it in range(1, max_iter + 1):
        UA = np.matmul(stages, blocks.A12)
        Left = blocks.A22 - d * UA
        Right = d * (blocks.A11 + np.matmul(blocks.A12, stages))
        F = blocks.A21 + d * np.matmul(UA, stages)
        new_nodes, new_stages = _sylvester_solve(blocks, Left, Right, F, every)
        inc = float(np.max(np.abs(new_nodes - nodes)))
        incs.append(inc)
        nodes, stages = new_nodes, new_stages
        if not np.isfinite(inc):
            break
        if inc < tol * (1 + np.max(np.abs(nodes))):
            return nodes, stages, it, 0.0, incs
    raise ContractionError("Newton iteration for U did not converge", ratio=float("nan"))


def solve_riccati_S(blocks: SlowFastBlocks, U_stages, every=20):
    """Bounded (periodic) solution of the linear equation for S."""
    d = blocks.delta
    M1 = d * (blocks.A11 + np.matmul(blocks.A12, U_stages))
    M2 = blocks.A22 - d * np.matmul(U_stages, blocks.A12)
    return _sylvester_solve(blocks, M1, M2, -blocks.A12, every)


def _fd_periodic(y, h, order=8):
    """Periodic central differences on nodes y[0..N] with y[N] == y[0]."""
    from .lintools import _fd_weights
    half = order // 2
    core = y[:-1]
    w = _fd_weights(np.arange(-half, half + 1))
    out = np.zeros_like(core)
    for j, o in enumerate(range(-half, half + 1)):
        if o:
            out = out + w[j] * np.roll(core, -o, axis=0)
    out = out / h
    return np.concatenate([out, out[:1]], axis=0)


def _fd_line(y, h):
    from .lintools import central_difference
    return central_difference(y, h)


def _node_blocks(blocks):
    """Coefficient blocks at the grid nodes (stage 0 of each step, periodic close)."""
    out = []
    for name in ("A11", "A12", "A21", "A22"):
        a = getattr(blocks, name)
        out.append(np.concatenate([a[:, 0], a[-1:, -1]], axis=0) if blocks.period is None
                   else np.concatenate([a[:, 0], a[:1, 0]], axis=0))
    return out


def riccati_residuals(blocks: SlowFastBlocks, U, S):
    """Pointwise residuals of both Riccati equations with 8th-order differences."""
    h = float(blocks.h[0])
    d = blocks.delta
    A11, A12, A21, A22 = _node_blocks(blocks)
    dU = _fd_periodic(U, h) if blocks.period is not None else _fd_line(U, h)
    dS = _fd_periodic(S, h) if blocks.period is not None else _fd_line(S, h)
    rU = dU - (A22 @ U - d * U @ A11 - d * U @ A12 @ U + A21)
    rS = dS - (d * (A11 + A12 @ U) @ S - S @ (A22 - d * U @ A12) - A12)
    return np.max(np.abs(rU), axis=(1, 2)), np.max(np.abs(rS), axis=(1, 2))


def _dichotomy_constants(blocks, every=20):
    """Fitted (K, mu) from the growth of the swept stable frame of A22."""
    R = kernels.step_maps(blocks.A22[::-1], -blocks.h[::-1], _rk.A, _rk.B)
    n2 = blocks.A22.shape[2]
    Y0 = np.linalg.qr(np.random.default_rng(0).standard_normal((n2, n2 // 2)))[0].astype(complex)
    Y, logs = kernels.frame_sweep(R, Y0, every)
    x = blocks.grid[::-1]
    growth = -(logs - logs[0])
    K, mu = _fit_decay(np.abs(x - x[0]), growth)
    return K, max(mu, 1e-3)


def riccati_transform(model: ModelSpec, profile, lam, tol=1e-12, every=20, blocks=None,
                      method="picard") -> RiccatiTransform:
    """U, S and bounds for the stability blocks of a profile at lam.

    ``method='newton'`` replaces the Picard map by Newton steps on the same
    equation; the contraction ratio is then reported as 0.
    """
    if blocks is None:
        blocks = stability_blocks(model, profile, lam)
    if method == "picard":
        U, Ust, it, ratio, incs = solve_riccati_U(blocks, tol=tol, every=every)
    elif method == "newton":
        U, Ust, it, ratio, incs = solve_riccati_U_newton(blocks, tol=tol, every=every)
    else:
        raise ValueError(f"unknown method {method!r}")
    S, Sst = solve_riccati_S(blocks, Ust, every=every)
    K, mu = _dichotomy_constants(blocks, every)
    sup = lambda a: float(np.max(np.linalg.norm(a, ord=2, axis=(-2, -1))))
    tr = RiccatiTransform(blocks, U, S, Ust, Sst, it, ratio, incs)
    tr.U_bound = 8 * K / mu * sup(blocks.A21)
    tr.S_bound = 8 * K / mu * sup(blocks.A12)
    return tr


def inner_solution(model: ModelSpec, profile, hom, lam, every=20):
    """X_in on the profile grid: the eps = 0 bounded solution of Z' = A22 Z + A21."""
    bl = limit_blocks(model, hom, profile.grid, lam, period=2 * profile.L_eps)
    nodes, _ = _inhom_solve(bl, bl.A21, every)
    return nodes


def inner_distance(model: ModelSpec, profile, hom, lam, transform=None, method="picard"):
    """sup_x |U(x) - X_in(x)| for the profile at lam."""
    if transform is None:
        transform = riccati_transform(model, profile, lam, method=method)
    return float(np.max(np.abs(transform.U - inner_solution(model, profile, hom, lam))))


@dataclass
class Diagonalized:
    slow_stages: np.ndarray
    fast_stages: np.ndarray
    defect: float
    det_H_deviation: float
    H: np.ndarray = field(repr=False, default=None)

    def slow(self, i):
        return self.slow_stages[i]

    def fast(self, i):
        return self.fast_stages[i]


def transform_matrix(U, S, delta):
    m2, n2 = U.shape[-1], U.shape[-2]
    H = np.zeros(U.shape[:-2] + (m2 + n2, m2 + n2), dtype=complex)
    H[..., :m2, :m2] = np.eye(m2)
    H[..., :m2, m2:] = -delta * S
    H[..., m2:, :m2] = U
    H[..., m2:, m2:] = np.eye(n2) - delta * U @ S
    return H


def diagonalize(transform: RiccatiTransform) -> Diagonalized:
    """Decoupled slow and fast coefficients plus the off-diagonal defect.

    The defect is the sup of the off-diagonal blocks of H^-1 (A H - H') at
    the nodes, with H' from 8th-order differences.
    """
    b = transform.blocks
    d = b.delta
    Ust, Sst = transform.U_stages, transform.S_stages
    slow = d * (b.A11 + np.matmul(b.A12, Ust))
    fast = b.A22 - d * np.matmul(Ust, b.A12)
    H = transform_matrix(transform.U, transform.S, d)
    detH = np.linalg.det(H)
    dev = float(np.max(np.abs(detH - 1.0)))
    if not np.all(np.isfinite(detH)) or np.min(np.abs(detH)) < 1e-8:
        raise ConditioningError("transformation matrix H is numerically singular")
    A11, A12, A21, A22 = _node_blocks(b)
    m2 = A11.shape[-1]
    A = np.zeros(H.shape, dtype=complex)
    A[..., :m2, :m2] = d * A11
    A[..., :m2, m2:] = d * A12
    A[..., m2:, :m2] = A21
    A[..., m2:, m2:] = A22
    h = float(b.h[0])
    dH = _fd_periodic(H, h) if b.period is not None else _fd_line(H, h)
    C = np.linalg.solve(H, A @ H - dH)
    defect = float(max(np.max(np.abs(C[..., :m2, m2:])), np.max(np.abs(C[..., m2:, :m2]))))
    return Diagonalized(slow, fast, defect, dev, H)
