import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import linalg as sla

from pulsespec import _rk
from pulsespec.errors import AssumptionViolation, NotHyperbolicError, RejectionError
from pulsespec.lintools import (SampledSystem, asymptotic_spectral_split, central_difference, dichotomy_halfline,
                                dichotomy_line, evolve, fill_nodes, floquet_logdet, minimal_opening,
                                segment_starts, solve_shooting, sparse_logdet, spectral_bases, uniform_grid)

seeds = st.integers(0, 2 ** 32 - 1)


def hyperbolic(rng, k, ks):
    """Random real matrix with ks eigenvalues of real part <= -0.5 and k - ks >= 0.5."""
    re = np.concatenate([-rng.uniform(0.5, 2, ks), rng.uniform(0.5, 2, k - ks)])
    D = np.diag(re + 1j * rng.uniform(-1, 1, k))
    V = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k)) + 3 * np.eye(k)
    return V @ D @ np.linalg.inv(V)


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_evolve_scalar_modulated(seed):
    # A(x) = a(x) M commutes with itself, so T = expm((int a) M)
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(3, 3)) * 0.5
    a = lambda x: 1 + 0.5 * np.sin(x)
    T = evolve(lambda x: a(x) * M, 0.0, 2.0)
    intg = 2.0 + 0.5 * (1 - np.cos(2.0))
    assert np.allclose(T.matrix, sla.expm(intg * M), atol=1e-10, rtol=1e-10)
    assert T.error_estimate < 1e-8


def test_evolve_identity_for_empty_interval():
    T = evolve(lambda x: np.eye(2), 1.0, 1.0)
    assert np.array_equal(T.matrix, np.eye(2))


def test_spectral_split_rejects_center():
    with pytest.raises(NotHyperbolicError):
        spectral_bases(np.diag([1.0, 1e-12]))


@settings(max_examples=20, deadline=None)
@given(seeds, st.integers(2, 5))
def test_spectral_projections(seed, k):
    rng = np.random.default_rng(seed)
    ks = int(rng.integers(1, k))
    A = hyperbolic(rng, k, ks)
    Ps, Pu, alpha = asymptotic_spectral_split(A)
    assert np.allclose(Ps @ Ps, Ps, atol=1e-9) and np.allclose(Ps + Pu, np.eye(k))
    assert np.allclose(A @ Ps, Ps @ A, atol=1e-9)
    assert np.trace(Ps).real == pytest.approx(ks)
    assert alpha >= 0.5 - 1e-12


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, np.pi / 2 - 0.01))
def test_minimal_opening_lines_in_plane(theta):
    M = np.array([[1.0], [0.0]])
    N = np.array([[np.cos(theta)], [np.sin(theta)]])
    # closest points on unit sphere of one line to the other: sin(theta) for theta <= pi/2
    assert minimal_opening(M, N) == pytest.approx(np.sin(theta), rel=1e-10)
    assert minimal_opening(N, M) == pytest.approx(minimal_opening(M, N), rel=1e-12)


def test_minimal_opening_rank_deficient():
    with pytest.raises(AssumptionViolation):
        minimal_opening(np.array([[1.0, 2.0], [2.0, 4.0]]), np.eye(2)[:, :1])


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_sparse_logdet_matches_dense(seed):
    rng = np.random.default_rng(seed)
    K = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
    K[rng.random((12, 12)) < 0.5] = 0
    K += 4 * np.eye(12)
    phase, logabs = sparse_logdet(K)
    s, l = np.linalg.slogdet(K)
    assert logabs == pytest.approx(l, rel=1e-12, abs=1e-12)
    assert abs(phase - s) < 1e-10


@settings(max_examples=20, deadline=None)
@given(seeds, st.complex_numbers(min_magnitude=0.2, max_magnitude=3))
def test_floquet_logdet(seed, gamma):
    rng = np.random.default_rng(seed)
    P = rng.normal(size=(5, 3, 3)) * 0.7 + np.eye(3)
    M = np.eye(3)
    for Pj in P:
        M = Pj @ M
    phase, logabs = floquet_logdet(P.astype(complex), gamma)
    ref = np.linalg.det(M - gamma * np.eye(3))
    assert abs(phase * np.exp(logabs) - ref) < 1e-10 * max(1.0, abs(ref))


def test_shooting_periodic_solution():
    # constant hyperbolic A with constant forcing: the periodic solution is -A^-1 f
    A = np.array([[0.3, 1.0], [1.0, -0.2]], complex)
    x = uniform_grid(0, 6, 0.05)
    sys = SampledSystem(x, np.broadcast_to(A, (len(x) - 1, _rk.N_STAGES, 2, 2)).copy(),
                        np.ones((len(x) - 1, _rk.N_STAGES, 2, 1), complex))
    R, r = sys.step_affine()
    starts = segment_starts(len(x) - 1, 20)
    from pulsespec import kernels
    P, p = kernels.chain_affine(R, r, starts)
    bnd = solve_shooting(P, p, gamma=1.0)
    nodes = fill_nodes(R, r, starts, bnd)
    assert np.allclose(nodes[..., 0], -np.linalg.solve(A, np.ones(2)), atol=1e-12)


def test_central_difference_order():
    errs = []
    for n in (11, 21):
        x = np.linspace(0, 2, n)
        d = central_difference(np.sin(x), x[1] - x[0])
        errs.append(np.max(np.abs(d - np.cos(x))))
    assert errs[1] < errs[0] / 100
    assert errs[1] < 1e-6


def test_dichotomy_constant_system():
    A = np.diag([-1.0, 2.0]).astype(complex)
    fp = dichotomy_halfline(lambda x: A, side="plus", window=10)
    assert minimal_opening(fp.stable_basis, np.array([[1.0], [0.0]])) < 1e-12
    fm = dichotomy_halfline(lambda x: A, side="minus", window=10)
    line = dichotomy_line(lambda x: A, None, fp, fm)
    assert line.eta == pytest.approx(1.0)


def test_dichotomy_line_rejects_common_direction():
    # a 2x2 system whose stable subspace at +inf and unstable subspace at -inf coincide
    A = lambda x: np.array([[np.tanh(x), 0.0], [0.0, -np.tanh(x)]], complex) if np.isscalar(x) else None
    fp = dichotomy_halfline(A, side="plus", window=15)
    fm = dichotomy_halfline(A, side="minus", window=15)
    with pytest.raises(RejectionError):
        dichotomy_line(A, None, fp, fm)
