import dataclasses

import numpy as np
import pytest

from pulsespec import riccati as rc
from pulsespec.errors import ContractionError

from conftest import gm, orbit_of, profile_of


@pytest.fixture(scope="module")
def blocks04():
    return rc.stability_blocks(gm(), profile_of(0.04), 2.0)


@pytest.fixture(scope="module")
def transform04(blocks04):
    return rc.riccati_transform(gm(), profile_of(0.04), 2.0, blocks=blocks04)


def test_zero_coupling_block_gives_zero_U(blocks04):
    b = dataclasses.replace(blocks04, A21=np.zeros_like(blocks04.A21))
    U, *_ = rc.solve_riccati_U(b)
    assert np.max(np.abs(U)) == 0.0


def test_delta_zero_gives_linear_solution(blocks04):
    b = dataclasses.replace(blocks04, eps=0.0)
    U, Ust, it, _, _ = rc.solve_riccati_U(b)
    X, _ = rc._inhom_solve(b, b.A21, 20)
    assert it == 1
    assert np.max(np.abs(U - X)) < 1e-14


def test_zero_A12_gives_zero_S(blocks04, transform04):
    b = dataclasses.replace(blocks04, A12=np.zeros_like(blocks04.A12))
    S, _ = rc.solve_riccati_S(b, transform04.U_stages)
    assert np.max(np.abs(S)) == 0.0


def test_uncoupled_blocks_give_identity(blocks04):
    b = dataclasses.replace(blocks04, A12=np.zeros_like(blocks04.A12), A21=np.zeros_like(blocks04.A21))
    d = rc.diagonalize(rc.riccati_transform(gm(), profile_of(0.04), 2.0, blocks=b))
    assert np.array_equal(d.H, np.broadcast_to(np.eye(4), d.H.shape))
    assert d.defect == 0.0


def test_transform_contract(transform04):
    tr = transform04
    rU, rS = rc.riccati_residuals(tr.blocks, tr.U, tr.S)
    d = rc.diagonalize(tr)
    assert rU.max() < 1e-7 and rS.max() < 1e-7
    assert d.det_H_deviation < 1e-10
    assert d.defect < 1e-6
    assert tr.contraction_ratio < 1
    # one more application of the map moves U by less than the tolerance
    assert tr.increments[-1] < 1e-12 * (1 + np.max(np.abs(tr.U)))
    assert np.max(np.abs(tr.U)) <= tr.U_bound
    assert np.max(np.abs(tr.S)) <= tr.S_bound


def test_periodicity(transform04):
    tr = transform04
    assert np.max(np.abs(tr.U[0] - tr.U[-1])) < 1e-10
    assert np.max(np.abs(tr.S[0] - tr.S[-1])) < 1e-10


def test_newton_matches_picard(transform04):
    tn = rc.riccati_transform(gm(), profile_of(0.04), 2.0, blocks=transform04.blocks, method="newton")
    assert np.max(np.abs(tn.U - transform04.U)) < 1e-10


def test_slow_field_locality():
    # outside the pulse U is driven by dG/du ~ v^2, so it is tiny on the slow field
    sups = []
    for eps in (0.04, 0.02, 0.01):
        p = profile_of(eps)
        tr = rc.riccati_transform(gm(), p, 2.0)
        far = np.abs(p.grid) >= p.L_eps / 4
        sups.append(np.max(np.abs(tr.U[far])))
        assert sups[-1] < eps ** 3
    assert sups[0] > sups[1] > sups[2]


def test_inner_distance_decreases_at_lambda_two():
    hom = orbit_of().homoclinic
    d = [rc.inner_distance(gm(), profile_of(e), hom, 2.0) for e in (0.04, 0.02, 0.01)]
    assert d[0] > d[1] > d[2]


def test_picard_refuses_when_not_contracting():
    # lam = 1 at eps = 0.04: delta times the dichotomy constants is not small
    with pytest.raises(ContractionError):
        rc.riccati_transform(gm(), profile_of(0.04), 1.0)
