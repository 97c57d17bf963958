import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pulsespec import evans as ev
from pulsespec import output
from pulsespec import spectrum as sp
from pulsespec.errors import ContourDegeneracyError, UnresolvedClusterError, UnsupportedMultiplicityError

from conftest import gm, orbit_of

roots_st = st.lists(st.complex_numbers(max_magnitude=0.9).filter(lambda z: 0.05 < abs(z) < 0.9), min_size=1,
                    max_size=5)


def poly(roots):
    return lambda z: np.prod([z - r for r in roots])


def separated(roots, gap=1e-2):
    return all(abs(a - b) > gap for i, a in enumerate(roots) for b in roots[i + 1:])


@settings(max_examples=30, deadline=None)
@given(roots_st, st.floats(0.1, 1.5))
def test_winding_counts_polynomial_roots(roots, radius):
    if any(abs(abs(r) - radius) < 1e-2 for r in roots):
        return
    c = sp.ContourSpec.circle(0, radius)
    assert sp.count_roots_contour(poly(roots), c) == sum(abs(r) < radius for r in roots)


def test_winding_counts_poles():
    f = lambda z: (z - 0.2) / ((z + 0.3) * (z - 0.1j) * (z - 5))
    assert sp.count_roots_contour(f, sp.ContourSpec.circle(0, 1)) == -1
    assert sp.count_roots_contour(f, sp.ContourSpec.rectangle(-1, 1, -1, 1)) == -1


def test_winding_root_on_contour():
    with pytest.raises(ContourDegeneracyError):
        sp.count_roots_contour(lambda z: z - 1.0, sp.ContourSpec.circle(0, 1.0, node_count=16))


@settings(max_examples=20, deadline=None)
@given(roots_st)
def test_find_roots_matches_numpy(roots):
    if not separated(roots):
        return
    found = sp.find_roots(poly(roots), (-1, 1, -1, 1), tol=1e-12)
    got = np.array([z for z, k in found])
    ref = np.roots(np.poly(roots))
    assert len(got) == len(ref) and all(k == 1 for _, k in found)
    d = np.abs(got[:, None] - ref[None, :])
    assert np.max(d.min(axis=0)) < 1e-9 and np.max(d.min(axis=1)) < 1e-9


def test_find_roots_multiplicity():
    found = sp.find_roots(lambda z: (z - 0.3) ** 2 * (z + 0.4j) * (z - 0.1 - 0.2j) ** 3, (-1, 1, -1, 1))
    got = {k: z for z, k in found}
    assert sorted(got) == [1, 2, 3]
    assert abs(got[2] - 0.3) < 1e-6 and abs(got[3] - (0.1 + 0.2j)) < 1e-4


def test_find_roots_unresolved_cluster():
    # two distinct roots closer than the depth budget can separate
    with pytest.raises(UnresolvedClusterError):
        sp.find_roots(lambda z: (z - 0.3) * (z - 0.3 - 1e-3), (-1, 1, -1, 1), max_depth=4)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_find_roots_total_matches_boundary_winding(seed):
    rng = np.random.default_rng(seed)
    zs = rng.uniform(-1, 1, 4) + 1j * rng.uniform(-1, 1, 4)
    ps = rng.uniform(-1, 1, 2) + 1j * rng.uniform(-1, 1, 2)
    f = lambda z: np.prod(z - zs) / np.prod(z - ps)
    x0, y0 = rng.uniform(-1.2, 0.2, 2)
    box = (x0, x0 + 1.0, y0, y0 + 1.0)
    if any(min(abs(z.real - b) for b in box[:2]) < 1e-3 or min(abs(z.imag - b) for b in box[2:]) < 1e-3
           for z in np.concatenate([zs, ps])):
        return
    inside = lambda z: box[0] < z.real < box[1] and box[2] < z.imag < box[3]
    if any(inside(p) for p in ps):
        return
    found = sp.find_roots(f, box)
    assert sum(k for _, k in found) == sp.count_roots_contour(f, sp.ContourSpec.rectangle(*box)) \
        == sum(inside(z) for z in zs)


def test_default_region_geometry():
    c = sp.ContourSpec.default_region()
    assert c.contains(0.0) and c.contains(9.0) and not c.contains(-0.6) and not c.contains(11.0)
    assert c.contains(0.0 + 9.9j) and not c.contains(0.0 + 10.1j)
    # half-angle pi - varpi at the apex
    assert c.contains(5 + 4.9j) and not c.contains(5 + 5.1j)


def test_contour_guard_check():
    c = sp.ContourSpec.circle(1, 1)
    with pytest.raises(ContourDegeneracyError):
        c.check(guards=[2.01], guard_radius=0.05)
    c.check(guards=[2.2], guard_radius=0.05)
    with pytest.raises(ContourDegeneracyError):
        sp.ContourSpec.circle(0, 1).check()


def test_newton_polish():
    z, res = sp.newton_polish(lambda z: np.exp(z) - 2, 0.5 + 0.1j)
    assert abs(z - np.log(2)) < 1e-12 and res < 1e-12


def test_laurent_coefficient():
    assert abs(sp.laurent_coefficient(lambda z: 3 / (z - 1) + z ** 2, 1.0) - 3) < 1e-12


def test_fast_zeros_beta3():
    model = gm(beta2=3)
    zs = sp.fast_zeros(model, orbit_of(beta2=3))
    assert [k for _, k in zs] == [1, 1]
    assert abs(zs[1][0] - 3.0) < 1e-6


@pytest.fixture(scope="module")
def center_parts():
    model, orb = gm(), orbit_of()
    return model, orb, sp.residue_slow_at_fast_zero(model, orb, 1.25)


def test_trace_pole_matches_residue(center_parts):
    model, orb, rep = center_parts
    lam0 = 1.25
    coeff = sp.laurent_coefficient(lambda z: ev.trace_criterion(model, orb, z)["t"], lam0, radius=1e-3)
    assert abs(coeff - rep.residue) < 1e-6 * abs(rep.residue)
    crit = sp.instability_criteria(model, orb, lam0=lam0)
    assert crit["I1"] == pytest.approx(-rep.residue.real, rel=1e-10)


def test_slow_function_pole_is_minus_gamma_residue(center_parts):
    model, orb, rep = center_parts
    for g in (1.0, np.exp(1j), 0.5j):
        c = sp.laurent_coefficient(lambda z: ev.evans_slow_reduced(model, orb, z, g).total(), 1.25, radius=1e-3)
        assert abs(c + g * rep.residue) < 1e-6 * abs(rep.residue)


def test_rofe_beketov_wronskian():
    model, orb = gm(), orbit_of()
    slow = orb.slow
    xs = np.linspace(0.3, 2 * slow.L0 - 0.3, 7)
    hstep = 1e-4
    for x in xs:
        z = sp.rofe_beketov_solution(model, slow, [x - hstep, x, x + hstep])
        _, p = slow.state(np.array([x - hstep, x, x + hstep]))
        dz = (z[2] - z[0]) / (2 * hstep)
        dus = p[1]
        ddus = (p[2] - p[0]) / (2 * hstep)
        assert z[1] * ddus - dz * dus == pytest.approx(sp.RB_WRONSKIAN, abs=1e-6)


def test_cancelation_scan_center():
    model, orb = gm(), orbit_of()
    zero = sp.cancelation_scan(model, orb, 0.0, gamma_samples=8)
    assert zero["verdict"] == "persists"
    pos = sp.cancelation_scan(model, orb, 1.25, gamma_samples=8)
    assert pos["verdict"] == "cancels" and pos["consistent"]


def test_weak_coupling_zeros_persist():
    model, orb = gm(coupling=0.0), orbit_of(coupling=0.0)
    for z, k in sp.fast_zeros(model, orb):
        rep = sp.residue_slow_at_fast_zero(model, orb, z.real)
        assert rep.verdict == "persists" and rep.residue == 0


def test_multiplicity_two_is_refused():
    with pytest.raises(UnsupportedMultiplicityError):
        sp.residue_slow_at_fast_zero(gm(), orbit_of(), 1.25, multiplicity=2)


def test_reduced_gamma_curves_close_and_conjugate():
    model, orb = gm(), orbit_of()
    _, _, trace = sp._reduced_parts(model, orb)
    F = lambda lam, g: trace(complex(lam)) - g - 1 / g
    curves = sp.trace_gamma_curves(F, [0.35312044918690405, 7.104873146985992])
    for c in curves:
        assert not c.flags and c.closure_defect < 1e-8
        assert np.max(np.abs(c.lam.imag)) < 1e-8
    assert sp.conjugation_defect(curves) < 1e-8


def test_trace_bands_saddle_closed_form():
    from scipy import optimize
    model, orb = gm("mu"), orbit_of("mu", u0=1.5)
    L0, mu = orb.L0, 1.0
    hom = orb.homoclinic

    def closed(lam):
        s = np.sqrt(mu + lam)
        G = ev.melnikov_G(model, hom, lam)[0, 0].real
        return 2 * np.cosh(2 * L0 * s) + G * np.sinh(2 * L0 * s) / s

    zs = [z.real for z, _ in sp.fast_zeros(model, orb)]
    grid = np.linspace(-0.49, 4.0, 181)
    bands, _ = sp.trace_bands(model, orb, grid, poles=zs)
    assert bands
    for a, b in bands:
        for edge in (a, b):
            if edge in (grid[0], grid[-1]):
                continue
            level = 2.0 if abs(closed(edge) - 2) < abs(closed(edge) + 2) else -2.0
            ref = optimize.brentq(lambda x: closed(x) - level, edge - 1e-3, edge + 1e-3, xtol=1e-13)
            assert abs(edge - ref) < 1e-6


def test_report_serializes():
    model, orb = gm(), orbit_of()
    rep = sp.SpectrumReport(roots=[(0.25 + 0j, 1)], residues=[sp.residue_slow_at_fast_zero(model, orb, 1.25)],
                            provenance={"model": model.fingerprint()})
    back = json.loads(output.dumps(rep.to_dict()))
    assert back["residues"][0]["verdict"] == "cancels"
    assert back["roots"][0]["lambda"] == {"re": 0.25, "im": 0.0}
