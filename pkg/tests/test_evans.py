import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pulsespec import evans as ev
from pulsespec.errors import ConditioningError

from conftest import gm, orbit_of


def test_fast_function_vanishes_at_zero(center):
    model, orb = center
    e0 = ev.evans_fast_reduced(model, orb.homoclinic, 0.0)
    scale = ev.evans_fast_reduced(model, orb.homoclinic, 0.5)
    assert abs(e0.ratio(scale)) < 1e-6


def test_fast_function_conjugation(center):
    model, orb = center
    z = 0.7 + 0.4j
    a = ev.evans_fast_reduced(model, orb.homoclinic, z)
    b = ev.evans_fast_reduced(model, orb.homoclinic, np.conj(z))
    assert abs(a.ratio(b.conj()) - 1) < 1e-10


def test_melnikov_vanishes_without_coupling():
    model, orb = gm(coupling=0.0), orbit_of(coupling=0.0)
    for lam in (0.3, 2.0 + 1j):
        assert np.all(ev.melnikov_G(model, orb.homoclinic, lam) == 0)


def test_melnikov_bounded_at_infinity(center):
    model, orb = center
    g = [abs(ev.melnikov_G(model, orb.homoclinic, lam)[0, 0]) for lam in (10.0, 100.0, 1000.0)]
    assert g[2] <= g[1] <= g[0]


def test_melnikov_resolution(center):
    model, orb = center
    a = ev.melnikov_G(model, orb.homoclinic, 1.0, h=0.05)[0, 0]
    b = ev.melnikov_G(model, orb.homoclinic, 1.0, h=0.025)[0, 0]
    assert abs(a - b) < 1e-6 * abs(b)


def test_melnikov_at_zero_is_twice_takeoff_derivative(center):
    from pulsespec.profile import takeoff_derivative
    model, orb = center
    G0 = ev.melnikov_G(model, orb.homoclinic, 0.0)[0, 0]
    # J(u) = -3 / u^4 gives 2 J'(1) = 24
    assert G0.real == pytest.approx(24.0, abs=1e-6)
    assert G0.real == pytest.approx(2 * takeoff_derivative(model, 1.0), abs=1e-6)


@settings(max_examples=10, deadline=None)
@given(st.floats(-0.4, 6), st.floats(-1, 1), st.complex_numbers(min_magnitude=0.3, max_magnitude=3))
def test_slow_function_is_trace_quadratic(re, im, gamma):
    model, orb = gm(), orbit_of()
    lam = complex(re, im)
    if abs(lam - 1.25) < 0.05 or abs(lam) < 0.05:
        return
    t = ev.trace_criterion(model, orb, lam)["t"]
    es = ev.evans_slow_reduced(model, orb, lam, gamma).total()
    assert abs(es - (gamma ** 2 - t * gamma + 1)) < 1e-10 * (1 + abs(t * gamma) + abs(gamma) ** 2)
    assert abs(ev.evans_slow_reduced(model, orb, lam, 0.0).total() - 1) < 1e-10 * (1 + abs(t))


def test_trace_grows(center):
    model, orb = center
    t10 = ev.trace_criterion(model, orb, 10.0)["t"].real
    t100 = ev.trace_criterion(model, orb, 100.0)["t"].real
    assert t100 > t10 > 2


@pytest.mark.parametrize("lam", [0.0, 0.33, 3.0, 0.4 + 0.2j])
def test_reversible_trace_agrees(center, lam):
    model, orb = center
    a = ev.trace_criterion(model, orb, lam)["t"]
    b = ev.trace_criterion_reversible(model, orb, lam)["t"]
    assert abs(a - b) < 1e-8 * (1 + abs(a))


def test_reduced_product(center):
    model, orb = center
    lam, g = 0.6 + 0.3j, np.exp(0.4j)
    e = ev.evans_reduced(model, orb, lam, g)
    ef = ev.evans_fast_reduced(model, orb.homoclinic, lam)
    es = ev.evans_slow_reduced(model, orb, lam, g)
    assert abs(e.total() - (-g) * ef.total() * es.total()) < 1e-12 * abs(e.total())
    assert abs(ev.evans_reduced(model, orb, 0.0, 1.0).ratio(e)) < 1e-6


def test_reduced_without_coupling_splits():
    model, orb = gm(coupling=0.0), orbit_of(coupling=0.0)
    # no poles: E_s0 is finite at the fast zero 1.25
    es = ev.evans_slow_reduced(model, orb, 1.25, 1.0)
    assert np.isfinite(es.total())


def test_full_translation_zero(center, profile04):
    model, _ = center
    e0 = ev.evans_full(profile04, model, 0.0, 1.0)
    ref = ev.evans_full(profile04, model, 0.3, 1.0)
    assert abs(e0.ratio(ref)) < 1e-5


def test_full_conjugation_and_reversibility(center, profile04):
    model, _ = center
    lam, g = 0.4 + 0.3j, 0.8 * np.exp(0.7j)
    a = ev.evans_full(profile04, model, lam, g)
    b = ev.evans_full(profile04, model, np.conj(lam), np.conj(g))
    assert abs(a.ratio(b.conj()) - 1) < 1e-10
    c = ev.evans_full(profile04, model, lam, 1 / g)
    assert abs(c.ratio(a) * g ** 4 - 1) < 1e-8


def test_gauge_does_not_move_zeros(center, profile04):
    model, _ = center
    lam = 0.6 + 0.2j
    a = ev.evans_full(profile04, model, lam, 1.0)
    b = ev.evans_full(profile04, model, lam, 1.0, gauge=True)
    s = ev.StabilityProblem(model, profile04).gauge(lam)
    assert abs(b.ratio(a) - np.exp(-s)) < 1e-10 * abs(np.exp(-s))


def test_factorized_product_matches_full(center, profile04):
    model, _ = center
    lam, g = 2.0, np.exp(0.3j)
    slow, fast, prod = ev.evans_factorized(profile04, model, lam, g)
    full = ev.evans_full(profile04, model, lam, g)
    assert abs(prod.ratio(full) - 1) < 1e-9


def test_direct_method_refuses_long_period(center, profile04):
    model, _ = center
    with pytest.raises(ConditioningError):
        ev.evans_full(profile04, model, 0.5, 1.0, method="direct")
