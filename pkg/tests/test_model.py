import numpy as np
import pytest
import sympy as sym
from hypothesis import given, settings, strategies as st

from pulsespec.errors import DomainError, EvaluationError
from pulsespec.model import (GMParams, ModelSpec, eval_nonlinearities, existence_jacobian, existence_rhs,
                             finite_difference_partials, gierer_meinhardt, reversor, validate_model)


def _scalar(fn):
    """Wrap a scalar (u, v) -> value rule as a ModelSpec evaluator with partials by sympy."""
    u, v = sym.symbols("u v")
    expr = fn(u, v)
    f = sym.lambdify((u, v), expr, "numpy")
    fu = sym.lambdify((u, v), sym.diff(expr, u), "numpy")
    fv = sym.lambdify((u, v), sym.diff(expr, v), "numpy")

    def ev(uu, vv, *_):
        a, b = uu[..., 0], vv[..., 0]
        one = np.ones_like(a)
        return ((f(a, b) * one)[..., None], (fu(a, b) * one)[..., None, None], (fv(a, b) * one)[..., None, None])
    return ev


def toy(G):
    return ModelSpec(m=1, n=1, D1=[1.0], D2=[1.0], H1=_scalar(lambda u, v: -u), H2=_scalar(lambda u, v: -v ** 2),
                     G=_scalar(G), domain_box=([-10.0], [10.0], [-10.0], [10.0]))


def test_gm_vanishes_on_slow_manifold():
    model = gierer_meinhardt(variant="mu", mu=1.0)
    nl = eval_nonlinearities(model, np.array([1.0]), np.array([0.0]), 0.0)
    assert nl.H2[0] == 0.0 and nl.G[0] == 0.0


@settings(max_examples=40, deadline=None)
@given(u=st.floats(0.2, 3.0), v=st.floats(-3.0, 3.0), a2=st.sampled_from([0.0, 1.0, 2.0]),
       b2=st.sampled_from([2, 3]), b1=st.sampled_from([2, 3]))
def test_gm_partials_match_sympy(u, v, a2, b2, b1):
    model = gierer_meinhardt(alpha2=a2, beta1=b1, beta2=b2, variant="minus_mu", mu=0.7)
    U, V = sym.symbols("U V")
    H2 = -V ** b1
    G = V - U ** a2 * V ** b2
    nl = eval_nonlinearities(model, np.array([u]), np.array([v]), 0.0)
    sub = {U: u, V: v}
    for val, expr in ((nl.H2_v, sym.diff(H2, V)), (nl.G_u, sym.diff(G, U)), (nl.G_v, sym.diff(G, V)),
                      (nl.H1_u, sym.Float(-0.7))):
        assert float(np.ravel(val)[0]) == pytest.approx(float(expr.subs(sub)), rel=1e-12, abs=1e-12)


def test_partials_match_finite_differences():
    model = gierer_meinhardt(alpha2=2.0, beta2=2)
    u, v = np.array([1.0]), np.array([1.5])
    nl = eval_nonlinearities(model, u, v, 0.0)
    fd = finite_difference_partials(model, u, v, 0.0)
    for key, approx in fd.items():
        exact = np.asarray(getattr(nl, key))
        assert np.allclose(exact, approx, rtol=1e-6, atol=1e-9), key


def test_validate_gm_is_clean():
    rep = validate_model(gierer_meinhardt(variant="mu", mu=2.0), sample_count=50)
    assert rep and rep.violations == []


def test_validate_reports_s1_violation():
    rep = validate_model(toy(lambda u, v: v - u), sample_count=20)
    assert not rep and "S1:G(u,0)=0" in rep.kinds()


def test_validate_reports_s2_violation():
    rep = validate_model(toy(lambda u, v: -v + v ** 2), sample_count=20)
    assert "S2:Re dvG(u,0,0)>0" in rep.kinds()


def test_domain_error_names_coordinate():
    model = gierer_meinhardt()
    with pytest.raises(DomainError) as exc:
        eval_nonlinearities(model, np.array([100.0]), np.array([0.0]), 0.0)
    assert exc.value.coordinate is not None


def test_non_finite_result_raises():
    bad = toy(lambda u, v: v / (u - 1))
    with pytest.raises(EvaluationError):
        eval_nonlinearities(bad, np.array([1.0]), np.array([0.5]), 0.0)


def test_gm_parameter_checks():
    with pytest.raises(ValueError):
        GMParams(beta2=1)
    with pytest.raises(ValueError):
        GMParams(variant="cubic")
    assert gierer_meinhardt(coupling=0.0).weak_coupling


def test_fingerprint_tracks_parameters():
    a = gierer_meinhardt(mu=1.0).fingerprint()
    assert a == gierer_meinhardt(mu=1.0).fingerprint()
    assert a != gierer_meinhardt(mu=2.0).fingerprint()


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=4, max_size=4), st.floats(0.001, 0.1))
def test_existence_jacobian_fd(y, eps):
    model = gierer_meinhardt(variant="minus_mu")
    y = np.array(y) + np.array([1.5, 0, 0, 0])
    J = existence_jacobian(model, eps, y)
    step = 1e-6
    fd = np.stack([(existence_rhs(model, eps, y + step * e) - existence_rhs(model, eps, y - step * e)) / (2 * step)
                   for e in np.eye(4)], axis=1)
    assert np.allclose(J, fd, rtol=1e-6, atol=1e-7)


def test_reversor_is_a_symmetry():
    model = gierer_meinhardt(variant="minus_mu")
    R = reversor(model)
    y = np.array([1.2, 0.3, 0.7, -0.4])
    # x -> -x reversibility: f(R y) = -R f(y)
    assert np.allclose(existence_rhs(model, 0.05, R * y), -R * existence_rhs(model, 0.05, y), atol=1e-14)
