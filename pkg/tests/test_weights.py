import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pqsingular.domain_mesh import Domain
from pqsingular.weights import (
    CRITICAL,
    SUBLINEAR,
    SUPERLINEAR,
    NonExistenceThreshold,
    ProblemSpec,
    TruncationParams,
    eval_f,
    eval_f_eps,
    g_m,
    upsilon_m,
    weight_eps_from_distance,
    weight_from_distance,
)


def spec(**kw):
    base = dict(p=2.0, q=1.5, delta=1.0, beta=1.0, c_f=1.0)
    base.update(kw)
    return ProblemSpec(**base)


def test_eval_f_examples():
    assert eval_f(spec(beta=1), 0.5) == pytest.approx(2.0)
    assert eval_f(spec(beta=0, c_f=2), 0.123) == 2.0
    assert eval_f(spec(beta=2), 0.9) == pytest.approx(100.0)
    assert eval_f(spec(beta=1), 0.0) == math.inf
    assert eval_f(spec(beta=0, c_f=2), 0.0) == 2.0


def test_eval_f_eps_examples():
    s = spec()
    eps = 0.1
    assert eval_f_eps(s, 0.0, eps) == pytest.approx(eps**-2)
    assert eval_f_eps(s, 0.5, eps) == pytest.approx(1 / 0.51, rel=1e-12)
    assert eval_f_eps(spec(beta=0, c_f=3), 0.0, 1e-3) == 3.0


def test_beta_equal_p_rejected():
    with pytest.raises(NonExistenceThreshold):
        eval_f_eps(spec(beta=2.0), 0.3, 0.1)


def test_spec_validation_and_tags():
    with pytest.raises(ValueError):
        spec(q=2.5)
    with pytest.raises(ValueError):
        spec(delta=0)
    assert spec(beta=0.2, delta=0.5).regime == SUBLINEAR
    assert spec(beta=0.4, delta=0.6).regime == CRITICAL
    assert spec(beta=1, delta=1).regime == SUPERLINEAR
    assert spec(beta=2.5).solvability == "non-existence"
    assert spec(p=3, q=2, beta=1, delta=1).tau == pytest.approx(2 / 3)


def test_thresholds():
    s = spec(p=2, q=1.5, beta=0.5, delta=2)
    assert s.rho0 == pytest.approx(1.0)
    assert spec(beta=0).membership_delta == pytest.approx(3.0)


@pytest.mark.parametrize(
    "delta, m, s, expected", [(1, 10, 0.5, 2.0), (1, 10, 0.05, 10.0), (2, 10, -1, 10.0)]
)
def test_g_m_examples(delta, m, s, expected):
    assert g_m(s, spec(delta=delta), TruncationParams(m)) == pytest.approx(expected)


def test_upsilon_examples():
    s, tr = spec(delta=1), TruncationParams(10)
    assert upsilon_m(1.0, s, tr) == 0.0
    assert upsilon_m(math.e, s, tr) == pytest.approx(1.0)
    assert upsilon_m(0.05, s, tr) == pytest.approx(math.log(0.1) + 10 * (0.05 - 0.1), rel=1e-12)


def test_truncation_rejects_nonpositive():
    with pytest.raises(ValueError):
        TruncationParams(0.0)


exponents = st.fixed_dictionaries(
    {
        "p": st.floats(1.2, 4.0),
        "qf": st.floats(0.05, 1.0),
        "delta": st.floats(0.05, 3.0),
        "bf": st.floats(0.0, 0.98),
    }
)


def _spec(e):
    p = e["p"]
    return ProblemSpec(p=p, q=1 + (p - 1) * e["qf"], delta=e["delta"], beta=p * e["bf"])


@settings(max_examples=60, deadline=None)
@given(e=exponents, eps=st.floats(1e-8, 1.0), shrink=st.floats(1e-3, 0.9))
def test_f_eps_monotone_and_dominated(e, eps, shrink):
    s = _spec(e)
    d = np.linspace(0, 0.5, 41)[1:]
    f = weight_from_distance(s, d)
    a = weight_eps_from_distance(s, d, eps)
    b = weight_eps_from_distance(s, d, eps * shrink)
    assert np.all(a <= f * (1 + 1e-12))
    assert np.all(b >= a * (1 - 1e-12))


@settings(max_examples=30, deadline=None)
@given(e=exponents)
def test_f_eps_pointwise_limit(e):
    s = _spec(e)
    d = np.linspace(0, 0.5, 11)[1:]
    rel = np.abs(weight_eps_from_distance(s, d, 1e-10) / weight_from_distance(s, d) - 1)
    # the shift is eps^kappa with kappa >= (p-1+delta)/p; use the formula's own size
    shift = 1e-10 ** s.eps_exponent
    assert np.all(rel <= max(1e-6, 10 * s.beta * shift / d.min()))


def test_f_eps_decreases_beyond_p():
    s = spec(beta=2.5)
    d = np.array([1e-3, 0.1, 0.4])
    assert np.all(weight_eps_from_distance(s, d, 1e-4) <= weight_eps_from_distance(s, d, 1e-2))
    assert np.all(weight_eps_from_distance(s, d, 1e-4) <= weight_from_distance(s, d))


@settings(max_examples=40, deadline=None)
@given(delta=st.floats(0.1, 3.0), m=st.floats(0.5, 100.0))
def test_g_m_and_upsilon_properties(delta, m):
    s, tr = spec(delta=delta), TruncationParams(m)
    x = np.linspace(-1.0, 3.0, 801)
    g = g_m(x, s, tr)
    assert np.all(g <= m) and np.all(g > 0)
    ups = upsilon_m(x, s, tr)
    assert np.all(np.diff(ups) >= 0)
    # derivative matches g_m away from the breakpoint
    h = 1e-6
    pts = x[(x > 0.05) & (np.abs(x - m ** (-1 / delta)) > 1e-3)]
    fd = (upsilon_m(pts + h, s, tr) - upsilon_m(pts - h, s, tr)) / (2 * h)
    np.testing.assert_allclose(fd, g_m(pts, s, tr), rtol=1e-5)
    # increasing truncation level approaches s^-delta from below
    pos = x[x > 0]
    assert np.all(g_m(pos, s, TruncationParams(10 * m)) >= g_m(pos, s, tr))
