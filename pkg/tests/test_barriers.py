import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from pqsingular.barriers import (
    BarrierParams,
    RegimeMismatch,
    barrier_log,
    barrier_unit,
    h_inverse,
    h_map,
    literal_scaling_exponents,
    log_shift,
    lower_barrier_power,
    min_log_scale,
    q_companion,
    scaling_exponents,
    theta_scaling_check,
    theta_shoot,
    torsion_family,
    torsion_oracle,
    torsion_residual,
    upper_barrier_power,
)
from pqsingular.domain_mesh import Domain, build_mesh
from pqsingular.weights import ProblemSpec

SUPER = ProblemSpec(p=3, q=2, delta=1.0, beta=1.0)
CRIT = ProblemSpec(p=2, q=1.5, delta=0.5, beta=0.5)
THETA_SPEC = ProblemSpec(p=2, q=1.5, delta=0.3, beta=0.3)


def test_lower_power_examples():
    assert lower_barrier_power(0.001, 0.0, SUPER) == pytest.approx(1e-2)
    assert lower_barrier_power(0.0, 0.3, SUPER) == 0.0
    s = ProblemSpec(p=2, q=1.5, delta=2.0, beta=0.5)
    assert s.tau == pytest.approx(0.5)
    assert lower_barrier_power(0.04, 0.0, s, BarrierParams(eta=3.0)) == pytest.approx(0.6)


def test_upper_power_examples():
    x = np.array([0.001, 0.01, 0.2])
    assert np.array_equal(upper_barrier_power(x, 1e-3, SUPER, BarrierParams(eta=2, Gamma=2)),
                          lower_barrier_power(x, 1e-3, SUPER, BarrierParams(eta=2, Gamma=2)))
    assert upper_barrier_power(0.001, 0.0, SUPER, BarrierParams(Gamma=2)) == pytest.approx(0.02)
    assert upper_barrier_power(0.01, 0.0, SUPER) > upper_barrier_power(0.001, 0.0, SUPER)


def test_power_barrier_regime_checked():
    with pytest.raises(RegimeMismatch):
        lower_barrier_power(0.1, 0.0, CRIT)
    with pytest.raises(RegimeMismatch):
        barrier_log(0.1, 0.0, 1.0, SUPER)


def test_barrier_log_hand_value():
    L = math.exp(10)
    d = 1e-3
    value = barrier_log(d, 0.0, 1.0, CRIT, BarrierParams(L=L))
    assert value == pytest.approx(d * math.log(L / d) ** (1 / 1.5), rel=1e-14)
    assert value == pytest.approx(6.5875e-3, rel=1e-4)
    assert barrier_log(0.0, 1e-3, 1.0, CRIT, BarrierParams(L=L)) == 0.0


def test_barrier_log_increasing_and_L_checked():
    L = math.exp(10)
    d = np.linspace(1e-6, 0.5, 500)
    vals = barrier_log(d, 1e-4, 1.0, CRIT, BarrierParams(L=L))
    assert np.all(np.diff(vals) > 0)
    with pytest.raises(ValueError):
        barrier_log(0.1, 0.0, 1.0, CRIT, BarrierParams(L=0.5 * min_log_scale(CRIT)))


def test_log_shift_inverts():
    L = min_log_scale(CRIT)
    for eps in (1e-8, 1e-4, 1e-2):
        e = log_shift(eps, CRIT, L)
        assert e * math.log(L / e) ** (1 / 1.5) == pytest.approx(eps, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(eps=st.floats(0, 0.1), eta=st.floats(0.1, 5), factor=st.floats(1, 3))
def test_barriers_vanish_on_boundary_and_grow_with_amplitude(eps, eta, factor):
    x = np.array([0.0, 0.01, 0.3, 1.0])
    lo = lower_barrier_power(x, eps, SUPER, BarrierParams(eta=eta))
    hi = lower_barrier_power(x, eps, SUPER, BarrierParams(eta=eta * factor))
    assert lo[0] == 0.0 and lo[-1] == 0.0
    assert np.all(hi >= lo)
    lg = barrier_log(x, eps, eta, CRIT)
    assert lg[0] == 0.0 and lg[-1] == 0.0
    assert np.all(barrier_log(x, eps, eta * factor, CRIT) >= lg - 1e-15)


def test_barrier_unit_sublinear_is_distance():
    d = np.array([0.0, 0.1, 0.5])
    np.testing.assert_array_equal(barrier_unit(ProblemSpec(p=2, q=1.5, delta=0.5, beta=0.2), d, 1e-3), d)


@pytest.fixture(scope="module")
def theta_table():
    return theta_shoot(1.0, THETA_SPEC, 0.04, 1e-5)


def test_theta_monotone(theta_table):
    t = theta_table
    assert t.theta[0] == 0.0
    assert np.all(np.diff(t.theta) > 0)
    assert np.all(np.diff(t.dtheta) < 0)
    assert np.all(t.theta <= t.alpha * t.r * (1 + 1e-12))


def test_theta_q_companion(theta_table):
    assert np.all(q_companion(theta_table, THETA_SPEC.q) >= -1e-8)


def test_theta_second_order():
    r = 0.02
    vals = [float(theta_shoot(1.0, THETA_SPEC, 0.03, h)(r)) for h in (4e-5, 2e-5, 1e-5)]
    rate = math.log2(abs(vals[1] - vals[0]) / abs(vals[2] - vals[1]))
    assert rate > 1.8


def test_theta_reaches_zero_slope():
    t = theta_shoot(1.0, THETA_SPEC, 1.0, 1e-5)
    assert 0.05 < t.R_alpha < 0.056
    assert t.r_max == pytest.approx(t.R_alpha, rel=1e-3)


def test_scaling_exponents():
    A, B = scaling_exponents(2.0, THETA_SPEC)
    assert A * B == pytest.approx(2.0)
    assert scaling_exponents(1.0, THETA_SPEC) == (1.0, 1.0)
    La, Lb = literal_scaling_exponents(2.0, THETA_SPEC)
    assert abs(La * Lb - 2.0) > 0.1


def test_scaling_identity_and_law():
    assert theta_scaling_check(1.0, THETA_SPEC, [0.01, 0.02], h=2e-5) == 0.0
    assert theta_scaling_check(2.0, THETA_SPEC, 0.5, h=1e-5) <= 1e-6


def test_h_inverse():
    assert h_inverse(2.0, SUPER) == pytest.approx(1.0, abs=1e-13)
    y = np.linspace(0, 50, 101)
    np.testing.assert_allclose(h_map(h_inverse(y, SUPER), SUPER), y, rtol=1e-12, atol=1e-13)
    with pytest.raises(ValueError):
        h_inverse(-1.0, SUPER)


def test_torsion_linear_closed_form():
    mesh = build_mesh(Domain.interval(2.0), 64, 2.0)
    spec = ProblemSpec(p=2, q=2, delta=1, beta=0, domain=mesh.domain)
    u = torsion_oracle(1.0, spec, mesh)
    x = mesh.nodes - 1
    assert np.max(np.abs(u.values - (1 - x**2) / 4)) < 1e-12
    assert u.values[32] == pytest.approx(0.25)


def test_torsion_pq_centre_value():
    mesh = build_mesh(Domain.interval(2.0), 64, 1.0)
    spec = ProblemSpec(p=3, q=2, delta=1, beta=0, domain=mesh.domain)
    u = torsion_oracle(2.0, spec, mesh)
    ref, _ = quad(lambda t: float(np.sqrt(2 * t + 0.25) - 0.5), 0, 1, epsabs=1e-14)
    assert u.values[32] == pytest.approx(ref, rel=1e-12)


def test_torsion_residual_converges():
    spec = ProblemSpec(p=3, q=2, delta=1, beta=0, domain=Domain.interval(2.0))
    res = []
    levels = (256, 512, 1024, 2048)
    for n in levels:
        mesh = build_mesh(spec.domain, n, 1.0)
        res.append(torsion_residual(torsion_oracle(1.0, spec, mesh), 1.0, spec))
    # first order, approached from below (0.96 at n = 64, 0.997 at n = 2048)
    rate = -np.polyfit(np.log(levels), np.log(res), 1)[0]
    assert rate >= 0.98


def test_torsion_monotone_in_rho():
    spec = ProblemSpec(p=3, q=2, delta=1, beta=0)
    mesh = build_mesh(spec.domain, 128, 2.0)
    fam = torsion_family([0.5, 1.0, 2.0], spec, mesh)
    assert np.all(fam[0].values <= fam[1].values) and np.all(fam[1].values <= fam[2].values)
    assert np.all(fam[2].values[1:-1] > fam[1].values[1:-1])


def test_torsion_radial_closed_form():
    # p = q = 2 on the unit ball in R^3: -2 Delta u = 1 gives u = (1 - r^2)/12
    spec = ProblemSpec(p=2, q=2, delta=1, beta=0, domain=Domain.ball(1.0, 3))
    mesh = build_mesh(spec.domain, 64, 2.0)
    u = torsion_oracle(1.0, spec, mesh)
    assert np.max(np.abs(u.values - (1 - mesh.nodes**2) / 12)) < 1e-12
