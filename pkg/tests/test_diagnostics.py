import json
import math

import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st

from pqsingular.barriers import barrier_unit, min_log_scale
from pqsingular.diagnostics import (
    BOUNDED,
    DIVERGENT,
    INCONCLUSIVE,
    FitWindowError,
    SobolevProbe,
    barrier_sandwich,
    classify_growth,
    comparison_check,
    fit_boundary_exponent,
    fit_log_regime,
    hardy_integral,
    sobolev_probes,
    verdict_document,
    verdicts_antitone,
    write_json,
)
from pqsingular.domain_mesh import Domain, build_mesh
from pqsingular.energy_solver import DiscreteField, SolverSettings
from pqsingular.weights import ProblemSpec

MESH = build_mesh(Domain.interval(1.0), 4096, 3.0)
SUPER = ProblemSpec(p=3, q=2, delta=1.0, beta=1.0)
CRIT = ProblemSpec(p=2, q=1.5, delta=0.6, beta=0.4)


def synthetic(values):
    return DiscreteField(MESH, values)


def test_fit_synthetic_power():
    fit = fit_boundary_exponent(synthetic(MESH.dist ** (2 / 3)))
    assert fit.slope == pytest.approx(2 / 3, abs=1e-12)
    assert fit.residual < 1e-12
    assert fit.n_nodes >= 16 and fit.asymmetry < 1e-12


def test_fit_synthetic_linear():
    fit = fit_boundary_exponent(synthetic(3 * MESH.dist))
    assert fit.slope == pytest.approx(1.0, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(3), abs=1e-12)


@hsettings(max_examples=50, deadline=None)
@given(s=st.floats(0.01, 2.0), c=st.sampled_from([0.5, 1.0, 3.0]))
def test_fit_exact_on_powers(s, c):
    fit = fit_boundary_exponent(synthetic(c * MESH.dist**s))
    assert fit.slope == pytest.approx(s, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(c), abs=1e-11)


def test_fit_window_errors():
    coarse = build_mesh(Domain.interval(1.0), 32, 1.0)
    with pytest.raises(FitWindowError):
        fit_boundary_exponent(DiscreteField(coarse, coarse.dist))
    with pytest.raises(FitWindowError):
        fit_boundary_exponent(synthetic(MESH.dist), window=(1e-2, 1e-3))
    with pytest.raises(FitWindowError):
        fit_boundary_exponent(synthetic(MESH.dist), window=(1e-3, 0.5))


def test_log_band_synthetic():
    L = min_log_scale(CRIT)
    k = 1 / (CRIT.p - CRIT.beta)
    d = MESH.dist
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(d > 0, d * np.log(L / np.where(d > 0, d, 1)) ** k, 0.0)
    band = fit_log_regime(synthetic(u), CRIT, L)
    assert band.band == pytest.approx(1.0, abs=1e-12)
    assert band.drift > 0.015 and band.confirmed
    assert band.min_drift == pytest.approx(0.5 * band.drift)


def test_log_band_of_pure_power_widens():
    u = synthetic(MESH.dist)
    bands = [fit_log_regime(u, CRIT, window=(lo, 1e-2)).band for lo in (1e-3, 1e-4, 1e-5)]
    assert bands[0] < bands[1] < bands[2]
    pure = fit_log_regime(u, CRIT)
    assert pure.drift == pytest.approx(0.0, abs=1e-12) and not pure.confirmed
    with pytest.raises(ValueError):
        fit_log_regime(u, SUPER)


@pytest.mark.parametrize("verdict, ratios", [(BOUNDED, [1.05, 1.01]), (DIVERGENT, [1.3, 1.25]),
                                             (INCONCLUSIVE, [1.3, 1.15])])
def test_classify_growth(verdict, ratios):
    assert classify_growth(ratios) == verdict


def test_sobolev_probe_on_exact_powers():
    # u = d^tau: |grad u^rho|^p integrable iff (rho tau - 1) p > -1
    spec = ProblemSpec(p=2, q=1.5, delta=2.0, beta=0.5)
    tau = spec.tau
    levels = (512, 1024, 2048, 4096)
    fields = []
    for n in levels:
        m = build_mesh(spec.domain, n, 3.0)
        fields.append(DiscreteField(m, m.dist**tau))
    rhos = [0.6, 0.8, 1.5, 2.0]
    probes = sobolev_probes(spec, SolverSettings(), rhos, levels, fields=fields)
    for pr in probes:
        finite = (pr.rho * tau - 1) * spec.p > -1
        assert pr.verdict == (BOUNDED if finite else DIVERGENT), (pr.rho, pr.ratios)
    assert verdicts_antitone(probes)


def test_verdicts_antitone_detects_violation():
    mk = lambda rho, v: SobolevProbe(rho, (1, 2, 3), [1, 1, 1], [1, 1], v)
    assert verdicts_antitone([mk(0.5, DIVERGENT), mk(1.0, INCONCLUSIVE), mk(2.0, BOUNDED)])
    assert not verdicts_antitone([mk(0.5, BOUNDED), mk(1.0, DIVERGENT)])


def test_sandwich_of_barrier_is_unit():
    eps = 1e-4
    unit = np.asarray(barrier_unit(SUPER, MESH.dist, eps), dtype=float)
    s = barrier_sandwich(synthetic(unit), eps, SUPER)
    assert s.eta == pytest.approx(1.0) and s.Gamma == pytest.approx(1.0)
    s2 = barrier_sandwich(synthetic(2 * unit), eps, SUPER)
    assert (s2.eta, s2.Gamma) == pytest.approx((2.0, 2.0))


@hsettings(max_examples=30, deadline=None)
@given(lam=st.floats(1e-3, 1e3), tau=st.floats(0.3, 1.5))
def test_sandwich_scales_linearly(lam, tau):
    u = synthetic(MESH.dist**tau * (1 + MESH.nodes))
    base = barrier_sandwich(u, 1e-4, CRIT)
    scaled = barrier_sandwich(synthetic(lam * u.values), 1e-4, CRIT)
    assert scaled.eta == pytest.approx(lam * base.eta, rel=1e-13)
    assert scaled.Gamma == pytest.approx(lam * base.Gamma, rel=1e-13)


def test_comparison_reflexive_and_antisymmetric():
    spec = ProblemSpec(p=2, q=1.5, delta=1.0, beta=0.5)
    mesh = build_mesh(spec.domain, 512, 3.0)
    settings = SolverSettings()
    same = comparison_check(spec, settings, (1.0, 1.0), mesh)
    assert same.passed and abs(same.max_violation) <= same.tolerance
    fwd = comparison_check(spec, settings, (1.0, 2.0), mesh)
    back = comparison_check(spec, settings, (2.0, 1.0), mesh)
    assert fwd.passed and fwd.max_violation <= 0
    assert not back.passed and back.max_violation > 0


def test_comparison_skipped_outside_range():
    spec = ProblemSpec(p=2, q=1.5, delta=1.0, beta=1.6)
    rep = comparison_check(spec, SolverSettings(), (1.0, 2.0))
    assert rep.skipped and not rep.passed


def test_nonexistence_exponents_and_hardy_divergence():
    taus = [ProblemSpec(p=2, q=1.5, delta=1.0, beta=b).tau for b in (1.5, 1.8, 1.9, 1.95)]
    assert taus == pytest.approx([0.25, 0.1, 0.05, 0.025])
    for tau in taus:
        H = []
        for n in (512, 1024, 2048):
            m = build_mesh(Domain.interval(1.0), n, 6.0)
            H.append(hardy_integral(DiscreteField(m, m.dist**tau), 1.0, 2.0))
        assert H[1] / H[0] > 1.2 and H[2] / H[1] > 1.2


def test_verdict_json_round_trip(tmp_path):
    doc = verdict_document("x", SUPER, {"eps": 1e-6}, {"v": np.float64(0.1) + 0.2, "a": np.arange(3.0)},
                           "confirmed", {"slope": 0.05})
    path = write_json(tmp_path / "v.json", doc)
    back = json.loads(path.read_text())
    assert back["data"]["v"] == 0.1 + 0.2
    assert back["data"]["a"] == [0.0, 1.0, 2.0]
    assert back["spec"]["regime"] == "superlinear"
