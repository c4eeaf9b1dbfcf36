import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pqsingular.domain_mesh import Domain, build_mesh, distance, quadrature_weight


def test_uniform_interval_nodes():
    m = build_mesh(Domain.interval(1.0), 4, 1.0)
    np.testing.assert_allclose(m.nodes, [0, 0.25, 0.5, 0.75, 1])


def test_graded_interval_nodes():
    m = build_mesh(Domain.interval(1.0), 4, 2.0)
    np.testing.assert_allclose(m.nodes, [0, 0.125, 0.5, 0.875, 1])


def test_uniform_radial_nodes():
    m = build_mesh(Domain.ball(1.0), 2, 1.0)
    np.testing.assert_allclose(m.nodes, [0, 0.5, 1])


@pytest.mark.parametrize("n, grading", [(3, 1.0), (4, 0.5)])
def test_build_mesh_rejects_bad_input(n, grading):
    with pytest.raises(ValueError):
        build_mesh(Domain.interval(), n, grading)


def test_domain_invariants():
    with pytest.raises(ValueError):
        Domain.interval(0.0)
    with pytest.raises(ValueError):
        Domain("interval", 1.0, 2)
    with pytest.raises(ValueError):
        Domain.ball(1.0, 0)


@pytest.mark.parametrize(
    "domain, x, d",
    [(Domain.interval(1), 0.3, 0.3), (Domain.interval(1), 0.8, 0.2), (Domain.ball(2), 0.5, 1.5)],
)
def test_distance_examples(domain, x, d):
    assert distance(domain, x) == pytest.approx(d)


def test_distance_outside_rejected():
    with pytest.raises(ValueError):
        distance(Domain.interval(1), 1.5)


def test_quadrature_weights():
    assert quadrature_weight(build_mesh(Domain.interval(1), 4, 1), 1) == pytest.approx(0.25)
    assert quadrature_weight(build_mesh(Domain.ball(1, 1), 2, 1), 0) == pytest.approx(0.5)
    assert quadrature_weight(build_mesh(Domain.ball(1, 2), 1, 1), 0) == pytest.approx(0.5)
    with pytest.raises(IndexError):
        quadrature_weight(build_mesh(Domain.interval(1), 4, 1), 4)


@settings(max_examples=40, deadline=None)
@given(
    half=st.integers(1, 200),
    grading=st.floats(1.0, 6.0),
    length=st.floats(0.1, 10.0),
    radial=st.booleans(),
)
def test_mesh_invariants(half, grading, length, radial):
    domain = Domain.ball(length, 3) if radial else Domain.interval(length)
    m = build_mesh(domain, 2 * half, grading)
    assert m.nodes[0] == 0 and m.nodes[-1] == length
    assert np.all(np.diff(m.nodes) > 0)
    assert np.all(m.lengths > 0)
    assert m.lengths.sum() == pytest.approx(length, rel=1e-12)
    # exact distance at nodes, 1-Lipschitz along the coordinate
    np.testing.assert_allclose(m.dist, distance(domain, m.nodes), atol=1e-12 * length)
    assert np.all(np.abs(np.diff(m.dist)) <= np.diff(m.nodes) + 1e-14 * length)
    if not radial:
        np.testing.assert_allclose(m.nodes + m.nodes[::-1], length, rtol=1e-12)


@pytest.mark.parametrize("n", [8, 32, 128])
def test_uniform_refinement_nests(n):
    coarse = build_mesh(Domain.interval(1), n, 1.0)
    fine = build_mesh(Domain.interval(1), 2 * n, 1.0)
    np.testing.assert_array_equal(coarse.nodes, fine.nodes[::2])


@pytest.mark.parametrize("grading", [1.0, 2.0, 3.0])
def test_min_element_scaling(grading):
    h1 = build_mesh(Domain.interval(1), 256, grading).lengths.min()
    h2 = build_mesh(Domain.interval(1), 512, grading).lengths.min()
    assert h1 / h2 == pytest.approx(2.0**grading, rel=0.1)


def test_mesh_csv(tmp_path):
    m = build_mesh(Domain.interval(1), 4, 2)
    rows = (tmp_path / "m.csv").read_text().splitlines() if m.to_csv(tmp_path / "m.csv") else []
    assert rows[0] == "index,x,d" and len(rows) == 6
