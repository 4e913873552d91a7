import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geolangevin.errors import AntipodalPoints, NonPositiveDefinite, PoleSingularity
from geolangevin.geodesic import geodesic_flow
from geolangevin.geometry import (
    Chart,
    FlatTorus,
    Sphere,
    SphericalChart,
    christoffels_from_metric,
    geodesic_distance,
    metric_at,
    parallel_transport,
    riemannian_grad,
    round_metric,
)
from geolangevin.target import CosineTorus, Quadratic, Uniform, figure2_target

S2 = Sphere(3)


def random_sphere(rng, n):
    return S2.random_point(rng, n)


def random_tangent(rng, x):
    return S2.to_tangent(x, rng.standard_normal(x.shape))


def test_intrinsic_dims():
    assert Sphere(3).intrinsic_dim == 2
    assert Sphere(5).intrinsic_dim == 4
    assert FlatTorus(3).intrinsic_dim == 3


def test_torus_metric_is_flat():
    md = metric_at(FlatTorus(2), np.array([0.3, 5.0]))
    np.testing.assert_array_equal(md.g, np.eye(2))
    np.testing.assert_array_equal(md.christoffels, 0.0)


def test_spherical_chart_metric_at_equator():
    md = metric_at(SphericalChart(), np.array([np.pi / 2, 1.0]))
    np.testing.assert_allclose(md.g, np.eye(2), atol=1e-15)
    assert md.det_g == pytest.approx(1.0)


def test_chart_fd_christoffels_match_analytic():
    chart = Chart(2, lambda x: np.diag([1.0 + x[0] ** 2, 1.0]))
    md = chart.metric_at(np.array([0.0, 0.0]))
    np.testing.assert_allclose(md.g, np.eye(2))
    assert abs(md.christoffels[0, 0, 0]) < 1e-6
    x = np.array([0.7, 0.2])
    md = chart.metric_at(x)
    assert md.christoffels[0, 0, 0] == pytest.approx(x[0] / (1 + x[0] ** 2), abs=1e-6)


def test_metric_data_invariants():
    rng = np.random.default_rng(0)
    x = np.stack([rng.uniform(0.2, np.pi - 0.2, 50), rng.uniform(0, 2 * np.pi, 50)], -1)
    md = SphericalChart().metric_at(x)
    np.testing.assert_allclose(md.g @ md.g_inv, np.broadcast_to(np.eye(2), md.g.shape), atol=1e-8)
    assert np.all(md.det_g > 0)
    np.testing.assert_allclose(md.christoffels, np.swapaxes(md.christoffels, -1, -2), atol=1e-8)


def test_round_metric_chart_reproduces_spherical_christoffels():
    rng = np.random.default_rng(1)
    chart = Chart(2, round_metric)
    for _ in range(50):
        x = np.array([rng.uniform(0.2, np.pi - 0.2), rng.uniform(0, 2 * np.pi)])
        gam = chart.metric_at(x).christoffels
        s, c = np.sin(x[0]), np.cos(x[0])
        assert gam[0, 1, 1] == pytest.approx(-s * c, abs=1e-5)
        assert gam[1, 0, 1] == pytest.approx(c / s, abs=1e-5)
        np.testing.assert_allclose(gam, SphericalChart().metric_at(x).christoffels, atol=1e-5)


def test_christoffels_from_metric_shape():
    gam = christoffels_from_metric(round_metric, np.array([1.0, 0.5]))
    assert gam.shape == (2, 2, 2)


def test_non_spd_metric_rejected():
    with pytest.raises(NonPositiveDefinite):
        Chart(2, lambda x: np.diag([1.0, -1.0])).metric_at(np.zeros(2))
    with pytest.raises(NonPositiveDefinite):
        Chart(2, lambda x: np.array([[1.0, 0.5], [0.0, 1.0]])).metric_at(np.zeros(2))


def test_pole_singularity():
    with pytest.raises(PoleSingularity):
        SphericalChart().metric_at(np.array([1e-4, 0.0]))
    with pytest.raises(PoleSingularity):
        SphericalChart().metric_at(np.array([np.pi - 1e-4, 0.0]))


def test_metric_at_rejects_embedded_sphere():
    with pytest.raises(TypeError):
        metric_at(S2, np.array([1.0, 0.0, 0.0]))


def test_sphere_grad_linear():
    g = riemannian_grad(S2, figure2_target(), np.array([1.0, 0.0, 0.0]))
    np.testing.assert_allclose(g, [0.0, 1.0, 1.0], atol=1e-15)


def test_sphere_grad_matches_chart_grad():
    # push the chart gradient g^{-1} df forward through the embedding
    rng = np.random.default_rng(2)
    t = Quadratic(np.diag([1.0, 2.0, -0.5]), [0.3, 0.0, 1.0])
    chart = SphericalChart()
    x = np.stack([rng.uniform(0.3, np.pi - 0.3, 20), rng.uniform(0, 2 * np.pi, 20)], -1)
    g_chart = riemannian_grad(chart, t, x)
    pushed = np.einsum("...ij,...j->...i", chart.embed_jacobian(x), g_chart)
    np.testing.assert_allclose(pushed, riemannian_grad(S2, t, chart.embed(x)), atol=1e-12)


def test_torus_grad():
    g = riemannian_grad(FlatTorus(2), CosineTorus(2), np.array([np.pi / 2, 0.0]))
    np.testing.assert_allclose(g, [-1.0, 0.0], atol=1e-15)


@pytest.mark.parametrize("m,x", [(S2, np.array([0.0, 0.6, 0.8])), (FlatTorus(2), np.array([1.0, 2.0]))])
def test_constant_target_has_zero_grad(m, x):
    np.testing.assert_array_equal(riemannian_grad(m, Uniform(), x), 0.0)


def test_sphere_grad_is_tangent():
    rng = np.random.default_rng(3)
    x = random_sphere(rng, 200)
    g = riemannian_grad(S2, Quadratic(np.diag([1.0, 3.0, -1.0])), x)
    assert np.max(np.abs(np.sum(g * x, axis=-1))) < 1e-12


def test_parallel_transport_examples():
    x, y = np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])
    np.testing.assert_allclose(parallel_transport(S2, x, y, np.array([0.0, 1.0, 0.0])), [-1.0, 0.0, 0.0], atol=1e-15)
    v = np.array([0.0, 0.3, -0.2])
    np.testing.assert_allclose(parallel_transport(S2, x, x, v), v)
    T = FlatTorus(2)
    np.testing.assert_array_equal(parallel_transport(T, np.array([0.1, 0.2]), np.array([4.0, 5.0]), np.array([2.0, -1.0])), [2.0, -1.0])


def test_parallel_transport_antipodal():
    with pytest.raises(AntipodalPoints):
        parallel_transport(S2, np.array([0.0, 0.0, 1.0]), np.array([0.0, 0.0, -1.0]), np.array([1.0, 0.0, 0.0]))


def test_parallel_transport_isometry_1000():
    rng = np.random.default_rng(4)
    x, y = random_sphere(rng, 1000), random_sphere(rng, 1000)
    v = random_tangent(rng, x)
    w = parallel_transport(S2, x, y, v)
    np.testing.assert_allclose(np.linalg.norm(w, axis=-1), np.linalg.norm(v, axis=-1), atol=1e-9)
    assert np.max(np.abs(np.sum(w * y, axis=-1))) < 1e-9


def test_parallel_transport_matches_transport_ode():
    # integrate D_t V = 0 along the chart geodesic from x to y and compare
    chart = SphericalChart()
    rng = np.random.default_rng(5)
    for _ in range(5):
        p = np.array([rng.uniform(1.0, 2.1), rng.uniform(0, 2 * np.pi)])
        u = rng.standard_normal(2) * 0.4
        xs, vs = geodesic_flow(chart, p, u, n_steps=2000)
        V = rng.standard_normal(2)
        V0 = V.copy()
        h = 1.0 / 2000
        for k in range(2000):
            # midpoint rule for V' = -Gamma(gamma', V)
            def rhs(pos, vel, vec):
                gam = chart.metric_at(pos).christoffels
                return -np.einsum("ijk,j,k->i", gam, vel, vec)

            mid_pos = 0.5 * (xs[k] + xs[k + 1])
            mid_vel = 0.5 * (vs[k] + vs[k + 1])
            V = V + h * rhs(mid_pos, mid_vel, V + 0.5 * h * rhs(xs[k], vs[k], V))
        x, y = chart.embed(p), chart.embed(xs[-1])
        expect = parallel_transport(S2, x, y, chart.embed_jacobian(p) @ V0)
        np.testing.assert_allclose(chart.embed_jacobian(xs[-1]) @ V, expect, atol=1e-5)


def test_geodesic_distance_examples():
    x, y = np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])
    assert geodesic_distance(S2, x, y) == pytest.approx(np.pi / 2)
    assert geodesic_distance(S2, x, -x) == pytest.approx(np.pi)
    assert geodesic_distance(S2, x, x) == 0.0
    T1 = FlatTorus(1)
    assert geodesic_distance(T1, np.array([0.1]), np.array([2 * np.pi - 0.1])) == pytest.approx(0.2)


def test_geodesic_distance_matches_arccos():
    rng = np.random.default_rng(6)
    x, y = random_sphere(rng, 500), random_sphere(rng, 500)
    ref = np.arccos(np.clip(np.sum(x * y, axis=-1), -1, 1))
    np.testing.assert_allclose(geodesic_distance(S2, x, y), ref, atol=1e-9)


def test_triangle_inequality_1000():
    rng = np.random.default_rng(7)
    x, y, z = (random_sphere(rng, 1000) for _ in range(3))
    d = lambda a, b: geodesic_distance(S2, a, b)  # noqa: E731
    assert np.all(d(x, z) <= d(x, y) + d(y, z) + 1e-9)
    np.testing.assert_array_equal(d(x, y), d(y, x))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-20, 20), min_size=3, max_size=3))
def test_torus_project_in_range(coords):
    y = FlatTorus(3).project(np.array(coords))
    FlatTorus(3).check_point(y)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 1e-3))
def test_sphere_project_unit(coords):
    y = S2.project(np.array(coords))
    assert abs(np.linalg.norm(y) - 1.0) <= 1e-12
    S2.check_point(y)
