import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from geolangevin.errors import GradientMismatch, QuadratureNotConverged
from geolangevin.geometry import FlatTorus, Sphere, SphericalChart
from geolangevin.partition import EqualAreaGrid, LatLonGrid
from geolangevin.target import (
    FIGURE1_A,
    ChartFn,
    CosineTorus,
    Quadratic,
    Uniform,
    eval_f,
    eval_grad_ambient,
    figure1_target,
    figure2_target,
    normalize,
    reference_masses,
    target_from_dict,
)

S2 = Sphere(3)
E1 = np.array([1.0, 0.0, 0.0])


def test_uniform():
    x = np.array([[0.0, 0.6, 0.8], [1.0, 0.0, 0.0]])
    np.testing.assert_array_equal(eval_f(Uniform(), x), 0.0)
    np.testing.assert_array_equal(eval_grad_ambient(Uniform(), x), 0.0)


def test_figure2_target_at_e1():
    assert eval_f(figure2_target(), E1) == 1.0
    np.testing.assert_array_equal(eval_grad_ambient(figure2_target(), E1), [1.0, 1.0, 1.0])


def test_figure1_target_at_e1():
    assert eval_f(figure1_target(), E1) == pytest.approx(1.0)
    np.testing.assert_allclose(eval_grad_ambient(figure1_target(), E1), [2.0, 1.1, 2.1])


def test_figure1_coefficients_expand():
    # x1^2 + 3.05 x2^2 - 0.9 x3^2 + 1.1 x1 x2 - 1.02 x2 x3 + 2.1 x3 x1
    rng = np.random.default_rng(0)
    x = rng.standard_normal((20, 3))
    x1, x2, x3 = x.T
    expanded = x1**2 + 3.05 * x2**2 - 0.9 * x3**2 + 1.1 * x1 * x2 - 1.02 * x2 * x3 + 2.1 * x3 * x1
    np.testing.assert_allclose(figure1_target().f(x), expanded, rtol=1e-13)
    np.testing.assert_array_equal(FIGURE1_A, FIGURE1_A.T)


def test_quadratic_gradient_matches_fd():
    t = Quadratic(FIGURE1_A, [0.2, -0.1, 0.4], 1.5)
    rng = np.random.default_rng(1)
    x = rng.standard_normal(3)
    h = 1e-6
    fd = [(t.f(x + h * e) - t.f(x - h * e)) / (2 * h) for e in np.eye(3)]
    np.testing.assert_allclose(t.grad(x), fd, atol=1e-7)


def test_quadratic_must_be_symmetric():
    with pytest.raises(ValueError):
        Quadratic([[1.0, 1.0], [0.0, 1.0]])


def test_chartfn_validates_gradient():
    f = lambda x: np.sin(x[..., 0]) * np.cos(x[..., 1])  # noqa: E731
    good = lambda x: np.stack([np.cos(x[..., 0]) * np.cos(x[..., 1]), -np.sin(x[..., 0]) * np.sin(x[..., 1])], -1)  # noqa: E731
    t = ChartFn(f, good, 2)
    assert t.f(np.array([0.5, 0.0])) == pytest.approx(np.sin(0.5))
    bad = lambda x: good(x) * 1.1  # noqa: E731
    with pytest.raises(GradientMismatch):
        ChartFn(f, bad, 2)


def test_cosine_torus():
    t = CosineTorus(2)
    np.testing.assert_allclose(t.grad(np.array([np.pi / 2, 0.0])), [-1.0, 0.0], atol=1e-15)


@pytest.mark.parametrize("spec", [
    {"type": "uniform"},
    {"type": "quadratic", "A": FIGURE1_A.tolist(), "b": [0.0, 0.0, 0.0], "c": 0.0},
    {"type": "cosine", "dim": 2, "axis": 1, "scale": 2.0},
])
def test_target_dict_roundtrip(spec):
    assert target_from_dict(spec).to_dict() == spec


def test_unknown_target_type():
    with pytest.raises(ValueError):
        target_from_dict({"type": "banana"})


def test_chart_grad_of_ambient_target():
    # d/dtheta, d/dphi of f(embed(theta, phi)) by finite differences
    chart = SphericalChart()
    t = figure1_target()
    p = np.array([1.1, 2.3])
    h = 1e-6
    fd = [(t.chart_f(chart, p + h * e) - t.chart_f(chart, p - h * e)) / (2 * h) for e in np.eye(2)]
    np.testing.assert_allclose(t.chart_grad(chart, p), fd, atol=1e-7)


def test_normalize_uniform_sphere():
    Z, nu = normalize(Uniform(), S2)
    assert Z == pytest.approx(4 * np.pi, rel=1e-3)
    assert nu.masses.sum() == pytest.approx(1.0, abs=1e-9)
    assert nu.areas.sum() == pytest.approx(4 * np.pi, rel=1e-6)


def test_normalize_linear_closed_form():
    a = np.ones(3)
    Z, _ = normalize(figure2_target(), S2)
    exact = 4 * np.pi * np.sinh(np.sqrt(3.0)) / np.sqrt(3.0)
    assert exact == pytest.approx(19.8622, abs=1e-4)
    assert Z == pytest.approx(exact, rel=1e-3)
    Z2, _ = normalize(Quadratic(np.zeros((3, 3)), 2 * a), S2)
    assert Z2 == pytest.approx(4 * np.pi * np.sinh(2 * np.sqrt(3.0)) / (2 * np.sqrt(3.0)), rel=1e-3)


def test_normalize_figure1_self_convergence():
    Z64, _ = normalize(figure1_target(), S2, resolution=64)
    Z128, _ = normalize(figure1_target(), S2, resolution=128)
    assert abs(Z64 - Z128) / Z128 <= 1e-3


def test_normalize_not_converged():
    sharp = Quadratic(np.zeros((3, 3)), [0.0, 0.0, 200.0])
    with pytest.raises(QuadratureNotConverged):
        normalize(sharp, S2, resolution=8)


def test_normalize_torus():
    Z, nu = normalize(Uniform(), FlatTorus(2))
    assert Z == pytest.approx((2 * np.pi) ** 2, rel=1e-9)


def test_reference_density_positive():
    for t in (figure1_target(), figure2_target()):
        _, nu = normalize(t, S2)
        assert nu.masses.min() > 0
        assert reference_masses(t, EqualAreaGrid()).masses.min() > 0


def test_normalize_rotation_invariant():
    R = Rotation.from_euler("zyx", [0.4, -1.1, 2.0]).as_matrix()
    t = Quadratic(FIGURE1_A, [0.3, -0.2, 0.5])
    rotated = Quadratic(R @ FIGURE1_A @ R.T, R @ t.b)
    Z, _ = normalize(t, S2)
    Zr, _ = normalize(rotated, S2)
    assert Zr == pytest.approx(Z, rel=2e-3)


def test_reference_masses_agree_with_latlon_quadrature():
    Z, nu = normalize(figure1_target(), S2, resolution=64)
    ref = reference_masses(figure1_target(), LatLonGrid(16, 32))
    # aggregate the 64x128 masses into 16x32 blocks
    coarse = nu.masses.reshape(16, 4, 32, 4).sum(axis=(1, 3)).ravel()
    np.testing.assert_allclose(ref.masses, coarse, atol=2e-4)
