"""Exponential maps, retractions and the normal-coordinate metric check."""

from __future__ import annotations

import numpy as np

from geolangevin.errors import ChartExit, DegenerateProjection, PoleSingularity
from geolangevin.geometry import Chart, FlatTorus, Manifold, Sphere, SphericalChart

DEFAULT_ODE_STEPS = 64


def exp_sphere(x, v) -> np.ndarray:
    """Closed-form exponential map of the unit sphere, batched over leading axes."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    nv = np.linalg.norm(v, axis=-1, keepdims=True)
    small = nv < 1e-12
    safe = np.where(small, 1.0, nv)
    y = np.cos(nv) * x + np.sin(nv) * (v / safe)
    y = np.where(small, x, y)
    return y / np.linalg.norm(y, axis=-1, keepdims=True)


def geodesic_accel(m: Manifold, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    """-Gamma^i_{jk} v^j v^k at chart point(s) x."""
    if isinstance(m, SphericalChart):
        th = x[..., 0]
        s, c = np.sin(th), np.cos(th)
        a = np.empty_like(v)
        a[..., 0] = s * c * v[..., 1] ** 2
        a[..., 1] = -2.0 * (c / s) * v[..., 0] * v[..., 1]
        return a
    gamma = m.metric_at(x).christoffels
    return -np.einsum("...ijk,...j,...k->...i", gamma, v, v)


def _check_chart(m: Manifold, x: np.ndarray) -> None:
    if not m.in_domain(x):
        raise ChartExit("geodesic left the valid region of the chart")


def geodesic_flow(m: Manifold, x, v, n_steps: int = DEFAULT_ODE_STEPS, t_end: float = 1.0):
    """RK4 trajectory of the geodesic ODE on a chart.

    Returns ``(positions, velocities)`` with shape ``(n_steps + 1, ...)``.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    h = t_end / n_steps
    xs, vs = [x], [v]

    def accel(p, q):
        _check_chart(m, p)
        try:
            return geodesic_accel(m, p, q)
        except PoleSingularity as exc:
            raise ChartExit(str(exc)) from exc

    for _ in range(n_steps):
        k1x, k1v = v, accel(x, v)
        k2x, k2v = v + 0.5 * h * k1v, accel(x + 0.5 * h * k1x, v + 0.5 * h * k1v)
        k3x, k3v = v + 0.5 * h * k2v, accel(x + 0.5 * h * k2x, v + 0.5 * h * k2v)
        k4x, k4v = v + h * k3v, accel(x + h * k3x, v + h * k3v)
        x = x + (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
        v = v + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
        xs.append(x)
        vs.append(v)
    _check_chart(m, x)
    return np.stack(xs), np.stack(vs)


def exp_ode(m: Manifold, x, v, n_steps: int = DEFAULT_ODE_STEPS) -> np.ndarray:
    """gamma(1) of the geodesic with gamma(0) = x, gamma'(0) = v, in chart coordinates.

    Flat tori use the exact straight line. Chart manifolds integrate
    x'' + Gamma(x', x') = 0 with ``n_steps`` classical RK4 steps.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if isinstance(m, FlatTorus):
        return m.project(x + v)
    if isinstance(m, Sphere):
        return _exp_ode_sphere(x, v, n_steps)
    if not isinstance(m, Chart):
        raise TypeError(f"exp_ode needs chart coordinates, got {m!r}")
    if not np.any(v):
        return x.copy()
    xs, _ = geodesic_flow(m, x, v, n_steps)
    return m.project(xs[-1])


#: heading of the geodesic in the oblique chart, (phi, -theta) components at the chart equator
_OBLIQUE_HEADING = np.array([0.0, np.sqrt(0.5), np.sqrt(0.5)])


def oblique_frame(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Orthogonal maps Q (..., 3, 3) with Q x = e1 and Q w parallel to the oblique heading.

    In the spherical chart composed with Q, x sits at (pi/2, 0) and the geodesic
    along w climbs at 45 degrees, so it never comes closer than 45 degrees to
    the chart poles.
    """
    nw = np.linalg.norm(w, axis=-1, keepdims=True)
    u = w / np.where(nw > 0, nw, 1.0)
    # zero headings get an arbitrary tangent direction; Q is irrelevant for them
    fallback = np.cross(x, np.eye(3)[np.argmin(np.abs(x), axis=-1)])
    fallback /= np.linalg.norm(fallback, axis=-1, keepdims=True)
    u = np.where(nw > 0, u, fallback)
    n = np.cross(x, u)
    src = np.stack([x, u, n], axis=-1)  # columns x, u, n
    e1 = np.array([1.0, 0.0, 0.0])
    dst = np.stack([e1, _OBLIQUE_HEADING, np.cross(e1, _OBLIQUE_HEADING)], axis=-1)
    return dst @ np.swapaxes(src, -1, -2)


def _exp_ode_sphere(x: np.ndarray, w: np.ndarray, n_steps: int) -> np.ndarray:
    chart = SphericalChart()
    q = oblique_frame(x, w)
    qw = np.einsum("...ij,...j->...i", q, w)
    # at (pi/2, 0): d/dtheta = -e3, d/dphi = e2, both unit length
    v = np.stack([-qw[..., 2], qw[..., 1]], axis=-1)
    start = np.broadcast_to(np.array([0.5 * np.pi, 0.0]), v.shape).copy()
    end = exp_ode(chart, start, v, n_steps)
    y = np.einsum("...ji,...j->...i", q, chart.embed(end))
    return y / np.linalg.norm(y, axis=-1, keepdims=True)


def retract_project(m: Manifold, x, v) -> np.ndarray:
    """Projection retraction: Retr_x(v) = Proj_M(x + v)."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if isinstance(m, Sphere):
        y = x + v
        ny = np.linalg.norm(y, axis=-1, keepdims=True)
        if np.any(ny < 1e-12):
            raise DegenerateProjection("x + v vanishes")
        return y / ny
    if isinstance(m, FlatTorus):
        return m.project(x + v)
    raise NotImplementedError(f"no projection retraction on {m!r}")


def tangent_basis(x) -> np.ndarray:
    """Orthonormal basis (2, 3) of T_x S^2."""
    x = np.asarray(x, dtype=float)
    a = np.eye(3)[np.argmin(np.abs(x))]
    e1 = a - np.dot(a, x) * x
    e1 /= np.linalg.norm(e1)
    return np.stack([e1, np.cross(x, e1)])


def pullback_metric(x, u, h: float = 1e-5) -> np.ndarray:
    """Round metric pulled back through u -> Exp_x(u1 e1 + u2 e2), by central differences."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    basis = tangent_basis(x)

    def phi(w):
        return exp_sphere(x, w @ basis)

    jac = np.empty((3, 2))
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        jac[:, k] = (phi(u + e) - phi(u - e)) / (2 * h)
    return jac.T @ jac


def curvature_expansion(u) -> np.ndarray:
    """delta_ij - 1/3 sum R_ikjl u^k u^l for sectional curvature 1."""
    u = np.asarray(u, dtype=float)
    return np.eye(2) - (np.dot(u, u) * np.eye(2) - np.outer(u, u)) / 3.0


def normal_metric_residuals(x, radii, grid: int = 16) -> np.ndarray:
    """Max-norm residual of pullback minus expansion, maximized over ``grid`` directions."""
    angles = np.linspace(0.0, 2 * np.pi, grid, endpoint=False)
    out = []
    for r in radii:
        worst = 0.0
        for a in angles:
            u = r * np.array([np.cos(a), np.sin(a)])
            worst = max(worst, np.max(np.abs(pullback_metric(x, u) - curvature_expansion(u))))
        out.append(worst)
    return np.array(out)


def normal_metric_expansion_check(x, radius: float = 0.2, grid: int = 16, n_radii: int = 3) -> float:
    """Log-log slope of the normal-coordinate metric residual over radii radius * 2^-k."""
    if radius > np.pi / 4:
        raise ValueError("radius must be <= pi/4")
    radii = radius * 0.5 ** np.arange(n_radii)
    res = normal_metric_residuals(x, radii, grid)
    slope, _ = np.polyfit(np.log(radii), np.log(res), 1)
    return float(slope)
