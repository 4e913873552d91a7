"""Manifolds and pointwise geometric data.

Points and tangent vectors are plain numpy arrays whose last axis holds the
coordinates; leading axes are treated as a batch.  Three kinds of manifold are
supported:

* :class:`Sphere` -- the unit sphere S^{n-1} embedded in R^n (ambient coords).
* :class:`FlatTorus` -- R^n / (2 pi Z)^n with the flat metric.
* :class:`Chart` -- a single coordinate patch carrying a user-supplied metric.
  :class:`SphericalChart` is the (polar, azimuth) patch of S^2 with the round
  metric and closed-form Christoffel symbols.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from geolangevin.errors import AntipodalPoints, NonPositiveDefinite, PoleSingularity

TWO_PI = 2.0 * np.pi

#: pole clamp for the spherical chart (rad)
POLE_DELTA = 1e-3
#: central-difference step for metric derivatives
FD_STEP = 1e-5


@dataclass(frozen=True)
class MetricData:
    """Metric tensor, inverse, determinant and Christoffel symbols at a point.

    ``christoffels[..., i, j, k]`` holds Gamma^i_{jk}.
    """

    g: np.ndarray
    g_inv: np.ndarray
    det_g: np.ndarray
    christoffels: np.ndarray

    @property
    def dim(self) -> int:
        return self.g.shape[-1]


class Manifold:
    """Common interface.  Subclasses override what applies to them."""

    #: dimension of the manifold
    intrinsic_dim: int
    #: length of a coordinate vector (ambient dim for embedded manifolds)
    coord_dim: int
    #: True when coordinates are chart coordinates with a metric matrix
    has_chart: bool = False

    def check_point(self, x: np.ndarray) -> None:
        pass

    def project(self, x: np.ndarray) -> np.ndarray:
        """Map coordinates back onto the manifold (renormalize / wrap)."""
        return np.asarray(x, dtype=float)

    def to_tangent(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        return np.asarray(v, dtype=float)

    def inner(self, x: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        return np.sum(u * v, axis=-1)

    def norm(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        return np.sqrt(np.maximum(self.inner(x, v, v), 0.0))

    def random_point(self, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
        raise NotImplementedError

    def diameter(self) -> float:
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError


class Sphere(Manifold):
    """Unit sphere S^{n-1} in R^n, represented by ambient unit vectors."""

    def __init__(self, n: int = 3):
        if n < 2:
            raise ValueError("sphere needs ambient dimension >= 2")
        self.n = n
        self.coord_dim = n
        self.intrinsic_dim = n - 1

    def __repr__(self) -> str:
        return f"Sphere({self.n})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Sphere) and other.n == self.n

    def __hash__(self) -> int:
        return hash(("Sphere", self.n))

    def check_point(self, x, tol=1e-9):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise ValueError(f"expected {self.n} ambient coordinates, got {x.shape[-1]}")
        if np.any(np.abs(np.linalg.norm(x, axis=-1) - 1.0) > tol):
            raise ValueError("point is not on the unit sphere")

    def project(self, x):
        x = np.asarray(x, dtype=float)
        return x / np.linalg.norm(x, axis=-1, keepdims=True)

    def to_tangent(self, x, v):
        """Orthogonal projection of an ambient vector onto T_x S."""
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        return v - np.sum(x * v, axis=-1, keepdims=True) * x

    def random_point(self, rng, size=None):
        shape = (self.n,) if size is None else (size, self.n)
        return self.project(rng.standard_normal(shape))

    def diameter(self) -> float:
        return float(np.pi)

    @property
    def chart(self) -> "SphericalChart":
        if self.n != 3:
            raise ValueError("the spherical chart is only provided for S^2")
        return SphericalChart()

    def describe(self) -> dict:
        return {"type": "sphere", "n": self.n}


class FlatTorus(Manifold):
    """Flat torus T^n = R^n / (2 pi Z)^n with coordinates in [0, 2 pi)."""

    has_chart = True

    def __init__(self, n: int = 2):
        if n < 1:
            raise ValueError("torus dimension must be >= 1")
        self.n = n
        self.coord_dim = n
        self.intrinsic_dim = n

    def __repr__(self) -> str:
        return f"FlatTorus({self.n})"

    def __eq__(self, other) -> bool:
        return isinstance(other, FlatTorus) and other.n == self.n

    def __hash__(self) -> int:
        return hash(("FlatTorus", self.n))

    def check_point(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise ValueError(f"expected {self.n} coordinates, got {x.shape[-1]}")
        if np.any(x < 0.0) or np.any(x >= TWO_PI):
            raise ValueError("torus coordinates must lie in [0, 2*pi)")

    def project(self, x):
        y = np.mod(np.asarray(x, dtype=float), TWO_PI)
        # mod can round tiny negatives up to exactly 2*pi
        return np.where(y >= TWO_PI, 0.0, y)

    def metric_at(self, x) -> MetricData:
        x = np.asarray(x, dtype=float)
        batch = x.shape[:-1]
        eye = np.broadcast_to(np.eye(self.n), batch + (self.n, self.n)).copy()
        return MetricData(
            g=eye,
            g_inv=eye.copy(),
            det_g=np.ones(batch),
            christoffels=np.zeros(batch + (self.n,) * 3),
        )

    def in_domain(self, x) -> bool:
        return True

    def random_point(self, rng, size=None):
        shape = (self.n,) if size is None else (size, self.n)
        return rng.uniform(0.0, TWO_PI, shape)

    def diameter(self) -> float:
        return float(np.pi * np.sqrt(self.n))

    def describe(self) -> dict:
        return {"type": "torus", "n": self.n}


def _check_spd(g: np.ndarray) -> None:
    if not np.allclose(g, np.swapaxes(g, -1, -2), atol=1e-12, rtol=0.0):
        raise NonPositiveDefinite("metric matrix is not symmetric")
    if np.any(np.linalg.eigvalsh(g)[..., 0] <= 0.0):
        raise NonPositiveDefinite("metric matrix is not positive definite")


def christoffels_from_metric(
    metric_fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float = FD_STEP
) -> np.ndarray:
    """Christoffel symbols of the first-kind-free formula by central differences.

    Gamma^i_{jk} = 1/2 g^{il} (d_j g_{lk} + d_k g_{lj} - d_l g_{jk}).
    """
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    g = metric_fn(x)
    dg = np.empty((d, d, d))  # dg[l] = d g / d x_l
    for l in range(d):
        e = np.zeros(d)
        e[l] = h
        dg[l] = (metric_fn(x + e) - metric_fn(x - e)) / (2.0 * h)
    # lower[l, j, k] = 1/2 (d_j g_{lk} + d_k g_{lj} - d_l g_{jk})
    lower = 0.5 * (
        np.einsum("jlk->ljk", dg) + np.einsum("klj->ljk", dg) - dg
    )
    return np.einsum("il,ljk->ijk", np.linalg.inv(g), lower)


class Chart(Manifold):
    """A single chart with a user-supplied metric ``metric_fn(x) -> (d, d)``.

    Christoffel symbols come from ``christoffel_fn`` when given, otherwise from
    central differences of the metric with step ``FD_STEP``.  ``domain`` is an
    optional predicate marking where the chart is valid.
    """

    has_chart = True

    def __init__(
        self,
        dim: int,
        metric_fn: Callable[[np.ndarray], np.ndarray],
        christoffel_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        domain: Optional[Callable[[np.ndarray], bool]] = None,
        name: str = "chart",
    ):
        self.intrinsic_dim = dim
        self.coord_dim = dim
        self.metric_fn = metric_fn
        self.christoffel_fn = christoffel_fn
        self.domain = domain
        self.name = name

    def __repr__(self) -> str:
        return f"Chart({self.intrinsic_dim}, {self.name})"

    def in_domain(self, x) -> bool:
        if self.domain is None:
            return True
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return bool(self.domain(x))
        return all(self.domain(p) for p in x.reshape(-1, x.shape[-1]))

    def _metric_single(self, x: np.ndarray) -> MetricData:
        g = np.asarray(self.metric_fn(x), dtype=float)
        _check_spd(g)
        if self.christoffel_fn is not None:
            gamma = np.asarray(self.christoffel_fn(x), dtype=float)
        else:
            gamma = christoffels_from_metric(self.metric_fn, x)
        return MetricData(g=g, g_inv=np.linalg.inv(g), det_g=np.linalg.det(g), christoffels=gamma)

    def metric_at(self, x) -> MetricData:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return self._metric_single(x)
        flat = x.reshape(-1, x.shape[-1])
        parts = [self._metric_single(p) for p in flat]
        batch = x.shape[:-1]
        d = self.intrinsic_dim
        return MetricData(
            g=np.stack([p.g for p in parts]).reshape(batch + (d, d)),
            g_inv=np.stack([p.g_inv for p in parts]).reshape(batch + (d, d)),
            det_g=np.array([p.det_g for p in parts]).reshape(batch),
            christoffels=np.stack([p.christoffels for p in parts]).reshape(batch + (d, d, d)),
        )

    def inner(self, x, u, v):
        g = self.metric_at(x).g
        return np.einsum("...i,...ij,...j->...", u, g, v)

    def describe(self) -> dict:
        return {"type": "chart", "name": self.name, "dim": self.intrinsic_dim}


def round_metric(x: np.ndarray) -> np.ndarray:
    """Round metric of S^2 in (polar, azimuth) coordinates."""
    x = np.asarray(x, dtype=float)
    s = np.sin(x[..., 0])
    g = np.zeros(x.shape[:-1] + (2, 2))
    g[..., 0, 0] = 1.0
    g[..., 1, 1] = s * s
    return g


class SphericalChart(Chart):
    """S^2 in (theta, phi) coordinates, theta the polar angle.

    Valid for theta in [POLE_DELTA, pi - POLE_DELTA]; phi is any real number and
    is wrapped into [0, 2 pi) by :meth:`project`.
    """

    def __init__(self, pole_delta: float = POLE_DELTA):
        super().__init__(2, round_metric, name="spherical")
        self.pole_delta = pole_delta

    def __repr__(self) -> str:
        return "SphericalChart()"

    def in_domain(self, x) -> bool:
        th = np.asarray(x, dtype=float)[..., 0]
        return bool(np.all((th >= self.pole_delta) & (th <= np.pi - self.pole_delta)))

    def check_point(self, x):
        if not self.in_domain(x):
            raise PoleSingularity("polar angle outside the chart clamp")

    def project(self, x):
        x = np.array(x, dtype=float)
        x[..., 1] = np.mod(x[..., 1], TWO_PI)
        return x

    def metric_at(self, x) -> MetricData:
        x = np.asarray(x, dtype=float)
        self.check_point(x)
        th = x[..., 0]
        s, c = np.sin(th), np.cos(th)
        g = round_metric(x)
        g_inv = np.zeros_like(g)
        g_inv[..., 0, 0] = 1.0
        g_inv[..., 1, 1] = 1.0 / (s * s)
        gamma = np.zeros(x.shape[:-1] + (2, 2, 2))
        gamma[..., 0, 1, 1] = -s * c
        gamma[..., 1, 0, 1] = c / s
        gamma[..., 1, 1, 0] = c / s
        return MetricData(g=g, g_inv=g_inv, det_g=s * s, christoffels=gamma)

    def inner(self, x, u, v):
        s = np.sin(np.asarray(x, dtype=float)[..., 0])
        return u[..., 0] * v[..., 0] + s * s * u[..., 1] * v[..., 1]

    @staticmethod
    def embed(x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        th, ph = x[..., 0], x[..., 1]
        st = np.sin(th)
        return np.stack([st * np.cos(ph), st * np.sin(ph), np.cos(th)], axis=-1)

    @staticmethod
    def embed_jacobian(x) -> np.ndarray:
        """d(embedded)/d(theta, phi), shape (..., 3, 2)."""
        x = np.asarray(x, dtype=float)
        th, ph = x[..., 0], x[..., 1]
        st, ct, sp, cp = np.sin(th), np.cos(th), np.sin(ph), np.cos(ph)
        jac = np.zeros(x.shape[:-1] + (3, 2))
        jac[..., 0, 0] = ct * cp
        jac[..., 1, 0] = ct * sp
        jac[..., 2, 0] = -st
        jac[..., 0, 1] = -st * sp
        jac[..., 1, 1] = st * cp
        return jac

    @staticmethod
    def from_embedded(y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        th = np.arccos(np.clip(y[..., 2], -1.0, 1.0))
        ph = np.mod(np.arctan2(y[..., 1], y[..., 0]), TWO_PI)
        return np.stack([th, ph], axis=-1)

    def random_point(self, rng, size=None):
        return self.from_embedded(Sphere(3).random_point(rng, size))

    def diameter(self) -> float:
        return float(np.pi)

    def describe(self) -> dict:
        return {"type": "spherical_chart"}


def metric_at(m: Manifold, x) -> MetricData:
    """Metric data of a chart-based manifold at chart point(s) ``x``."""
    if isinstance(m, Sphere):
        raise TypeError("embedded sphere has no metric matrix; use Sphere(3).chart")
    return m.metric_at(x)


def riemannian_grad(m: Manifold, target, x) -> np.ndarray:
    """Riemannian gradient of ``target`` at ``x``, in the manifold's coordinates.

    Embedded sphere: tangent projection of the ambient gradient.  Chart-based
    manifolds: g^{-1} times the coordinate gradient.
    """
    x = np.asarray(x, dtype=float)
    if isinstance(m, Sphere):
        return m.to_tangent(x, target.grad(x))
    dfx = target.chart_grad(m, x)
    return np.einsum("...ij,...j->...i", m.metric_at(x).g_inv, dfx)


def parallel_transport(m: Manifold, x, y, v) -> np.ndarray:
    """Transport ``v`` in T_x M to T_y M along the minimizing geodesic."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    v = np.asarray(v, dtype=float)
    if isinstance(m, Sphere):
        c = np.sum(x * y, axis=-1, keepdims=True)
        if np.any(c <= -1.0 + 1e-9):
            raise AntipodalPoints("no unique minimizing geodesic between antipodal points")
        coef = np.sum(y * v, axis=-1, keepdims=True) / (1.0 + c)
        return v - coef * (x + y)
    if isinstance(m, FlatTorus):
        return v.copy()
    if isinstance(m, SphericalChart):
        xe, ye = m.embed(x), m.embed(y)
        ve = np.einsum("...ij,...j->...i", m.embed_jacobian(x), v)
        we = parallel_transport(Sphere(3), xe, ye, ve)
        jac = m.embed_jacobian(y)
        # columns of the Jacobian are orthogonal with squared norms (1, sin^2)
        sq = np.sum(jac * jac, axis=-2)
        return np.einsum("...ij,...i->...j", jac, we) / sq
    raise NotImplementedError(f"parallel transport is not available on {m!r}")


def geodesic_distance(m: Manifold, x, y) -> np.ndarray:
    """Length of the minimizing geodesic between ``x`` and ``y``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if isinstance(m, Sphere):
        # equals arccos(<x, y>) but stays accurate near 0 and pi
        return 2.0 * np.arctan2(
            np.linalg.norm(x - y, axis=-1), np.linalg.norm(x + y, axis=-1)
        )
    if isinstance(m, FlatTorus):
        d = np.abs(x - y) % TWO_PI
        d = np.minimum(d, TWO_PI - d)
        return np.sqrt(np.sum(d * d, axis=-1))
    if isinstance(m, SphericalChart):
        return geodesic_distance(Sphere(3), m.embed(x), m.embed(y))
    raise NotImplementedError(f"geodesic distance is not available on {m!r}")
