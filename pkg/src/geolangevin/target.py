"""Potentials f, their gradients, and the normalized reference density e^{-f}/Z."""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from geolangevin.errors import GradientMismatch, QuadratureNotConverged
from geolangevin.geometry import FlatTorus, Manifold, Sphere, SphericalChart
from geolangevin.partition import BinnedDensity, LatLonGrid, Partition, TorusGrid


class Target:
    """Potential f with gradient.

    ``coords`` says which coordinates :meth:`f` and :meth:`grad` take:
    ``"ambient"`` for embedded coordinates, ``"chart"`` for chart coordinates,
    ``"any"`` for constants.
    """

    coords = "any"

    def f(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def chart_grad(self, m: Manifold, x: np.ndarray) -> np.ndarray:
        """Coordinate gradient df/dx_j in the chart of ``m``."""
        x = np.asarray(x, dtype=float)
        if self.coords == "ambient":
            if not isinstance(m, SphericalChart):
                raise TypeError(f"{type(self).__name__} is defined on ambient coordinates")
            jac = m.embed_jacobian(x)
            return np.einsum("...ij,...i->...j", jac, self.grad(m.embed(x)))
        return self.grad(x)

    def chart_f(self, m: Manifold, x: np.ndarray) -> np.ndarray:
        if self.coords == "ambient" and isinstance(m, SphericalChart):
            return self.f(m.embed(x))
        return self.f(x)

    def to_dict(self) -> dict:
        raise NotImplementedError


class Uniform(Target):
    """f identically zero."""

    def f(self, x):
        return np.zeros(np.shape(x)[:-1])

    def grad(self, x):
        return np.zeros(np.shape(x), dtype=float)

    def to_dict(self):
        return {"type": "uniform"}


class Quadratic(Target):
    """f(x) = <x, A x> + <b, x> + c on ambient coordinates."""

    coords = "ambient"

    def __init__(self, A, b=None, c: float = 0.0):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise ValueError("A must be square")
        if not np.allclose(A, A.T, atol=1e-12, rtol=0.0):
            raise ValueError("A must be symmetric")
        self.A = A
        self.b = np.zeros(A.shape[0]) if b is None else np.asarray(b, dtype=float)
        self.c = float(c)

    def f(self, x):
        x = np.asarray(x, dtype=float)
        return np.einsum("...i,ij,...j->...", x, self.A, x) + x @ self.b + self.c

    def grad(self, x):
        return 2.0 * np.asarray(x, dtype=float) @ self.A + self.b

    def to_dict(self):
        return {"type": "quadratic", "A": self.A.tolist(), "b": self.b.tolist(), "c": self.c}


class ChartFn(Target):
    """User-supplied f and gradient on chart coordinates.

    The gradient is checked against central differences at ``n_check`` random
    points of ``[0, 2 pi)^dim`` (or ``check_points``) when constructed.
    """

    coords = "chart"

    def __init__(
        self,
        fn: Callable[[np.ndarray], np.ndarray],
        grad_fn: Callable[[np.ndarray], np.ndarray],
        dim: int,
        check_points: Optional[np.ndarray] = None,
        n_check: int = 8,
        tol: float = 1e-5,
        name: str = "chart_fn",
    ):
        self.fn, self.grad_fn, self.dim, self.name = fn, grad_fn, dim, name
        if check_points is None:
            check_points = np.random.default_rng(0).uniform(0.0, 2 * np.pi, (n_check, dim))
        self._validate(np.atleast_2d(check_points), tol)

    def _validate(self, pts: np.ndarray, tol: float, h: float = 1e-6) -> None:
        for p in pts:
            g = np.asarray(self.grad_fn(p), dtype=float)
            fd = np.empty(self.dim)
            for k in range(self.dim):
                e = np.zeros(self.dim)
                e[k] = h
                fd[k] = (self.fn(p + e) - self.fn(p - e)) / (2 * h)
            if np.any(np.abs(fd - g) > tol * np.maximum(1.0, np.abs(g))):
                raise GradientMismatch(f"gradient disagrees with finite differences at {p}")

    def f(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return self.fn(x)
        return np.array([self.fn(p) for p in x.reshape(-1, self.dim)]).reshape(x.shape[:-1])

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return np.asarray(self.grad_fn(x), dtype=float)
        return np.array([self.grad_fn(p) for p in x.reshape(-1, self.dim)]).reshape(x.shape)

    def to_dict(self):
        return {"type": "chart_fn", "name": self.name}


class CosineTorus(ChartFn):
    """f(theta) = scale * cos(theta_axis) on T^n, vectorized."""

    def __init__(self, dim: int = 2, axis: int = 0, scale: float = 1.0):
        self.axis, self.scale = axis, scale

        def fn(x):
            return scale * np.cos(np.asarray(x)[..., axis])

        def grad_fn(x):
            x = np.asarray(x, dtype=float)
            g = np.zeros_like(x)
            g[..., axis] = -scale * np.sin(x[..., axis])
            return g

        super().__init__(fn, grad_fn, dim, name="cosine")

    def f(self, x):
        return self.fn(x)

    def grad(self, x):
        return self.grad_fn(x)

    def to_dict(self):
        return {"type": "cosine", "dim": self.dim, "axis": self.axis, "scale": self.scale}


# Figure 1 and Figure 2 targets on S^2
FIGURE1_A = np.array(
    [
        [1.0, 0.55, 1.05],
        [0.55, 3.05, -0.51],
        [1.05, -0.51, -0.9],
    ]
)


def figure1_target() -> Quadratic:
    """x1^2 + 3.05 x2^2 - 0.9 x3^2 + 1.1 x1 x2 - 1.02 x2 x3 + 2.1 x3 x1."""
    return Quadratic(FIGURE1_A)


def figure2_target() -> Quadratic:
    """x1 + x2 + x3."""
    return Quadratic(np.zeros((3, 3)), np.ones(3))


def target_from_dict(spec: dict) -> Target:
    kind = spec.get("type")
    if kind == "uniform":
        return Uniform()
    if kind == "quadratic":
        A = spec["A"]
        return Quadratic(A, spec.get("b"), spec.get("c", 0.0))
    if kind == "cosine":
        return CosineTorus(spec.get("dim", 2), spec.get("axis", 0), spec.get("scale", 1.0))
    raise ValueError(f"unknown target type {kind!r}")


def eval_f(t: Target, x) -> np.ndarray:
    return t.f(np.asarray(x, dtype=float))


def eval_grad_ambient(t: Target, x) -> np.ndarray:
    return t.grad(np.asarray(x, dtype=float))


def _quadrature_grid(m: Manifold, resolution: int) -> Partition:
    if isinstance(m, Sphere) and m.n == 3:
        return LatLonGrid(resolution, 2 * resolution)
    if isinstance(m, FlatTorus) and m.n <= 3:
        return TorusGrid(m.n, resolution)
    raise NotImplementedError(f"no quadrature grid for {m!r}")


def unnormalized_cell_weights(t: Target, grid: Partition) -> np.ndarray:
    return np.exp(-t.f(grid.centers)) * grid.areas


def normalize(
    t: Target, m: Manifold, resolution: int = 64, rtol: float = 1e-3
) -> tuple[float, BinnedDensity]:
    """Normalizing constant Z and the binned reference density of e^{-f}/Z.

    Z is the midpoint rule on the quadrature grid at ``resolution``; the same
    sum at twice the resolution must agree within ``rtol``.
    """
    grid = _quadrature_grid(m, resolution)
    w = unnormalized_cell_weights(t, grid)
    Z = float(w.sum())
    Z_fine = float(unnormalized_cell_weights(t, _quadrature_grid(m, 2 * resolution)).sum())
    if abs(Z - Z_fine) > rtol * abs(Z_fine):
        raise QuadratureNotConverged(
            f"Z changed by {abs(Z - Z_fine) / Z_fine:.2e} between resolutions "
            f"{resolution} and {2 * resolution}"
        )
    return Z, grid.density(w / Z, Z=Z)


def reference_masses(t: Target, partition: Partition, Z: Optional[float] = None, sub: int = 16) -> BinnedDensity:
    """Cell masses of e^{-f}/Z on an arbitrary partition, by sub-grid quadrature."""
    w = partition.integrate(lambda p: np.exp(-t.f(p)), sub=sub)
    total = w.sum() if Z is None else Z
    return partition.density(w / w.sum(), Z=float(total))
