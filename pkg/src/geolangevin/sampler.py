"""Geodesic Langevin steps, chain execution and reproducible noise streams.

Three step variants are provided:

* ``chart``     -- tangent step in a coordinate chart with the drift
                   F_i = -g^{ij} d_j f + |g|^{-1/2} d_j(|g|^{1/2} g^{ij}) and noise
                   sqrt(2 eps g^{-1}) xi, followed by the RK4 geodesic ODE.
* ``embedded``  -- normal-coordinate form on the sphere:
                   Exp_x(-eps grad f + sqrt(2 eps) xi_T) with the closed-form Exp.
* ``retraction``-- same tangent vector, mapped by Retr_x(v) = (x + v)/|x + v|.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from geolangevin.errors import EigFailure, GeoLangevinError, StepError
from geolangevin.geodesic import DEFAULT_ODE_STEPS, exp_ode, exp_sphere, retract_project
from geolangevin.geometry import (
    FD_STEP,
    Chart,
    FlatTorus,
    Manifold,
    MetricData,
    Sphere,
    SphericalChart,
)
from geolangevin.target import Target

VARIANTS = ("chart", "embedded", "retraction")

_EQUATOR = np.array([0.5 * np.pi, 0.0])


# -- noise -----------------------------------------------------------------


def noise_stream(seed: int, chain_index: int) -> np.random.Generator:
    """Counter-based Philox generator keyed by ``(seed, chain_index)``.

    Draws are consumed strictly in iteration order, so the noise used at
    iteration k is a fixed function of (seed, chain_index, k).
    """
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, chain_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


# -- drift -----------------------------------------------------------------


def _metric_batch(m: Chart, x: np.ndarray) -> np.ndarray:
    if isinstance(m, SphericalChart):
        return m.metric_fn(x)
    if x.ndim == 1:
        return np.asarray(m.metric_fn(x), dtype=float)
    flat = x.reshape(-1, x.shape[-1])
    d = m.intrinsic_dim
    return np.stack([m.metric_fn(p) for p in flat]).reshape(x.shape[:-1] + (d, d))


def correction_divergence(m: Manifold, x) -> np.ndarray:
    """|g|^{-1/2} sum_j d_j(|g|^{1/2} g^{ij}) by central differences of the metric."""
    x = np.asarray(x, dtype=float)
    if isinstance(m, FlatTorus):
        return np.zeros_like(x)
    d = m.intrinsic_dim
    out = np.zeros_like(x)
    sqrt_det = np.sqrt(np.linalg.det(_metric_batch(m, x)))
    for j in range(d):
        e = np.zeros(d)
        e[j] = FD_STEP
        gp, gm = _metric_batch(m, x + e), _metric_batch(m, x - e)
        wp = np.sqrt(np.linalg.det(gp))[..., None] * np.linalg.inv(gp)[..., :, j]
        wm = np.sqrt(np.linalg.det(gm))[..., None] * np.linalg.inv(gm)[..., :, j]
        out += (wp - wm) / (2.0 * FD_STEP)
    return out / sqrt_det[..., None]


def correction_christoffel(md: MetricData) -> np.ndarray:
    """The same correction written with Christoffel symbols: -g^{jk} Gamma^i_{jk}."""
    return -np.einsum("...jk,...ijk->...i", md.g_inv, md.christoffels)


def drift(m: Manifold, target: Target, x) -> np.ndarray:
    """Chart drift F = -g^{-1} df + |g|^{-1/2} div(|g|^{1/2} g^{-1}).

    On a flat torus this is exactly -grad f.
    """
    x = np.asarray(x, dtype=float)
    if isinstance(m, FlatTorus):
        return -target.chart_grad(m, x)
    md = m.metric_at(x)
    df = target.chart_grad(m, x)
    return -np.einsum("...ij,...j->...i", md.g_inv, df) + correction_divergence(m, x)


def noise_sqrt(md: MetricData) -> np.ndarray:
    """Unique symmetric positive square root of g^{-1}."""
    try:
        w, V = np.linalg.eigh(md.g_inv)
    except np.linalg.LinAlgError as exc:
        raise EigFailure(str(exc)) from exc
    if not np.all(np.isfinite(w)) or np.any(w < -1e-12):
        raise EigFailure("inverse metric has negative or non-finite eigenvalues")
    root = np.sqrt(np.clip(w, 0.0, None))
    return np.einsum("...ik,...k,...jk->...ij", V, root, V)


# -- steps -----------------------------------------------------------------


class _ReflectedTarget(Target):
    """f(H y) for a batch of symmetric orthogonal H; ambient coordinates."""

    coords = "ambient"

    def __init__(self, base: Target, H: np.ndarray):
        self.base, self.H = base, H

    def f(self, y):
        return self.base.f(np.einsum("...ij,...j->...i", self.H, y))

    def grad(self, y):
        g = self.base.grad(np.einsum("...ij,...j->...i", self.H, y))
        return np.einsum("...ji,...j->...i", self.H, g)


def householder_to_e1(x: np.ndarray) -> np.ndarray:
    """Symmetric orthogonal H with H x = e1 (batched)."""
    u = x.copy()
    u[..., 0] -= 1.0
    nu2 = np.sum(u * u, axis=-1)[..., None, None]
    eye = np.broadcast_to(np.eye(3), x.shape[:-1] + (3, 3))
    outer = u[..., :, None] * u[..., None, :]
    return np.where(nu2 > 1e-30, eye - 2.0 * outer / np.where(nu2 > 1e-30, nu2, 1.0), eye)


def _sphere_chart_step(target, x, eps, xi, n_ode):
    # chart at x: spherical coordinates after reflecting x onto (1, 0, 0)
    H = householder_to_e1(x)
    chart = SphericalChart()
    y0 = np.broadcast_to(_EQUATOR, x.shape[:-1] + (2,)).copy()
    F = drift(chart, _ReflectedTarget(target, H), y0)
    sigma = noise_sqrt(chart.metric_at(y0))
    v = eps * F + np.sqrt(2.0 * eps) * np.einsum("...ij,...j->...i", sigma, xi)
    jac = chart.embed_jacobian(y0)
    w = np.einsum("...ji,...j->...i", H, np.einsum("...ij,...j->...i", jac, v))
    return exp_ode(Sphere(3), x, w, n_ode)


def gla_step_chart(m: Manifold, target: Target, x, eps: float, xi, n_ode: int = DEFAULT_ODE_STEPS):
    """x_{k+1} = Exp_x(eps F + sqrt(2 eps) sigma xi) with the ODE exponential.

    ``xi`` has ``m.intrinsic_dim`` components.  On the embedded 2-sphere the
    chart is the spherical chart reflected so that x sits on its equator.
    """
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if isinstance(m, Sphere):
        if m.n != 3:
            raise NotImplementedError("chart steps on the sphere are provided for S^2")
        return _sphere_chart_step(target, x, eps, xi, n_ode)
    F = drift(m, target, x)
    if isinstance(m, FlatTorus):
        return m.project(x + eps * F + np.sqrt(2.0 * eps) * xi)
    sigma = noise_sqrt(m.metric_at(x))
    v = eps * F + np.sqrt(2.0 * eps) * np.einsum("...ij,...j->...i", sigma, xi)
    return exp_ode(m, x, v, n_ode)


def _embedded_tangent(m: Sphere, target: Target, x, eps, xi):
    grad = m.to_tangent(x, target.grad(x))
    return -eps * grad + np.sqrt(2.0 * eps) * m.to_tangent(x, xi)


def gla_step_embedded(m: Sphere, target: Target, x, eps: float, xi) -> np.ndarray:
    """Exp_x(-eps grad f + sqrt(2 eps) xi_T), xi an ambient standard normal."""
    x = np.asarray(x, dtype=float)
    return exp_sphere(x, _embedded_tangent(m, target, x, eps, np.asarray(xi, dtype=float)))


def rgla_step(m: Sphere, target: Target, x, eps: float, xi) -> np.ndarray:
    """Retr_x(Proj_T(-eps grad f + sqrt(2 eps) xi)) with the projection retraction."""
    x = np.asarray(x, dtype=float)
    return retract_project(m, x, _embedded_tangent(m, target, x, eps, np.asarray(xi, dtype=float)))


def noise_dim(m: Manifold, variant: str) -> int:
    return m.intrinsic_dim if variant == "chart" else m.coord_dim


def step(m: Manifold, target: Target, x, eps: float, xi, variant: str, n_ode: int = DEFAULT_ODE_STEPS):
    if variant == "chart":
        return gla_step_chart(m, target, x, eps, xi, n_ode)
    if not isinstance(m, Sphere):
        raise ValueError(f"variant {variant!r} needs an embedded sphere")
    if variant == "embedded":
        return gla_step_embedded(m, target, x, eps, xi)
    if variant == "retraction":
        return rgla_step(m, target, x, eps, xi)
    raise ValueError(f"unknown variant {variant!r}")


# -- chains ----------------------------------------------------------------


@dataclass
class ChainConfig:
    manifold: Manifold
    target: Target
    variant: str = "embedded"
    epsilon: float = 0.1
    n_steps: int = 1000
    burn_in: int = 0
    thin: int = 1
    seed: int = 0
    chain_index: int = 0
    n_ode: int = DEFAULT_ODE_STEPS
    x0: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if not 0 <= self.burn_in < self.n_steps:
            raise ValueError("need 0 <= burn_in < n_steps")

    def echo(self) -> dict:
        return {
            "manifold": self.manifold.describe(),
            "target": self.target.to_dict(),
            "variant": self.variant,
            "epsilon": self.epsilon,
            "n_steps": self.n_steps,
            "burn_in": self.burn_in,
            "thin": self.thin,
            "seed": self.seed,
            "chain_index": self.chain_index,
            "n_ode": self.n_ode,
            "x0": None if self.x0 is None else np.asarray(self.x0).tolist(),
        }


@dataclass
class SampleTrace:
    points: np.ndarray
    iterations: np.ndarray
    config: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.points)


def initial_point(cfg: ChainConfig, rng: np.random.Generator) -> np.ndarray:
    if cfg.x0 is not None:
        x0 = cfg.manifold.project(np.asarray(cfg.x0, dtype=float))
        cfg.manifold.check_point(x0)
        return x0
    return cfg.manifold.random_point(rng)


def stored_count(n_steps: int, burn_in: int, thin: int) -> int:
    return (n_steps - burn_in) // thin


def run_chain(cfg: ChainConfig, block: int = 4096) -> SampleTrace:
    """Run one chain.  Iterate k (1-based) is stored when k > burn_in and
    (k - burn_in) is a multiple of ``thin``."""
    m = cfg.manifold
    rng = noise_stream(cfg.seed, cfg.chain_index)
    x = initial_point(cfg, rng)
    nd = noise_dim(m, cfg.variant)
    n_keep = stored_count(cfg.n_steps, cfg.burn_in, cfg.thin)
    points = np.empty((n_keep, m.coord_dim))
    iters = np.empty(n_keep, dtype=np.int64)
    j = 0
    k = 0
    while k < cfg.n_steps:
        xis = rng.standard_normal((min(block, cfg.n_steps - k), nd))
        for xi in xis:
            k += 1
            try:
                x = step(m, cfg.target, x, cfg.epsilon, xi, cfg.variant, cfg.n_ode)
            except GeoLangevinError as exc:
                raise StepError(k, exc) from exc
            if k > cfg.burn_in and (k - cfg.burn_in) % cfg.thin == 0:
                points[j] = x
                iters[j] = k
                j += 1
    return SampleTrace(points, iters, cfg.echo())


def iterate_ensemble(
    cfg: ChainConfig, chain_indices: Sequence[int], block: int = 256
) -> Iterator[tuple[int, np.ndarray]]:
    """Advance many independent chains in lockstep, yielding ``(k, X_k)``.

    Chain ``c`` uses exactly the stream and initial point :func:`run_chain`
    would use with ``chain_index=c``, so row c of every yielded array equals the
    corresponding iterate of the single-chain run (up to floating-point
    reassociation in batched arithmetic).
    """
    m = cfg.manifold
    rngs = [noise_stream(cfg.seed, c) for c in chain_indices]
    x = np.stack([initial_point(cfg, r) for r in rngs])
    nd = noise_dim(m, cfg.variant)
    k = 0
    while k < cfg.n_steps:
        b = min(block, cfg.n_steps - k)
        xis = np.stack([r.standard_normal((b, nd)) for r in rngs], axis=1)
        for xi in xis:
            k += 1
            try:
                x = step(m, cfg.target, x, cfg.epsilon, xi, cfg.variant, cfg.n_ode)
            except GeoLangevinError as exc:
                raise StepError(k, exc) from exc
            yield k, x


# -- serialization -----------------------------------------------------------


def trace_to_csv(trace: SampleTrace) -> str:
    dim = trace.points.shape[1]
    buf = io.StringIO()
    buf.write(",".join(["iter"] + [f"x{i + 1}" for i in range(dim)]) + "\n")
    for k, p in zip(trace.iterations, trace.points):
        buf.write(f"{int(k)}," + ",".join(f"{v:.17g}" for v in p) + "\n")
    return buf.getvalue()


def write_trace_csv(trace: SampleTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(trace_to_csv(trace))


def read_trace_csv(path) -> SampleTrace:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    if not header or header[0] != "iter":
        raise ValueError(f"{path} lacks the iter,x1,... header")
    dim = len(header) - 1
    if not body:
        return SampleTrace(np.empty((0, dim)), np.empty(0, dtype=np.int64))
    arr = np.array(body, dtype=float)
    return SampleTrace(arr[:, 1:], arr[:, 0].astype(np.int64))
