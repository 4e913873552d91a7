"""Functional-inequality diagnostics: LSI bound, Lipschitz estimate, moments,
Talagrand check and the decay/plateau fit of KL series."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from geolangevin.errors import FitDegenerate
from geolangevin.geodesic import exp_sphere
from geolangevin.geometry import (
    Manifold,
    Sphere,
    geodesic_distance,
    parallel_transport,
    riemannian_grad,
)
from geolangevin.partition import BinnedDensity
from geolangevin.diagnostics.divergence import kl_divergence, w2_distance


def lsi_lower_bound(diameter: float) -> float:
    """pi^2 / ((1 + 2 pi) D^2): log-Sobolev lower bound for Ric >= 0."""
    if diameter <= 0:
        raise ValueError("diameter must be positive")
    return float(np.pi**2 / ((1.0 + 2.0 * np.pi) * diameter**2))


#: pairs are drawn in fixed-size chunks so that a run with more pairs extends,
#: rather than reshuffles, a run with fewer
PAIR_CHUNK = 1024


def _draw_pairs(m: Manifold, rng: np.random.Generator, local_scale: float):
    n = PAIR_CHUNK
    x = m.random_point(rng, n)
    far = m.random_point(rng, n)
    v = rng.standard_normal((n, m.coord_dim)) * local_scale
    if isinstance(m, Sphere):
        near = exp_sphere(x, m.to_tangent(x, v))
    else:
        near = m.project(x + v)
    local = (np.arange(n) % 2 == 1)[:, None]
    return x, np.where(local, near, far)


def lipschitz_ratios(target, m: Manifold, n_pairs: int, rng: np.random.Generator, local_scale: float = 0.05) -> np.ndarray:
    """|grad f(y) - P_{x->y} grad f(x)| / d(x, y) for ``n_pairs`` sampled pairs.

    Even-numbered pairs are independent uniform points; odd-numbered pairs put
    y at a random distance of order ``local_scale`` from x.
    """
    chunks = []
    for _ in range(-(-n_pairs // PAIR_CHUNK)):
        x, y = _draw_pairs(m, rng, local_scale)
        d = geodesic_distance(m, x, y)
        ok = d > 1e-8
        if isinstance(m, Sphere):
            ok &= np.sum(x * y, axis=-1) > -1.0 + 1e-9
        x, y = x[ok], y[ok]
        ratio = np.zeros(PAIR_CHUNK)
        diff = riemannian_grad(m, target, y) - parallel_transport(m, x, y, riemannian_grad(m, target, x))
        ratio[ok] = m.norm(y, diff) / d[ok]
        chunks.append(ratio)
    return np.concatenate(chunks)[:n_pairs]


def lipschitz_estimate(target, m: Manifold, n_pairs: int, rng: np.random.Generator, local_scale: float = 0.05) -> float:
    """Largest sampled ratio; nondecreasing in ``n_pairs`` for a fixed stream."""
    if n_pairs < 1:
        raise ValueError("need at least one pair")
    return float(lipschitz_ratios(target, m, n_pairs, rng, local_scale).max())


@dataclass
class MomentCheck:
    """E_nu|grad f|^2 <= n L, and optionally E_rho|grad f|^2 <= 4L^2/alpha H(rho|nu) + 2nL."""

    e_nu: float
    bound_nu: float
    e_rho: Optional[float] = None
    bound_rho: Optional[float] = None

    @property
    def holds_nu(self) -> bool:
        return self.e_nu <= self.bound_nu

    @property
    def holds_rho(self) -> Optional[bool]:
        if self.e_rho is None:
            return None
        return self.e_rho <= self.bound_rho

    def __bool__(self) -> bool:
        return self.holds_nu and self.holds_rho is not False


def _grad_sq(target, m: Manifold, pts: np.ndarray) -> np.ndarray:
    g = riemannian_grad(m, target, pts)
    return np.sum(g * g, axis=-1)


def grad_moment_check(
    target,
    m: Manifold,
    nu: BinnedDensity,
    L: float,
    n: int,
    rho: Optional[BinnedDensity] = None,
    alpha: Optional[float] = None,
) -> MomentCheck:
    """Cellwise quadrature of the squared gradient norm against the moment bounds."""
    g2 = _grad_sq(target, m, nu.centers)
    out = MomentCheck(e_nu=float(np.sum(g2 * nu.masses)), bound_nu=float(n * L))
    if rho is not None:
        if alpha is None:
            alpha = lsi_lower_bound(m.diameter())
        g2r = _grad_sq(target, m, rho.centers)
        out.e_rho = float(np.sum(g2r * rho.masses))
        out.bound_rho = float(4.0 * L**2 / alpha * kl_divergence(rho, nu) + 2.0 * n * L)
    return out


@dataclass
class TalagrandCheck:
    w2_sq: float
    kl: float
    bound: float

    def __bool__(self) -> bool:
        return self.w2_sq <= self.bound


def talagrand_check(p: BinnedDensity, nu: BinnedDensity, alpha0: float, dist: np.ndarray) -> TalagrandCheck:
    """W2(p, nu)^2 <= (2 / alpha0) H(p | nu)."""
    kl = kl_divergence(p, nu)
    w2 = w2_distance(p, nu, dist)
    return TalagrandCheck(w2_sq=w2 * w2, kl=kl, bound=2.0 / alpha0 * kl)


@dataclass
class RateFit:
    rate: float
    bias: float
    n_fit: int


#: fit only while H_k - bias exceeds this fraction of H_0 - bias
DECAY_FLOOR = 0.05


def rate_fit(kl_series: Sequence[tuple[float, float]], eps: float, floor: float = DECAY_FLOOR) -> RateFit:
    """Fit H_k ~ bias + (H_0 - bias) exp(-rate k eps).

    ``bias`` is the mean of the final 20% of checkpoints; ``rate`` is minus the
    slope of log(H_k - bias) against k eps over the leading decaying segment.
    Raises :class:`FitDegenerate` (with ``.bias`` set) if there is no decay.
    """
    arr = np.asarray(kl_series, dtype=float)
    if arr.ndim != 2 or len(arr) < 8:
        raise ValueError("need at least 8 checkpoints")
    k, h = arr[:, 0], arr[:, 1]
    tail = max(1, int(np.ceil(0.2 * len(h))))
    bias = float(max(np.mean(h[-tail:]), 0.0))
    excess = h - bias
    top = excess[0]
    if not top > 0:
        raise FitDegenerate("series does not decay", bias=bias)
    keep = 0
    while keep < len(h) and excess[keep] > floor * top:
        keep += 1
    if keep < 2:
        raise FitDegenerate("decaying segment shorter than two checkpoints", bias=bias)
    slope, _ = np.polyfit(k[:keep] * eps, np.log(excess[:keep]), 1)
    if not slope < 0:
        raise FitDegenerate("no decay in the leading segment", bias=bias)
    return RateFit(rate=float(-slope), bias=bias, n_fit=keep)
