"""Histogram densities from samples, KL divergence and exact discrete W2."""

from __future__ import annotations

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from geolangevin.errors import EmptyWindow, PartitionMismatch, SolverInfeasible
from geolangevin.partition import BinnedDensity, Partition

#: pseudo-count added to every cell of an empirical histogram
PSEUDO_COUNT = 0.5
#: largest support handled by the exact transport solver
MAX_SUPPORT = 512


def bin_samples(points: np.ndarray, partition: Partition, pseudo_count: float = PSEUDO_COUNT) -> BinnedDensity:
    """Smoothed histogram: mass_i = (count_i + lam) / (N + lam B)."""
    points = np.asarray(points, dtype=float)
    n = 0 if points.size == 0 else len(points.reshape(-1, points.shape[-1]))
    if n == 0 and pseudo_count <= 0:
        raise EmptyWindow("no samples to bin")
    B = partition.n_cells
    counts = np.zeros(B)
    if n:
        counts = np.bincount(partition.locate(points.reshape(n, -1)), minlength=B).astype(float)
    masses = (counts + pseudo_count) / (n + pseudo_count * B)
    return partition.density(masses, n_samples=n, pseudo_count=pseudo_count)


def _masses(p) -> np.ndarray:
    return p.masses if isinstance(p, BinnedDensity) else np.asarray(p, dtype=float)


def _check_same(p, q) -> None:
    if isinstance(p, BinnedDensity) and isinstance(q, BinnedDensity) and p.partition_id != q.partition_id:
        raise PartitionMismatch(f"{p.partition_id} vs {q.partition_id}")
    if len(_masses(p)) != len(_masses(q)):
        raise PartitionMismatch("densities have different numbers of cells")


def kl_divergence(p, q) -> float:
    """H(p | q) = sum_i p_i log(p_i / q_i); q must be strictly positive."""
    _check_same(p, q)
    pm, qm = _masses(p), _masses(q)
    if np.any(qm <= 0):
        raise ValueError("reference density must be strictly positive")
    nz = pm > 0
    return float(max(np.sum(pm[nz] * np.log(pm[nz] / qm[nz])), 0.0))


def symmetric_kl(p, q) -> float:
    return kl_divergence(p, q) + kl_divergence(q, p)


def w2_distance(p, q, dist: np.ndarray) -> float:
    """Exact 2-Wasserstein distance between two discrete measures.

    ``dist`` holds pairwise ground distances.  Solved as a linear program with
    the HiGHS dual simplex, restricted to the supports of p and q.
    """
    _check_same(p, q)
    pm, qm = _masses(p).copy(), _masses(q).copy()
    dist = np.asarray(dist, dtype=float)
    if len(pm) > MAX_SUPPORT:
        raise ValueError(f"support larger than {MAX_SUPPORT}")
    if abs(pm.sum() - qm.sum()) > 1e-9:
        raise SolverInfeasible("total masses differ")
    rows, cols = np.flatnonzero(pm > 0), np.flatnonzero(qm > 0)
    a, b = pm[rows], qm[cols]
    b *= a.sum() / b.sum()
    cost = dist[np.ix_(rows, cols)] ** 2
    m, n = len(a), len(b)
    if m == 1 or n == 1:
        return float(np.sqrt(max(np.sum(np.outer(a, b) / (a.sum()) * cost), 0.0)))
    A_eq = sparse.vstack(
        [
            sparse.kron(sparse.eye(m), np.ones((1, n))),
            sparse.kron(np.ones((1, m)), sparse.eye(n)),
        ]
    ).tocsr()
    res = linprog(
        cost.ravel(), A_eq=A_eq, b_eq=np.concatenate([a, b]), bounds=(0, None), method="highs-ds"
    )
    if res.status != 0:
        raise SolverInfeasible(res.message)
    return float(np.sqrt(max(res.fun, 0.0)))
