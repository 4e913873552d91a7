"""Independent reference implementations used by the tests."""

import itertools

import numpy as np


def brute_force_w2(p, q, dist):
    """W2 by enumerating every basic feasible transport plan.

    The optimum of a transport LP is attained at a vertex; vertices are the
    nonnegative solutions supported on m + n - 1 linearly independent cells.
    """
    p, q = np.asarray(p, float), np.asarray(q, float)
    m, n = len(p), len(q)
    cells = [(i, j) for i in range(m) for j in range(n)]
    A = np.zeros((m + n, m * n))
    for c, (i, j) in enumerate(cells):
        A[i, c] = 1.0
        A[m + j, c] = 1.0
    b = np.concatenate([p, q])
    cost = (np.asarray(dist, float) ** 2).ravel()
    best = np.inf
    for S in itertools.combinations(range(m * n), m + n - 1):
        sub = A[:, S]
        if np.linalg.matrix_rank(sub) < m + n - 1:
            continue
        x, *_ = np.linalg.lstsq(sub, b, rcond=None)
        if np.all(x >= -1e-12) and np.allclose(sub @ x, b, atol=1e-12):
            best = min(best, float(cost[list(S)] @ x))
    return float(np.sqrt(max(best, 0.0)))


def random_instance(rng, k):
    """Two random probability vectors on k shared sphere points, with their distance matrix.

    About a quarter of the cells get zero mass on one side, exercising the
    support restriction of the solver.
    """
    pts = rng.standard_normal((k, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    d = np.arccos(np.clip(pts @ pts.T, -1.0, 1.0))
    np.fill_diagonal(d, 0.0)
    p, q = rng.dirichlet(np.ones(k)), rng.dirichlet(np.ones(k))
    for v in (p, q):
        drop = rng.random(k) < 0.25
        if drop.all():
            drop[rng.integers(k)] = False
        v[drop] = 0.0
        v /= v.sum()
    return p, q, d
