"""Checkpoint series and the JSON/CSV diagnostics report."""

from __future__ import annotations

import io
import json
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from geolangevin.diagnostics.divergence import PSEUDO_COUNT, bin_samples, kl_divergence, w2_distance
from geolangevin.diagnostics.inequalities import talagrand_check
from geolangevin.partition import BinnedDensity, Partition
from geolangevin.sampler import ChainConfig, SampleTrace, initial_point, iterate_ensemble, noise_stream


@dataclass
class Checkpoint:
    iteration: int
    kl: float
    w2: Optional[float] = None
    talagrand_ok: Optional[bool] = None
    n_samples: int = 0


@dataclass
class DiagnosticsReport:
    kl_series: list = field(default_factory=list)
    w2_series: list = field(default_factory=list)
    alpha_lower: float = float("nan")
    lipschitz_hat: float = float("nan")
    fitted_rate: float = float("nan")
    fitted_bias: float = float("nan")
    talagrand_ok: bool = True
    notes: list = field(default_factory=list)

    def __post_init__(self):
        if any(v < 0 for _, v in self.kl_series) or any(v < 0 for _, v in self.w2_series):
            raise ValueError("KL and W2 values must be nonnegative")

    def to_json(self) -> str:
        def clean(v):
            if isinstance(v, float) and not np.isfinite(v):
                return None
            return v

        data = {k: clean(v) for k, v in asdict(self).items()}
        data["kl_series"] = [[int(i), float(v)] for i, v in self.kl_series]
        data["w2_series"] = [[int(i), float(v)] for i, v in self.w2_series]
        return json.dumps(data, indent=2, sort_keys=True)

    def series_csv(self) -> str:
        w2 = dict((int(i), v) for i, v in self.w2_series)
        buf = io.StringIO()
        buf.write("iter,kl,w2\n")
        for i, kl in self.kl_series:
            v = w2.get(int(i))
            buf.write(f"{int(i)},{kl:.17g},{'' if v is None else f'{v:.17g}'}\n")
        return buf.getvalue()


def checkpoint_stats(
    points: np.ndarray,
    iteration: int,
    partition: Partition,
    nu: BinnedDensity,
    dist: Optional[np.ndarray] = None,
    alpha0: Optional[float] = None,
    pseudo_count: float = PSEUDO_COUNT,
) -> Checkpoint:
    p = bin_samples(points, partition, pseudo_count)
    cp = Checkpoint(iteration=int(iteration), kl=kl_divergence(p, nu), n_samples=len(points))
    if dist is not None:
        if alpha0 is not None:
            tc = talagrand_check(p, nu, alpha0, dist)
            cp.w2 = float(np.sqrt(tc.w2_sq))
            cp.talagrand_ok = bool(tc)
        else:
            cp.w2 = w2_distance(p, nu, dist)
    return cp


def ensemble_series(
    cfg: ChainConfig,
    n_chains: int,
    checkpoints: Iterable[int],
    partition: Partition,
    nu: BinnedDensity,
    dist: Optional[np.ndarray] = None,
    alpha0: Optional[float] = None,
    w2_every: int = 1,
) -> list[Checkpoint]:
    """KL (and optionally W2/Talagrand) of the law of X_k across ``n_chains`` chains.

    Each checkpoint bins the ensemble snapshot at iteration k; iteration 0 is
    the initial ensemble.  W2 is evaluated on every ``w2_every``-th checkpoint.
    """
    wanted = sorted(set(int(k) for k in checkpoints))
    if wanted and wanted[-1] > cfg.n_steps:
        raise ValueError("checkpoint beyond n_steps")
    out = []
    n_w2 = 0

    def record(k, X):
        nonlocal n_w2
        use_w2 = dist is not None and n_w2 % w2_every == 0
        out.append(checkpoint_stats(X, k, partition, nu, dist if use_w2 else None, alpha0))
        n_w2 += 1

    chains = list(range(n_chains))
    if 0 in wanted:
        X0 = np.stack([initial_point(cfg, noise_stream(cfg.seed, c)) for c in chains])
        record(0, X0)
    pending = [k for k in wanted if k > 0]
    if pending:
        last = pending[-1]
        short = replace(cfg, n_steps=last, burn_in=0)
        targets = set(pending)
        for k, X in iterate_ensemble(short, chains):
            if k in targets:
                record(k, X)
    return out


def trace_series(
    trace: SampleTrace,
    checkpoints: Sequence[int],
    partition: Partition,
    nu: BinnedDensity,
    dist: Optional[np.ndarray] = None,
    alpha0: Optional[float] = None,
) -> list[Checkpoint]:
    """KL/W2 of the running histogram of a single trace (all stored iterates <= k)."""
    out = []
    for k in checkpoints:
        pts = trace.points[trace.iterations <= k]
        out.append(checkpoint_stats(pts, k, partition, nu, dist, alpha0))
    return out
