"""Cell partitions of S^2 and T^n, and histogram densities on them."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from geolangevin.geometry import TWO_PI, FlatTorus, Manifold, Sphere, geodesic_distance


@dataclass
class BinnedDensity:
    """Probability mass on the cells of a partition."""

    centers: np.ndarray
    areas: np.ndarray
    masses: np.ndarray
    partition_id: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.masses = np.asarray(self.masses, dtype=float)
        if np.any(self.masses < 0):
            raise ValueError("cell masses must be nonnegative")
        if abs(self.masses.sum() - 1.0) > 1e-9:
            raise ValueError(f"cell masses sum to {self.masses.sum():.12g}, not 1")

    @property
    def n_cells(self) -> int:
        return len(self.masses)

    @property
    def density(self) -> np.ndarray:
        """Mass per unit area."""
        return self.masses / self.areas


class Partition:
    """A finite partition of a manifold into cells with known areas."""

    manifold: Manifold
    centers: np.ndarray
    areas: np.ndarray
    id: str

    @property
    def n_cells(self) -> int:
        return len(self.areas)

    @property
    def total_volume(self) -> float:
        return float(self.areas.sum())

    def locate(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def subgrid(self, sub: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Sub-cell midpoints, their areas and the owning cell index."""
        raise NotImplementedError

    def integrate(self, fn: Callable[[np.ndarray], np.ndarray], sub: int = 1) -> np.ndarray:
        """Per-cell midpoint-rule integrals of ``fn`` on a ``sub x sub`` refinement."""
        pts, w, owner = self.subgrid(sub)
        return np.bincount(owner, weights=fn(pts) * w, minlength=self.n_cells)

    def distance_matrix(self) -> np.ndarray:
        c = self.centers
        return geodesic_distance(self.manifold, c[:, None, :], c[None, :, :])

    def density(self, masses: np.ndarray, **meta) -> BinnedDensity:
        return BinnedDensity(self.centers, self.areas, masses, self.id, dict(meta))


def _polar_to_xyz(th: np.ndarray, ph: np.ndarray) -> np.ndarray:
    st = np.sin(th)
    return np.stack([st * np.cos(ph), st * np.sin(ph), np.cos(th)], axis=-1)


class LatLonGrid(Partition):
    """Latitude-longitude grid on S^2 with exact spherical cell areas."""

    def __init__(self, n_theta: int = 64, n_phi: int = 128):
        self.manifold = Sphere(3)
        self.n_theta, self.n_phi = n_theta, n_phi
        self.id = f"latlon-{n_theta}x{n_phi}"
        self.theta_edges = np.linspace(0.0, np.pi, n_theta + 1)
        self.dphi = TWO_PI / n_phi
        th_c = 0.5 * (self.theta_edges[:-1] + self.theta_edges[1:])
        ph_c = (np.arange(n_phi) + 0.5) * self.dphi
        TH, PH = np.meshgrid(th_c, ph_c, indexing="ij")
        self.centers = _polar_to_xyz(TH, PH).reshape(-1, 3)
        band = self.dphi * (np.cos(self.theta_edges[:-1]) - np.cos(self.theta_edges[1:]))
        self.areas = np.repeat(band, n_phi)

    def locate(self, x):
        x = np.asarray(x, dtype=float)
        th = np.arccos(np.clip(x[..., 2], -1.0, 1.0))
        ph = np.mod(np.arctan2(x[..., 1], x[..., 0]), TWO_PI)
        i = np.minimum((th / np.pi * self.n_theta).astype(int), self.n_theta - 1)
        j = np.minimum((ph / self.dphi).astype(int), self.n_phi - 1)
        return i * self.n_phi + j

    def subgrid(self, sub):
        nt, npf = self.n_theta * sub, self.n_phi * sub
        edges = np.linspace(0.0, np.pi, nt + 1)
        th_c = 0.5 * (edges[:-1] + edges[1:])
        ph_c = (np.arange(npf) + 0.5) * (TWO_PI / npf)
        TH, PH = np.meshgrid(th_c, ph_c, indexing="ij")
        band = (TWO_PI / npf) * (np.cos(edges[:-1]) - np.cos(edges[1:]))
        w = np.repeat(band, npf)
        owner = ((np.arange(nt) // sub)[:, None] * self.n_phi + (np.arange(npf) // sub)[None, :])
        return _polar_to_xyz(TH, PH).reshape(-1, 3), w, owner.ravel()


class EqualAreaGrid(Partition):
    """Equal-area partition of S^2: ``n_z`` bands uniform in z times ``n_phi`` sectors.

    The default 12 x 16 gives 192 cells of area 4 pi / 192.  Cell centers are the
    band/sector midpoints in (z, phi).
    """

    def __init__(self, n_z: int = 12, n_phi: int = 16):
        self.manifold = Sphere(3)
        self.n_z, self.n_phi = n_z, n_phi
        self.id = f"equalarea-{n_z}x{n_phi}"
        z_c = -1.0 + (np.arange(n_z) + 0.5) * (2.0 / n_z)
        ph_c = (np.arange(n_phi) + 0.5) * (TWO_PI / n_phi)
        Zc, PH = np.meshgrid(z_c, ph_c, indexing="ij")
        self.centers = _polar_to_xyz(np.arccos(Zc), PH).reshape(-1, 3)
        self.areas = np.full(n_z * n_phi, 4.0 * np.pi / (n_z * n_phi))

    def locate(self, x):
        x = np.asarray(x, dtype=float)
        i = np.clip(((x[..., 2] + 1.0) * 0.5 * self.n_z).astype(int), 0, self.n_z - 1)
        ph = np.mod(np.arctan2(x[..., 1], x[..., 0]), TWO_PI)
        j = np.minimum((ph / (TWO_PI / self.n_phi)).astype(int), self.n_phi - 1)
        return i * self.n_phi + j

    def subgrid(self, sub):
        nz, npf = self.n_z * sub, self.n_phi * sub
        z_c = -1.0 + (np.arange(nz) + 0.5) * (2.0 / nz)
        ph_c = (np.arange(npf) + 0.5) * (TWO_PI / npf)
        Zc, PH = np.meshgrid(z_c, ph_c, indexing="ij")
        w = np.full(nz * npf, 4.0 * np.pi / (nz * npf))
        owner = (np.arange(nz) // sub)[:, None] * self.n_phi + (np.arange(npf) // sub)[None, :]
        return _polar_to_xyz(np.arccos(Zc), PH).reshape(-1, 3), w, owner.ravel()


class TorusGrid(Partition):
    """Uniform product grid on T^n with ``n_per_axis`` cells per axis."""

    def __init__(self, dim: int = 2, n_per_axis: int = 64):
        self.manifold = FlatTorus(dim)
        self.dim, self.k = dim, n_per_axis
        self.id = f"torus{dim}-{n_per_axis}"
        h = TWO_PI / n_per_axis
        axes = [(np.arange(n_per_axis) + 0.5) * h] * dim
        self.centers = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
        self.areas = np.full(n_per_axis**dim, h**dim)

    def locate(self, x):
        x = np.mod(np.asarray(x, dtype=float), TWO_PI)
        idx = np.minimum((x / (TWO_PI / self.k)).astype(int), self.k - 1)
        return np.ravel_multi_index(np.moveaxis(idx, -1, 0), (self.k,) * self.dim)

    def subgrid(self, sub):
        fine = TorusGrid(self.dim, self.k * sub)
        owner = self.locate(fine.centers)
        return fine.centers, fine.areas, owner


def default_partition(m: Manifold, kind: str = "kl") -> Partition:
    """Partition used for KL/W2 of samples (``kind='kl'``) or quadrature (``'quad'``)."""
    if isinstance(m, Sphere) and m.n == 3:
        return EqualAreaGrid(12, 16) if kind == "kl" else LatLonGrid(64, 128)
    if isinstance(m, FlatTorus) and m.n <= 2:
        return TorusGrid(m.n, 14 if (kind == "kl" and m.n == 2) else 64)
    raise NotImplementedError(f"no partition defined for {m!r}")
