"""Random susceptibility fields and small embedded scatterers.

The fluctuation ``4*pi*eta(x) = sigma * mu(x / ell)`` uses a unit-variance
process ``mu`` with Gaussian autocorrelation ``exp(-|h|^2 / 2)``, synthesised
as a sum of random cosine modes whose wavevectors are drawn from the
(standard normal) spectral density of that autocorrelation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Grid

FOUR_PI = 4.0 * np.pi


@dataclass(frozen=True)
class MediumParams:
    correlation_length: float
    sigma: float
    mode_count: int = 4096
    seed: int = 0

    def __post_init__(self):
        if not self.correlation_length > 0:
            raise ValueError(f"correlation length must be positive, got {self.correlation_length}")
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")
        if int(self.mode_count) < 1:
            raise ValueError(f"mode count must be >= 1, got {self.mode_count}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must fit in 64 bits, got {self.seed}")

    def to_dict(self) -> dict:
        return {
            "correlation_length": self.correlation_length,
            "sigma": self.sigma,
            "mode_count": int(self.mode_count),
            "seed": int(self.seed),
        }


@dataclass(frozen=True, eq=False)
class MediumRealization:
    """Sampled ``eta`` on a grid. ``fluct`` is ``4*pi*eta``."""

    grid: Grid
    eta: np.ndarray
    params: MediumParams
    _spline: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def fluct(self) -> np.ndarray:
        return FOUR_PI * self.eta

    def spline_coefficients(self) -> np.ndarray:
        """Cubic B-spline coefficients of ``fluct`` (computed once, then cached)."""
        if "c" not in self._spline:
            from scipy import ndimage

            self._spline["c"] = ndimage.spline_filter(self.fluct, order=3, mode="mirror")
        return self._spline["c"]


def random_modes(params: MediumParams) -> tuple[np.ndarray, np.ndarray]:
    """Wavevectors ``(M, 2)`` in units of 1/length and phases ``(M,)`` for a seed.

    Wavevectors are already divided by the correlation length, so
    ``mu(x / ell) = sqrt(2/M) * sum(cos(kappa . x + phi))``.
    """
    rng = np.random.default_rng(int(params.seed))
    M = int(params.mode_count)
    kappa = rng.standard_normal((M, 2)) / params.correlation_length
    phi = rng.uniform(0.0, 2.0 * np.pi, M)
    return kappa, phi


def evaluate_modes(kappa, phi, x, y) -> np.ndarray:
    """``sqrt(2/M) * sum_m cos(kappa_m . (x, y) + phi_m)`` at scattered points."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    arg = np.multiply.outer(x, kappa[:, 0]) + np.multiply.outer(y, kappa[:, 1]) + phi
    return np.sqrt(2.0 / len(phi)) * np.cos(arg).sum(axis=-1)


def _mode_sum_on_grid(grid: Grid, kappa, phi, chunk: int = 1024) -> np.ndarray:
    # cos(a x + b y + p) = Re(e^{iax} e^{iby} e^{ip}): one complex matmul per chunk
    out = np.zeros(grid.shape)
    x, y = grid.x, grid.y
    for s in range(0, len(phi), chunk):
        kx, ky, p = kappa[s:s + chunk, 0], kappa[s:s + chunk, 1], phi[s:s + chunk]
        ey = np.exp(1j * (np.outer(y, ky) + p))
        ex = np.exp(1j * np.outer(x, kx))
        out += (ey @ ex.T).real
    return np.sqrt(2.0 / len(phi)) * out


def gen_random_medium(grid: Grid, params: MediumParams) -> MediumRealization:
    """Sample the susceptibility fluctuation on ``grid``; deterministic in the seed."""
    if grid.h > params.correlation_length / 4 * (1 + 1e-12):
        raise ValueError(
            f"grid spacing {grid.h:g} does not resolve the correlation length "
            f"{params.correlation_length:g} (need h <= ell/4)"
        )
    if params.sigma == 0:
        return MediumRealization(grid, np.zeros(grid.shape), params)
    kappa, phi = random_modes(params)
    fluct = params.sigma * _mode_sum_on_grid(grid, kappa, phi)
    worst = float(np.min(1.0 + fluct))
    if worst <= 0:
        raise ValueError(f"1 + 4*pi*eta is not positive everywhere (minimum {worst:.4g})")
    return MediumRealization(grid, fluct / FOUR_PI, params)


def homogeneous_medium(grid: Grid) -> MediumRealization:
    return MediumRealization(grid, np.zeros(grid.shape), MediumParams(1.0, 0.0, 1, 0))


@dataclass(frozen=True)
class Scatterer:
    position: tuple[float, float]
    radius: float
    eta1: float
    eta2: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"scatterer radius must be positive, got {self.radius}")

    @property
    def net_eta1(self) -> float:
        """Susceptibility integrated over the disk."""
        return self.eta1 * np.pi * self.radius**2

    @property
    def net_eta2(self) -> float:
        return self.eta2 * np.pi * self.radius**2

    def to_dict(self) -> dict:
        return {"position": list(self.position), "radius": self.radius, "eta1": self.eta1, "eta2": self.eta2}


class ScattererSet(tuple):
    """Immutable collection of disks with pairwise disjoint supports."""

    def __new__(cls, items=()):
        items = tuple(
            s if isinstance(s, Scatterer) else Scatterer(tuple(s["position"]), s["radius"], s["eta1"], s["eta2"])
            for s in items
        )
        for i, a in enumerate(items):
            for b in items[i + 1:]:
                gap = np.hypot(a.position[0] - b.position[0], a.position[1] - b.position[1])
                if gap <= a.radius + b.radius:
                    raise ValueError(f"scatterers at {a.position} and {b.position} overlap")
        return super().__new__(cls, items)

    @property
    def positions(self) -> np.ndarray:
        return np.array([s.position for s in self], dtype=float).reshape(-1, 2)


def rasterize_scatterers(grid: Grid, scatterers) -> tuple[np.ndarray, np.ndarray]:
    """Node-in-disk indicator fields scaled by each disk's linear and quadratic susceptibility."""
    eta1 = np.zeros(grid.shape)
    eta2 = np.zeros(grid.shape)
    if not scatterers:
        return eta1, eta2
    X, Y = grid.mesh()
    for s in ScattererSet(scatterers):
        inside = (X - s.position[0]) ** 2 + (Y - s.position[1]) ** 2 <= s.radius**2
        if not inside.any():
            if grid.contains(s.position):
                raise ValueError(f"disk at {s.position} with radius {s.radius} covers no grid node")
            raise ValueError(f"disk at {s.position} lies entirely off the grid")
        eta1[inside] = s.eta1
        eta2[inside] = s.eta2
    return eta1, eta2
