"""Monte-Carlo ensembles over medium realizations and image stability metrics."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .acquisition import AcquisitionGeometry, ArrayData
from .imaging import CintParams, ImageGrid, SearchGrid, cint, migrate, peak_metrics

log = logging.getLogger(__name__)


class EnsembleError(RuntimeError):
    def __init__(self, seed, cause):
        super().__init__(f"realization with seed {seed} failed: {cause}")
        self.seed = seed
        self.cause = cause


@dataclass(frozen=True)
class EnsembleSpec:
    seeds: tuple
    data_source: str = "go"
    base_config: dict | str | None = None

    def __post_init__(self):
        seeds = tuple(int(s) for s in self.seeds)
        object.__setattr__(self, "seeds", seeds)
        if len(seeds) < 2:
            raise ValueError("an ensemble needs at least two realizations")
        if len(set(seeds)) != len(seeds):
            raise ValueError("ensemble seeds must be distinct")
        if self.data_source not in ("pde", "go"):
            raise ValueError(f"data source must be 'pde' or 'go', got {self.data_source!r}")

    @property
    def n(self) -> int:
        return len(self.seeds)

    @classmethod
    def consecutive(cls, n: int, first: int = 0, data_source: str = "go", base_config=None) -> "EnsembleSpec":
        return cls(tuple(range(first, first + n)), data_source, base_config)


def standard_methods(search: SearchGrid, cint_params: CintParams) -> dict[str, Callable[[ArrayData], ImageGrid]]:
    return {
        "migration": lambda d: migrate(d, search),
        "cint": lambda d: cint(d, search, cint_params),
    }


def snr(samples) -> float:
    """``|mean| / std`` of real or complex samples (population std; ``inf`` when std is zero)."""
    z = np.asarray(samples)
    m = z.mean()
    # spread about the first sample so identical samples give exactly zero
    dz = z - z.flat[0]
    sd = np.sqrt(np.mean(np.abs(dz - dz.mean()) ** 2))
    if sd == 0:
        return float("inf") if abs(m) > 0 else float("nan")
    return float(abs(m) / sd)


def bootstrap(samples, statistic=snr, n_resamples: int = 200, seed: int = 0) -> dict:
    """Percentile interval and standard error of ``statistic`` over resampled realizations."""
    z = np.asarray(samples)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(z), size=(n_resamples, len(z)))
    vals = np.array([statistic(z[i]) for i in idx])
    finite = vals[np.isfinite(vals)]
    if len(finite) == 0:
        return {"estimate": statistic(z), "se": float("nan"), "low": float("nan"), "high": float("nan")}
    return {
        "estimate": statistic(z),
        "se": float(np.std(finite, ddof=1)) if len(finite) > 1 else 0.0,
        "low": float(np.percentile(finite, 2.5)),
        "high": float(np.percentile(finite, 97.5)),
    }


def pearson(a, b) -> float:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if np.array_equal(a, b):
        return 1.0
    da, db = a - a.mean(), b - b.mean()
    den = np.sqrt(np.sum(da * da) * np.sum(db * db))
    if den == 0:
        return float("nan")
    return float(np.clip(np.sum(da * db) / den, -1.0, 1.0))


def correlation_matrix(images) -> np.ndarray:
    n = len(images)
    C = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            C[i, j] = C[j, i] = pearson(images[i], images[j])
    return C


def window_mask(grid, centre, side: float) -> np.ndarray:
    X, Y = grid.mesh()
    return (np.abs(X - centre[0]) <= side / 2 + 1e-9) & (np.abs(Y - centre[1]) <= side / 2 + 1e-9)


@dataclass
class MethodStats:
    mean: np.ndarray
    std: np.ndarray
    truth_values: np.ndarray
    snr: float
    snr_bootstrap: dict
    modulus_snr: float
    correlation: np.ndarray
    mean_correlation: float
    localization_errors: list

    def to_dict(self) -> dict:
        le = np.asarray(self.localization_errors, dtype=float)
        return {
            "snr": self.snr,
            "snr_bootstrap": self.snr_bootstrap,
            "modulus_snr": self.modulus_snr,
            "mean_correlation": self.mean_correlation,
            "correlation_matrix": self.correlation.tolist(),
            "localization_errors": le.tolist(),
            "localization_error_median": float(np.nanmedian(le)) if np.isfinite(le).any() else None,
            "truth_values": np.asarray(self.truth_values).tolist(),
        }


@dataclass
class StabilityReport:
    spec: EnsembleSpec
    search: SearchGrid
    truth: np.ndarray
    methods: dict[str, MethodStats] = field(default_factory=dict)
    window: float = 4.0

    def to_dict(self) -> dict:
        return {
            "seeds": list(self.spec.seeds),
            "data_source": self.spec.data_source,
            "realizations": self.spec.n,
            "harmonic": self.search.harmonic,
            "truth": self.truth.tolist(),
            "correlation_window": self.window,
            "search_grid": self.search.grid.to_dict(),
            "methods": {k: v.to_dict() for k, v in self.methods.items()},
        }


def _truth_value(img: ImageGrid, node) -> complex | float:
    r, c = node
    if img.complex_field is not None:
        return complex(img.complex_field[r, c])
    return float(img.raw[r, c])


def run_ensemble(
    spec: EnsembleSpec,
    make_data: Callable[[int], ArrayData],
    methods: dict[str, Callable[[ArrayData], ImageGrid]],
    search: SearchGrid,
    truth,
    window: float = 4.0,
    threads: int = 1,
    bootstrap_seed: int = 0,
) -> StabilityReport:
    """Image every realization with every method and aggregate the statistics.

    ``truth`` is a sequence of scatterer positions (or Scatterer objects); the
    first one is where SNR and the correlation window are evaluated. SNR uses
    pre-normalisation values: the complex sum for migration (whose modulus is
    the image), the real image value for CINT.
    """
    truth = np.asarray([getattr(t, "position", t) for t in truth], dtype=float).reshape(-1, 2)
    node = search.grid.nearest_index(truth[0])
    mask = window_mask(search.grid, search.grid.node(*node), window)

    def one(seed):
        try:
            data = make_data(seed)
            return {name: f(data) for name, f in methods.items()}
        except Exception as exc:  # report which realization broke
            raise EnsembleError(seed, exc) from exc

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(one, spec.seeds))
    else:
        results = [one(s) for s in spec.seeds]

    report = StabilityReport(spec, search, truth, window=window)
    for name in methods:
        imgs = [r[name] for r in results]
        raw = np.stack([im.raw for im in imgs])
        tv = np.array([_truth_value(im, node) for im in imgs])
        C = correlation_matrix([im.raw[mask] for im in imgs])
        iu = np.triu_indices(len(imgs), 1)
        loc = [peak_metrics(im, truth[:1])[0]["localization_error"] for im in imgs]
        report.methods[name] = MethodStats(
            mean=raw.mean(axis=0),
            std=(raw - raw[0]).std(axis=0),
            truth_values=tv,
            snr=snr(tv),
            snr_bootstrap=bootstrap(tv, snr, 200, bootstrap_seed),
            modulus_snr=snr(np.abs(tv)),
            correlation=C,
            mean_correlation=float(np.mean(C[iu])),
            localization_errors=loc,
        )
        log.info("%s: snr %.3g, mean correlation %.3f", name, report.methods[name].snr,
                 report.methods[name].mean_correlation)
    return report


@dataclass
class ArtifactScan:
    ratio: float | None
    strip_max: float
    scatterer_max: float
    global_peak: list | None
    peak_to_truth: float | None
    no_peak: bool = False

    def to_dict(self) -> dict:
        return {
            "ratio": self.ratio,
            "strip_max": self.strip_max,
            "scatterer_max": self.scatterer_max,
            "global_peak": self.global_peak,
            "peak_to_truth": self.peak_to_truth,
            "no_peak": self.no_peak,
        }


def distance_to_array(points: np.ndarray, geometry: AcquisitionGeometry) -> np.ndarray:
    """Euclidean distance from each point to the segment joining the end sensors."""
    a = geometry.sensors[0]
    b = geometry.sensors[-1]
    ab = b - a
    L2 = float(ab @ ab)
    t = np.zeros(len(points)) if L2 == 0 else np.clip((points - a) @ ab / L2, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.hypot(*(points - proj).T)


def artifact_scan(image: ImageGrid, geometry: AcquisitionGeometry, truth, strip: float = 3.0,
                  near: float = 1.0) -> ArtifactScan:
    """Compare the image next to the array with the image at the scatterers.

    ``ratio`` is the maximum within ``strip`` wavelengths of the array over the
    maximum within ``near`` wavelengths of any true scatterer. An image with
    no positive value yields ``no_peak=True`` and ``ratio=None``.
    """
    truth = np.asarray([getattr(t, "position", t) for t in truth], dtype=float).reshape(-1, 2)
    v = image.raw
    pts = image.search.points()
    flat = v.ravel()
    lam = image.wavelength
    if not np.any(flat > 0):
        return ArtifactScan(None, 0.0, 0.0, None, None, True)
    in_strip = distance_to_array(pts, geometry) <= strip * lam
    dist_truth = np.min(np.hypot(pts[:, None, 0] - truth[None, :, 0], pts[:, None, 1] - truth[None, :, 1]), axis=1)
    near_truth = dist_truth <= near * lam
    smax = float(flat[in_strip].max()) if in_strip.any() else 0.0
    tmax = float(flat[near_truth].max()) if near_truth.any() else 0.0
    g = int(np.argmax(flat))
    ratio = smax / tmax if tmax > 0 else float("inf")
    return ArtifactScan(ratio, smax, tmax, pts[g].tolist(), float(dist_truth[g]))
