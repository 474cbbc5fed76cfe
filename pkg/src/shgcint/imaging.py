"""Migration and coherent-interferometric (CINT) imaging at either harmonic."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .acquisition import AcquisitionGeometry, ArrayData
from .grid import Grid
from .waves import g0_2d

_CHUNK_ENTRIES = 4_000_000


@dataclass(frozen=True)
class SearchGrid:
    """Rectangle of imaging points at harmonic ``harmonic``."""

    grid: Grid
    harmonic: int = 1

    def __post_init__(self):
        if self.harmonic not in (1, 2):
            raise ValueError(f"harmonic must be 1 or 2, got {self.harmonic}")

    @classmethod
    def around(cls, centre, size: float, spacing: float, harmonic: int = 1) -> "SearchGrid":
        """Square of side ``size`` centred on ``centre``."""
        n = int(round(size / spacing))
        return cls(Grid(centre[0] - n * spacing / 2, centre[1] - n * spacing / 2, spacing, n + 1, n + 1), harmonic)

    def points(self) -> np.ndarray:
        return self.grid.points()

    def at(self, harmonic: int) -> "SearchGrid":
        return SearchGrid(self.grid, harmonic)


@dataclass(frozen=True)
class CintParams:
    X: float
    Theta: float
    window: str = "gaussian"
    cutoff: float = 3.0

    def __post_init__(self):
        if not (self.X > 0 and self.Theta > 0):
            raise ValueError("CINT thresholds must be positive")
        if self.window not in ("gaussian", "hard"):
            raise ValueError(f"unknown window {self.window!r}")
        if not self.cutoff > 0:
            raise ValueError("cutoff multiple must be positive")

    def to_dict(self) -> dict:
        return {"X": self.X, "Theta": self.Theta, "window": self.window, "cutoff": self.cutoff}


@dataclass(eq=False)
class ImageGrid:
    """Image normalised to unit maximum; ``norm`` keeps the raw maximum."""

    values: np.ndarray
    search: SearchGrid
    norm: float
    method: str
    params: dict = field(default_factory=dict)
    wavelength: float = 1.0
    complex_field: np.ndarray | None = None  # migration sum before the modulus, when available

    @property
    def raw(self) -> np.ndarray:
        return self.values * self.norm

    @property
    def harmonic(self) -> int:
        return self.search.harmonic

    def metadata(self) -> dict:
        return {
            "method": self.method,
            "harmonic": self.harmonic,
            "norm": self.norm,
            "params": self.params,
            "grid": self.search.grid.to_dict(),
            "wavelength": self.wavelength,
        }


def _normalised(values: np.ndarray, search: SearchGrid, method: str, params: dict, wavelength: float,
                complex_field=None) -> ImageGrid:
    vmax = float(np.max(values)) if values.size else 0.0
    norm = vmax if vmax > 0 else 0.0
    out = values / norm if norm > 0 else np.zeros_like(values)
    return ImageGrid(out, search, norm, method, params, wavelength, complex_field)


def _check_points(points: np.ndarray, sensors: np.ndarray, tol: float):
    for s in sensors:
        if np.any(np.hypot(points[:, 0] - s[0], points[:, 1] - s[1]) <= tol):
            raise ValueError(f"search point coincides with sensor at {tuple(s)}")


def backpropagated(data: ArrayData, points: np.ndarray, harmonic: int) -> np.ndarray:
    """``b[p, s, q] = d_j(x_s, theta_q) conj(G0(y_p, x_s; j k)) exp(-i j k theta_q . y_p)``."""
    g = data.geometry
    jk = harmonic * g.k
    d = data.harmonic(harmonic)
    G = np.conj(g0_2d(points[:, None, :], g.sensors[None, :, :], jk))
    E = np.exp(-1j * jk * points @ g.directions.T)
    return G[:, :, None] * d[None, :, :] * E[:, None, :]


def migration_field(data: ArrayData, search: SearchGrid) -> np.ndarray:
    """Complex migration sum on the search grid (before taking the modulus)."""
    g = data.geometry
    j = search.harmonic
    jk = j * g.k
    pts = search.points()
    _check_points(pts, g.sensors, 1e-12 * g.wavelength)
    d = data.harmonic(j)
    out = np.empty(len(pts), complex)
    step = max(1, _CHUNK_ENTRIES // max(1, g.n_sensors + g.n_angles))
    for a in range(0, len(pts), step):
        p = pts[a:a + step]
        G = np.conj(g0_2d(p[:, None, :], g.sensors[None, :, :], jk))
        E = np.exp(-1j * jk * p @ g.directions.T)
        out[a:a + step] = np.einsum("ps,sq,pq->p", G, d, E, optimize=True)
    return out.reshape(search.grid.shape)


def migrate(data: ArrayData, search: SearchGrid) -> ImageGrid:
    f = migration_field(data, search)
    return _normalised(np.abs(f), search, "migration", {}, data.geometry.wavelength, f)


def _window(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "gaussian":
        return np.exp(-0.5 * z**2)
    return np.ones_like(z)


def pair_window(coords: np.ndarray, scale: float, cutoff: float, kind: str) -> sp.csr_matrix:
    """Symmetric sparse window over all index pairs with ``|c_i - c_j| <= cutoff * scale``.

    Pairs are enumerated by a sliding window over the sorted coordinates, so
    the cost is proportional to the number of retained pairs.
    """
    coords = np.asarray(coords, dtype=float)
    order = np.argsort(coords, kind="stable")
    c = coords[order]
    reach = cutoff * scale
    hi = np.searchsorted(c, c + reach * (1 + 1e-12), side="right")
    rows, cols = [], []
    for i in range(len(c)):
        js = np.arange(i, hi[i])
        rows.append(np.full(len(js), i))
        cols.append(js)
    r = np.concatenate(rows)
    q = np.concatenate(cols)
    w = _window(np.abs(c[q] - c[r]) / scale, kind)
    off = r != q
    R = np.concatenate([order[r], order[q[off]]])
    C = np.concatenate([order[q], order[r[off]]])
    W = np.concatenate([w, w[off]])
    return sp.csr_matrix((W, (R, C)), shape=(len(c), len(c)))


def _sensor_coordinate(geometry: AcquisitionGeometry) -> np.ndarray:
    """Position of each sensor along the array line."""
    return (geometry.sensors - geometry.sensors[0]) @ geometry.array_tangent


def cint_complex(data: ArrayData, search: SearchGrid, params: CintParams) -> np.ndarray:
    """Windowed cross-correlation sum before discarding its (vanishing) imaginary part."""
    g = data.geometry
    j = search.harmonic
    pts = search.points()
    _check_points(pts, g.sensors, 1e-12 * g.wavelength)
    Wx = pair_window(_sensor_coordinate(g), params.X, params.cutoff, params.window)
    Wt = pair_window(g.angles, params.Theta, params.cutoff, params.window)
    nx, nq = g.n_sensors, g.n_angles
    out = np.empty(len(pts), complex)
    step = max(1, _CHUNK_ENTRIES // (nx * nq))
    for a in range(0, len(pts), step):
        b = backpropagated(data, pts[a:a + step], j)
        P = b.shape[0]
        # sum_{s,s',q,q'} Wx[s,s'] Wt[q,q'] b[s,q] conj(b[s',q'])
        bt = (Wt @ b.reshape(P * nx, nq).T).T.reshape(P, nx, nq)
        bx = (Wx @ b.transpose(1, 0, 2).reshape(nx, P * nq)).reshape(nx, P, nq).transpose(1, 0, 2)
        out[a:a + step] = np.einsum("psq,psq->p", bt, np.conj(bx))
    return out.reshape(search.grid.shape)


def cint(data: ArrayData, search: SearchGrid, params: CintParams) -> ImageGrid:
    full = cint_complex(data, search, params)
    re = full.real
    scale = float(np.max(np.abs(re))) if re.size else 0.0
    imag_ratio = float(np.max(np.abs(full.imag)) / scale) if scale > 0 else 0.0
    info = params.to_dict()
    info["imag_ratio"] = imag_ratio
    return _normalised(re, search, "cint", info, data.geometry.wavelength)


def local_maxima(values: np.ndarray, rel_threshold: float = 0.5) -> np.ndarray:
    """(row, col) of points no smaller than their 8 neighbours and above ``rel_threshold * max``."""
    v = np.asarray(values, dtype=float)
    vmax = v.max()
    if not vmax > 0:
        return np.empty((0, 2), int)
    pad = np.pad(v, 1, constant_values=-np.inf)
    ny, nx = v.shape
    is_max = np.ones(v.shape, bool)
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr or dc:
                is_max &= v >= pad[1 + dr:1 + dr + ny, 1 + dc:1 + dc + nx]
    is_max &= v >= rel_threshold * vmax
    return np.argwhere(is_max)


def _half_width(profile: np.ndarray, i: int, h: float) -> float:
    peak = profile[i]
    half = peak / 2
    left = right = None
    for a in range(i, 0, -1):
        if profile[a - 1] < half:
            left = a - (profile[a] - half) / (profile[a] - profile[a - 1])
            break
    for a in range(i, len(profile) - 1):
        if profile[a + 1] < half:
            right = a + (profile[a] - half) / (profile[a] - profile[a + 1])
            break
    if left is None or right is None:
        return float("nan")
    return float((right - left) * h)


def peak_metrics(image: ImageGrid, truth, rel_threshold: float = 0.5, background_distance: float = 3.0) -> list[dict]:
    """Per scatterer: distance to the nearest significant peak, FWHM through that peak along
    x and y, and peak over background (median of points farther than
    ``background_distance`` wavelengths from every scatterer)."""
    v = image.values
    grid = image.search.grid
    positions = np.asarray([s.position if hasattr(s, "position") else s for s in truth], dtype=float).reshape(-1, 2)
    peaks = local_maxima(v, rel_threshold)
    X, Y = grid.mesh()
    far = np.ones(v.shape, bool)
    for p in positions:
        far &= np.hypot(X - p[0], Y - p[1]) > background_distance * image.wavelength
    background = float(np.median(v[far])) if far.any() else float("nan")
    out = []
    for p in positions:
        if len(peaks) == 0:
            out.append({"position": p.tolist(), "localization_error": float("nan"), "fwhm_x": float("nan"),
                        "fwhm_y": float("nan"), "peak_to_background": float("nan")})
            continue
        pk = np.column_stack([X[peaks[:, 0], peaks[:, 1]], Y[peaks[:, 0], peaks[:, 1]]])
        dist = np.hypot(pk[:, 0] - p[0], pk[:, 1] - p[1])
        m = int(np.argmin(dist))
        r, c = peaks[m]
        fx = _half_width(v[r, :], c, grid.h)
        fy = _half_width(v[:, c], r, grid.h)
        pb = float(v[r, c] / background) if background > 0 else float("nan")
        out.append({
            "position": p.tolist(),
            "peak": pk[m].tolist(),
            "localization_error": float(dist[m]),
            "fwhm_x": fx,
            "fwhm_y": fy,
            "peak_to_background": pb,
        })
    return out
