"""Array acquisition: sensor/illumination geometry and the simulated data set."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .grid import Grid
from .io import read_json, read_raw, write_json, write_raw
from .medium import MediumRealization, rasterize_scatterers
from .solver import PmlParams, assemble, factorize, fixed_point_shg
from .waves import direction

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AcquisitionGeometry:
    """Sensors on one side of the domain and a fan of incident directions.

    ``angles`` are measured from the cone axis ``axis_angle`` (radians, from
    the +x axis).  Lengths are in the same unit as ``wavelength``.
    """

    sensors: np.ndarray
    angles: np.ndarray
    axis_angle: float = 0.0
    wavelength: float = 1.0
    cone_half_angle: float = np.pi / 4

    def __post_init__(self):
        s = np.asarray(self.sensors, dtype=float).reshape(-1, 2)
        a = np.asarray(self.angles, dtype=float).ravel()
        object.__setattr__(self, "sensors", s)
        object.__setattr__(self, "angles", a)
        if len(s) < 1 or len(a) < 1:
            raise ValueError("geometry needs at least one sensor and one direction")
        if np.any(np.abs(a) > self.cone_half_angle + 1e-12):
            raise ValueError("incident angle outside the illumination cone")
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")

    @property
    def k(self) -> float:
        return 2 * np.pi / self.wavelength

    @property
    def n_sensors(self) -> int:
        return len(self.sensors)

    @property
    def n_angles(self) -> int:
        return len(self.angles)

    @property
    def directions(self) -> np.ndarray:
        return direction(self.angles, self.axis_angle)

    @property
    def aperture(self) -> float:
        d = self.sensors - self.sensors.mean(axis=0)
        return float(np.ptp(d @ self.array_tangent))

    @property
    def array_tangent(self) -> np.ndarray:
        if self.n_sensors < 2:
            return np.array([1.0, 0.0])
        t = self.sensors[-1] - self.sensors[0]
        return t / np.linalg.norm(t)

    def to_dict(self) -> dict:
        return {
            "sensors": self.sensors.tolist(),
            "angles": self.angles.tolist(),
            "axis_angle": self.axis_angle,
            "wavelength": self.wavelength,
            "cone_half_angle": self.cone_half_angle,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AcquisitionGeometry":
        return cls(np.array(d["sensors"]), np.array(d["angles"]), d["axis_angle"], d["wavelength"], d["cone_half_angle"])


def linear_array_geometry(
    aperture: float = 20.0,
    n_sensors: int = 81,
    n_angles: int = 20,
    cone_half_angle: float = np.pi / 4,
    array_y: float = 0.0,
    wavelength: float = 1.0,
    axis_angle: float = 0.0,
) -> AcquisitionGeometry:
    """Sensors evenly spread over ``[-a/2, a/2]`` on the line ``y = array_y``; directions evenly
    spread over ``[-alpha, alpha]`` around a horizontal axis."""
    xs = np.linspace(-aperture / 2, aperture / 2, n_sensors) if n_sensors > 1 else np.zeros(1)
    sensors = np.column_stack([xs, np.full(n_sensors, array_y)])
    angles = (
        np.linspace(-cone_half_angle, cone_half_angle, n_angles) if n_angles > 1 else np.zeros(1)
    )
    return AcquisitionGeometry(sensors, angles, axis_angle, wavelength, cone_half_angle)


def snap_to_grid(geometry: AcquisitionGeometry, grid: Grid) -> tuple[AcquisitionGeometry, np.ndarray]:
    """Move sensors onto their nearest grid nodes; returns the snapped geometry and (row, col) indices."""
    idx = np.array([grid.nearest_index(p) for p in geometry.sensors])
    pos = np.array([grid.node(r, c) for r, c in idx])
    return replace(geometry, sensors=pos), idx


@dataclass(frozen=True, eq=False)
class SolverConfig:
    pml: PmlParams = PmlParams()
    tol: float = 1e-8
    max_iter: int = 50
    amplitude: float = 1.0
    threads: int = 1


@dataclass(eq=False)
class ArrayData:
    d1: np.ndarray
    d2: np.ndarray
    geometry: AcquisitionGeometry
    seed: int | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        shape = (self.geometry.n_sensors, self.geometry.n_angles)
        self.d1 = np.asarray(self.d1, dtype=complex)
        self.d2 = np.asarray(self.d2, dtype=complex)
        if self.d1.shape != shape or self.d2.shape != shape:
            raise ValueError(f"data matrices must be {shape}, got {self.d1.shape} and {self.d2.shape}")
        if not (np.all(np.isfinite(self.d1)) and np.all(np.isfinite(self.d2))):
            raise ValueError("array data contains non-finite entries")

    def harmonic(self, j: int) -> np.ndarray:
        if j == 1:
            return self.d1
        if j == 2:
            return self.d2
        raise ValueError(f"harmonic must be 1 or 2, got {j}")

    def save(self, directory) -> Path:
        """``directory/d1.f64``, ``d2.f64`` (interleaved complex) plus ``data.json`` metadata."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        write_raw(directory / "d1", self.d1, {"harmonic": 1})
        write_raw(directory / "d2", self.d2, {"harmonic": 2})
        write_json(
            directory / "data.json",
            {"geometry": self.geometry.to_dict(), "seed": self.seed, "diagnostics": self.diagnostics},
        )
        return directory

    @classmethod
    def load(cls, directory) -> "ArrayData":
        directory = Path(directory)
        meta = read_json(directory / "data.json")
        d1, _ = read_raw(directory / "d1")
        d2, _ = read_raw(directory / "d2")
        return cls(d1, d2, AcquisitionGeometry.from_dict(meta["geometry"]), meta.get("seed"), meta.get("diagnostics", {}))

    def to_csv(self, path) -> Path:
        """One line per (sensor, angle): indices, positions, angle, Re/Im of d1 and d2."""
        path = Path(path)
        g = self.geometry
        rows = []
        for s in range(g.n_sensors):
            for q in range(g.n_angles):
                rows.append([s, q, *g.sensors[s], g.angles[q],
                             self.d1[s, q].real, self.d1[s, q].imag, self.d2[s, q].real, self.d2[s, q].imag])
        np.savetxt(path, np.array(rows), delimiter=",", fmt="%.17g",
                   header="s,q,x,y,angle,d1_re,d1_im,d2_re,d2_im", comments="")
        return path


def simulate_experiment(
    medium: MediumRealization,
    scatterers,
    geometry: AcquisitionGeometry,
    config: SolverConfig = SolverConfig(),
) -> ArrayData:
    """Solve the coupled fundamental/second-harmonic problem for every incident direction.

    Both Helmholtz operators are assembled and factorised once and reused for
    every direction and fixed-point iteration.  ``d1`` is the scattered
    fundamental (total minus the homogeneous plane wave), ``d2`` the second
    harmonic, both sampled at the sensors after snapping them to grid nodes.
    """
    grid = medium.grid
    k = geometry.k
    eta1, eta2 = rasterize_scatterers(grid, scatterers)
    snapped, idx = snap_to_grid(geometry, grid)
    op_k = assemble(grid, medium.eta, eta1, k, config.pml, harmonic=1)
    op_2k = assemble(grid, medium.eta, eta1, 2 * k, config.pml, harmonic=2)
    lu_k = factorize(op_k)
    lu_2k = factorize(op_2k)
    eta_lin = op_k.pad(medium.eta + eta1)
    eta2_p = op_k.pad(eta2)
    X, Y = op_k.padded.mesh()
    dirs = geometry.directions

    def one(q):
        th = dirs[q]
        ui = config.amplitude * np.exp(1j * k * (th[0] * X + th[1] * Y))
        sol = fixed_point_shg(lu_k, lu_2k, eta_lin, eta2_p, ui, k, config.tol, config.max_iter)
        return sol.u[idx[:, 0], idx[:, 1]], sol.v[idx[:, 0], idx[:, 1]], sol.iterations, sol.final_residual

    if config.threads > 1:
        with ThreadPoolExecutor(config.threads) as pool:
            results = list(pool.map(one, range(geometry.n_angles)))
    else:
        results = [one(q) for q in range(geometry.n_angles)]
    d1 = np.column_stack([r[0] for r in results])
    d2 = np.column_stack([r[1] for r in results])
    diag = {
        "iterations": [int(r[2]) for r in results],
        "residuals": [float(r[3]) for r in results],
        "grid": grid.to_dict(),
        "pml_nodes": op_k.npml,
    }
    log.info("simulated %d directions, iterations %s", geometry.n_angles, diag["iterations"])
    return ArrayData(d1, d2, snapped, medium.params.seed, diag)


def add_noise(data: ArrayData, snr_db: float, seed: int) -> ArrayData:
    """Add circular complex Gaussian noise with power ``mean|d|^2 / 10^(snr_db/10)`` per matrix.

    Each noise draw is rescaled so its empirical power hits that target exactly.
    """
    if np.isinf(snr_db) and snr_db > 0:
        return ArrayData(data.d1.copy(), data.d2.copy(), data.geometry, data.seed, dict(data.diagnostics))
    rng = np.random.default_rng(int(seed))
    noisy = []
    for d in (data.d1, data.d2):
        target = np.mean(np.abs(d) ** 2) / 10 ** (snr_db / 10)
        n = rng.standard_normal(d.shape) + 1j * rng.standard_normal(d.shape)
        power = np.mean(np.abs(n) ** 2)
        noisy.append(d + n * np.sqrt(target / power))
    diag = dict(data.diagnostics)
    diag["noise"] = {"snr_db": snr_db, "seed": int(seed)}
    return ArrayData(noisy[0], noisy[1], data.geometry, data.seed, diag)
