"""Experiment configuration: JSON files mapped onto nested dataclasses.

Every section has defaults matching the reference numerical setup (20
wavelength square domain, array along its bottom side, two small disks), so
an empty ``{}`` config is a complete experiment. Unknown keys are errors.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class ConfigError(ValueError):
    pass


@dataclass
class MediumConfig:
    correlation_length: float = 0.3
    sigma: float = 0.01 * 4 * math.pi
    mode_count: int = 4096
    seed: int = 0
    domain_size: float = 20.0
    h: float = 0.05


def _default_scatterers():
    return [
        {"position": [-3.0, 12.0], "radius": 0.1, "eta1": 1.0, "eta2": 0.01},
        {"position": [3.0, 15.0], "radius": 0.1, "eta1": 1.0, "eta2": 0.01},
    ]


@dataclass
class GeometryConfig:
    aperture: float = 20.0
    n_sensors: int = 81
    n_angles: int = 20
    cone_half_angle: float = math.pi / 4
    wavelength: float = 1.0


@dataclass
class SolverSettings:
    pml_width: float = 1.5
    pml_strength: float = 1.79
    tol: float = 1e-8
    max_iter: int = 50
    amplitude: float = 1.0


@dataclass
class ImagingConfig:
    method: str = "cint"
    harmonic: int = 2
    search_centre: list | None = None
    search_size: float = 6.0
    search_spacing: float = 0.1
    full_domain: bool = False
    X: list = field(default_factory=lambda: [7.0, 3.5])
    Theta: float = math.pi / 5
    window: str = "gaussian"
    cutoff: float = 3.0


@dataclass
class GoConfig:
    distance: float = 400.0
    correlation_length: float = 10.0
    sigma: float = 0.01271555017374342
    aperture: float = 100.0
    cone_half_angle: float = 0.125
    n_sensors: int = 94
    n_angles: int = 94
    mode_count: int = 4096
    net_eta1: float = 1e-3
    net_eta2: float = 1e-3
    X: list | None = None
    Theta: float | None = None


@dataclass
class EnsembleConfig:
    n: int = 5
    first_seed: int = 1
    window: float = 4.0


@dataclass
class ExperimentConfig:
    medium: MediumConfig = field(default_factory=MediumConfig)
    scatterers: list = field(default_factory=_default_scatterers)
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    solver: SolverSettings = field(default_factory=SolverSettings)
    imaging: ImagingConfig = field(default_factory=ImagingConfig)
    go: GoConfig = field(default_factory=GoConfig)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    data_source: str = "pde"
    noise_snr_db: float | None = None
    output_dir: str = "out"

    def validate(self) -> "ExperimentConfig":
        m = self.medium
        if not (m.correlation_length > 0 and m.sigma >= 0 and m.mode_count >= 1 and m.h > 0 and m.domain_size > 0):
            raise ConfigError("medium: correlation_length, mode_count, h, domain_size must be positive, sigma >= 0")
        if self.data_source not in ("pde", "go"):
            raise ConfigError(f"data_source must be 'pde' or 'go', got {self.data_source!r}")
        im = self.imaging
        if im.method not in ("migration", "cint"):
            raise ConfigError(f"imaging.method must be 'migration' or 'cint', got {im.method!r}")
        if im.harmonic not in (1, 2):
            raise ConfigError(f"imaging.harmonic must be 1 or 2, got {im.harmonic}")
        if im.window not in ("gaussian", "hard"):
            raise ConfigError(f"imaging.window must be 'gaussian' or 'hard', got {im.window!r}")
        if len(im.X) != 2 or min(im.X) <= 0 or im.Theta <= 0:
            raise ConfigError("imaging.X must be two positive thresholds and Theta positive")
        g = self.geometry
        if g.n_sensors < 1 or g.n_angles < 1 or g.aperture <= 0 or g.wavelength <= 0:
            raise ConfigError("geometry: counts and lengths must be positive")
        if self.ensemble.n < 2:
            raise ConfigError("ensemble.n must be at least 2")
        for s in self.scatterers:
            if set(s) != {"position", "radius", "eta1", "eta2"} or len(s["position"]) != 2:
                raise ConfigError(f"scatterer entries need position[2], radius, eta1, eta2; got {s}")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _build(cls, data, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'} must be an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(f"unknown key(s) in {path or 'config'}: {', '.join(unknown)}")
    kwargs = {}
    for name, value in data.items():
        sub = _SECTIONS.get((cls, name))
        kwargs[name] = _build(sub, value, f"{path}.{name}".lstrip(".")) if sub else value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


_SECTIONS = {
    (ExperimentConfig, "medium"): MediumConfig,
    (ExperimentConfig, "geometry"): GeometryConfig,
    (ExperimentConfig, "solver"): SolverSettings,
    (ExperimentConfig, "imaging"): ImagingConfig,
    (ExperimentConfig, "go"): GoConfig,
    (ExperimentConfig, "ensemble"): EnsembleConfig,
}


def config_from_dict(data: dict) -> ExperimentConfig:
    return _build(ExperimentConfig, data, "").validate()


def load_config(path) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig().validate()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data)


# ---------------------------------------------------------------- builders


def build_grid(cfg: ExperimentConfig):
    from .grid import Grid

    return Grid.square(cfg.medium.domain_size, cfg.medium.h)


def build_medium(cfg: ExperimentConfig, seed: int | None = None):
    from .medium import MediumParams, gen_random_medium

    m = cfg.medium
    params = MediumParams(m.correlation_length, m.sigma, m.mode_count, m.seed if seed is None else seed)
    return gen_random_medium(build_grid(cfg), params)


def build_scatterers(cfg: ExperimentConfig):
    from .medium import ScattererSet

    return ScattererSet(cfg.scatterers)


def build_geometry(cfg: ExperimentConfig):
    from .acquisition import linear_array_geometry

    g = cfg.geometry
    return linear_array_geometry(g.aperture, g.n_sensors, g.n_angles, g.cone_half_angle, 0.0, g.wavelength)


def build_solver_config(cfg: ExperimentConfig, threads: int = 1):
    from .acquisition import SolverConfig
    from .solver import PmlParams

    s = cfg.solver
    return SolverConfig(PmlParams(s.pml_width, s.pml_strength), s.tol, s.max_iter, s.amplitude, threads)


def build_go_setup(cfg: ExperimentConfig):
    from .gomodel import GoRegimeParams, GoSetup

    g = cfg.go
    regime = GoRegimeParams(cfg.geometry.wavelength, g.correlation_length, g.sigma, g.distance, g.aperture,
                            g.cone_half_angle)
    return GoSetup(regime, g.n_sensors, g.n_angles, g.mode_count, g.net_eta1, g.net_eta2)


def truth_positions(cfg: ExperimentConfig) -> np.ndarray:
    if cfg.data_source == "go":
        return np.array([[0.0, cfg.go.distance]])
    return np.array([s["position"] for s in cfg.scatterers], dtype=float).reshape(-1, 2)


def build_search(cfg: ExperimentConfig, harmonic: int | None = None):
    """Search grid: the whole domain above the array, or a square around the first scatterer."""
    from .grid import Grid
    from .imaging import SearchGrid

    im = cfg.imaging
    j = im.harmonic if harmonic is None else harmonic
    h = im.search_spacing
    if im.full_domain and cfg.data_source == "pde":
        size = cfg.medium.domain_size
        n = int(round(size / h))
        # first row one spacing above the array so no search point sits on a sensor
        return SearchGrid(Grid(-size / 2, h, h, n + 1, n), j)
    centre = im.search_centre if im.search_centre is not None else truth_positions(cfg)[0]
    return SearchGrid.around(centre, im.search_size, h, j)


def build_cint_params(cfg: ExperimentConfig, harmonic: int | None = None):
    from .imaging import CintParams

    im = cfg.imaging
    j = im.harmonic if harmonic is None else harmonic
    if cfg.data_source == "go":
        theory = build_go_setup(cfg).theory()
        X = cfg.go.X[j - 1] if cfg.go.X else theory.decoherence_lengths[j - 1]
        Theta = cfg.go.Theta if cfg.go.Theta else theory.decoherence_angle / j
        return CintParams(X, Theta, im.window, im.cutoff)
    return CintParams(im.X[j - 1], im.Theta, im.window, im.cutoff)
