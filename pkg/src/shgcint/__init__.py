"""Second-harmonic imaging in random media: PDE and phase-screen data, migration and CINT."""

from .acquisition import AcquisitionGeometry, ArrayData, SolverConfig, linear_array_geometry, simulate_experiment
from .grid import Grid
from .imaging import CintParams, ImageGrid, SearchGrid, cint, migrate, peak_metrics
from .medium import MediumParams, MediumRealization, Scatterer, ScattererSet, gen_random_medium, rasterize_scatterers
from .waves import g0_2d, g0_3d, g0_paraxial, incident_plane_wave

__version__ = "0.1.0"

__all__ = [
    "AcquisitionGeometry", "ArrayData", "SolverConfig", "linear_array_geometry", "simulate_experiment",
    "Grid", "CintParams", "ImageGrid", "SearchGrid", "cint", "migrate", "peak_metrics",
    "MediumParams", "MediumRealization", "Scatterer", "ScattererSet", "gen_random_medium",
    "rasterize_scatterers", "g0_2d", "g0_3d", "g0_paraxial", "incident_plane_wave",
]
