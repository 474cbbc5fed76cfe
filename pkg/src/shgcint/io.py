"""Plain-file formats: grid CSV, raw little-endian grids with JSON sidecars, 16-bit PGM."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .grid import Grid


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return None if np.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_json(path, data) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")
    return path


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def write_grid_csv(path, grid: Grid, values: np.ndarray) -> Path:
    """Row-major CSV (one line per grid row, increasing y), commented header with the lattice."""
    values = np.asarray(values)
    if values.shape != grid.shape:
        raise ValueError(f"values shape {values.shape} does not match grid {grid.shape}")
    path = Path(path)
    header = f"x0={grid.x0!r},y0={grid.y0!r},h={grid.h!r},nx={grid.nx},ny={grid.ny}"
    if np.iscomplexobj(values):
        inter = np.empty((grid.ny, 2 * grid.nx))
        inter[:, 0::2] = values.real
        inter[:, 1::2] = values.imag
        values = inter
        header += ",complex=interleaved"
    np.savetxt(path, values, delimiter=",", header=header, fmt="%.17g")
    return path


def read_grid_csv(path) -> tuple[Grid, np.ndarray]:
    path = Path(path)
    with path.open() as fh:
        head = fh.readline().lstrip("#").strip()
    meta = dict(item.split("=") for item in head.split(","))
    grid = Grid(float(meta["x0"]), float(meta["y0"]), float(meta["h"]), int(meta["nx"]), int(meta["ny"]))
    vals = np.loadtxt(path, delimiter=",", ndmin=2)
    if meta.get("complex") == "interleaved":
        vals = vals[:, 0::2] + 1j * vals[:, 1::2]
    return grid, vals.reshape(grid.shape)


def write_raw(stem, values: np.ndarray, meta: dict | None = None) -> tuple[Path, Path]:
    """``stem.f64`` (little-endian float64, complex as interleaved re/im) plus ``stem.json``."""
    stem = Path(stem)
    values = np.asarray(values)
    is_complex = np.iscomplexobj(values)
    flat = values.astype("<c16" if is_complex else "<f8")
    bin_path = stem.with_suffix(".f64")
    flat.tofile(bin_path)
    side = dict(meta or {})
    side.update({"shape": list(values.shape), "complex": bool(is_complex), "dtype": "<f8", "order": "C"})
    json_path = write_json(stem.with_suffix(".json"), side)
    return bin_path, json_path


def read_raw(stem) -> tuple[np.ndarray, dict]:
    stem = Path(stem)
    meta = read_json(stem.with_suffix(".json"))
    dtype = "<c16" if meta["complex"] else "<f8"
    vals = np.fromfile(stem.with_suffix(".f64"), dtype=dtype).reshape(meta["shape"])
    return vals.astype(complex if meta["complex"] else float), meta


def write_grid_raw(stem, grid: Grid, values: np.ndarray, meta: dict | None = None) -> tuple[Path, Path]:
    side = {"grid": grid.to_dict()}
    side.update(meta or {})
    return write_raw(stem, values, side)


def read_grid_raw(stem) -> tuple[Grid, np.ndarray, dict]:
    vals, meta = read_raw(stem)
    return Grid.from_dict(meta["grid"]), vals, meta


def to_pgm16(values: np.ndarray, vmin: float | None = None, vmax: float | None = None) -> bytes:
    """Binary 16-bit PGM, first image row = largest y.

    Maps ``[vmin, vmax]`` linearly onto ``[0, 65535]``; defaults are ``0`` and
    the array maximum for non-negative data, otherwise the data range.  An
    empty range (for example an all-zero array) renders as all zeros.
    """
    a = np.asarray(values, dtype=float)
    lo = (0.0 if a.min() >= 0 else float(a.min())) if vmin is None else vmin
    hi = float(a.max()) if vmax is None else vmax
    if hi > lo:
        scaled = np.clip((a - lo) / (hi - lo), 0.0, 1.0)
    else:
        scaled = np.zeros_like(a)
    pix = np.round(scaled * 65535).astype(">u2")[::-1]
    ny, nx = a.shape
    return f"P5\n{nx} {ny}\n65535\n".encode("ascii") + pix.tobytes()


def write_pgm(path, values: np.ndarray, **kw) -> Path:
    path = Path(path)
    path.write_bytes(to_pgm16(values, **kw))
    return path


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    nx, ny = map(int, parts[1].split())
    pix = np.frombuffer(parts[3], dtype=">u2").reshape(ny, nx)
    return pix[::-1].astype(np.uint16)
