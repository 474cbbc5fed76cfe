"""PNG figures written next to the delimited outputs (non-interactive backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed metadata so identical inputs give identical PNG bytes
_PNG_META = {"Software": None}


def _extent(grid):
    return (grid.x0 - grid.h / 2, grid.x1 + grid.h / 2, grid.y0 - grid.h / 2, grid.y1 + grid.h / 2)


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=100, metadata=_PNG_META)
    plt.close(fig)
    return path


def field_png(path, grid, values, title: str = "", truth=None, cmap: str = "viridis", label: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(5.2, 4.4))
    im = ax.imshow(values, origin="lower", extent=_extent(grid), cmap=cmap, aspect="equal")
    fig.colorbar(im, ax=ax, label=label)
    if truth is not None and len(truth):
        t = np.asarray(truth, dtype=float).reshape(-1, 2)
        ax.plot(t[:, 0], t[:, 1], "o", mfc="none", mec="k", ms=9)
    ax.set_xlabel("x / wavelength")
    ax.set_ylabel("y / wavelength")
    ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def image_png(path, image, truth=None) -> Path:
    title = f"{image.method} image, harmonic {image.harmonic}"
    return field_png(path, image.search.grid, image.values, title, truth, "magma", "normalised")


def data_png(path, data) -> Path:
    g = data.geometry
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.8))
    for ax, j in zip(axes, (1, 2)):
        ext = (g.angles[0], g.angles[-1], g.sensors[0, 0], g.sensors[-1, 0])
        im = ax.imshow(np.abs(data.harmonic(j)), origin="lower", aspect="auto", extent=ext, cmap="viridis")
        fig.colorbar(im, ax=ax)
        ax.set_xlabel("incident angle / rad")
        ax.set_ylabel("sensor x / wavelength")
        ax.set_title(f"|d{j}|")
    fig.tight_layout()
    return _save(fig, path)


def curves_png(path, x, curves: dict, xlabel: str, ylabel: str, title: str = "", logy: bool = False) -> Path:
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    for name, y in curves.items():
        ax.plot(x, y, label=name)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def snr_bar_png(path, report) -> Path:
    names = list(report.methods)
    vals = [report.methods[n].snr for n in names]
    errs = [report.methods[n].snr_bootstrap["se"] for n in names]
    fig, ax = plt.subplots(figsize=(4.5, 3.6))
    ax.bar(names, vals, yerr=errs, color=["tab:blue", "tab:orange", "tab:green"][: len(names)], capsize=4)
    ax.set_ylabel("SNR at scatterer")
    ax.set_title(f"{report.spec.n} realizations, harmonic {report.search.harmonic}")
    fig.tight_layout()
    return _save(fig, path)
