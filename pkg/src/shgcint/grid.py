"""Uniform rectangular lattices shared by the medium, the solver and the images."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Node-centred lattice ``x = x0 + i*h``, ``y = y0 + j*h``.

    Fields living on a grid are arrays of shape ``(ny, nx)`` so that rows run
    along ``y`` and columns along ``x``.
    """

    x0: float
    y0: float
    h: float
    nx: int
    ny: int

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"grid spacing must be positive, got {self.h}")
        if self.nx < 1 or self.ny < 1:
            raise ValueError(f"grid needs at least one node per axis, got {self.nx}x{self.ny}")

    @classmethod
    def square(cls, size: float, h: float, x0: float | None = None, y0: float = 0.0) -> "Grid":
        """Square of side ``size`` with the bottom side centred on the origin by default."""
        n = int(round(size / h))
        if abs(n * h - size) > 1e-9 * size:
            raise ValueError(f"size {size} is not a multiple of h={h}")
        return cls(-size / 2 if x0 is None else x0, y0, h, n + 1, n + 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.h * np.arange(self.nx)

    @property
    def y(self) -> np.ndarray:
        return self.y0 + self.h * np.arange(self.ny)

    @property
    def x1(self) -> float:
        return self.x0 + self.h * (self.nx - 1)

    @property
    def y1(self) -> float:
        return self.y0 + self.h * (self.ny - 1)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y)

    def points(self) -> np.ndarray:
        """All nodes as an ``(ny*nx, 2)`` array in row-major order."""
        X, Y = self.mesh()
        return np.column_stack([X.ravel(), Y.ravel()])

    def nearest_index(self, p) -> tuple[int, int]:
        """(row, col) of the node nearest to point ``p``; raises if ``p`` is off the grid."""
        px, py = float(p[0]), float(p[1])
        i = int(round((px - self.x0) / self.h))
        j = int(round((py - self.y0) / self.h))
        if not (0 <= i < self.nx and 0 <= j < self.ny):
            raise ValueError(f"point ({px:g}, {py:g}) lies outside the grid")
        return j, i

    def node(self, row: int, col: int) -> np.ndarray:
        return np.array([self.x0 + col * self.h, self.y0 + row * self.h])

    def contains(self, p, tol: float = 1e-12) -> bool:
        return (self.x0 - tol <= p[0] <= self.x1 + tol) and (self.y0 - tol <= p[1] <= self.y1 + tol)

    def padded(self, n: int) -> "Grid":
        """Same spacing, ``n`` extra nodes on every side."""
        return Grid(self.x0 - n * self.h, self.y0 - n * self.h, self.h, self.nx + 2 * n, self.ny + 2 * n)

    def to_dict(self) -> dict:
        return {"x0": self.x0, "y0": self.y0, "h": self.h, "nx": self.nx, "ny": self.ny}

    @classmethod
    def from_dict(cls, d: dict) -> "Grid":
        return cls(float(d["x0"]), float(d["y0"]), float(d["h"]), int(d["nx"]), int(d["ny"]))
