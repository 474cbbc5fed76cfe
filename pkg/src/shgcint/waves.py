"""Free-space Green's functions, plane waves and homogeneous point spread factors.

The Green's functions are normalised so that ``(Delta + k^2) G = -4*pi*delta``:
``i*pi*H0(k r)`` in two dimensions and ``exp(i k r) / r`` in three.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special


@dataclass(frozen=True)
class Wavenumber:
    k: float
    harmonic: int = 1

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError(f"wavenumber must be positive, got {self.k}")
        if self.harmonic not in (1, 2):
            raise ValueError(f"harmonic must be 1 or 2, got {self.harmonic}")

    @property
    def value(self) -> float:
        return self.harmonic * self.k


def _jk(jk) -> float:
    return jk.value if isinstance(jk, Wavenumber) else float(jk)


def _distance(x, y) -> np.ndarray:
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    r = np.sqrt(np.sum(d * d, axis=-1))
    if np.any(r == 0):
        raise ValueError("Green's function evaluated at coincident points")
    return r


def hankel0(z) -> np.ndarray:
    """``H0^(1)(z) = J0(z) + i Y0(z)`` for real positive ``z``."""
    z = np.asarray(z, dtype=float)
    return special.j0(z) + 1j * special.y0(z)


def g0_2d(x, y, jk) -> np.ndarray:
    """Outgoing 2D Green's function ``i*pi*H0(jk |x - y|)``; broadcasts over leading axes."""
    z = _jk(jk) * _distance(x, y)
    return 1j * np.pi * hankel0(z)


def g0_3d(x, y, jk) -> np.ndarray:
    r = _distance(x, y)
    return np.exp(1j * _jk(jk) * r) / r


def g0_paraxial(x_perp, ys, jk, L: float, check: bool = True) -> np.ndarray:
    """Quadratic-phase approximation ``exp(i jk (y_par + |x_perp - y_perp|^2 / 2L)) / L``.

    ``x_perp`` are transverse array coordinates; ``ys = (y_perp, y_par)`` with
    ``y_par`` the range from the array.  With ``check`` the transverse spread
    must stay well inside ``(lambda L^3)^(1/4)``.
    """
    jk = _jk(jk)
    ys = np.asarray(ys, dtype=float)
    dx = np.asarray(x_perp, dtype=float) - ys[..., 0]
    if check:
        wavelength = 2 * np.pi / jk
        limit = (wavelength * L**3) ** 0.25
        if np.max(np.abs(dx)) >= 0.5 * limit:
            raise ValueError(
                f"transverse offset {np.max(np.abs(dx)):.3g} violates the paraxial ordering "
                f"(limit {limit:.3g})"
            )
    return np.exp(1j * jk * (ys[..., 1] + dx**2 / (2 * L))) / L


def direction(angle, axis_angle: float = 0.0) -> np.ndarray:
    """Unit vectors at ``angle`` (radians) measured from the cone axis."""
    a = np.asarray(angle, dtype=float) + axis_angle
    return np.stack([np.cos(a), np.sin(a)], axis=-1)


def incident_plane_wave(points, theta, k: float, amplitude: float = 1.0) -> np.ndarray:
    """``amplitude * exp(i k theta . x)`` at ``points`` (``(..., 2)`` array, or a Grid)."""
    if hasattr(points, "mesh"):
        X, Y = points.mesh()
    else:
        p = np.asarray(points, dtype=float)
        X, Y = p[..., 0], p[..., 1]
    theta = np.asarray(theta, dtype=float)
    return amplitude * np.exp(1j * k * (theta[0] * X + theta[1] * Y))


def sinc(z) -> np.ndarray:
    """Unnormalised ``sin(z)/z``."""
    return np.sinc(np.asarray(z, dtype=float) / np.pi)


def aperture_psf(offset, jk, aperture: float, L: float) -> np.ndarray:
    """Array-aperture factor of the homogeneous migration PSF (line aperture, paraxial).

    ``offset`` is the search-point offset parallel to the array.
    """
    return (aperture / L) * sinc(_jk(jk) * aperture * np.asarray(offset, dtype=float) / (2 * L))


def cone_psf(offset, jk, alpha: float, dim: int = 3) -> np.ndarray:
    """Illumination-cone factor of the homogeneous migration PSF.

    ``offset`` is the search-point offset orthogonal to the cone axis.  For
    ``dim=3`` this is ``2*pi*alpha*J1(jk alpha rho) / (jk rho)``; for the
    planar fan of directions (``dim=2``) it is ``2*alpha*sinc(jk alpha rho)``.
    """
    jk = _jk(jk)
    rho = np.abs(np.asarray(offset, dtype=float))
    if dim == 2:
        return 2 * alpha * sinc(jk * alpha * rho)
    if dim != 3:
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    z = jk * alpha * rho
    with np.errstate(invalid="ignore", divide="ignore"):
        out = 2 * np.pi * alpha * special.j1(z) / (jk * rho)
    return np.where(rho == 0, np.pi * alpha**2, out)
