"""Geometrical-optics phase-screen data and closed-form scaling predictions.

Waves keep the free-space amplitude and pick up a random phase equal to the
line integral of the fluctuation ``4*pi*eta`` along straight rays:
``nu(x, y) = |x - y| / 2 * mean(4*pi*eta on the segment)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .acquisition import AcquisitionGeometry, ArrayData
from .grid import Grid
from .medium import MediumParams, MediumRealization, gen_random_medium
from .waves import g0_2d

SQRT_2PI = np.sqrt(2 * np.pi)


# ---------------------------------------------------------------- theory


@dataclass(frozen=True)
class GoRegimeParams:
    wavelength: float
    correlation_length: float
    sigma: float
    distance: float
    aperture: float
    cone_half_angle: float

    def __post_init__(self):
        for name in ("wavelength", "correlation_length", "distance", "aperture", "cone_half_angle"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")

    @property
    def k(self) -> float:
        return 2 * np.pi / self.wavelength

    def to_dict(self) -> dict:
        return {
            "wavelength": self.wavelength,
            "correlation_length": self.correlation_length,
            "sigma": self.sigma,
            "distance": self.distance,
            "aperture": self.aperture,
            "cone_half_angle": self.cone_half_angle,
        }


def scattering_length(sigma: float, ell: float, jk: float) -> float:
    """Distance over which the mean field decays by ``1/e`` (infinite without fluctuations)."""
    if sigma == 0:
        return float("inf")
    return 8.0 / (SQRT_2PI * sigma**2 * jk**2 * ell)


def decoherence_length(ell: float, ls: float, L: float) -> float:
    return ell * np.sqrt(3.0 * ls / (2.0 * L))


def phase_variance(sigma: float, ell: float, length: float) -> float:
    """Large-range variance of ``nu`` along a ray of the given length."""
    return SQRT_2PI * sigma**2 * ell * length / 4.0


def effective_scales(X, Theta, Xd_j: float, Theta_d: float, harmonic: int) -> tuple[float, float]:
    """Combine thresholds with decoherence scales; ``None`` thresholds do not bind."""
    inv_x = (0.0 if X is None else 1.0 / X**2) + 1.0 / Xd_j**2
    ang = 1.0 / Theta_d**2 if harmonic == 1 else 4.0 / Theta_d**2
    inv_t = (0.0 if Theta is None else 1.0 / Theta**2) + ang
    with np.errstate(divide="ignore"):
        return float(1.0 / np.sqrt(inv_x)), float(1.0 / np.sqrt(inv_t))


def regime_diagnostics(p: GoRegimeParams) -> dict:
    """Each scale-ordering inequality as ``small / large``; flagged when the ratio is >= 0.5."""
    lam, ell, L, a, s = p.wavelength, p.correlation_length, p.distance, p.aperture, p.sigma
    chain = [
        ("wavelength < sqrt(wavelength*L)", lam, np.sqrt(lam * L)),
        ("sqrt(wavelength*L) < ell", np.sqrt(lam * L), ell),
        ("ell < (wavelength*L^2)^(1/3)", ell, (lam * L**2) ** (1 / 3)),
        ("(wavelength*L^2)^(1/3) < a", (lam * L**2) ** (1 / 3), a),
        ("a < (wavelength*L^3)^(1/4)", a, (lam * L**3) ** 0.25),
        ("(wavelength*L^3)^(1/4) < L", (lam * L**3) ** 0.25, L),
        ("wavelength/sqrt(ell*L) < sigma", lam / np.sqrt(ell * L), s),
        ("sigma < sqrt(wavelength*ell)/L", s, np.sqrt(lam * ell) / L),
    ]
    out = {}
    for name, small, large in chain:
        r = float(small / large) if large > 0 else float("inf")
        out[name] = {"ratio": r, "flagged": bool(r >= 0.5)}
    return out


@dataclass(frozen=True)
class TheoryPrediction:
    params: GoRegimeParams
    scattering_lengths: tuple[float, float]
    decoherence_lengths: tuple[float, float]
    decoherence_angle: float
    entry_distance: float
    X: tuple | None = None
    Theta: float | None = None
    effective_X: tuple[float, float] = (np.nan, np.nan)
    effective_Theta: tuple[float, float] = (np.nan, np.nan)
    diagnostics: dict = field(default_factory=dict)

    @property
    def any_flagged(self) -> bool:
        return any(v["flagged"] for v in self.diagnostics.values())

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "scattering_lengths": list(self.scattering_lengths),
            "scattering_length_ratio": self.scattering_lengths[1] / self.scattering_lengths[0],
            "decoherence_lengths": list(self.decoherence_lengths),
            "decoherence_length_ratio": self.decoherence_lengths[1] / self.decoherence_lengths[0],
            "decoherence_angle": self.decoherence_angle,
            "entry_distance": self.entry_distance,
            "X": None if self.X is None else list(self.X),
            "Theta": self.Theta,
            "effective_X": list(self.effective_X),
            "effective_Theta": list(self.effective_Theta),
            "regime": self.diagnostics,
            "regime_flagged": self.any_flagged,
        }


def theory_predict(params: GoRegimeParams, X=None, Theta: float | None = None,
                   entry_distance: float | None = None) -> TheoryPrediction:
    """Scattering lengths, decoherence scales and effective CINT scales.

    ``X`` is a pair of sensor thresholds (one per harmonic) or a scalar used
    for both; ``entry_distance`` is the ray length from the medium entry point
    to the scatterer (defaults to the propagation distance).
    """
    k, ell, L = params.k, params.correlation_length, params.distance
    ls = tuple(scattering_length(params.sigma, ell, j * k) for j in (1, 2))
    xd = tuple(decoherence_length(ell, s, L) for s in ls)
    D = L if entry_distance is None else float(entry_distance)
    theta_d = xd[0] / D
    if X is not None and np.isscalar(X):
        X = (float(X), float(X))
    eff = [effective_scales(None if X is None else X[j - 1], Theta, xd[j - 1], theta_d, j) for j in (1, 2)]
    return TheoryPrediction(
        params, ls, xd, theta_d, D,
        None if X is None else tuple(X), Theta,
        (eff[0][0], eff[1][0]), (eff[0][1], eff[1][1]),
        regime_diagnostics(params),
    )


def predicted_cint_profile(prediction: TheoryPrediction, X, Theta, harmonic: int,
                           cross_range, range_offset=0.0) -> np.ndarray:
    """Normalised Gaussian envelope of the expected CINT image around the scatterer.

    ``cross_range`` is the offset along the array, ``range_offset`` the offset
    orthogonal to the cone axis (the range direction when the axis is
    parallel to the array).
    """
    if harmonic not in (1, 2):
        raise ValueError(f"harmonic must be 1 or 2, got {harmonic}")
    p = prediction.params
    jk = harmonic * p.k
    Xe, Te = effective_scales(X, Theta, prediction.decoherence_lengths[harmonic - 1],
                              prediction.decoherence_angle, harmonic)
    dx = np.asarray(cross_range, dtype=float)
    dz = np.asarray(range_offset, dtype=float)
    return np.exp(-0.5 * (jk * Xe * dx / p.distance) ** 2 - 0.5 * (jk * Te * dz) ** 2)


# ---------------------------------------------------------------- ray phases


def _quadrature_nodes(start: np.ndarray, end: np.ndarray, step: float):
    """Midpoints of equal sub-segments no longer than ``step``; returns (points, counts, lengths)."""
    d = end - start
    length = np.hypot(d[:, 0], d[:, 1])
    n = np.maximum(1, np.ceil(length / step - 1e-9).astype(int))
    owner = np.repeat(np.arange(len(n)), n)
    first = np.cumsum(n) - n
    local = np.arange(n.sum()) - first[owner]
    t = (local + 0.5) / n[owner]
    pts = start[owner] + t[:, None] * d[owner]
    return pts, owner, n, length


def _sample(medium: MediumRealization, pts: np.ndarray) -> np.ndarray:
    g = medium.grid
    if pts.size and not (
        pts[:, 0].min() >= g.x0 - 1e-9 * g.h and pts[:, 0].max() <= g.x1 + 1e-9 * g.h
        and pts[:, 1].min() >= g.y0 - 1e-9 * g.h and pts[:, 1].max() <= g.y1 + 1e-9 * g.h
    ):
        raise ValueError("ray leaves the sampled medium")
    coords = np.vstack([(pts[:, 1] - g.y0) / g.h, (pts[:, 0] - g.x0) / g.h])
    return ndimage.map_coordinates(medium.spline_coefficients(), coords, order=3, mode="mirror", prefilter=False)


def phases_along_rays(medium: MediumRealization, starts, ends, step: float | None = None) -> np.ndarray:
    """Vectorised :func:`phase_along_ray` over matching arrays of endpoints."""
    starts = np.asarray(starts, dtype=float).reshape(-1, 2)
    ends = np.asarray(ends, dtype=float).reshape(-1, 2)
    if starts.shape != ends.shape:
        starts, ends = np.broadcast_arrays(starts, ends)
    ell = medium.params.correlation_length
    step = ell / 8 if step is None else float(step)
    if step > ell / 8 * (1 + 1e-12):
        raise ValueError(f"quadrature step {step:g} exceeds ell/8")
    pts, owner, n, length = _quadrature_nodes(starts, ends, step)
    if medium.params.sigma == 0:
        return np.zeros(len(starts))
    vals = _sample(medium, pts)
    mean = np.bincount(owner, weights=vals, minlength=len(n)) / n
    return 0.5 * length * mean


def phase_along_ray(medium: MediumRealization, start, end, step: float | None = None) -> float:
    """Random travel-time phase between two points (composite midpoint rule, step <= ell/8)."""
    return float(phases_along_rays(medium, start, end, step)[0])


def entry_points(box: Grid, points, directions) -> np.ndarray:
    """Where the ray arriving at ``points`` along ``directions`` entered ``box``.

    Follows each ray backwards from its point until it crosses the box
    boundary. ``points`` ``(P, 2)`` and ``directions`` ``(Q, 2)`` broadcast to
    ``(P, Q, 2)``.
    """
    p = np.asarray(points, dtype=float).reshape(-1, 1, 2)
    d = np.asarray(directions, dtype=float).reshape(1, -1, 2)
    lo = np.array([box.x0, box.y0])
    hi = np.array([box.x1, box.y1])
    if np.any(p < lo - 1e-9) or np.any(p > hi + 1e-9):
        raise ValueError("ray end point lies outside the sampled medium")
    with np.errstate(divide="ignore", invalid="ignore"):
        # going backwards (-d): hits lo where d > 0, hi where d < 0
        t = np.where(d > 0, (p - lo) / d, np.where(d < 0, (p - hi) / d, np.inf))
    tmin = np.min(t, axis=-1, keepdims=True)
    return p - tmin * d


# ---------------------------------------------------------------- data


@dataclass(frozen=True)
class GoSetup:
    """Phase-screen experiment: linear array on ``y = 0`` centred at the origin, one
    scatterer at ``(0, L)``, plane waves arriving along the +x axis.

    The sampled medium spans ``x`` from ``-L`` (where illuminating rays enter)
    to just beyond the array, and extends below the array and above the
    scatterer so that every backward ray stays inside until it reaches the
    left edge.
    """

    regime: GoRegimeParams
    n_sensors: int
    n_angles: int
    mode_count: int = 4096
    net_eta1: float = 1e-3
    net_eta2: float = 1e-3

    @property
    def scatterer(self) -> np.ndarray:
        return np.array([0.0, self.regime.distance])

    def geometry(self) -> AcquisitionGeometry:
        from .acquisition import linear_array_geometry

        r = self.regime
        return linear_array_geometry(r.aperture, self.n_sensors, self.n_angles, r.cone_half_angle,
                                     0.0, r.wavelength)

    def box(self) -> Grid:
        r = self.regime
        ell = r.correlation_length
        h = ell / 4
        L = r.distance
        spread = (L + r.aperture / 2) * np.tan(r.cone_half_angle) + 2 * ell
        x0 = -L
        x1 = r.aperture / 2 + 2 * ell
        y0 = -spread
        y1 = L + spread
        return Grid(x0, y0, h, int(np.ceil((x1 - x0) / h)) + 1, int(np.ceil((y1 - y0) / h)) + 1)

    def medium(self, seed: int) -> MediumRealization:
        r = self.regime
        return gen_random_medium(self.box(), MediumParams(r.correlation_length, r.sigma, self.mode_count, seed))

    def data(self, seed: int, harmonics=(1, 2)) -> ArrayData:
        return synth_data_go(self.medium(seed), self.scatterer, self.geometry(), self.net_eta1, self.net_eta2,
                             harmonics=harmonics)

    def theory(self, X=None, Theta=None) -> TheoryPrediction:
        return theory_predict(self.regime, X, Theta)


def synth_data_go(medium: MediumRealization, scatterer, geometry: AcquisitionGeometry,
                  net_eta1: float, net_eta2: float, harmonics=(1, 2), step: float | None = None) -> ArrayData:
    """Linearised array data with phase-screen Green's functions and distorted plane waves.

    ``harmonics`` limits which matrices are filled; the other is left at zero
    (the fundamental needs one ray per sensor/direction pair for the direct
    wave and is the expensive one).
    """
    y = np.asarray(scatterer, dtype=float).reshape(2)
    k = geometry.k
    xs = geometry.sensors
    th = geometry.directions
    box = medium.grid
    nu = phases_along_rays(medium, xs, np.broadcast_to(y, xs.shape), step)
    y_entry = entry_points(box, y, th)[0]
    gam_y = phases_along_rays(medium, np.broadcast_to(y, y_entry.shape), y_entry, step)
    plane_y = th @ y
    d1 = np.zeros((geometry.n_sensors, geometry.n_angles), complex)
    d2 = np.zeros_like(d1)
    if 2 in harmonics:
        G2 = g0_2d(xs, y, 2 * k) * np.exp(2j * k * nu)
        d2 = 4 * k**2 * net_eta2 * np.outer(G2, np.exp(2j * k * (plane_y + gam_y)))
    if 1 in harmonics:
        G1 = g0_2d(xs, y, k) * np.exp(1j * k * nu)
        d1 = k**2 * net_eta1 * np.outer(G1, np.exp(1j * k * (plane_y + gam_y)))
        x_entry = entry_points(box, xs, th)
        starts = np.broadcast_to(xs[:, None, :], x_entry.shape).reshape(-1, 2)
        gam_x = phases_along_rays(medium, starts, x_entry.reshape(-1, 2), step).reshape(d1.shape)
        d1 += np.exp(1j * k * (xs @ th.T)) * (np.exp(1j * k * gam_x) - 1.0)
    return ArrayData(d1, d2, geometry, medium.params.seed, {"source": "go", "harmonics": list(harmonics)})


# ---------------------------------------------------------------- moments


def fit_gaussian_scale(offsets, correlation, floor: float = 0.15) -> float:
    """Scale ``s`` of ``exp(-offset^2 / (2 s^2))`` by least squares on ``-log C`` through the origin,
    using nonzero offsets whose correlation is above ``floor``."""
    o = np.asarray(offsets, dtype=float)
    c = np.asarray(correlation, dtype=float)
    use = (o > 0) & (c > floor) & (c < 1)
    if use.sum() < 1:
        return float("nan")
    z = -np.log(c[use])
    slope = np.sum(o[use] ** 2 * z) / np.sum(o[use] ** 4)
    return float(np.sqrt(1.0 / (2.0 * slope)))


def fit_decay_length(distances, mean_modulus, floor: float = 0.05) -> float:
    """Length ``l`` of ``A exp(-d / l)`` from a straight-line fit of the log modulus."""
    d = np.asarray(distances, dtype=float)
    m = np.asarray(mean_modulus, dtype=float)
    use = m > floor
    if use.sum() < 2:
        return float("nan")
    slope = np.polyfit(d[use], np.log(m[use]), 1)[0]
    return float(-1.0 / slope) if slope < 0 else float("inf")


@dataclass
class MomentReport:
    realizations: int
    phase_variance: dict
    mean_green: dict
    sensor_coherence: dict
    direction_coherence: dict
    direct_wave: dict

    def to_dict(self) -> dict:
        return {
            "realizations": self.realizations,
            "phase_variance": self.phase_variance,
            "mean_green": self.mean_green,
            "sensor_coherence": self.sensor_coherence,
            "direction_coherence": self.direction_coherence,
            "direct_wave": self.direct_wave,
        }

    def curves(self) -> dict[str, np.ndarray]:
        """Monte-Carlo curves as column arrays, keyed by name (for CSV export)."""
        out = {
            "mean_green": np.column_stack([self.mean_green["distances"], self.mean_green["modulus"][0],
                                           self.mean_green["modulus"][1]]),
            "sensor_coherence": np.column_stack([self.sensor_coherence["offsets"],
                                                 self.sensor_coherence["correlation"][0],
                                                 self.sensor_coherence["correlation"][1]]),
            "direction_coherence": np.column_stack([self.direction_coherence["offsets"],
                                                    self.direction_coherence["correlation"]]),
            "direct_wave": np.column_stack([self.direct_wave["offsets"], self.direct_wave["correlation"]]),
        }
        return out


def _offset_coherence(phases: np.ndarray, jk: float, max_lag: int) -> np.ndarray:
    """``|mean over realizations and index pairs of exp(i jk (p_s - p_{s+m}))|`` for lags 0..max_lag."""
    e = np.exp(1j * jk * phases)
    out = np.empty(max_lag + 1)
    for m in range(max_lag + 1):
        prod = e[:, : e.shape[1] - m] * np.conj(e[:, m:])
        out[m] = np.abs(prod.mean())
    return out


def moment_check(setup: GoSetup, seeds, n_rays: int = 8, distances=None, max_sensor_lag: int | None = None,
                 max_angle_lag: int | None = None) -> MomentReport:
    """Monte-Carlo second moments of the phase-screen waves against the closed forms.

    Estimates, over one medium realization per seed: the variance of ``nu``
    from the sensors to the scatterer, the decay of the mean Green's function
    with distance (``n_rays`` rays fanned below the scatterer), the coherence
    of the Green's function across sensor offsets for both harmonics, the
    coherence of the incoming wave at the scatterer across direction offsets,
    and the direct-wave coherence at the central sensor across direction
    offsets.
    """
    seeds = list(seeds)
    geom = setup.geometry()
    theory = setup.theory()
    r = setup.regime
    k = r.k
    y = setup.scatterer
    xs = geom.sensors
    th = geom.directions
    if distances is None:
        distances = np.linspace(2 * r.correlation_length, min(2 * theory.scattering_lengths[0], r.distance), 9)
    distances = np.asarray(distances, dtype=float)
    box = setup.box()
    # rays fan out below the scatterer, at most 30 degrees either side and never past the box edges
    reach = min(box.x1 - y[0], y[0] - box.x0)
    half = min(np.pi / 6, 0.95 * np.arcsin(min(1.0, reach / distances.max())))
    fan = np.linspace(-half, half, n_rays) - np.pi / 2
    dirs = np.column_stack([np.cos(fan), np.sin(fan)])
    targets = (y + distances[:, None, None] * dirs[None, :, :]).reshape(-1, 2)
    centre = int(np.argmin(np.abs(xs[:, 0])))

    y_entry = entry_points(box, y, th)[0]
    c_entry = entry_points(box, xs[centre], th)[0]
    nu_all = np.empty((len(seeds), len(xs)))
    green = np.empty((len(seeds), len(targets)))
    gam_y = np.empty((len(seeds), len(th)))
    gam_c = np.empty((len(seeds), len(th)))
    for i, s in enumerate(seeds):
        med = setup.medium(s)
        nu_all[i] = phases_along_rays(med, xs, np.broadcast_to(y, xs.shape))
        green[i] = phases_along_rays(med, np.broadcast_to(y, targets.shape), targets)
        gam_y[i] = phases_along_rays(med, np.broadcast_to(y, y_entry.shape), y_entry)
        gam_c[i] = phases_along_rays(med, np.broadcast_to(xs[centre], c_entry.shape), c_entry)

    ray_len = np.hypot(xs[:, 0] - y[0], xs[:, 1] - y[1])
    var_mc = float(np.mean(nu_all**2))
    var_th = float(np.mean(phase_variance(r.sigma, r.correlation_length, ray_len)))
    phase_var = {"monte_carlo": var_mc, "theory": var_th, "relative_error": abs(var_mc - var_th) / var_th}

    mods, fits = [], []
    for j in (1, 2):
        e = np.exp(1j * j * k * green).mean(axis=0).reshape(len(distances), n_rays)
        # phase-only average per distance; the free-space factor cancels in G / G0
        m = np.abs(e).mean(axis=1)
        mods.append(m)
        fits.append(fit_decay_length(distances, m))
    mean_green = {
        "distances": distances.tolist(),
        "modulus": [m.tolist() for m in mods],
        "fitted": fits,
        "fan_half_angle": float(half),
        "theory": list(theory.scattering_lengths),
        "relative_error": [abs(f - t) / t for f, t in zip(fits, theory.scattering_lengths)],
    }

    dx = float(np.median(np.diff(xs[:, 0]))) if len(xs) > 1 else 1.0
    if max_sensor_lag is None:
        max_sensor_lag = min(len(xs) - 1, int(np.ceil(3 * theory.decoherence_lengths[0] / dx)))
    lags = np.arange(max_sensor_lag + 1)
    corr = [_offset_coherence(nu_all, j * k, max_sensor_lag) for j in (1, 2)]
    xfit = [fit_gaussian_scale(lags * dx, c) for c in corr]
    sensor = {
        "offsets": (lags * dx).tolist(),
        "correlation": [c.tolist() for c in corr],
        "fitted": xfit,
        "theory": list(theory.decoherence_lengths),
        "relative_error": [abs(f - t) / t for f, t in zip(xfit, theory.decoherence_lengths)],
        "fitted_ratio": xfit[1] / xfit[0],
    }

    da = float(np.median(np.diff(geom.angles))) if geom.n_angles > 1 else 1.0
    if max_angle_lag is None:
        max_angle_lag = min(geom.n_angles - 1, int(np.ceil(3 * theory.decoherence_angle / da)))
    alags = np.arange(max_angle_lag + 1)
    dcorr = _offset_coherence(gam_y, k, max_angle_lag)
    tfit = fit_gaussian_scale(alags * da, dcorr)
    entry_len = float(np.mean(np.hypot(*(y_entry - y).T)))
    theta_pred = decoherence_length(r.correlation_length, theory.scattering_lengths[0], entry_len) / entry_len
    direction = {
        "offsets": (alags * da).tolist(),
        "correlation": dcorr.tolist(),
        "fitted": tfit,
        "theory": theory.decoherence_angle,
        "theory_entry_length": theta_pred,
        "relative_error": abs(tfit - theory.decoherence_angle) / theory.decoherence_angle,
    }

    ccorr = _offset_coherence(gam_c, k, max_angle_lag)
    c_len = float(np.mean(np.hypot(*(c_entry - xs[centre]).T)))
    c_pred = decoherence_length(r.correlation_length, theory.scattering_lengths[0], c_len) / c_len
    cfit = fit_gaussian_scale(alags * da, ccorr)
    direct = {
        "offsets": (alags * da).tolist(),
        "correlation": ccorr.tolist(),
        "fitted": cfit,
        "theory": c_pred,
        "relative_error": abs(cfit - c_pred) / c_pred,
    }
    return MomentReport(len(seeds), phase_var, mean_green, sensor, direction, direct)
