import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from oracles import ray_integral_exact
from shgcint.grid import Grid
from shgcint.medium import FOUR_PI, MediumParams, MediumRealization, gen_random_medium, random_modes
from shgcint.gomodel import (
    GoRegimeParams, GoSetup, decoherence_length, effective_scales, entry_points, fit_decay_length,
    fit_gaussian_scale, moment_check, phase_along_ray, phase_variance, phases_along_rays, predicted_cint_profile,
    scattering_length, synth_data_go, theory_predict,
)
from shgcint.waves import g0_2d

ELL = 10.0
SIGMA = 0.01271555017374342
BOX = Grid(-50, -50, ELL / 4, 81, 81)


def regime(**kw):
    base = dict(wavelength=1.0, correlation_length=ELL, sigma=SIGMA, distance=400.0, aperture=100.0,
                cone_half_angle=0.125)
    base.update(kw)
    return GoRegimeParams(**base)


@pytest.fixture(scope="module")
def medium():
    return gen_random_medium(BOX, MediumParams(ELL, SIGMA, 4096, seed=11))


def test_constant_field_gives_linear_phase():
    c = 0.7
    m = MediumRealization(BOX, np.full(BOX.shape, c * SIGMA / FOUR_PI), MediumParams(ELL, SIGMA))
    a, b = np.array([-30.0, 5.0]), np.array([20.0, -17.0])
    assert phase_along_ray(m, a, b) == pytest.approx(SIGMA * np.hypot(*(b - a)) * c / 2, rel=1e-12)


def test_zero_sigma_gives_zero_phase():
    m = gen_random_medium(BOX, MediumParams(ELL, 0.0))
    assert phase_along_ray(m, (0, 0), (30, 30)) == 0.0


@pytest.mark.parametrize("seed", range(3))
def test_phase_matches_exact_line_integral(seed):
    p = MediumParams(ELL, SIGMA, 4096, seed)
    m = gen_random_medium(BOX, p)
    kappa, phi = random_modes(p)
    for a, b in (((-40, -30), (35, 40)), ((0, 0), (30, -10)), ((-45, 10), (45, 12))):
        exact = ray_integral_exact(kappa, phi, a, b, SIGMA)
        sd = np.sqrt(phase_variance(SIGMA, ELL, np.hypot(b[0] - a[0], b[1] - a[1])))
        assert abs(phase_along_ray(m, a, b) - exact) <= 2e-3 * sd


def test_phase_symmetric_and_linear(medium):
    a, b = (-33.0, 12.0), (41.0, -20.0)
    assert phase_along_ray(medium, a, b) == pytest.approx(phase_along_ray(medium, b, a), rel=1e-12)
    doubled = gen_random_medium(BOX, MediumParams(ELL, 2 * SIGMA, 4096, seed=11))
    assert phase_along_ray(doubled, a, b) == pytest.approx(2 * phase_along_ray(medium, a, b), rel=1e-12)


def test_quadrature_halving(medium):
    a, b = (-40.0, -30.0), (35.0, 40.0)
    coarse = phase_along_ray(medium, a, b)
    fine = phase_along_ray(medium, a, b, step=ELL / 16)
    assert abs(coarse - fine) <= 1e-3 * abs(fine)


def test_ray_argument_checks(medium):
    with pytest.raises(ValueError, match="exceeds"):
        phase_along_ray(medium, (0, 0), (10, 0), step=ELL / 4)
    with pytest.raises(ValueError, match="leaves"):
        phase_along_ray(medium, (0, 0), (200, 0))


def test_vectorised_phases_match_single_rays(medium):
    starts = np.array([[0.0, 0.0], [-10.0, 5.0], [3.0, -40.0]])
    ends = np.array([[30.0, 2.0], [20.0, 25.0], [3.0, 40.0]])
    many = phases_along_rays(medium, starts, ends)
    assert np.allclose(many, [phase_along_ray(medium, s, e) for s, e in zip(starts, ends)], rtol=1e-13)


def test_parallel_ray_correlation_against_quadrature():
    box = Grid(-5, -25, ELL / 4, 91, 21)
    length = 200.0
    offsets = (ELL, 4 * ELL)
    samples = {d: [] for d in offsets}
    base = []
    for seed in range(300):
        m = gen_random_medium(box, MediumParams(ELL, SIGMA, 1024, seed))
        nu0 = phase_along_ray(m, (0, -15.0), (length, -15.0))
        base.append(nu0)
        for d in offsets:
            samples[d].append(phase_along_ray(m, (0, -15.0 + d), (length, -15.0 + d)))
    base = np.array(base)
    var0 = SIGMA**2 / 4 * 2 * quad(lambda u: (length - u) * np.exp(-u**2 / (2 * ELL**2)), 0, length)[0]
    for d in offsets:
        other = np.array(samples[d])
        prod = base * other
        ref = var0 * np.exp(-d**2 / (2 * ELL**2))
        se = prod.std(ddof=1) / np.sqrt(len(prod))
        assert abs(prod.mean() - ref) <= 3 * se


def test_entry_points_follow_rays_back_to_the_edge():
    box = Grid(-10, -5, 1.0, 21, 21)
    e = entry_points(box, [[0.0, 0.0]], [[1.0, 0.0], [np.cos(0.3), np.sin(0.3)]])
    assert e.shape == (1, 2, 2)
    assert np.allclose(e[0, 0], [-10.0, 0.0])
    assert np.allclose(e[0, 1], [-10.0, -10 * np.tan(0.3)])
    steep = entry_points(box, [[0.0, 0.0]], [[0.0, 1.0]])
    assert np.allclose(steep[0, 0], [0.0, -5.0])
    with pytest.raises(ValueError):
        entry_points(box, [[50.0, 0.0]], [[1.0, 0.0]])


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-4, 0.1), st.floats(0.5, 100), st.floats(10, 1e4), st.floats(0.1, 10))
def test_forced_ratios(sigma, ell, L, lam):
    p = GoRegimeParams(lam, ell, sigma, L, 1.0, 0.1)
    t = theory_predict(p)
    assert t.scattering_lengths[1] / t.scattering_lengths[0] == pytest.approx(0.25, rel=1e-14)
    assert t.decoherence_lengths[1] / t.decoherence_lengths[0] == pytest.approx(0.5, rel=1e-14)


def test_scattering_length_formula_value():
    ls = scattering_length(2e-3, 20.0, 2 * np.pi)
    assert ls == pytest.approx(8 / (np.sqrt(2 * np.pi) * 4e-6 * (2 * np.pi) ** 2 * 20))
    assert ls == pytest.approx(1010.4, rel=1e-3)


def test_reference_regime_values():
    t = theory_predict(regime())
    assert t.scattering_lengths[0] == pytest.approx(50.0, rel=1e-12)
    assert t.decoherence_lengths[0] == pytest.approx(10 * np.sqrt(3 * 50 / 800), rel=1e-12)
    assert t.decoherence_angle == pytest.approx(t.decoherence_lengths[0] / 400)
    d = t.to_dict()
    assert d["scattering_length_ratio"] == pytest.approx(0.25)
    assert d["decoherence_length_ratio"] == pytest.approx(0.5)


def test_regime_flags_for_pde_scale():
    t = theory_predict(GoRegimeParams(1.0, 0.3, 0.01 * FOUR_PI, 15.0, 20.0, np.pi / 4))
    assert t.any_flagged
    assert t.diagnostics["sqrt(wavelength*L) < ell"]["flagged"]


def test_effective_scale_combination():
    Xe, Te = effective_scales(None, None, 3.0, 0.01, 2)
    assert Xe == 3.0 and Te == pytest.approx(0.005)
    Xe, Te = effective_scales(1e9, 1e9, 3.0, 0.01, 1)
    assert Xe == pytest.approx(3.0) and Te == pytest.approx(0.01)
    Xe, _ = effective_scales(4.0, 1.0, 3.0, 0.01, 1)
    assert Xe == pytest.approx(1 / np.sqrt(1 / 16 + 1 / 9))


def test_predicted_profile():
    t = theory_predict(regime())
    X, Th = 2.0, 0.005
    for j in (1, 2):
        assert predicted_cint_profile(t, X, Th, j, 0.0) == 1.0
        Xe, _ = effective_scales(X, Th, t.decoherence_lengths[j - 1], t.decoherence_angle, j)
        half = 400 * np.sqrt(2 * np.log(2)) / (j * 2 * np.pi * Xe)
        assert predicted_cint_profile(t, X, Th, j, half) == pytest.approx(0.5, rel=1e-12)
    with pytest.raises(ValueError):
        predicted_cint_profile(t, X, Th, 3, 0.0)


def test_regime_param_validation():
    with pytest.raises(ValueError):
        regime(sigma=-1e-3)
    with pytest.raises(ValueError):
        regime(distance=0.0)
    t = theory_predict(regime(sigma=0.0))
    assert t.scattering_lengths == (np.inf, np.inf) and t.decoherence_lengths == (np.inf, np.inf)


def test_fit_helpers_recover_exact_curves():
    o = np.linspace(0, 10, 21)
    assert fit_gaussian_scale(o, np.exp(-o**2 / (2 * 3.0**2))) == pytest.approx(3.0, rel=1e-12)
    d = np.linspace(10, 100, 10)
    assert fit_decay_length(d, 0.9 * np.exp(-d / 40.0)) == pytest.approx(40.0, rel=1e-12)
    assert np.isnan(fit_gaussian_scale([0.0], [1.0]))


def _small_setup():
    return GoSetup(regime(), n_sensors=21, n_angles=9)


def test_go_data_without_fluctuations():
    s = _small_setup()
    geo = s.geometry()
    m = gen_random_medium(s.box(), MediumParams(ELL, 0.0))
    data = synth_data_go(m, s.scatterer, geo, 2e-3, 1e-3)
    k = geo.k
    y = s.scatterer
    ph = geo.directions @ y
    assert np.allclose(data.d2, 4 * k**2 * 1e-3 * np.outer(g0_2d(geo.sensors, y, 2 * k), np.exp(2j * k * ph)),
                       rtol=1e-13, atol=0)
    assert np.allclose(data.d1, k**2 * 2e-3 * np.outer(g0_2d(geo.sensors, y, k), np.exp(1j * k * ph)),
                       rtol=1e-13, atol=0)


def test_second_harmonic_modulus_is_realization_independent():
    s = _small_setup()
    a, b = s.data(1), s.data(2)
    assert np.allclose(np.abs(a.d2), np.abs(b.d2), rtol=1e-12)
    assert not np.allclose(a.d2, b.d2)
    assert a.diagnostics["source"] == "go"


def test_go_data_is_deterministic():
    s = _small_setup()
    assert s.data(4).d1.tobytes() == s.data(4).d1.tobytes()


def test_harmonic_selection_leaves_other_matrix_empty():
    d = _small_setup().data(1, harmonics=(2,))
    assert not d.d1.any() and d.d2.any()


def test_moment_check_zero_offset_and_report_shape():
    s = GoSetup(regime(aperture=40.0, cone_half_angle=0.05), n_sensors=41, n_angles=11)
    rep = moment_check(s, range(5), n_rays=4)
    assert rep.sensor_coherence["correlation"][0][0] == pytest.approx(1.0)
    assert rep.direction_coherence["correlation"][0] == pytest.approx(1.0)
    assert set(rep.curves()) == {"mean_green", "sensor_coherence", "direction_coherence", "direct_wave"}
    assert rep.to_dict()["realizations"] == 5


@pytest.mark.slow
def test_mean_green_decay_for_listed_parameters():
    # ell = 20, sigma = 2e-3, L = 500: decay of |E[G/G0]| against the closed-form scattering length
    r = GoRegimeParams(1.0, 20.0, 2e-3, 500.0, 40.0, 0.05)
    s = GoSetup(r, n_sensors=5, n_angles=3, mode_count=1024)
    rep = moment_check(s, range(300), n_rays=8, distances=np.linspace(50, 500, 10))
    assert rep.mean_green["relative_error"][0] <= 0.20


def test_decoherence_length_formula():
    assert decoherence_length(10.0, 50.0, 400.0) == pytest.approx(10 * np.sqrt(150 / 800))
