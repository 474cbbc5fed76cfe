import numpy as np
import pytest

from shgcint.acquisition import ArrayData, linear_array_geometry
from shgcint.gomodel import GoRegimeParams, GoSetup, synth_data_go
from shgcint.grid import Grid
from shgcint.imaging import CintParams, ImageGrid, SearchGrid
from shgcint.medium import MediumParams, gen_random_medium
from shgcint.stats import (
    EnsembleError, EnsembleSpec, artifact_scan, bootstrap, correlation_matrix, distance_to_array, pearson,
    run_ensemble, snr, standard_methods, window_mask,
)

ELL = 10.0
SIGMA = 0.01271555017374342


def small_setup(sigma=SIGMA, aperture=60.0):
    L = 400.0
    r = GoRegimeParams(1.0, ELL, sigma, L, aperture, aperture / (2 * L))
    return GoSetup(r, n_sensors=int(aperture / 1.05) + 1, n_angles=31, mode_count=1024)


def ensemble_inputs(setup):
    t = setup.theory()
    search = SearchGrid.around(setup.scatterer, 16.0, 1.0, 2)
    params = CintParams(t.decoherence_lengths[1], t.decoherence_angle / 2)
    return search, standard_methods(search, params)


def test_snr_definition():
    assert snr([1.0, 3.0]) == pytest.approx(2.0)
    assert snr([1 + 1j, 1 - 1j]) == pytest.approx(1.0)
    assert snr([2.0, 2.0]) == np.inf
    assert np.isnan(snr([0.0, 0.0]))


def test_bootstrap_is_seeded_and_brackets_estimate():
    z = np.random.default_rng(0).normal(3.0, 1.0, 50)
    a = bootstrap(z, seed=1)
    assert a == bootstrap(z, seed=1)
    assert a["low"] <= a["estimate"] <= a["high"]
    assert 0 < a["se"] < a["estimate"]
    assert bootstrap(z, np.mean, seed=1)["se"] == pytest.approx(1 / np.sqrt(50), rel=0.3)


def test_pearson_and_matrix():
    a = np.arange(10.0)
    assert pearson(a, a) == 1.0
    assert pearson(a, -a) == pytest.approx(-1.0)
    assert np.isnan(pearson(np.ones(3), np.arange(3.0)))
    rng = np.random.default_rng(2)
    imgs = [rng.standard_normal(20) for _ in range(4)]
    C = correlation_matrix(imgs)
    assert np.array_equal(C, C.T) and np.all(np.diag(C) == 1.0)


def test_window_mask_side():
    g = Grid(-5, 0, 0.5, 21, 21)
    m = window_mask(g, (0.0, 5.0), 4.0)
    assert m.sum() == 9 * 9


def test_spec_validation():
    with pytest.raises(ValueError):
        EnsembleSpec((1,))
    with pytest.raises(ValueError):
        EnsembleSpec((1, 1))
    with pytest.raises(ValueError):
        EnsembleSpec((1, 2), "fdtd")
    assert EnsembleSpec.consecutive(3, 5).seeds == (5, 6, 7)


def test_zero_fluctuation_ensemble_is_perfectly_stable():
    s = small_setup(sigma=0.0)
    search, methods = ensemble_inputs(s)
    rep = run_ensemble(EnsembleSpec((1, 2, 3)), lambda seed: s.data(seed, (2,)), methods, search, [s.scatterer])
    for st in rep.methods.values():
        assert not st.std.any()
        assert np.all(st.correlation == 1.0) and st.mean_correlation == 1.0
        assert st.snr == np.inf


def test_report_is_deterministic_and_serialisable():
    s = small_setup()
    search, methods = ensemble_inputs(s)
    spec = EnsembleSpec((3, 4, 5))
    a = run_ensemble(spec, lambda seed: s.data(seed, (2,)), methods, search, [s.scatterer]).to_dict()
    b = run_ensemble(spec, lambda seed: s.data(seed, (2,)), methods, search, [s.scatterer], threads=2).to_dict()
    assert a == b
    assert set(a["methods"]) == {"migration", "cint"}
    assert a["realizations"] == 3 and a["harmonic"] == 2


def test_failing_realization_is_reported():
    s = small_setup()
    search, methods = ensemble_inputs(s)

    def make(seed):
        if seed == 8:
            raise RuntimeError("boom")
        return s.data(seed, (2,))

    with pytest.raises(EnsembleError) as info:
        run_ensemble(EnsembleSpec((7, 8)), make, methods, search, [s.scatterer])
    assert info.value.seed == 8


@pytest.mark.slow
def test_snr_estimate_stable_under_doubling():
    s = small_setup()
    search, methods = ensemble_inputs(s)
    make = lambda seed: s.data(seed, (2,))  # noqa: E731
    half = run_ensemble(EnsembleSpec.consecutive(30, 100), make, {"cint": methods["cint"]}, search, [s.scatterer])
    full = run_ensemble(EnsembleSpec.consecutive(60, 100), make, {"cint": methods["cint"]}, search, [s.scatterer])
    a, b = half.methods["cint"], full.methods["cint"]
    assert abs(a.snr - b.snr) < 2 * max(a.snr_bootstrap["se"], b.snr_bootstrap["se"])


def test_distance_to_array_segment():
    geo = linear_array_geometry(aperture=10.0, n_sensors=11, n_angles=1)
    pts = np.array([[0.0, 2.0], [8.0, 0.0], [5.0, -3.0]])
    assert np.allclose(distance_to_array(pts, geo), [2.0, 3.0, 3.0])


def _img(values, grid):
    return ImageGrid(np.asarray(values, float), SearchGrid(grid), 1.0, "test")


def test_artifact_scan_zero_image():
    geo = linear_array_geometry(aperture=10.0, n_sensors=11, n_angles=1)
    g = Grid(-5, 0.5, 0.5, 21, 21)
    res = artifact_scan(_img(np.zeros(g.shape), g), geo, [(0.0, 8.0)])
    assert res.no_peak and res.ratio is None and res.to_dict()["no_peak"]


def test_artifact_scan_ratio():
    geo = linear_array_geometry(aperture=10.0, n_sensors=11, n_angles=1)
    g = Grid(-5, 0.5, 0.5, 21, 21)
    X, Y = g.mesh()
    v = np.exp(-((X) ** 2 + (Y - 8) ** 2)) + 0.3 * np.exp(-((X - 2) ** 2 + (Y - 1) ** 2))
    res = artifact_scan(_img(v, g), geo, [(0.0, 8.0)])
    assert res.ratio == pytest.approx(0.3, rel=0.05)
    assert res.global_peak == [0.0, 8.0] and res.peak_to_truth == 0.0
    v2 = v + 2 * np.exp(-((X + 1) ** 2 + (Y - 1.5) ** 2))
    res2 = artifact_scan(_img(v2, g), geo, [(0.0, 8.0)])
    assert res2.ratio > 1 and res2.peak_to_truth > 5


def test_go_data_with_custom_medium_round_trip():
    s = small_setup()
    m = gen_random_medium(s.box(), MediumParams(ELL, SIGMA, 1024, 9))
    d = synth_data_go(m, s.scatterer, s.geometry(), 1e-3, 1e-3, harmonics=(2,))
    assert isinstance(d, ArrayData) and d.seed == 9
