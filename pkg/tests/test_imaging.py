import numpy as np
import pytest

from oracles import cint_all_pairs, sinc_fwhm
from shgcint.acquisition import ArrayData, linear_array_geometry
from shgcint.grid import Grid
from shgcint.imaging import (
    CintParams, ImageGrid, SearchGrid, cint, cint_complex, local_maxima, migrate, migration_field, pair_window,
    peak_metrics,
)
from shgcint.waves import g0_2d


def random_data(n_sensors=5, n_angles=3, aperture=4.0, seed=0, cone=np.pi / 4):
    geo = linear_array_geometry(aperture=aperture, n_sensors=n_sensors, n_angles=n_angles, cone_half_angle=cone)
    rng = np.random.default_rng(seed)
    d = rng.standard_normal((2, n_sensors, n_angles)) + 1j * rng.standard_normal((2, n_sensors, n_angles))
    return ArrayData(d[0], d[1], geo)


def point_data(y, aperture=10.0, n_sensors=41, n_angles=9, cone=np.pi / 4):
    """Manufactured data ``G0(x_s, y; jk) exp(i jk theta_q . y)`` at both harmonics."""
    geo = linear_array_geometry(aperture=aperture, n_sensors=n_sensors, n_angles=n_angles, cone_half_angle=cone)
    ds = []
    for j in (1, 2):
        jk = j * geo.k
        ds.append(np.outer(g0_2d(geo.sensors, y, jk), np.ones(n_angles)) * np.exp(1j * jk * geo.directions @ y)[None, :])
    return ArrayData(ds[0], ds[1], geo)


TOY_SEARCH = SearchGrid(Grid(-1.0, 2.0, 0.5, 5, 3))


def test_zero_data_gives_zero_images():
    geo = linear_array_geometry(aperture=4.0, n_sensors=5, n_angles=3)
    data = ArrayData(np.zeros((5, 3)), np.zeros((5, 3)), geo)
    for img in (migrate(data, TOY_SEARCH), cint(data, TOY_SEARCH, CintParams(1.0, 0.3))):
        assert not img.values.any() and img.norm == 0.0


@pytest.mark.parametrize("window", ["gaussian", "hard"])
@pytest.mark.parametrize("harmonic", [1, 2])
def test_cint_matches_all_pairs_oracle(window, harmonic):
    data = random_data(seed=harmonic)
    g = data.geometry
    search = TOY_SEARCH.at(harmonic)
    params = CintParams(1.2, 0.5, window, 2.0)
    got = cint_complex(data, search, params).ravel()
    ref = cint_all_pairs(data.harmonic(harmonic), g.sensors, g.angles, g.directions, search.points(),
                         harmonic * g.k, params.X, params.Theta, window, params.cutoff)
    assert np.max(np.abs(got - ref)) <= 1e-12 * np.max(np.abs(ref))


def test_pair_window_prunes_and_is_symmetric():
    W = pair_window(np.array([0.0, 3.0, 1.0, 2.5]), 1.0, 1.0, "hard").toarray()
    assert np.array_equal(W, W.T)
    expect = np.array([[1, 0, 1, 0], [0, 1, 0, 1], [1, 0, 1, 0], [0, 1, 0, 1]], float)
    assert np.array_equal(W, expect)
    G = pair_window(np.array([0.0, 1.0]), 2.0, 3.0, "gaussian").toarray()
    assert np.isclose(G[0, 1], np.exp(-0.125))


def test_cint_with_unbounded_window_is_squared_migration():
    data = random_data(seed=3)
    for j in (1, 2):
        search = TOY_SEARCH.at(j)
        mig = migration_field(data, search)
        c = cint_complex(data, search, CintParams(1e3, 1e3, "hard"))
        assert np.max(np.abs(c - np.abs(mig) ** 2)) <= 1e-10 * np.max(np.abs(mig) ** 2)


def test_migration_is_linear_before_modulus():
    data = random_data(seed=4)
    alpha = 2.5 - 1.5j
    scaled = ArrayData(alpha * data.d1, alpha * data.d2, data.geometry)
    for j in (1, 2):
        a = migration_field(data, TOY_SEARCH.at(j))
        b = migrate(scaled, TOY_SEARCH.at(j)).complex_field
        assert np.max(np.abs(b - alpha * a)) <= 1e-12 * np.max(np.abs(b))


def test_cint_is_quadratic_in_data():
    data = random_data(seed=5)
    alpha = 0.3 + 2j
    scaled = ArrayData(alpha * data.d1, alpha * data.d2, data.geometry)
    p = CintParams(1.0, 0.4)
    a = cint(data, TOY_SEARCH, p).raw
    b = cint(scaled, TOY_SEARCH, p).raw
    assert np.max(np.abs(b - abs(alpha) ** 2 * a)) <= 1e-12 * np.max(np.abs(b))


@pytest.mark.parametrize("seed", range(4))
def test_cint_real_and_positive_with_gaussian_window(seed):
    data = random_data(n_sensors=21, n_angles=7, aperture=10.0, seed=seed)
    search = SearchGrid(Grid(-2, 4, 0.25, 17, 9), 2)
    img = cint(data, search, CintParams(0.8, 0.3))
    assert img.params["imag_ratio"] <= 1e-10
    assert img.raw.min() >= -1e-8 * img.raw.max()


def test_cutoff_three_to_five_changes_image_little():
    data = point_data(np.array([0.4, 8.0]), n_sensors=41, n_angles=9)
    search = SearchGrid.around((0.4, 8.0), 2.0, 0.2, 1)
    a = cint(data, search, CintParams(2.0, 0.3, cutoff=3.0)).raw
    b = cint(data, search, CintParams(2.0, 0.3, cutoff=5.0)).raw
    assert np.max(np.abs(a - b)) / np.max(np.abs(b)) < 0.01


def test_migration_peaks_exactly_on_manufactured_source():
    y = np.array([0.5, 8.0])
    data = point_data(y)
    for j in (1, 2):
        img = migrate(data, SearchGrid.around(y, 3.0, 0.1, j))
        r, c = np.unravel_index(np.argmax(img.values), img.values.shape)
        assert np.allclose(img.search.grid.node(r, c), y, atol=1e-12)


def test_migration_cross_range_profile_matches_aperture_factor():
    # narrow cone and long range: the cross-range profile is the aperture sinc
    L, a = 60.0, 10.0
    y = np.array([0.0, L])
    data = point_data(y, aperture=a, n_sensors=81, n_angles=3, cone=0.01)
    for j in (1, 2):
        search = SearchGrid(Grid(-4.0, L, 0.05, 161, 1), j)
        img = migrate(data, search)
        x = search.grid.x
        jk = j * data.geometry.k
        model = np.abs(np.sinc(jk * a * x / (2 * L) / np.pi))
        lobe = np.abs(x) < 2 * np.pi * L / (jk * a)
        assert np.max(np.abs(img.values[0, lobe] - model[lobe])) < 0.05


def test_search_points_on_sensors_rejected():
    data = random_data()
    with pytest.raises(ValueError, match="coincides"):
        migrate(data, SearchGrid(Grid(-2.0, 0.0, 1.0, 3, 2)))


def test_parameter_validation():
    with pytest.raises(ValueError):
        CintParams(0.0, 1.0)
    with pytest.raises(ValueError):
        CintParams(1.0, 1.0, "box")
    with pytest.raises(ValueError):
        CintParams(1.0, 1.0, cutoff=0)
    with pytest.raises(ValueError):
        SearchGrid(Grid(0, 1, 1, 2, 2), 3)
    s = SearchGrid.around((1.0, 5.0), 2.0, 0.5)
    assert s.grid.nx == 5 and np.allclose(s.grid.node(2, 2), [1.0, 5.0])


def _image(values, grid):
    return ImageGrid(np.asarray(values, float), SearchGrid(grid), float(np.max(values)), "test")


def test_peak_metrics_delta_image():
    g = Grid(-2, 3, 0.1, 41, 41)
    v = np.zeros(g.shape)
    v[g.nearest_index((0.3, 4.0))] = 1.0
    m = peak_metrics(_image(v, g), [(0.3, 4.0)])[0]
    assert m["localization_error"] == pytest.approx(0.0, abs=1e-12)


def test_peak_metrics_flat_image():
    g = Grid(-5, 3, 0.25, 41, 41)
    m = peak_metrics(_image(np.ones(g.shape), g), [(0.0, 8.0)])[0]
    assert m["peak_to_background"] == pytest.approx(1.0)


def test_peak_metrics_sinc_fwhm():
    L, a, jk = 20.0, 10.0, 2 * np.pi
    g = Grid(-6, 4, 0.02, 601, 11)
    X, Y = g.mesh()
    v = np.sinc(jk * a * X / (2 * L) / np.pi) ** 2 * np.exp(-((Y - 4.1) ** 2))
    m = peak_metrics(_image(v, g), [(0.0, 4.1)])[0]
    ref = sinc_fwhm(jk, a, L)
    assert abs(ref - 0.886 * L / a) < 0.01 * ref
    assert abs(m["fwhm_x"] - ref) <= 0.1 * ref
    assert m["localization_error"] == pytest.approx(0.0, abs=1e-9)


def test_local_maxima_threshold():
    v = np.zeros((5, 5))
    v[1, 1], v[3, 3] = 1.0, 0.4
    assert local_maxima(v, 0.5).tolist() == [[1, 1]]
    assert len(local_maxima(v, 0.3)) == 2
    assert len(local_maxima(np.zeros((3, 3)))) == 0


def test_image_metadata():
    data = random_data()
    img = cint(data, TOY_SEARCH.at(2), CintParams(1.0, 0.5))
    meta = img.metadata()
    assert meta["method"] == "cint" and meta["harmonic"] == 2 and meta["params"]["X"] == 1.0
    assert img.values.max() == pytest.approx(1.0)
    assert np.allclose(img.raw, cint_complex(data, TOY_SEARCH.at(2), CintParams(1.0, 0.5)).real)
