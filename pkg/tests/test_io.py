import numpy as np
import pytest

from shgcint.grid import Grid
from shgcint.io import (
    read_grid_csv, read_grid_raw, read_json, read_pgm, to_pgm16, write_grid_csv, write_grid_raw, write_json,
    write_pgm,
)


def test_grid_basics():
    g = Grid.square(2.0, 0.5)
    assert g.shape == (5, 5) and g.x0 == -1.0 and g.x1 == 1.0 and g.y1 == 2.0
    assert g.nearest_index((0.2, 1.3)) == (3, 2)
    assert np.allclose(g.node(3, 2), [0.0, 1.5])
    assert g.padded(2).nx == 9
    assert Grid.from_dict(g.to_dict()) == g
    with pytest.raises(ValueError):
        g.nearest_index((5.0, 0.0))
    with pytest.raises(ValueError):
        Grid.square(1.0, 0.3)
    with pytest.raises(ValueError):
        Grid(0, 0, 0.0, 2, 2)


def test_csv_round_trip_real_and_complex(tmp_path):
    g = Grid(0.5, -1.0, 0.1, 4, 3)
    v = np.arange(12.0).reshape(3, 4) / 7
    g2, v2 = read_grid_csv(write_grid_csv(tmp_path / "a.csv", g, v))
    assert g2 == g and np.array_equal(v2, v)
    c = v + 1j * v[::-1]
    _, c2 = read_grid_csv(write_grid_csv(tmp_path / "b.csv", g, c))
    assert np.array_equal(c2, c)
    with pytest.raises(ValueError):
        write_grid_csv(tmp_path / "c.csv", g, v.T)


def test_raw_round_trip(tmp_path):
    g = Grid(0, 0, 0.25, 3, 2)
    v = (np.arange(6) + 0.5j).reshape(2, 3)
    write_grid_raw(tmp_path / "f", g, v, {"note": "x"})
    g2, v2, meta = read_grid_raw(tmp_path / "f")
    assert g2 == g and np.array_equal(v2, v) and meta["note"] == "x" and meta["complex"]
    assert (tmp_path / "f.f64").stat().st_size == 6 * 16


def test_pgm_encoding(tmp_path):
    v = np.array([[0.0, 1.0], [0.5, 0.25]])
    raw = to_pgm16(v)
    assert raw.startswith(b"P5\n2 2\n65535\n")
    back = read_pgm(write_pgm(tmp_path / "a.pgm", v))
    assert back.tolist() == [[0, 65535], [32768, 16384]]
    assert not read_pgm(write_pgm(tmp_path / "b.pgm", np.zeros((3, 3)))).any()
    assert np.all(read_pgm(write_pgm(tmp_path / "b.pgm", np.full((3, 3), 0.7))) == 65535)
    assert read_pgm(write_pgm(tmp_path / "c.pgm", np.array([[-1.0, 1.0]]))).tolist() == [[0, 65535]]


def test_json_handles_numpy_and_special_values(tmp_path):
    write_json(tmp_path / "a.json", {"a": np.arange(2), "b": np.float64(np.inf), "c": 1 + 2j, "d": np.nan})
    assert read_json(tmp_path / "a.json") == {"a": [0, 1], "b": "inf", "c": [1.0, 2.0], "d": None}
