import json

import numpy as np
import pytest

from respsim import tables as tb
from respsim.continuum import GreensTable


def _table(M=5, K=4, seed=0):
    rng = np.random.default_rng(seed)
    return GreensTable(0.1, rng.normal(size=(M, K)) * 1e-3, np.abs(rng.normal(size=(M, K))) * 1e-5, {"source": "test"})


def test_round_trip_is_bit_exact(tmp_path):
    t = _table()
    path = tmp_path / "g.csv"
    tb.write_table(t, path)
    back = tb.read_table(path)
    assert back.dt == t.dt
    assert np.array_equal(back.values, t.values) and np.array_equal(back.errors, t.errors)
    assert back.metadata == {"source": "test"}
    assert path.read_text().splitlines()[0] == "t_m,t_int,G,sigma_G"


def test_single_cell_and_zero_error(tmp_path):
    t = GreensTable(2.0, np.array([[0.0072]]))
    tb.write_table(t, tmp_path / "one.csv")
    assert tb.read_table(tmp_path / "one.csv").errors[0, 0] == 0.0


def test_size_bound(tmp_path):
    rng = np.random.default_rng(1)
    t = GreensTable(10.0, -rng.uniform(size=(101, 101)) * 1e-100, rng.uniform(size=(101, 101)) * 1e-100)
    tb.write_table(t, tmp_path / "big.csv")
    assert (tmp_path / "big.csv").stat().st_size <= tb.table_size_bound(101, 101)


@pytest.mark.parametrize(
    "mutate, match",
    [
        (lambda lines: ["t_m,t_int,G"] + lines[1:], "line 1"),
        (lambda lines: lines[:3] + ["0,0.2,abc,0"] + lines[4:], "line 4, column G"),
        (lambda lines: lines[:2] + ["0,0.1,1"] + lines[3:], "line 3: expected 4 columns"),
        (lambda lines: lines[:-1], "data rows"),
        (lambda lines: lines[:2] + ["0,0.7,1,0"] + lines[3:], "column t_int"),
    ],
)
def test_malformed_tables_are_diagnosed(tmp_path, mutate, match):
    path = tmp_path / "g.csv"
    tb.write_table(_table(), path)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(mutate(lines)) + "\n")
    with pytest.raises(tb.TableFormatError, match=match):
        tb.read_table(path)


def test_missing_sidecar(tmp_path):
    path = tmp_path / "g.csv"
    tb.write_table(_table(), path)
    tb.sidecar_path(path).unlink()
    with pytest.raises(tb.TableFormatError, match="sidecar"):
        tb.read_table(path)


def test_series_round_trip(tmp_path):
    path = tmp_path / "s.csv"
    tb.write_series(path, {"t": [0.0, 1.5], "P": [0.25, 1 / 3]}, {"k": np.float64(2.0)})
    cols = tb.read_series(path)
    assert list(cols) == ["t", "P"] and cols["P"][1] == 1 / 3
    assert json.loads(tb.sidecar_path(path).read_text()) == {"k": 2.0}
    with pytest.raises(ValueError):
        tb.write_series(path, {"a": [1.0], "b": [1.0, 2.0]})


def test_atomic_write_leaves_no_temp(tmp_path):
    tb.atomic_write_text(tmp_path / "x" / "a.txt", "hi")
    assert [p.name for p in (tmp_path / "x").iterdir()] == ["a.txt"]
