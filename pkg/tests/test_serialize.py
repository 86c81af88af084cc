import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from assouad_graphs.covering import Square, column_cover_count
from assouad_graphs.funcspace import TakagiSpec, sample_function
from assouad_graphs.serialize import (
    csv_text, dumps, read_binary, read_csv, read_json, sampled_from_bytes, sampled_from_csv,
    sampled_to_bytes, sampled_to_csv, to_jsonable, write_binary, write_csv, write_json,
)

finite = st.floats(allow_nan=False, allow_infinity=False)


@given(st.lists(finite, min_size=2, max_size=200))
def test_binary_round_trip(values):
    f = sample_function(lambda t: np.asarray(values), 0.0, 1.0, len(values),
                        meta={"family": "test"})
    g = sampled_from_bytes(sampled_to_bytes(f))
    np.testing.assert_array_equal(g.values, f.values)
    assert (g.lo, g.hi, g.step, g.n) == (f.lo, f.hi, f.step, f.n)
    assert g.meta == f.meta


def test_binary_header(tmp_path):
    f = sample_function(TakagiSpec(0.5, 2.0), 0.0, 1.0, 33)
    data = sampled_to_bytes(f)
    assert data[:5] == b"ASLB1"
    path = write_binary(f, tmp_path / "f.aslb")
    np.testing.assert_array_equal(read_binary(path).values, f.values)
    with pytest.raises(ValueError):
        sampled_from_bytes(b"XXXX" + data[4:])
    with pytest.raises(ValueError):
        sampled_from_bytes(data[:-8])


def test_csv_round_trip(tmp_path):
    f = sample_function(TakagiSpec(2 ** -0.5, 2.0), 0.0, 1.0, 1025)
    g = sampled_from_csv(sampled_to_csv(f, tmp_path / "f.csv"))
    np.testing.assert_array_equal(g.values, f.values)
    assert g.meta == to_jsonable(f.meta)
    assert g.step == f.step


def test_csv_meta_and_cells(tmp_path):
    path = write_csv(tmp_path / "c.csv", ["x", "flag"], [(0.1, True), (1e-300, False)],
                     meta={"seed": 3})
    meta, header, rows = read_csv(path)
    assert meta == {"seed": 3}
    assert header == ["x", "flag"]
    assert rows == [["0.1", "1"], ["1e-300", "0"]]


def test_json_non_finite_and_dataclasses(tmp_path):
    f = sample_function(lambda t: t, 0.0, 1.0, 65)
    rep = column_cover_count(f, Square((0.5, 0.5), 0.5), 0.25)
    obj = {"rep": rep, "x": np.float64(math.inf), "y": math.nan, "a": np.arange(3)}
    path = write_json(tmp_path / "r.json", obj)
    back = read_json(path)
    assert back["x"] == "inf" and back["y"] == "nan" and back["a"] == [0, 1, 2]
    assert back["rep"]["count"] == rep.count


def test_writers_are_deterministic():
    obj = {"b": [1.0, 2.5], "a": {"z": 1, "y": 0.1}}
    assert dumps(obj) == dumps(dict(reversed(list(obj.items()))))
    rows = [(i, i / 7) for i in range(10)]
    assert csv_text(["i", "v"], rows, {"k": 1}) == csv_text(["i", "v"], rows, {"k": 1})
