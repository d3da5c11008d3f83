import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from driftlab.csvio import format_value, read_columns, read_csv, write_csv

finite = st.floats(allow_nan=False, allow_infinity=False)


@given(st.lists(st.tuples(finite, finite, st.integers(-10 ** 6, 10 ** 6)), min_size=1, max_size=30))
def test_round_trip_is_bit_exact(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("csv") / "t.csv"
    write_csv(path, ["a", "b", "k"], rows)
    cols = read_columns(path)
    for j, name in enumerate(("a", "b")):
        got = cols[name]
        want = np.array([r[j] for r in rows])
        assert got.tobytes() == want.tobytes()
    assert list(cols["k"]) == [float(r[2]) for r in rows]


def test_files_use_lf_and_a_header(tmp_path):
    path = write_csv(tmp_path / "t.csv", ["x", "y"], [[0.1, 2], [1e-300, -3]])
    raw = path.read_bytes()
    assert b"\r" not in raw
    assert raw.decode("utf-8").splitlines()[0] == "x,y"
    assert raw.endswith(b"\n")


def test_seventeen_significant_digits():
    assert format_value(0.1) == "0.10000000000000001"
    assert format_value(np.float64(2.5)) == "2.5"
    assert format_value(7) == "7"
    assert format_value(np.int64(-3)) == "-3"
    assert format_value(True) == "1"
    assert format_value(float("nan")) == "nan"


def test_non_finite_values_survive(tmp_path):
    path = write_csv(tmp_path / "t.csv", ["v"], [[float("nan")], [float("inf")], [-float("inf")]])
    v = read_columns(path)["v"]
    assert math.isnan(v[0]) and v[1] == math.inf and v[2] == -math.inf


def test_text_columns_are_kept(tmp_path):
    path = write_csv(tmp_path / "t.csv", ["name", "v"], [["a,b", 1.5], ["c", 2.0]])
    header, rows = read_csv(path)
    assert header == ["name", "v"]
    assert rows == [["a,b", 1.5], ["c", 2.0]]
    assert read_columns(path)["name"] == ["a,b", "c"]


def test_row_length_is_checked(tmp_path):
    with pytest.raises(ValueError):
        write_csv(tmp_path / "t.csv", ["a", "b"], [[1.0]])
