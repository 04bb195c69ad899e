import os

import numpy as np
import pytest

from crossfield.data import FieldSample, SpatialDesign
from crossfield.errors import DataError
from crossfield.io import atomic_write, read_dataset, read_sites, write_dataset, write_table


def write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_dataset_round_trip(tmp_path):
    d = SpatialDesign([[0.0, 1.0], [2.5, 3.0]], site_ids=("A", "B"))
    v = np.array([[[1.0, np.nan], [0.1, 0.2]], [[-1.0, 3.0], [np.nan, 1e-17]]])
    s = FieldSample(d, v, ("temp", "prec"), ("r1", "r2"))
    path = tmp_path / "s.csv"
    write_dataset(path, s)
    back = read_dataset(path)
    np.testing.assert_array_equal(back.values, v)
    assert back.variables == ("temp", "prec") and back.rep_ids == ("r1", "r2")
    assert back.design.site_ids == ("A", "B")
    np.testing.assert_array_equal(back.design.coords, d.coords)


def test_missing_rows_become_nan(tmp_path):
    path = write(tmp_path, "site,rep,x1,z1\nA,0,0,1.0\nB,0,1,2.0\nA,1,0,3.0\n")
    s = read_dataset(path)
    assert s.values.shape == (2, 2, 1) and np.isnan(s.values[1, 1, 0])


def test_time_column(tmp_path):
    path = write(tmp_path, "site,rep,x1,t,z1\nA,0,0,1.5,1.0\n")
    assert read_dataset(path).design.times.tolist() == [1.5]


@pytest.mark.parametrize(
    "text,message",
    [
        ("site,rep,x1,z1\nA,0,0,1\nA,1,5,2\n", "line 3: site 'A' has coordinates"),
        ("site,rep,x1,z1,z2\nA,0,0,,\n", "line 2: no observed variable"),
        ("site,rep,x1,z1\nA,0,0,1\nA,0,0,2\n", "line 3: duplicate row"),
        ("site,rep,x1,z1\nA,0,0\n", "line 2: expected 4 fields"),
        ("site,rep,x1,z1\nA,0,zero,1\n", "line 2: column 'x1'"),
        ("site,x1,z1\nA,0,1\n", "line 1: missing column 'rep'"),
        ("site,rep,z1\nA,0,1\n", "line 1: no coordinate columns"),
        ("", "empty file"),
    ],
)
def test_parse_errors_carry_line_numbers(tmp_path, text, message):
    with pytest.raises(DataError, match=message):
        read_dataset(write(tmp_path, text))


def test_missing_file_is_data_error(tmp_path):
    with pytest.raises(DataError):
        read_dataset(tmp_path / "absent.csv")


def test_read_sites(tmp_path):
    d = read_sites(write(tmp_path, "site,x1,x2\nP,1,2\nQ,3,4\n"))
    assert d.site_ids == ("P", "Q") and d.coords.tolist() == [[1, 2], [3, 4]]


def test_atomic_write_leaves_no_partial_file(tmp_path):
    path = tmp_path / "out.csv"
    atomic_write(path, "old\n")

    class Boom:
        def __str__(self):
            raise RuntimeError

    with pytest.raises(RuntimeError):
        write_table(path, [{"a": Boom()}], ["a"])
    assert path.read_text() == "old\n"
    assert os.listdir(tmp_path) == ["out.csv"]


def test_write_table_text():
    assert write_table(None, [{"a": 1, "b": np.nan}], ["a", "b"]) == "a,b\n1,\n"
