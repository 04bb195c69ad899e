import csv
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crossfield.errors import ParameterError
from crossfield.kernels import (
    AskeyParams,
    MaternParams,
    PoweredExpParams,
    distances,
    matern,
    smoothing_kernel,
)

ORACLE = Path(__file__).parent / "data" / "matern_oracle.csv"


def load_oracle():
    with open(ORACLE) as fh:
        rows = list(csv.DictReader(fh))
    return [(float(r["nu"]), float(r["x"]), float(r["value"])) for r in rows]


CLOSED_FORMS = {
    0.5: lambda x: np.exp(-x),
    1.5: lambda x: (1 + x) * np.exp(-x),
    2.5: lambda x: (1 + x + x**2 / 3) * np.exp(-x),
}


@pytest.mark.parametrize("nu", sorted(CLOSED_FORMS))
def test_matern_half_integer_closed_forms(nu):
    x = np.geomspace(1e-6, 50, 400)
    got = matern(x, nu, 1.0)
    want = CLOSED_FORMS[nu](x)
    assert np.max(np.abs(got / want - 1)) <= 1e-10


def test_matern_against_high_precision_table():
    for nu, x, value in load_oracle():
        got = matern(x, nu, 1.0)
        assert got == pytest.approx(value, rel=1e-8, abs=1e-300), (nu, x)


def test_matern_examples():
    assert matern(0.0, 0.7, 3.0) == 1.0
    assert matern(1.0, 0.5, 1.0) == pytest.approx(0.3678794, abs=1e-7)
    assert matern(1.0, 1.5, 1.0) == pytest.approx(0.7357589, abs=1e-7)


def test_matern_scale_enters_through_product():
    r = np.linspace(0, 5, 11)
    np.testing.assert_allclose(matern(r, 1.2, 2.0), matern(2 * r, 1.2, 1.0), rtol=1e-14)


def test_matern_far_tail_underflows_to_zero():
    assert matern(1e4, 0.5, 1.0) == 0.0


def test_matern_scalar_and_shape():
    assert isinstance(matern(0.3, 1.0, 1.0), float)
    assert matern(np.ones((3, 4)), 1.0, 1.0).shape == (3, 4)


def test_matern_large_array_uses_same_values():
    r = np.tile(np.linspace(0, 3, 50), 100)
    np.testing.assert_array_equal(matern(r, 0.8, 1.3)[:50], matern(r[:50], 0.8, 1.3))


@pytest.mark.parametrize("bad", [dict(nu=0.0, a=1.0), dict(nu=1.0, a=-1.0), dict(nu=np.nan, a=1.0)])
def test_matern_rejects_bad_parameters(bad):
    with pytest.raises(ParameterError):
        matern(1.0, **bad)


def test_negative_distance_rejected():
    with pytest.raises(ParameterError):
        matern(-1.0, 1.0, 1.0)


@settings(max_examples=60, deadline=None)
@given(nu=st.floats(0.05, 8.0), a=st.floats(0.01, 10.0))
def test_matern_is_monotone_and_bounded(nu, a):
    r = np.linspace(0, 20 / a, 200)
    m = matern(r, nu, a)
    assert m[0] == 1.0
    assert np.all(m <= 1.0) and np.all(m >= 0.0)
    assert np.all(np.diff(m) <= 1e-14)


@settings(max_examples=40, deadline=None)
@given(nu=st.floats(0.1, 6.0))
def test_matern_continuous_in_nu(nu):
    x = np.array([1e-3, 0.1, 1.0, 5.0])
    np.testing.assert_allclose(matern(x, nu, 1.0), matern(x, nu + 1e-7, 1.0), atol=1e-5)


def test_powered_exponential_examples():
    assert PoweredExpParams(1.0, 1.0)(0.0) == 1.0
    assert PoweredExpParams(1.0, 1.0)(1.0) == pytest.approx(np.exp(-1))
    assert PoweredExpParams(1.0, 2.0)(2.0) == pytest.approx(np.exp(-4))
    with pytest.raises(ParameterError):
        PoweredExpParams(1.0, 2.5)


def test_askey_examples():
    p = AskeyParams(2.0, 2.0)
    assert p(0.0) == 1.0
    assert p(2.0) == 0.0
    assert p(1.0) == pytest.approx(0.25)
    assert p(3.0) == 0.0


def test_askey_dimension_constraint():
    with pytest.raises(ParameterError):
        AskeyParams(1.0, 1.0, dim=2)
    AskeyParams(1.0, 1.5, dim=2)
    with pytest.raises(ParameterError):
        AskeyParams(1.0, 1.0).check_dim(3)


def test_smoothing_kernel():
    assert smoothing_kernel(0.0, 1.3) == 1.0
    assert smoothing_kernel(1.3, 1.3) == pytest.approx(np.exp(-0.5))
    r = np.linspace(0, 3, 7)
    np.testing.assert_array_equal(smoothing_kernel(2 * r, 2.0), smoothing_kernel(r, 1.0))


def test_distances_and_dimension_mismatch():
    D = distances(np.array([[0.0, 0.0], [3.0, 4.0]]), np.array([[0.0, 0.0]]))
    np.testing.assert_allclose(D[:, 0], [0.0, 5.0])
    with pytest.raises(ParameterError):
        distances(np.zeros((2, 2)), np.zeros((2, 3)))


def test_parameter_records_round_trip():
    for rec in (MaternParams(1.2, 0.3), PoweredExpParams(2.0, 1.5), AskeyParams(3.0, 2.0)):
        assert rec.with_params(rec.params()) == rec
        assert set(rec.transforms()) == set(rec.params())
