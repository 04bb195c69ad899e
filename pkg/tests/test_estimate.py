import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crossfield.crosscov import MultiMaternModel, validate_model
from crossfield.data import FieldSample, SpatialDesign
from crossfield.errors import NumericalError, ParameterError
from crossfield.estimate import (
    FitPlan,
    FitSpec,
    fit_mle,
    fit_staged,
    from_unconstrained,
    initial_multimatern,
    staged_plan,
    to_unconstrained,
)
from crossfield.gaussian import loglik, simulate

GRID = SpatialDesign.grid((6, 6), 50.0)


def truth():
    return MultiMaternModel("parsimonious", [1.61, 0.19], [1.33, 0.54], 1 / 367.1, [[1, -0.49], [-0.49, 1]])


@pytest.fixture(scope="module")
def data():
    return simulate(truth(), GRID, 8, seed=11)


@settings(max_examples=200, deadline=None)
@given(
    st.sampled_from(["log", "tanh", "unit", "interval2", "none"]),
    st.floats(1e-6, 1 - 1e-6),
)
def test_transform_round_trip(kind, u):
    value = {"log": 1e3 * u, "tanh": 2 * u - 1, "unit": u, "interval2": 2 * u, "none": 10 * u - 5}[kind]
    back = from_unconstrained(to_unconstrained(value, kind), kind)
    assert back == pytest.approx(value, rel=1e-12, abs=1e-12)


def test_fixed_mask_returns_init(data):
    init = truth()
    res = fit_mle(FitSpec(()), data, init)
    assert res.model is init
    assert res.loglik == loglik(init, data)


def test_univariate_range_recovery():
    m0 = MultiMaternModel("independent", [1.0], [0.5], [1 / 300])
    s = simulate(m0, SpatialDesign.grid((10, 10), 50.0), 24, seed=5)
    init = MultiMaternModel("independent", [0.8], [0.5], [1 / 150])
    res = fit_mle(FitSpec(("sigma_1", "a_1"), starts=3), s, init, seed=1)
    assert 1 / res.model.a[0] == pytest.approx(300, rel=0.2)
    assert res.model.nus[0] == 0.5


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_monotone_in_loglik(data, seed):
    rng = np.random.default_rng(seed)
    init = truth().with_params({"sigma_1": rng.uniform(0.5, 3), "a": rng.uniform(1e-3, 1e-2)})
    res = fit_mle(FitSpec(("sigma_*", "a"), starts=2, max_evals=150), data, init, seed=seed)
    assert res.loglik >= loglik(init, data)


def test_report_contents(data):
    res = fit_mle(FitSpec(("sigma_*",), starts=3, max_evals=200), data, truth(), seed=4)
    rep = res.report
    assert rep["seed"] == 4 and rep["starts"] == 3
    assert rep["evaluations"] > 3 and len(rep["start_logliks"]) == 3
    assert rep["best_gap"] >= 0


def test_free_patterns_select_names():
    assert FitSpec(("sigma_*", "beta_12")).free_names(truth()) == ["sigma_1", "sigma_2", "beta_12"]


def test_fixed_parameters_never_move(data):
    init = truth().with_params({"nu_1": 1.0})
    res = fit_mle(FitSpec(("sigma_*",), starts=2, max_evals=200), data, init)
    p0, p1 = init.params(), res.model.params()
    for k in p0:
        if not k.startswith("sigma_"):
            assert p1[k] == p0[k]


def test_single_stage_equals_fit_mle(data):
    spec = FitSpec(("sigma_*", "beta_12"), starts=2, max_evals=300)
    a = fit_mle(spec, data, truth(), seed=3)
    b = fit_staged([spec], data, truth(), seed=3)
    assert a.model.params() == b.model.params()
    assert a.loglik == b.loglik


def test_full_matern_protocol_leaves_marginals_fixed(data):
    init = initial_multimatern(data, "full")
    stages = staged_plan(init, starts=2, max_evals=400)
    assert stages[1].free_names(init) == ["beta_12", "a_cross"]
    first = fit_mle(stages[0], data, init, seed=0)
    assert first.model.params()["beta_12"] == 0.0
    res = fit_staged(stages, data, init, seed=0)
    p1, p2 = first.model.params(), res.model.params()
    for k in ("sigma_1", "sigma_2", "nu_1", "nu_2", "a_1", "a_2", "nu_cross"):
        assert p2[k] == p1[k]
    assert p2["beta_12"] != 0.0


def test_staged_not_above_joint(data):
    init = initial_multimatern(data)
    staged = fit_staged(staged_plan(init, starts=2, max_evals=600), data, init, seed=0)
    names = [n for n in init.params() if not n.startswith("nugget")]
    joint = fit_mle(FitSpec(tuple(names), starts=2, max_evals=1500), data, staged.model, seed=0)
    assert staged.loglik <= joint.loglik


def test_site_permutation_invariance(data):
    perm = np.random.default_rng(0).permutation(data.n)
    shuffled = FieldSample(GRID.subset(perm), data.values[:, perm, :])
    spec = FitSpec(("sigma_*", "a"), starts=2, max_evals=400)
    a = fit_mle(spec, data, truth(), seed=2).model.params()
    b = fit_mle(spec, shuffled, truth(), seed=2).model.params()
    for k in a:
        assert b[k] == pytest.approx(a[k], rel=1e-6)


def test_threads_give_same_fit(data):
    spec = FitSpec(("sigma_*",), starts=3, max_evals=200)
    a = fit_mle(spec, data, truth(), seed=1)
    b = fit_mle(spec, data, truth(), seed=1, threads=3)
    assert a.model.params() == b.model.params()


def test_returned_models_pass_validation(data):
    init = initial_multimatern(data)
    res = fit_staged(staged_plan(init, starts=1, max_evals=300), data, init)
    assert validate_model(res.model).passed


def test_all_starts_failing_raises():
    d = SpatialDesign([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]])
    s = FieldSample(d, np.random.default_rng(0).normal(size=(2, 3, 1)))
    init = MultiMaternModel("independent", [1.0], [0.5], [1.0])
    with pytest.raises(NumericalError, match="no start"):
        fit_mle(FitSpec(("a_1",), starts=2, max_evals=20), s, init)


def test_invalid_stage_is_named(data):
    bad = FitSpec((), set={"beta_12": -0.999}, name="cross")
    with pytest.raises(ParameterError, match="stage cross"):
        fit_staged([bad], data, truth())


def test_fit_plan(data):
    init = initial_multimatern(data)
    plan = FitPlan(init, staged_plan(init, starts=1, max_evals=200))
    assert isinstance(plan.fit(data), MultiMaternModel)


def test_initial_values(data):
    init = initial_multimatern(data)
    assert 1 / init.a[0] == pytest.approx(GRID.diameter() / 4)
    assert init.nus.tolist() == [0.5, 0.5]
    assert -1 < init.beta[0, 1] < 0
