import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crossfield.crosscov import (
    AsymShiftWrapper,
    GriddedField,
    LatentDimModel,
    LMCModel,
    MultiAskeyModel,
    MultiMaternModel,
    SeparableModel,
    TaperWrapper,
    VarianceScaleWrapper,
    eval_cross_cov,
    make_lmc,
    make_multimatern,
    make_separable,
    psd_check,
    validate_model,
)
from crossfield.data import SpatialDesign
from crossfield.errors import ParameterError
from crossfield.gaussian import assemble_sigma
from crossfield.kernels import AskeyParams, MaternParams, PoweredExpParams, matern

TABLE1_PARS = dict(sigmas=[1.61, 0.19], nus=[1.33, 0.54], a=1 / 367.1)


def pars_model(beta=-0.49, **kw):
    return MultiMaternModel("parsimonious", beta=[[1, beta], [beta, 1]], **TABLE1_PARS, **kw)


def passes_psd(model, X):
    return psd_check(model.joint_matrix(X, X))[0]


# -- separable / LMC ---------------------------------------------------------


def test_separable_collocated_equals_R():
    R = np.array([[2.0, 0.3], [0.3, 1.0]])
    m = make_separable(MaternParams(1.0, 0.5), R)
    s = np.array([0.4, -1.0])
    for i in range(2):
        for j in range(2):
            assert eval_cross_cov(m, i, j, s, s) == pytest.approx(R[i, j])


def test_separable_rejects_asymmetric_R():
    with pytest.raises(ParameterError):
        make_separable(MaternParams(1.0, 1.0), [[1.0, 0.2], [0.3, 1.0]])


def test_separable_rejects_indefinite_R():
    with pytest.raises(ParameterError):
        make_separable(MaternParams(1.0, 1.0), [[1.0, 2.0], [2.0, 1.0]])


def test_lmc_rank_one_is_separable():
    rho = MaternParams(0.5, 1.0)
    m = make_lmc([rho], [[1.0], [1.0]])
    sep = make_separable(rho, [[1.0, 1.0], [1.0, 1.0]])
    h = np.array([0.3, 0.4])
    assert eval_cross_cov(m, 0, 1, np.zeros(2), h) == pytest.approx(np.exp(-0.5))
    X = np.random.default_rng(0).uniform(0, 3, (6, 2))
    np.testing.assert_allclose(m.joint_matrix(X, X), sep.joint_matrix(X, X), rtol=1e-14)


def test_lmc_shape_checks():
    rho = MaternParams(0.5, 1.0)
    with pytest.raises(ParameterError):
        make_lmc([rho, rho, rho], np.ones((2, 3)))
    with pytest.raises(ParameterError):
        make_lmc([rho, rho], [[1.0, 2.0], [2.0, 4.0]])


# -- multivariate Matern -----------------------------------------------------


def test_full_matern_collocated_cross_covariance():
    m = MultiMaternModel(
        "full", [1.63, 0.19], [1.3, 0.6], [1 / 300, 1 / 400], [[1, -0.6], [-0.6, 1]], a_cross=1 / 350
    )
    s = np.array([10.0, 20.0])
    assert eval_cross_cov(m, 0, 1, s, s) == pytest.approx(-0.18582, abs=1e-12)
    assert m.nu_cross == pytest.approx(0.95)


def test_parsimonious_table_values_accepted():
    m = make_multimatern("parsimonious", **TABLE1_PARS, beta=[[1, -0.49], [-0.49, 1]])
    assert m.params()["beta_12"] == -0.49


def test_parsimonious_extreme_beta_rejected():
    with pytest.raises(ParameterError, match="FAIL"):
        make_multimatern("parsimonious", **TABLE1_PARS, beta=[[1, -0.999], [-0.999, 1]])


def test_parsimonious_extreme_beta_has_negative_eigenvalue_on_grid():
    # brute-force oracle: dense eigensolver on a 5x5 grid
    X = SpatialDesign.grid((5, 5), 50.0).coords
    S = pars_model(-0.999).joint_matrix(X, X)
    assert np.linalg.eigvalsh(S)[0] < -1e-8 * np.trace(S) / S.shape[0]


def test_parsimonious_cross_uses_mean_smoothness():
    m = pars_model()
    h = np.array([120.0, 0.0])
    want = -0.49 * 1.61 * 0.19 * matern(120.0, (1.33 + 0.54) / 2, 1 / 367.1)
    assert eval_cross_cov(m, 0, 1, np.zeros(2), h) == pytest.approx(want, rel=1e-14)


def test_equal_smoothness_parsimonious_is_separable():
    m = MultiMaternModel("parsimonious", [1.0, 2.0], [0.8, 0.8], 0.7, [[1, 0.3], [0.3, 1]])
    sep = SeparableModel(MaternParams(0.8, 0.7), [[1.0, 0.6], [0.6, 4.0]])
    X = np.random.default_rng(3).uniform(0, 4, (7, 2))
    np.testing.assert_allclose(m.joint_matrix(X, X), sep.joint_matrix(X, X), rtol=1e-13)


def test_independent_variant_has_zero_cross():
    m = MultiMaternModel("independent", [1.0, 2.0], [0.5, 1.5], [1.0, 0.3])
    X = np.random.default_rng(1).uniform(0, 4, (5, 2))
    S = m.joint_matrix(X, X)
    assert np.all(S[0::2, 1::2] == 0)


def test_multimatern_param_round_trip():
    for m in (
        pars_model(nuggets=[0.1, 0.0]),
        MultiMaternModel("full", [1, 2], [0.5, 1.5], [1.0, 0.5], [[1, 0.2], [0.2, 1]], a_cross=0.8),
        MultiMaternModel("independent", [1, 2], [0.5, 1.5], [1.0, 0.5]),
    ):
        again = m.with_params(m.params())
        assert again.params() == m.params()
        assert set(m.transforms()) == set(m.params())


# -- latent dimensions, Askey --------------------------------------------------


def test_latentdim_rejects_beta_above_one():
    with pytest.raises(ParameterError):
        LatentDimModel([[0.0], [1.0]], [1.0, 1.0], 0.1, 1.0, 1.5)


def test_latentdim_collocated_values():
    m = LatentDimModel([[0.0], [2.0]], [1.0, 3.0], 0.5, 1.0, 1.0)
    s = np.zeros(2)
    assert eval_cross_cov(m, 0, 0, s, s) == pytest.approx(1.0 + 0.25)
    assert eval_cross_cov(m, 0, 1, s, s) == pytest.approx(3.0 / 3.0)
    h = np.array([1.0, 0.0])
    assert eval_cross_cov(m, 0, 1, s, h) == pytest.approx(np.exp(-1 / np.sqrt(3)))


def test_multiaskey_dimension_and_support():
    m = MultiAskeyModel(2.0, 2.0, [1.0, 2.0], [1.0, 1.0])
    assert eval_cross_cov(m, 0, 1, np.zeros(2), np.array([2.5, 0.0])) == 0.0
    assert eval_cross_cov(m, 0, 0, np.zeros(2), np.zeros(2)) == pytest.approx(1.0)
    bad = MultiAskeyModel(2.0, 1.0, [1.0, 2.0], [1.0, 1.0])
    with pytest.raises(ParameterError):
        bad.joint_matrix(np.zeros((2, 2)), np.zeros((2, 2)))


# -- wrappers ------------------------------------------------------------------


def test_zero_shift_equals_base():
    base = pars_model()
    w = AsymShiftWrapper(base, [[0.0, 0.0], [0.0, 0.0]])
    X = SpatialDesign.grid((4, 4), 50.0).coords
    np.testing.assert_array_equal(w.joint_matrix(X, X), base.joint_matrix(X, X))


def test_shift_leaves_marginals_unchanged():
    base = pars_model()
    w = AsymShiftWrapper(base, [[0.0, 0.0], [100.0, 0.0]])
    s1, s2 = np.array([0.0, 0.0]), np.array([70.0, 30.0])
    for i in range(2):
        assert eval_cross_cov(w, i, i, s1, s2) == pytest.approx(eval_cross_cov(base, i, i, s1, s2))


def test_shift_moves_cross_covariance_peak():
    w = AsymShiftWrapper(pars_model(), [[0.0, 0.0], [100.0, 0.0]])
    grid = np.arange(-300.0, 301.0, 25.0)
    # lag h = s1 - s2
    vals = np.array([[eval_cross_cov(w, 0, 1, np.array([x, y]), np.zeros(2)) for y in grid] for x in grid])
    k = np.unravel_index(np.argmax(np.abs(vals)), vals.shape)
    assert (grid[k[0]], grid[k[1]]) == (100.0, 0.0)


def test_first_shift_must_be_zero():
    with pytest.raises(ParameterError):
        AsymShiftWrapper(pars_model(), [[1.0, 0.0], [0.0, 0.0]])


def test_taper_zero_beyond_support():
    w = TaperWrapper(pars_model(), AskeyParams(200.0, 2.0))
    assert eval_cross_cov(w, 0, 1, np.zeros(2), np.array([250.0, 0.0])) == 0.0
    assert eval_cross_cov(w, 0, 1, np.zeros(2), np.zeros(2)) == pytest.approx(-0.49 * 1.61 * 0.19)


def test_variance_scale_wrapper():
    base = SeparableModel(MaternParams(0.5, 1.0), [[1.0, 0.5], [0.5, 1.0]])
    sites = np.array([[0.0, 0.0], [1.0, 0.0]])
    f1 = GriddedField(sites, [1.0, 2.0])
    f2 = GriddedField(sites, [3.0, 3.0])
    w = VarianceScaleWrapper(base, (f1, f2))
    s1, s2 = np.array([0.0, 0.0]), np.array([1.0, 0.0])
    assert eval_cross_cov(w, 0, 1, s1, s2) == pytest.approx(1.0 * 3.0 * 0.5 * np.exp(-1))
    assert not w.stationary
    with pytest.raises(ParameterError):
        GriddedField(sites, [1.0, 0.0])


def test_nugget_only_at_coincident_sites():
    m = pars_model(nuggets=[0.2, 0.1])
    X = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]])
    S = m.joint_matrix(X, X)
    base = pars_model().joint_matrix(X, X)
    D = S - base
    np.testing.assert_allclose(D[:4, :4], np.kron(np.ones((2, 2)), np.diag([0.2, 0.1])))
    assert np.all(D[4:, :4] == 0)
    np.testing.assert_array_equal(m.joint_matrix(X, X, nugget=False), base)


def test_eval_cross_cov_matches_joint_matrix_and_symmetry():
    m = AsymShiftWrapper(pars_model(), [[0.0, 0.0], [40.0, -10.0]])
    rng = np.random.default_rng(5)
    X = rng.uniform(0, 300, (4, 2))
    S = m.joint_matrix(X, X)
    for k in range(4):
        for l in range(4):
            for i in range(2):
                for j in range(2):
                    v = eval_cross_cov(m, i, j, X[k], X[l])
                    assert S[2 * k + i, 2 * l + j] == pytest.approx(v, rel=1e-14, abs=1e-300)
                    assert eval_cross_cov(m, j, i, X[l], X[k]) == pytest.approx(v, rel=1e-14)


def test_eval_cross_cov_index_checks():
    with pytest.raises(ParameterError):
        eval_cross_cov(pars_model(), 0, 2, np.zeros(2), np.zeros(2))
    with pytest.raises(ParameterError):
        eval_cross_cov(pars_model(), 0, 1, np.zeros(2), np.zeros(3))


# -- validity ------------------------------------------------------------------


def test_validate_model_reports():
    rep = validate_model(pars_model())
    assert rep.passed and len(rep.trials) == 6
    assert "pass" in rep.summary()
    bad = validate_model(pars_model(-0.999))
    assert not bad.passed and "FAIL" in bad.summary()


def test_assembled_sigma_is_symmetric_and_small_design_psd():
    rng = np.random.default_rng(11)
    for _ in range(20):
        design = SpatialDesign(rng.uniform(0, 500, (4, 2)))
        S = assemble_sigma(pars_model(), design).sigma
        assert np.array_equal(S, S.T)
        assert np.linalg.eigvalsh(S)[0] >= -1e-8 * np.trace(S) / 8


pos = st.floats(0.2, 3.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), pos, pos, st.floats(-0.99, 0.99))
def test_separable_draws_psd(seed, nu, a, corr):
    rng = np.random.default_rng(seed)
    m = SeparableModel(MaternParams(nu, a), [[1.0, corr], [corr, 1.0]])
    assert passes_psd(m, rng.uniform(0, 4, (30, 2)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_lmc_draws_psd(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(3, 2))
    m = LMCModel([PoweredExpParams(rng.uniform(0.2, 2), rng.uniform(0.2, 2)), MaternParams(1.0, 1.0)], A)
    assert passes_psd(m, rng.uniform(0, 4, (30, 2)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0))
def test_latentdim_draws_psd(seed, beta):
    rng = np.random.default_rng(seed)
    m = LatentDimModel(rng.normal(size=(3, 2)), rng.uniform(0.5, 2, 3), 0.1, rng.uniform(0.3, 3), beta)
    assert passes_psd(m, rng.uniform(0, 4, (30, 2)))
