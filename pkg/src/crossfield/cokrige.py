"""Simple co-kriging, Gaussian CRPS and hold-out cross-validation."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.stats import norm

from .errors import DataError, ParameterError
from .gaussian import DEFAULT_JITTER, _cholesky, _pattern_groups

__all__ = [
    "PredictionResult",
    "cokrige",
    "crps_gaussian",
    "rmse",
    "ScoreTable",
    "cross_validate",
    "SCORE_COLUMNS",
]

SCORE_COLUMNS = ("model", "variable", "rmse", "crps", "repeats", "seed")


@dataclass(frozen=True, eq=False)
class PredictionResult:
    """Predictive means and variances, each of shape (T, m, p)."""

    design: object
    mean: np.ndarray
    variance: np.ndarray
    variables: tuple

    def scores(self, truth):
        """RMSE and mean CRPS per variable against ``truth`` of shape (T, m, p)."""
        truth = np.asarray(truth, dtype=float)
        out = {}
        for i, name in enumerate(self.variables):
            y = truth[..., i]
            ok = ~np.isnan(y)
            if not ok.any():
                out[name] = (np.nan, np.nan)
                continue
            mu, var = self.mean[..., i][ok], self.variance[..., i][ok]
            out[name] = (
                rmse(mu, y[ok]),
                float(np.mean(crps_gaussian(mu, np.sqrt(var), y[ok]))),
            )
        return out

    def rows(self):
        T, m, p = self.mean.shape
        return [
            {
                "site": self.design.site_ids[k],
                "rep": t,
                "variable": self.variables[i],
                "mean": float(self.mean[t, k, i]),
                "variance": float(self.variance[t, k, i]),
            }
            for t in range(T)
            for k in range(m)
            for i in range(p)
        ]


def cokrige(
    model,
    obs_design,
    obs_values,
    target_design,
    observable=True,
    variables=None,
    jitters=DEFAULT_JITTER,
    snap_observed=True,
):
    """Simple (mean-zero) co-kriging of every variable at every target site.

    Parameters
    ----------
    model : CrossCovModel
    obs_design : SpatialDesign
    obs_values : array_like, shape (T, n, p)
        Mean-zero observations; NaN marks a missing value.  Each replication is
        predicted from its own observations only.
    target_design : SpatialDesign
    observable : bool
        Predict the noisy observable (nugget included in the target prior
        variance and in covariances with coincident sites).  With False the
        smooth process is predicted.
    variables : sequence of str, optional
        Variable names carried into the result.
    snap_observed : bool
        When a target coincides with an observed site, and the observation
        carries no independent noise relative to the target (zero nugget, or
        ``observable``), return the observed value with zero variance instead
        of the solve's result, which agrees up to rounding.
    """
    V = np.asarray(obs_values, dtype=float)
    if V.ndim == 2:
        V = V[None]
    p = model.p
    if V.shape[1:] != (obs_design.n, p):
        raise DataError(f"observations must have shape (T, {obs_design.n}, {p}), got {V.shape}")
    if obs_design.d != target_design.d:
        raise ParameterError(
            f"dimension mismatch: observations are {obs_design.d}-d, targets {target_design.d}-d"
        )
    T = V.shape[0]
    m = target_design.n
    Xo, Xt = obs_design.coords, target_design.coords
    To, Tt = obs_design.times, target_design.times
    S = model.joint_matrix(Xo, Xo, To, To)
    S = np.triu(S) + np.triu(S, 1).T
    cross = model.joint_matrix(Xo, Xt, To, Tt, nugget=observable)
    prior = np.diag(model.joint_matrix(Xt, Xt, Tt, Tt, nugget=observable)).copy()
    nug = model.nugget_variances()

    mean = np.zeros((T, m * p))
    var = np.zeros((T, m * p))
    flat = V.reshape(T, -1)
    for mask, reps in _pattern_groups(flat):
        idx = np.flatnonzero(mask)
        if idx.size == 0:
            mean[reps] = 0.0
            var[reps] = prior
            continue
        L, _, _ = _cholesky(S[np.ix_(idx, idx)], jitters)
        K = solve_triangular(L, cross[idx], lower=True, check_finite=False)
        W = solve_triangular(L, flat[np.ix_(reps, idx)].T, lower=True, check_finite=False)
        mean[reps] = (W.T @ K)
        var[reps] = np.clip(prior - np.sum(K * K, axis=0), 0.0, None)

    if not snap_observed:
        names = tuple(variables) if variables is not None else tuple(f"z{i + 1}" for i in range(p))
        return PredictionResult(target_design, mean.reshape(T, m, p), var.reshape(T, m, p), names)
    same = np.all(Xo[:, None, :] == Xt[None, :, :], axis=2)
    if To is not None and Tt is not None:
        same &= To[:, None] == Tt[None, :]
    for ko, kt in zip(*np.nonzero(same)):
        for i in range(p):
            if nug[i] != 0 and not observable:
                continue
            col = kt * p + i
            obs = flat[:, ko * p + i]
            hit = ~np.isnan(obs)
            mean[hit, col] = obs[hit]
            var[hit, col] = 0.0
    names = tuple(variables) if variables is not None else tuple(f"z{i + 1}" for i in range(p))
    return PredictionResult(target_design, mean.reshape(T, m, p), var.reshape(T, m, p), names)


def crps_gaussian(mu, sigma, y):
    """Continuous ranked probability score of N(mu, sigma^2) at ``y``.

    ``sigma * [w (2 Phi(w) - 1) + 2 phi(w) - 1/sqrt(pi)]`` with
    ``w = (y - mu)/sigma``; ``sigma = 0`` gives ``|y - mu|``.
    """
    mu, sigma, y = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (mu, sigma, y)))
    if np.any(sigma < 0):
        raise ParameterError("predictive standard deviation must be nonnegative")
    shape = mu.shape
    mu, sigma, y = (np.atleast_1d(a).ravel() for a in (mu, sigma, y))
    out = np.abs(y - mu)
    pos = sigma > 0
    if np.any(pos):
        s = sigma[pos]
        w = (y[pos] - mu[pos]) / s
        out[pos] = s * (w * (2 * norm.cdf(w) - 1) + 2 * norm.pdf(w) - 1 / np.sqrt(np.pi))
    return out.reshape(shape) if shape else float(out[0])


def rmse(pred, truth):
    pred, truth = np.asarray(pred, dtype=float), np.asarray(truth, dtype=float)
    return float(np.sqrt(np.nanmean((pred - truth) ** 2)))


@dataclass
class ScoreTable:
    """Cross-validation scores averaged over repeats, plus the per-repeat values."""

    model: str
    variables: tuple
    rmse: np.ndarray
    crps: np.ndarray
    repeats: int
    seed: int
    per_repeat: list = field(default_factory=list)

    def rows(self):
        return [
            {
                "model": self.model,
                "variable": v,
                "rmse": float(self.rmse[i]),
                "crps": float(self.crps[i]),
                "repeats": self.repeats,
                "seed": self.seed,
            }
            for i, v in enumerate(self.variables)
        ]

    @property
    def mean_crps(self):
        return float(np.mean(self.crps))


def _holdout_sets(n, fraction, repeats, seed):
    k = int(round(fraction * n))
    if k < 1 or k > n - 1:
        raise ParameterError(
            f"holdout fraction {fraction} of {n} sites leaves no held-out or no retained site"
        )
    children = np.random.SeedSequence(seed).spawn(repeats)
    return [np.sort(np.random.default_rng(c).choice(n, size=k, replace=False)) for c in children]


def cross_validate(
    model_or_plan,
    sample,
    holdout_fraction=0.25,
    repeats=10,
    seed=0,
    name=None,
    splits=None,
    observable=True,
    threads=1,
):
    """Hold-out co-kriging study.

    For each repeat a random set of sites (the same for every replication and
    variable) is held out and predicted from the retained sites; RMSE and
    mean CRPS per variable are computed over all held-out sites and
    replications and then averaged over repeats.

    ``model_or_plan`` is either a fitted model or an object with a
    ``fit(sample)`` method; in the latter case parameters are estimated once
    on the full sample.  ``splits`` overrides the random hold-out sets with
    explicit arrays of held-out site indices.
    """
    if not (0 < holdout_fraction < 1):
        raise ParameterError("holdout_fraction must lie in (0, 1)")
    if repeats < 1:
        raise ParameterError("repeats must be at least 1")
    model = model_or_plan.fit(sample) if hasattr(model_or_plan, "fit") else model_or_plan
    n = sample.n
    if splits is None:
        splits = _holdout_sets(n, holdout_fraction, repeats, seed)
    else:
        splits = [np.asarray(s) for s in splits]
        for s in splits:
            if s.size == 0 or np.unique(s).size >= n:
                raise ParameterError("each split must hold out at least one and retain at least one site")
    repeats = len(splits)

    def one(held):
        keep = np.setdiff1d(np.arange(n), held)
        pred = cokrige(
            model,
            sample.design.subset(keep),
            sample.values[:, keep, :],
            sample.design.subset(held),
            observable=observable,
            variables=sample.variables,
        )
        sc = pred.scores(sample.values[:, held, :])
        return [sc[v] for v in sample.variables]

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(one, splits))
    else:
        results = [one(h) for h in splits]
    arr = np.array(results, dtype=float)  # (repeats, p, 2)
    return ScoreTable(
        name or getattr(model, "family", "model"),
        sample.variables,
        np.nanmean(arr[:, :, 0], axis=0),
        np.nanmean(arr[:, :, 1], axis=0),
        repeats,
        seed,
        [dict(zip(sample.variables, map(tuple, r))) for r in arr],
    )
