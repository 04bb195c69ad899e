"""Maximum-likelihood fitting with parameter masks, transforms and stages.

Free parameters are selected by name (``fnmatch`` patterns over the names
returned by ``model.params()``), mapped to an unconstrained space, and
optimized with multi-start Nelder-Mead.  Models rejected at construction or
whose covariance is not positive definite on the data design score ``-inf``.
"""

import fnmatch
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logit

from .crosscov import validate_model
from .errors import NumericalError, ParameterError
from .gaussian import loglik

__all__ = [
    "TRANSFORMS",
    "to_unconstrained",
    "from_unconstrained",
    "FitSpec",
    "FitResult",
    "FitPlan",
    "fit_mle",
    "fit_staged",
    "staged_plan",
    "initial_multimatern",
]

logger = logging.getLogger(__name__)

TRANSFORMS = {
    "none": (lambda x: x, lambda z: z),
    "log": (np.log, np.exp),
    "tanh": (np.arctanh, np.tanh),
    "unit": (logit, expit),
    "interval2": (lambda x: logit(x / 2.0), lambda z: 2.0 * expit(z)),
}

STRICT_JITTER = (0.0,)


def to_unconstrained(value, kind):
    with np.errstate(divide="ignore", invalid="ignore"):
        z = TRANSFORMS[kind][0](value)
    return float(z)


def from_unconstrained(z, kind):
    return float(TRANSFORMS[kind][1](z))


@dataclass(frozen=True)
class FitSpec:
    """One optimization stage.

    Attributes
    ----------
    free : tuple of str
        ``fnmatch`` patterns selecting the free parameters; everything else
        stays fixed.
    set : dict
        Values assigned before the stage starts (e.g. ``{"beta_12": 0.0}``).
    transforms : dict
        Per-parameter overrides of the model's default transforms.
    max_evals, starts, xatol, fatol
        Optimizer budget; ``starts`` counts the initial point as the first start.
    check_validity : bool, optional
        Score models failing :func:`~crossfield.crosscov.validate_model` as
        ``-inf``.  By default this is on whenever a cross parameter (``beta_*``,
        ``a_cross``, ``nu_cross``, ``shift_*``) is free, since positive
        definiteness on the data sites alone does not certify the model.
    """

    free: tuple = ()
    set: dict = field(default_factory=dict)
    transforms: dict = field(default_factory=dict)
    max_evals: int = 2000
    starts: int = 5
    xatol: float = 1e-5
    fatol: float = 1e-4
    name: str = ""
    check_validity: bool = None

    def free_names(self, model):
        names = list(model.params())
        return [n for n in names if any(fnmatch.fnmatchcase(n, pat) for pat in self.free)]

    def needs_validity_check(self, names):
        if self.check_validity is not None:
            return self.check_validity
        return any(_is_cross(n) for n in names)


@dataclass
class FitResult:
    model: object
    loglik: float
    report: dict


def _objective(init, names, kinds, sample, counter, validity_seed=None):
    def f(z):
        counter[0] += 1
        vals = {n: from_unconstrained(zi, k) for n, zi, k in zip(names, z, kinds)}
        if not all(np.isfinite(v) for v in vals.values()):
            return np.inf
        try:
            model = init.with_params(vals)
        except ParameterError:
            return np.inf
        ll = loglik(model, sample, jitters=STRICT_JITTER)
        if not np.isfinite(ll):
            return np.inf
        if validity_seed is not None:
            if not validate_model(model, seed=validity_seed, dim=sample.design.d).passed:
                return np.inf
        return -ll

    return f


def _feasible_start(model, names, kinds, sample, validity_seed=None, max_halvings=20):
    """Halve the free correlation parameters until the likelihood is finite.

    With every cross-correlation at zero the multivariate models are block
    diagonal and hence valid, so this terminates for them.
    """
    bounded = [n for n, k in zip(names, kinds) if k == "tanh"]
    if not bounded:
        return model, -np.inf, 0
    params = model.params()
    for k in range(1, max_halvings + 1):
        trial = model.with_params({n: params[n] * 0.5**k for n in bounded})
        ll = loglik(trial, sample, jitters=STRICT_JITTER)
        if np.isfinite(ll) and validity_seed is not None:
            if not validate_model(trial, seed=validity_seed, dim=sample.design.d).passed:
                ll = -np.inf
        if np.isfinite(ll):
            logger.info("infeasible start: correlations halved %d times", k)
            return trial, ll, k
    return model, -np.inf, max_halvings


def fit_mle(spec, sample, init, seed=0, threads=1):
    """Maximize the likelihood over the free parameters of ``init``.

    Returns a :class:`FitResult`; ``report`` records the seed, the number of
    starts and evaluations, each start's log-likelihood and the gap between
    the best and second-best start.  The returned log-likelihood is never
    below that of the starting model.  An infeasible start (``-inf``) has its
    free correlation parameters shrunk toward zero first.
    """
    model0 = init.with_params(spec.set) if spec.set else init
    names = spec.free_names(model0)
    ll0 = loglik(model0, sample, jitters=STRICT_JITTER)
    report = {"stage": spec.name, "seed": seed, "free": names, "starts": 0, "evaluations": 1}
    if not names:
        report.update(start_logliks=[ll0], best_gap=0.0)
        return FitResult(model0, ll0, report)

    defaults = model0.transforms()
    kinds = [spec.transforms.get(n, defaults.get(n, "none")) for n in names]
    validity_seed = seed if spec.needs_validity_check(names) else None
    if validity_seed is not None and np.isfinite(ll0):
        if not validate_model(model0, seed=seed, dim=sample.design.d).passed:
            ll0 = -np.inf
    if not np.isfinite(ll0):
        model0, ll0, shrinks = _feasible_start(model0, names, kinds, sample, validity_seed)
        report["start_shrinks"] = shrinks
    params = model0.params()
    z0 = np.array([to_unconstrained(params[n], k) for n, k in zip(names, kinds)])
    bad = [n for n, z in zip(names, z0) if not np.isfinite(z)]
    if bad:
        raise ParameterError(f"initial values on the boundary of their domain for {bad}")

    children = np.random.SeedSequence(seed).spawn(max(spec.starts, 1))
    starts = [z0] + [
        z0 + np.random.default_rng(c).normal(0.0, 0.5, size=z0.size) for c in children[1:]
    ]

    def run(z_start):
        counter = [0]
        f = _objective(model0, names, kinds, sample, counter, validity_seed)
        with np.errstate(invalid="ignore"):
            res = minimize(
                f,
                z_start,
                method="Nelder-Mead",
                options={
                    "maxfev": spec.max_evals,
                    "xatol": spec.xatol,
                    "fatol": spec.fatol,
                    "adaptive": z0.size > 3,
                },
            )
        return res.x, -float(res.fun), counter[0]

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(run, starts))
    else:
        results = [run(z) for z in starts]

    lls = [r[1] for r in results]
    report["starts"] = len(starts)
    report["evaluations"] = 1 + sum(r[2] for r in results)
    report["start_logliks"] = lls
    ordered = sorted((v for v in lls if np.isfinite(v)), reverse=True)
    if not ordered and not np.isfinite(ll0):
        raise NumericalError(
            f"fit failed: no start produced a finite likelihood (free parameters {names})"
        )
    report["best_gap"] = float(ordered[0] - ordered[1]) if len(ordered) > 1 else 0.0
    best = int(np.argmax(lls))
    if not ordered or lls[best] < ll0:
        report["kept_initial"] = True
        return FitResult(model0, ll0, report)
    vals = {n: from_unconstrained(z, k) for n, z, k in zip(names, results[best][0], kinds)}
    model = model0.with_params(vals)
    return FitResult(model, lls[best], report)


def fit_staged(stages, sample, init, seed=0, threads=1, validate=True):
    """Run stages in order, each starting from the previous stage's fit.

    After every stage the model is certified with
    :func:`~crossfield.crosscov.validate_model`; a failure raises
    :class:`ParameterError` naming the stage.
    """
    model = init
    reports = []
    result = None
    for k, spec in enumerate(stages):
        result = fit_mle(spec, sample, model, seed=seed + k, threads=threads)
        model = result.model
        reports.append(result.report)
        if validate:
            rep = validate_model(model, seed=seed + k, dim=sample.design.d)
            if not rep.passed:
                label = spec.name or f"#{k + 1}"
                raise ParameterError(f"stage {label} produced an invalid model: {rep.summary()}")
    if result is None:
        ll = loglik(init, sample)
        return FitResult(init, ll, {"stages": []})
    return FitResult(model, result.loglik, {"stages": reports, "seed": seed})


_CROSS_KEYS = ("beta_", "a_cross", "nu_cross", "shift_")


def _is_cross(name):
    leaf = name.rsplit(".", 1)[-1]
    return any(leaf.startswith(k) for k in _CROSS_KEYS)


def _is_nugget(name):
    leaf = name.rsplit(".", 1)[-1]
    return leaf.startswith("nugget_") or leaf == "tau"


def staged_plan(model, fit_nuggets=False, fit_nu_cross=False, **budget):
    """Two-stage plan: marginal parameters under independence, then cross parameters.

    Stage 1 sets every collocated correlation ``beta_ij`` to zero and fits the
    marginal parameters.  Stage 2 restores the starting ``beta_ij`` of
    ``model`` and fits the cross parameters with the marginals held fixed.
    ``nu_cross`` stays at its starting value unless ``fit_nu_cross``.
    """
    names = list(model.params())
    betas = [n for n in names if n.rsplit(".", 1)[-1].startswith("beta_")]
    marginal = [n for n in names if not _is_cross(n) and (fit_nuggets or not _is_nugget(n))]
    cross = [
        n
        for n in names
        if _is_cross(n) and (fit_nu_cross or not n.rsplit(".", 1)[-1].startswith("nu_cross"))
    ]
    start = model.params()
    return [
        FitSpec(tuple(marginal), {b: 0.0 for b in betas}, name="marginal", **budget),
        FitSpec(tuple(cross), {b: start[b] for b in betas}, name="cross", **budget),
    ]


@dataclass
class FitPlan:
    """An initial model plus stages; ``fit(sample)`` returns the fitted model."""

    init: object
    stages: list
    seed: int = 0
    threads: int = 1

    def fit(self, sample):
        return fit_staged(self.stages, sample, self.init, seed=self.seed, threads=self.threads).model


def initial_multimatern(sample, variant="parsimonious", nu=0.5):
    """Data-driven starting values.

    Standard deviations from the pooled sample variances, ``1/a`` from a
    quarter of the design diameter, ``nu = 0.5``, and collocated correlations
    from the pooled empirical correlation matrix.
    """
    from .crosscov import MultiMaternModel

    V = sample.values.reshape(-1, sample.p)
    sig = np.sqrt(np.nanmean(V**2, axis=0))
    ok = ~np.isnan(V).any(axis=1)
    corr = np.corrcoef(V[ok].T) if ok.sum() > 2 and sample.p > 1 else np.eye(sample.p)
    corr = np.atleast_2d(corr)
    corr = 0.5 * (corr + corr.T)
    np.fill_diagonal(corr, 1.0)
    a = 4.0 / max(sample.design.diameter(), 1e-12)
    nus = [nu] * sample.p
    if variant == "parsimonious":
        return MultiMaternModel("parsimonious", sig, nus, a, corr)
    if variant == "independent":
        return MultiMaternModel("independent", sig, nus, [a] * sample.p)
    if variant == "full":
        return MultiMaternModel("full", sig, nus, [a] * sample.p, corr, a_cross=a)
    raise ParameterError(f"unknown variant {variant!r}")
