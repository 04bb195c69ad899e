"""Matrix-valued cross-covariance models.

Every model maps a pair of locations to a p x p covariance matrix.  Variables
are indexed from 0.  Joint matrices use site-major, variable-minor ordering:
row ``k * p + i`` holds variable ``i`` at site ``k``.

Families
--------
SeparableModel        rho(h) R_ij
LMCModel              sum_k rho_k(h) A_ik A_jk
MultiMaternModel      parsimonious, full bivariate and independent Matérn
LatentDimModel        variables as points in a latent space (exponential form)
MultiAskeyModel       compactly supported multivariate Askey model
AsymShiftWrapper      C_ij(h + a_i - a_j)
VarianceScaleWrapper  sigma_i(s1) sigma_j(s2) C_ij(s1, s2)
TaperWrapper          Schur product with an Askey taper
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import special
from scipy.spatial import cKDTree

from . import kernels
from .errors import ParameterError
from .kernels import AskeyParams, distances

__all__ = [
    "CrossCovModel",
    "SeparableModel",
    "LMCModel",
    "MultiMaternModel",
    "LatentDimModel",
    "MultiAskeyModel",
    "AsymShiftWrapper",
    "VarianceScaleWrapper",
    "TaperWrapper",
    "GriddedField",
    "ValidityReport",
    "eval_cross_cov",
    "make_separable",
    "make_lmc",
    "make_multimatern",
    "make_independent_matern",
    "make_latentdim",
    "asymmetrize",
    "validate_model",
]

PSD_RTOL = 1e-8


def _frozen_array(x, ndim=None, name="array"):
    arr = np.array(x, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise ParameterError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


def _coords(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    return X


def _prefixed(prefix, d):
    return {f"{prefix}.{k}": v for k, v in d.items()}


def _strip(prefix, d):
    n = len(prefix) + 1
    return {k[n:]: v for k, v in d.items() if k.startswith(prefix + ".")}


class CrossCovModel:
    """Common interface of all cross-covariance models.

    Subclasses provide either ``iso_blocks(R)`` (isotropic models, evaluated on a
    distance matrix) or override ``cross_matrix``.
    """

    family = "abstract"
    stationary = True
    isotropic = True
    dim = None

    @property
    def p(self):
        raise NotImplementedError

    def nugget_variances(self):
        return np.zeros(self.p)

    def length_scale(self):
        raise NotImplementedError

    def iso_blocks(self, R):
        """Return an array of shape (p, p, n1, n2) of smooth (nugget-free) blocks."""
        raise NotImplementedError

    def _assemble(self, blocks):
        p = self.p
        n1, n2 = blocks.shape[2:]
        return blocks.transpose(2, 0, 3, 1).reshape(n1 * p, n2 * p)

    def _add_nugget(self, out, X1, X2):
        nug = self.nugget_variances()
        if not np.any(nug):
            return out
        same = np.all(X1[:, None, :] == X2[None, :, :], axis=2)
        if not same.any():
            return out
        p = self.p
        for i in range(p):
            if nug[i]:
                out[i::p, i::p] += nug[i] * same
        return out

    def cross_matrix(self, X1, X2, nugget=True):
        """Covariance between all (site, variable) pairs of two designs.

        Returns an array of shape ``(n1 * p, n2 * p)``.  The nugget term is added
        where coordinates coincide exactly unless ``nugget`` is False.
        """
        X1, X2 = _coords(X1), _coords(X2)
        self._check_dim(X1.shape[1])
        out = self._assemble(self.iso_blocks(distances(X1, X2)))
        if nugget:
            out = self._add_nugget(out, X1, X2)
        return out

    def joint_matrix(self, X1, X2, T1=None, T2=None, nugget=True):
        return self.cross_matrix(X1, X2, nugget=nugget)

    def _check_dim(self, d):
        if self.dim is not None and d != self.dim:
            raise ParameterError(f"model is defined in {self.dim} dimensions, got {d}-d locations")

    # parameter interface used by the estimators
    def params(self):
        return {}

    def transforms(self):
        return {}

    def with_params(self, values):
        return self


def eval_cross_cov(model, i, j, s1, s2):
    """Evaluate ``C_ij(s1, s2)`` for 0-based variable indices ``i`` and ``j``."""
    p = model.p
    for idx in (i, j):
        if not (0 <= idx < p):
            raise ParameterError(f"variable index {idx} out of range for p={p}")
    s1 = np.atleast_1d(np.asarray(s1, dtype=float))
    s2 = np.atleast_1d(np.asarray(s2, dtype=float))
    if s1.shape != s2.shape:
        raise ParameterError(f"dimension mismatch: {s1.shape} versus {s2.shape}")
    return float(model.cross_matrix(s1[None, :], s2[None, :])[i, j])


def _check_psd(M, name):
    M = np.asarray(M, dtype=float)
    if M.shape[0] != M.shape[1]:
        raise ParameterError(f"{name} must be square")
    scale = max(np.max(np.abs(M)), 1e-300)
    if np.max(np.abs(M - M.T)) > 1e-12 * scale:
        raise ParameterError(f"{name} must be symmetric")
    ev = np.linalg.eigvalsh(M)
    if ev[0] < -1e-10 * max(np.trace(M), 1e-300):
        raise ParameterError(f"{name} is not nonnegative definite (min eigenvalue {ev[0]:.3g})")


def _nuggets(nuggets, p):
    if nuggets is None:
        return _frozen_array(np.zeros(p), 1, "nuggets")
    arr = _frozen_array(nuggets, 1, "nuggets")
    if arr.shape != (p,):
        raise ParameterError(f"nuggets must have length {p}")
    if np.any(arr < 0):
        raise ParameterError("nugget variances must be nonnegative")
    return arr


def _nugget_params(nuggets):
    return {f"nugget_{i + 1}": float(v) for i, v in enumerate(nuggets)}


def _apply_nuggets(nuggets, values):
    return [values.get(f"nugget_{i + 1}", v) for i, v in enumerate(nuggets)]


# ---------------------------------------------------------------------------
# Separable


@dataclass(frozen=True, eq=False)
class SeparableModel(CrossCovModel):
    """``C_ij(h) = rho(h) R_ij`` with a single correlation shared by all pairs."""

    rho: object
    R: np.ndarray
    nuggets: np.ndarray = None

    family = "separable"

    def __post_init__(self):
        R = _frozen_array(self.R, 2, "R")
        _check_psd(R, "R")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "nuggets", _nuggets(self.nuggets, R.shape[0]))

    @property
    def p(self):
        return self.R.shape[0]

    def nugget_variances(self):
        return self.nuggets

    def length_scale(self):
        return self.rho.length_scale

    def iso_blocks(self, R):
        return self.R[:, :, None, None] * self.rho(R)[None, None]

    def params(self):
        out = _prefixed("rho", self.rho.params())
        p = self.p
        for i in range(p):
            for j in range(i, p):
                out[f"R_{i + 1}{j + 1}"] = float(self.R[i, j])
        out.update(_nugget_params(self.nuggets))
        return out

    def transforms(self):
        out = _prefixed("rho", self.rho.transforms())
        for name in self.params():
            if name.startswith("R_"):
                out[name] = "none"
            elif name.startswith("nugget_"):
                out[name] = "log"
        return out

    def with_params(self, values):
        p = self.p
        R = np.array(self.R)
        for i in range(p):
            for j in range(i, p):
                R[i, j] = R[j, i] = values.get(f"R_{i + 1}{j + 1}", R[i, j])
        return SeparableModel(
            self.rho.with_params(_strip("rho", values)), R, _apply_nuggets(self.nuggets, values)
        )


def make_separable(rho, R, nuggets=None):
    return SeparableModel(rho, R, nuggets)


# ---------------------------------------------------------------------------
# Linear model of coregionalization


@dataclass(frozen=True, eq=False)
class LMCModel(CrossCovModel):
    """``C_ij(h) = sum_k rho_k(h) A_ik A_jk`` for a p x r loading matrix ``A``."""

    rhos: tuple
    A: np.ndarray
    nuggets: np.ndarray = None

    family = "lmc"

    def __post_init__(self):
        A = _frozen_array(self.A, 2, "A")
        p, r = A.shape
        rhos = tuple(self.rhos)
        if not (1 <= r <= p):
            raise ParameterError(f"LMC needs 1 <= r <= p, got r={r}, p={p}")
        if len(rhos) != r:
            raise ParameterError(f"LMC has {r} loading columns but {len(rhos)} correlations")
        if np.linalg.matrix_rank(A) < r:
            raise ParameterError("LMC loading matrix A must have full column rank")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "rhos", rhos)
        object.__setattr__(self, "nuggets", _nuggets(self.nuggets, p))

    @property
    def p(self):
        return self.A.shape[0]

    def nugget_variances(self):
        return self.nuggets

    def length_scale(self):
        return max(rho.length_scale for rho in self.rhos)

    def iso_blocks(self, R):
        out = np.zeros((self.p, self.p) + R.shape)
        for k, rho in enumerate(self.rhos):
            a = self.A[:, k]
            out += np.outer(a, a)[:, :, None, None] * rho(R)[None, None]
        return out

    def params(self):
        out = {}
        for k, rho in enumerate(self.rhos):
            out.update(_prefixed(f"rho_{k + 1}", rho.params()))
        p, r = self.A.shape
        for i in range(p):
            for k in range(r):
                out[f"A_{i + 1}{k + 1}"] = float(self.A[i, k])
        out.update(_nugget_params(self.nuggets))
        return out

    def transforms(self):
        out = {}
        for k, rho in enumerate(self.rhos):
            out.update(_prefixed(f"rho_{k + 1}", rho.transforms()))
        for name in self.params():
            if name.startswith("A_"):
                out[name] = "none"
            elif name.startswith("nugget_"):
                out[name] = "log"
        return out

    def with_params(self, values):
        A = np.array(self.A)
        p, r = A.shape
        for i in range(p):
            for k in range(r):
                A[i, k] = values.get(f"A_{i + 1}{k + 1}", A[i, k])
        rhos = [rho.with_params(_strip(f"rho_{k + 1}", values)) for k, rho in enumerate(self.rhos)]
        return LMCModel(tuple(rhos), A, _apply_nuggets(self.nuggets, values))


def make_lmc(rhos, A, nuggets=None):
    return LMCModel(tuple(rhos), A, nuggets)


# ---------------------------------------------------------------------------
# Multivariate Matérn


@dataclass(frozen=True, eq=False)
class MultiMaternModel(CrossCovModel):
    """Multivariate Matérn covariance.

    ``C_ii(h) = sigma_i^2 M(h | nu_i, a_i)`` and
    ``C_ij(h) = beta_ij sigma_i sigma_j M(h | nu_ij, a_ij)``.

    Variants
    --------
    ``parsimonious``
        One shared inverse scale ``a`` and ``nu_ij = (nu_i + nu_j) / 2``.
    ``full``
        Bivariate only; separate ``a_1, a_2``, a cross scale ``a_cross`` and a
        cross smoothness ``nu_cross`` (defaults to the mean of the marginals).
    ``independent``
        Separate marginal scales and ``beta = I``.
    """

    variant: str
    sigmas: np.ndarray
    nus: np.ndarray
    a: np.ndarray
    beta: np.ndarray = None
    a_cross: float = None
    nu_cross: float = None
    nuggets: np.ndarray = None

    family = "multimatern"

    def __post_init__(self):
        if self.variant not in ("parsimonious", "full", "independent"):
            raise ParameterError(f"unknown multivariate Matern variant {self.variant!r}")
        sigmas = _frozen_array(self.sigmas, 1, "sigmas")
        nus = _frozen_array(self.nus, 1, "nus")
        p = sigmas.size
        if nus.shape != (p,):
            raise ParameterError(f"nus must have length {p}")
        if np.any(sigmas <= 0):
            raise ParameterError("marginal standard deviations must be positive")
        if np.any(nus <= 0):
            raise ParameterError("smoothness parameters must be positive")
        a = np.atleast_1d(np.array(self.a, dtype=float))
        if self.variant == "parsimonious":
            if a.size != 1:
                raise ParameterError("parsimonious Matern takes a single shared inverse scale a")
        elif a.shape != (p,):
            raise ParameterError(f"{self.variant} Matern needs {p} marginal inverse scales")
        if np.any(a <= 0) or not np.all(np.isfinite(a)):
            raise ParameterError("inverse scales must be positive")
        if self.variant == "independent" or self.beta is None:
            beta = np.eye(p)
        else:
            beta = np.array(self.beta, dtype=float)
            if beta.shape != (p, p):
                raise ParameterError(f"beta must be {p}x{p}")
            if np.max(np.abs(beta - beta.T)) > 0:
                raise ParameterError("beta must be symmetric")
            if np.any(np.diag(beta) != 1):
                raise ParameterError("beta must have unit diagonal")
            if not np.all(np.isfinite(beta)):
                raise ParameterError("beta has non-finite entries")
        if self.variant == "full":
            if p != 2:
                raise ParameterError("the full bivariate Matern is restricted to p=2")
            if self.a_cross is None or not (self.a_cross > 0):
                raise ParameterError("full bivariate Matern needs a positive a_cross")
            nu_cross = float(nus.mean()) if self.nu_cross is None else float(self.nu_cross)
            if not nu_cross > 0:
                raise ParameterError("nu_cross must be positive")
            object.__setattr__(self, "nu_cross", nu_cross)
            object.__setattr__(self, "a_cross", float(self.a_cross))
        else:
            if self.a_cross is not None or self.nu_cross is not None:
                raise ParameterError("a_cross/nu_cross only apply to the full variant")
        a.setflags(write=False)
        beta.setflags(write=False)
        object.__setattr__(self, "sigmas", sigmas)
        object.__setattr__(self, "nus", nus)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "nuggets", _nuggets(self.nuggets, p))

    @property
    def p(self):
        return self.sigmas.size

    def nugget_variances(self):
        return self.nuggets

    def marginal_a(self, i):
        return float(self.a[0] if self.variant == "parsimonious" else self.a[i])

    def pair(self, i, j):
        """Return ``(nu_ij, a_ij, beta_ij)`` for a variable pair."""
        if i == j:
            return float(self.nus[i]), self.marginal_a(i), 1.0
        if self.variant == "full":
            return self.nu_cross, self.a_cross, float(self.beta[i, j])
        nu = 0.5 * (self.nus[i] + self.nus[j])
        a = self.marginal_a(i) if self.variant == "parsimonious" else np.sqrt(
            self.marginal_a(i) * self.marginal_a(j)
        )
        return float(nu), float(a), float(self.beta[i, j])

    def length_scale(self):
        return 1.0 / float(np.min(self.a))

    def iso_blocks(self, R):
        p = self.p
        out = np.zeros((p, p) + R.shape)
        cache = {}
        for i in range(p):
            for j in range(i, p):
                nu, a, b = self.pair(i, j)
                if b == 0.0:
                    continue
                key = (nu, a)
                if key not in cache:
                    cache[key] = kernels.matern(R, nu, a)
                out[i, j] = b * self.sigmas[i] * self.sigmas[j] * cache[key]
                if i != j:
                    out[j, i] = out[i, j]
        return out

    def params(self):
        p = self.p
        out = {f"sigma_{i + 1}": float(self.sigmas[i]) for i in range(p)}
        out.update({f"nu_{i + 1}": float(self.nus[i]) for i in range(p)})
        if self.variant == "parsimonious":
            out["a"] = float(self.a[0])
        else:
            out.update({f"a_{i + 1}": float(self.a[i]) for i in range(p)})
        if self.variant != "independent":
            for i in range(p):
                for j in range(i + 1, p):
                    out[f"beta_{i + 1}{j + 1}"] = float(self.beta[i, j])
        if self.variant == "full":
            out["a_cross"] = self.a_cross
            out["nu_cross"] = self.nu_cross
        out.update(_nugget_params(self.nuggets))
        return out

    def transforms(self):
        return {k: ("tanh" if k.startswith("beta_") else "log") for k in self.params()}

    def with_params(self, values):
        p = self.p
        sigmas = [values.get(f"sigma_{i + 1}", self.sigmas[i]) for i in range(p)]
        nus = [values.get(f"nu_{i + 1}", self.nus[i]) for i in range(p)]
        if self.variant == "parsimonious":
            a = [values.get("a", self.a[0])]
        else:
            a = [values.get(f"a_{i + 1}", self.a[i]) for i in range(p)]
        beta = np.array(self.beta)
        for i in range(p):
            for j in range(i + 1, p):
                beta[i, j] = beta[j, i] = values.get(f"beta_{i + 1}{j + 1}", beta[i, j])
        kw = {}
        if self.variant == "full":
            kw = dict(
                a_cross=values.get("a_cross", self.a_cross),
                nu_cross=values.get("nu_cross", self.nu_cross),
            )
        return MultiMaternModel(
            self.variant, sigmas, nus, a, beta, nuggets=_apply_nuggets(self.nuggets, values), **kw
        )


def make_multimatern(
    variant,
    sigmas,
    nus,
    a,
    beta=None,
    a_cross=None,
    nu_cross=None,
    nuggets=None,
    validate=True,
    seed=0,
):
    """Build a multivariate Matérn model and certify it numerically.

    The model is assembled on randomized designs (see :func:`validate_model`)
    and rejected with :class:`ParameterError` if any joint matrix is indefinite.
    """
    model = MultiMaternModel(variant, sigmas, nus, a, beta, a_cross, nu_cross, nuggets)
    if validate and model.variant != "independent":
        report = validate_model(model, seed=seed)
        if not report.passed:
            raise ParameterError(
                "multivariate Matern parameters fail the nonnegative-definiteness check: "
                + report.summary()
            )
    return model


def make_independent_matern(sigmas, nus, a, nuggets=None):
    return MultiMaternModel("independent", sigmas, nus, a, nuggets=nuggets)


# ---------------------------------------------------------------------------
# Latent dimensions


@dataclass(frozen=True, eq=False)
class LatentDimModel(CrossCovModel):
    """Latent-dimension cross-covariance with exponential spatial decay.

    ``C_ij(h) = sigma_i sigma_j / (D + 1) * exp(-alpha |h| / (D + 1)^(beta/2))
    + tau^2 [i = j][h = 0]`` where ``D = |xi_i - xi_j|``.

    With the displayed ``1/(D+1)`` prefactor the construction is a valid
    Gneiting-type covariance whenever ``beta * d / 2 <= 1``; for planar data
    this is the whole range ``0 <= beta <= 1``.
    """

    xis: np.ndarray
    sigmas: np.ndarray
    tau: float
    alpha: float
    beta_sep: float

    family = "latentdim"

    def __post_init__(self):
        xis = _frozen_array(np.atleast_2d(self.xis), 2, "xis")
        sigmas = _frozen_array(self.sigmas, 1, "sigmas")
        p, k = xis.shape
        if sigmas.shape != (p,):
            raise ParameterError(f"sigmas must have length {p}")
        if k > p:
            raise ParameterError(f"latent dimension k={k} exceeds p={p}")
        if np.any(sigmas <= 0):
            raise ParameterError("sigmas must be positive")
        if not (self.tau >= 0):
            raise ParameterError("nugget standard deviation tau must be nonnegative")
        if not (self.alpha > 0):
            raise ParameterError("alpha must be positive")
        if not (0 <= self.beta_sep <= 1):
            raise ParameterError(f"beta_sep must lie in [0, 1], got {self.beta_sep}")
        object.__setattr__(self, "xis", xis)
        object.__setattr__(self, "sigmas", sigmas)
        object.__setattr__(self, "tau", float(self.tau))
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "beta_sep", float(self.beta_sep))

    @property
    def p(self):
        return self.sigmas.size

    def nugget_variances(self):
        return np.full(self.p, self.tau**2)

    def length_scale(self):
        return 1.0 / self.alpha

    def iso_blocks(self, R):
        D = distances(self.xis, self.xis) + 1.0
        ss = np.outer(self.sigmas, self.sigmas)
        amp = (ss / D)[:, :, None, None]
        rate = (self.alpha / D ** (self.beta_sep / 2))[:, :, None, None]
        return amp * np.exp(-rate * R[None, None])

    def params(self):
        p, k = self.xis.shape
        out = {f"xi_{i + 1}_{m + 1}": float(self.xis[i, m]) for i in range(p) for m in range(k)}
        out.update({f"sigma_{i + 1}": float(self.sigmas[i]) for i in range(p)})
        out.update(tau=self.tau, alpha=self.alpha, beta_sep=self.beta_sep)
        return out

    def transforms(self):
        out = {}
        for k in self.params():
            if k.startswith("xi_"):
                out[k] = "none"
            elif k == "beta_sep":
                out[k] = "unit"
            else:
                out[k] = "log"
        return out

    def with_params(self, values):
        p, k = self.xis.shape
        xis = np.array(self.xis)
        for i in range(p):
            for m in range(k):
                xis[i, m] = values.get(f"xi_{i + 1}_{m + 1}", xis[i, m])
        sigmas = [values.get(f"sigma_{i + 1}", self.sigmas[i]) for i in range(p)]
        return LatentDimModel(
            xis,
            sigmas,
            values.get("tau", self.tau),
            values.get("alpha", self.alpha),
            values.get("beta_sep", self.beta_sep),
        )


def make_latentdim(xis, sigmas, tau, alpha, beta_sep):
    return LatentDimModel(xis, sigmas, tau, alpha, beta_sep)


# ---------------------------------------------------------------------------
# Multivariate Askey


@dataclass(frozen=True, eq=False)
class MultiAskeyModel(CrossCovModel):
    """Compactly supported multivariate Askey model.

    The raw construction has ``C_ij(h) = b^(nu+1) B(gamma_ij + 1, nu + 1)
    (1 - |h|/b)_+^(nu + gamma_ij + 1)`` with ``gamma_ij = (gamma_i + gamma_j)/2``.
    Here each entry is divided by ``sqrt(amp_ii amp_jj)`` so that the marginal
    correlations equal one at the origin, then scaled by ``sigma_i sigma_j``.
    :meth:`raw_amplitude` returns the unnormalized amplitude.
    """

    b: float
    nu: float
    gammas: np.ndarray
    sigmas: np.ndarray

    family = "multiaskey"

    def __post_init__(self):
        gammas = _frozen_array(self.gammas, 1, "gammas")
        sigmas = _frozen_array(self.sigmas, 1, "sigmas")
        if gammas.shape != sigmas.shape:
            raise ParameterError("gammas and sigmas must have equal length")
        if not self.b > 0:
            raise ParameterError("support radius b must be positive")
        if np.any(gammas <= 0):
            raise ParameterError("gamma_i must be positive")
        if np.any(sigmas <= 0):
            raise ParameterError("sigmas must be positive")
        object.__setattr__(self, "gammas", gammas)
        object.__setattr__(self, "sigmas", sigmas)
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "nu", float(self.nu))

    @property
    def p(self):
        return self.sigmas.size

    def _check_dim(self, d):
        if self.nu < (d + 1) / 2:
            raise ParameterError(f"Askey exponent nu={self.nu} needs nu >= (d+1)/2 = {(d + 1) / 2}")

    def gamma(self, i, j):
        return 0.5 * (self.gammas[i] + self.gammas[j])

    def raw_amplitude(self, i, j):
        return self.b ** (self.nu + 1) * special.beta(self.gamma(i, j) + 1, self.nu + 1)

    def length_scale(self):
        return self.b

    def iso_blocks(self, R):
        p = self.p
        t = np.clip(1.0 - R / self.b, 0.0, None)
        out = np.empty((p, p) + R.shape)
        logB = lambda g: special.betaln(g + 1, self.nu + 1)
        for i in range(p):
            for j in range(i, p):
                g = self.gamma(i, j)
                norm = np.exp(logB(g) - 0.5 * (logB(self.gammas[i]) + logB(self.gammas[j])))
                out[i, j] = self.sigmas[i] * self.sigmas[j] * norm * t ** (self.nu + g + 1)
                out[j, i] = out[i, j]
        return out

    def params(self):
        out = {"b": self.b, "nu": self.nu}
        out.update({f"gamma_{i + 1}": float(g) for i, g in enumerate(self.gammas)})
        out.update({f"sigma_{i + 1}": float(s) for i, s in enumerate(self.sigmas)})
        return out

    def transforms(self):
        return {k: "log" for k in self.params()}

    def with_params(self, values):
        p = self.p
        return MultiAskeyModel(
            values.get("b", self.b),
            values.get("nu", self.nu),
            [values.get(f"gamma_{i + 1}", self.gammas[i]) for i in range(p)],
            [values.get(f"sigma_{i + 1}", self.sigmas[i]) for i in range(p)],
        )


# ---------------------------------------------------------------------------
# Wrappers


@dataclass(frozen=True, eq=False)
class AsymShiftWrapper(CrossCovModel):
    """Asymmetric version ``C_ij(h + a_i - a_j)`` of a stationary base model.

    The first shift is pinned to zero for identifiability.
    """

    base: CrossCovModel
    shifts: np.ndarray

    family = "asym_shift"
    isotropic = False

    def __post_init__(self):
        if not self.base.stationary:
            raise ParameterError("shift asymmetrization requires a stationary base model")
        shifts = _frozen_array(np.atleast_2d(self.shifts), 2, "shifts")
        if shifts.shape[0] != self.base.p:
            raise ParameterError(f"need one shift per variable ({self.base.p}), got {shifts.shape[0]}")
        if np.any(shifts[0] != 0):
            raise ParameterError("the first shift must be zero (identifiability constraint)")
        if self.base.dim is not None and shifts.shape[1] != self.base.dim:
            raise ParameterError("shift dimension does not match the base model")
        object.__setattr__(self, "shifts", shifts)

    @property
    def p(self):
        return self.base.p

    @property
    def dim(self):
        return self.shifts.shape[1]

    def nugget_variances(self):
        return self.base.nugget_variances()

    def length_scale(self):
        return self.base.length_scale() + float(np.max(np.linalg.norm(self.shifts, axis=1)))

    def cross_matrix(self, X1, X2, nugget=True):
        X1, X2 = _coords(X1), _coords(X2)
        self._check_dim(X1.shape[1])
        self._check_dim(X2.shape[1])
        p = self.p
        out = np.empty((X1.shape[0] * p, X2.shape[0] * p))
        for i in range(p):
            for j in range(p):
                full = self.base.cross_matrix(X1 + self.shifts[i], X2 + self.shifts[j], nugget=False)
                out[i::p, j::p] = full[i::p, j::p]
        if nugget:
            out = self._add_nugget(out, X1, X2)
        return out

    def params(self):
        out = _prefixed("base", self.base.params())
        p, d = self.shifts.shape
        for i in range(1, p):
            for m in range(d):
                out[f"shift_{i + 1}_{m + 1}"] = float(self.shifts[i, m])
        return out

    def transforms(self):
        out = _prefixed("base", self.base.transforms())
        out.update({k: "none" for k in self.params() if k.startswith("shift_")})
        return out

    def with_params(self, values):
        shifts = np.array(self.shifts)
        p, d = shifts.shape
        for i in range(1, p):
            for m in range(d):
                shifts[i, m] = values.get(f"shift_{i + 1}_{m + 1}", shifts[i, m])
        return AsymShiftWrapper(self.base.with_params(_strip("base", values)), shifts)


def asymmetrize(base, shifts):
    return AsymShiftWrapper(base, shifts)


@dataclass(frozen=True, eq=False)
class GriddedField:
    """Positive surface given by values at sites; evaluates by nearest site."""

    sites: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        sites = _frozen_array(np.atleast_2d(self.sites), 2, "sites")
        values = _frozen_array(self.values, 1, "values")
        if values.shape[0] != sites.shape[0]:
            raise ParameterError("one value per site required")
        if np.any(values <= 0):
            raise ParameterError("standard-deviation surfaces must be strictly positive")
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_tree", cKDTree(sites))

    def __call__(self, X):
        _, idx = self._tree.query(_coords(X))
        return self.values[idx]


@dataclass(frozen=True, eq=False)
class VarianceScaleWrapper(CrossCovModel):
    """Nonstationary scaling ``sigma_i(s1) sigma_j(s2) C_ij(s1, s2)`` of a correlation model."""

    base: CrossCovModel
    sigma_fields: tuple

    family = "variance_scale"
    stationary = False
    isotropic = False

    def __post_init__(self):
        fields = tuple(self.sigma_fields)
        if len(fields) != self.base.p:
            raise ParameterError(f"need {self.base.p} standard-deviation surfaces, got {len(fields)}")
        object.__setattr__(self, "sigma_fields", fields)

    @property
    def p(self):
        return self.base.p

    @property
    def dim(self):
        return self.base.dim

    def nugget_variances(self):
        return self.base.nugget_variances()

    def length_scale(self):
        return self.base.length_scale()

    def _scales(self, X):
        S = np.column_stack([np.asarray(f(X), dtype=float) for f in self.sigma_fields])
        if np.any(~(S > 0)):
            raise ParameterError("standard-deviation surface is not strictly positive at a site")
        return S.reshape(-1)

    def cross_matrix(self, X1, X2, nugget=True):
        X1, X2 = _coords(X1), _coords(X2)
        base = self.base.cross_matrix(X1, X2, nugget=nugget)
        return self._scales(X1)[:, None] * base * self._scales(X2)[None, :]

    def params(self):
        return _prefixed("base", self.base.params())

    def transforms(self):
        return _prefixed("base", self.base.transforms())

    def with_params(self, values):
        return VarianceScaleWrapper(self.base.with_params(_strip("base", values)), self.sigma_fields)


@dataclass(frozen=True, eq=False)
class TaperWrapper(CrossCovModel):
    """Schur product of a base model with an Askey taper ``(1 - |h|/b)_+^mu``."""

    base: CrossCovModel
    taper: AskeyParams

    family = "taper"
    isotropic = False

    @property
    def p(self):
        return self.base.p

    @property
    def stationary(self):
        return self.base.stationary

    @property
    def dim(self):
        return self.base.dim

    def nugget_variances(self):
        return self.base.nugget_variances()

    def length_scale(self):
        return min(self.base.length_scale(), self.taper.b)

    def cross_matrix(self, X1, X2, nugget=True):
        X1, X2 = _coords(X1), _coords(X2)
        self.taper.check_dim(X1.shape[1])
        T = kernels.askey_corr(distances(X1, X2), self.taper)
        base = self.base.cross_matrix(X1, X2, nugget=nugget)
        return base * np.repeat(np.repeat(T, self.p, axis=0), self.p, axis=1)

    def params(self):
        return _prefixed("base", self.base.params())

    def transforms(self):
        return _prefixed("base", self.base.transforms())

    def with_params(self, values):
        return TaperWrapper(self.base.with_params(_strip("base", values)), self.taper)


# ---------------------------------------------------------------------------
# Validity certification


@dataclass
class ValidityReport:
    """Outcome of a randomized nonnegative-definiteness check.

    ``trials`` holds one record per design with keys ``n``, ``min_eig``,
    ``trace``, ``threshold`` and ``passed``.
    """

    passed: bool
    min_ratio: float
    trials: list = field(default_factory=list)

    def summary(self):
        worst = min(self.trials, key=lambda t: t["min_eig"] / max(t["trace"], 1e-300))
        status = "pass" if self.passed else "FAIL"
        return (
            f"{status}: {len(self.trials)} designs, worst min-eigenvalue {worst['min_eig']:.4g} "
            f"(threshold {worst['threshold']:.4g}, n={worst['n']}); "
            f"min eig / mean diagonal = {self.min_ratio:.4g}"
        )


def psd_check(S, tol=PSD_RTOL):
    """Return ``(passed, min_eig, trace, threshold)`` for a symmetric matrix."""
    S = 0.5 * (S + S.T)
    ev = np.linalg.eigvalsh(S)
    tr = float(np.trace(S))
    threshold = -tol * tr / S.shape[0]
    return bool(ev[0] >= threshold), float(ev[0]), tr, threshold


def random_design(rng, n, dim, extent):
    """Uniform random sites in a cube of side ``extent``."""
    return rng.uniform(0.0, extent, size=(n, dim))


def validate_model(model, design_sizes=(8, 30), trials=3, seed=0, dim=None, tol=PSD_RTOL):
    """Certify a model numerically on randomized designs.

    For each trial and design size the joint covariance matrix is assembled on
    uniform random sites in a cube whose side is drawn log-uniformly between
    0.1 and 4 model length scales.  The model passes iff every matrix has
    ``min eigenvalue >= -tol * trace / (n p)``.
    """
    if trials < 1:
        raise ParameterError("trials must be at least 1")
    rng = np.random.default_rng(seed)
    d = dim or getattr(model, "dim", None) or 2
    scale = model.length_scale()
    records = []
    passed = True
    min_ratio = np.inf
    time_scale = getattr(model, "time_scale", None)
    for _ in range(trials):
        for n in design_sizes:
            extent = scale * np.exp(rng.uniform(np.log(0.1), np.log(4.0)))
            X = random_design(rng, n, d, extent)
            T = rng.uniform(0.0, extent * time_scale() / scale, size=n) if time_scale else None
            S = model.joint_matrix(X, X, T, T)
            ok, me, tr, thr = psd_check(S, tol)
            records.append({"n": n, "min_eig": me, "trace": tr, "threshold": thr, "passed": ok})
            passed &= ok
            min_ratio = min(min_ratio, me / (tr / S.shape[0]) if tr > 0 else 0.0)
    return ValidityReport(passed, float(min_ratio), records)
