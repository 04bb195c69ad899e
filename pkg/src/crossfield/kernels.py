"""Univariate correlation functions and smoothing kernels.

Every function here accepts a scalar or an array of nonnegative distances and
returns an array of the same shape (a Python float for scalar input).
Values below ``UNDERFLOW`` are flushed to exactly zero.
"""

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import ParameterError

__all__ = [
    "UNDERFLOW",
    "MaternParams",
    "PoweredExpParams",
    "AskeyParams",
    "matern",
    "matern_corr",
    "powered_exp_corr",
    "askey_corr",
    "smoothing_kernel",
    "distances",
]

UNDERFLOW = 1e-300

# Above this many entries, evaluate on unique distances only (gridded designs
# repeat distances heavily).
_UNIQUE_THRESHOLD = 2048


def _as_distance(r):
    arr = np.asarray(r, dtype=float)
    if np.any(np.isnan(arr)):
        raise ParameterError("distance contains NaN")
    if np.any(arr < 0):
        raise ParameterError("distance must be nonnegative")
    return arr


def _finish(out, scalar):
    out[out < UNDERFLOW] = 0.0
    return float(out.reshape(-1)[0]) if scalar else out


def distances(X1, X2):
    """Euclidean distance matrix between two coordinate arrays of shape (n, d)."""
    X1 = np.atleast_2d(np.asarray(X1, dtype=float))
    X2 = np.atleast_2d(np.asarray(X2, dtype=float))
    if X1.shape[1] != X2.shape[1]:
        raise ParameterError(
            f"dimension mismatch: {X1.shape[1]}-d versus {X2.shape[1]}-d locations"
        )
    diff = X1[:, None, :] - X2[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def _matern_positive(x, nu):
    # log-space evaluation of 2^(1-nu)/Gamma(nu) x^nu K_nu(x) for x > 0
    kve = special.kve(nu, x)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        logm = (1.0 - nu) * np.log(2.0) - special.gammaln(nu) + nu * np.log(x) + np.log(kve) - x
        out = np.exp(logm)
    # K_nu overflows for tiny x and large nu; use the leading small-argument terms
    bad = ~np.isfinite(out)
    if np.any(bad):
        xb = x[bad]
        if nu > 1:
            out[bad] = 1.0 - xb**2 / (4.0 * (nu - 1.0))
        else:
            out[bad] = 1.0
    return np.minimum(out, 1.0)


def matern(r, nu, a):
    """Matérn correlation ``2^(1-nu)/Gamma(nu) (a r)^nu K_nu(a r)``.

    Parameters
    ----------
    r : float or array_like
        Nonnegative distances.
    nu : float
        Smoothness, ``nu > 0``.
    a : float
        Inverse length scale, ``a > 0``.
    """
    if not (nu > 0 and np.isfinite(nu)):
        raise ParameterError(f"Matern smoothness nu must be positive, got {nu}")
    if not (a > 0 and np.isfinite(a)):
        raise ParameterError(f"Matern inverse scale a must be positive, got {a}")
    r = _as_distance(r)
    scalar = r.ndim == 0
    x = np.atleast_1d(a * r)
    out = np.ones(x.shape)
    pos = x > 0
    if np.any(pos):
        xp = x[pos]
        if xp.size > _UNIQUE_THRESHOLD:
            uniq, inv = np.unique(xp, return_inverse=True)
            out[pos] = _matern_positive(uniq, nu)[inv]
        else:
            out[pos] = _matern_positive(xp, nu)
    return _finish(out.reshape(r.shape) if not scalar else out[0:1], scalar)


@dataclass(frozen=True)
class MaternParams:
    """Matérn correlation with smoothness ``nu`` and inverse length scale ``a``."""

    nu: float
    a: float

    def __post_init__(self):
        if not (self.nu > 0):
            raise ParameterError(f"nu must be positive, got {self.nu}")
        if not (self.a > 0):
            raise ParameterError(f"a must be positive, got {self.a}")

    def __call__(self, r):
        return matern(r, self.nu, self.a)

    @property
    def length_scale(self):
        return 1.0 / self.a

    def params(self):
        return {"nu": self.nu, "a": self.a}

    def transforms(self):
        return {"nu": "log", "a": "log"}

    def with_params(self, values):
        return MaternParams(values.get("nu", self.nu), values.get("a", self.a))


def matern_corr(r, p):
    """Matérn correlation for a :class:`MaternParams` record."""
    return matern(r, p.nu, p.a)


@dataclass(frozen=True)
class PoweredExpParams:
    """Powered exponential correlation ``exp{-(r/phi)^kappa}``, ``0 < kappa <= 2``."""

    phi: float
    kappa: float

    def __post_init__(self):
        if not (self.phi > 0):
            raise ParameterError(f"phi must be positive, got {self.phi}")
        if not (0 < self.kappa <= 2):
            raise ParameterError(f"kappa must lie in (0, 2], got {self.kappa}")

    def __call__(self, r):
        return powered_exp_corr(r, self)

    @property
    def length_scale(self):
        return self.phi

    def params(self):
        return {"phi": self.phi, "kappa": self.kappa}

    def transforms(self):
        return {"phi": "log", "kappa": "interval2"}

    def with_params(self, values):
        return PoweredExpParams(values.get("phi", self.phi), values.get("kappa", self.kappa))


def powered_exp_corr(r, p):
    if not (0 < p.kappa <= 2):
        raise ParameterError(f"kappa must lie in (0, 2], got {p.kappa}")
    r = _as_distance(r)
    scalar = r.ndim == 0
    out = np.atleast_1d(np.exp(-((r / p.phi) ** p.kappa))).astype(float)
    return _finish(out if not scalar else out[0:1], scalar)


@dataclass(frozen=True)
class AskeyParams:
    """Askey truncated power ``(1 - r/b)_+^mu``.

    ``dim`` is the spatial dimension the function will be used in; when given,
    the validity requirement ``mu >= (dim + 1)/2`` is enforced.
    """

    b: float
    mu_exponent: float
    dim: int = None

    def __post_init__(self):
        if not (self.b > 0):
            raise ParameterError(f"Askey support radius b must be positive, got {self.b}")
        if self.dim is not None and self.mu_exponent < (self.dim + 1) / 2:
            raise ParameterError(
                f"Askey exponent {self.mu_exponent} < (d+1)/2 = {(self.dim + 1) / 2} "
                f"for d={self.dim}"
            )
        if not (self.mu_exponent > 0):
            raise ParameterError("Askey exponent must be positive")

    def __call__(self, r):
        return askey_corr(r, self)

    def check_dim(self, d):
        if self.mu_exponent < (d + 1) / 2:
            raise ParameterError(
                f"Askey exponent {self.mu_exponent} is not valid in {d} dimensions "
                f"(needs >= {(d + 1) / 2})"
            )

    @property
    def length_scale(self):
        return self.b

    def params(self):
        return {"b": self.b, "mu_exponent": self.mu_exponent}

    def transforms(self):
        return {"b": "log", "mu_exponent": "log"}

    def with_params(self, values):
        return AskeyParams(
            values.get("b", self.b), values.get("mu_exponent", self.mu_exponent), self.dim
        )


def askey_corr(r, p):
    r = _as_distance(r)
    scalar = r.ndim == 0
    t = np.atleast_1d(1.0 - r / p.b)
    out = np.where(t > 0, np.clip(t, 0.0, None) ** p.mu_exponent, 0.0)
    return _finish(out if not scalar else out[0:1], scalar)


def smoothing_kernel(r, lam):
    """Gaussian smoothing kernel ``K(r/lam)`` with ``K(t) = exp(-t^2/2)``, so ``K(0) = 1``."""
    if not (lam > 0):
        raise ParameterError(f"bandwidth must be positive, got {lam}")
    r = _as_distance(r)
    scalar = r.ndim == 0
    out = np.atleast_1d(np.exp(-0.5 * (r / lam) ** 2)).astype(float)
    return _finish(out if not scalar else out[0:1], scalar)


CORRELATIONS = {
    "matern": MaternParams,
    "powered_exp": PoweredExpParams,
    "askey": AskeyParams,
}
