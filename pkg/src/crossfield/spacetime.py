"""Spatio-temporal multivariate covariances built on latent dimensions.

The base class is

    C(h, u, v) = sigma2 / (psi1(u^2 / psi2(|v|^2))^(d/2) psi2(|v|^2)^(1/2))
                 * phi1(|h|^2 / psi1(u^2 / psi2(|v|^2)))

with spatial lag ``h`` in R^d, time lag ``u`` and latent lag ``v = xi_i - xi_j``.
``phi1`` is completely monotone and ``psi1``, ``psi2`` are positive with a
completely monotone derivative; both are drawn from a small fixed catalog so
that validity needs no symbolic checks.
"""

from dataclasses import dataclass

import numpy as np

from .crosscov import CrossCovModel, _coords, _frozen_array, _prefixed, _strip
from .errors import ParameterError

__all__ = [
    "CatalogFunction",
    "SpaceTimeAsymParams",
    "SpaceTimeLatentModel",
    "st_cov",
    "eval_st",
    "eval_st_asym_delay",
    "eval_st_asym_velocity",
]

PHI_KINDS = ("exp", "inv")
PSI_KINDS = ("power", "one")


@dataclass(frozen=True)
class CatalogFunction:
    """A catalog function of ``t >= 0``.

    ``exp``: ``exp(-scale t)``; ``inv``: ``1 / (1 + scale t)``;
    ``power``: ``(1 + scale t)^b`` with ``0 < b <= 1``; ``one``: constant 1.
    """

    kind: str
    b: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in PHI_KINDS + PSI_KINDS:
            raise ParameterError(f"unknown catalog function {self.kind!r}")
        if not self.scale > 0:
            raise ParameterError("catalog scale must be positive")
        if self.kind == "power" and not (0 < self.b <= 1):
            raise ParameterError(f"power exponent b must lie in (0, 1], got {self.b}")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "exp":
            return np.exp(-self.scale * t)
        if self.kind == "inv":
            return 1.0 / (1.0 + self.scale * t)
        if self.kind == "power":
            return (1.0 + self.scale * t) ** self.b
        return np.ones_like(t)

    def params(self):
        if self.kind == "one":
            return {}
        out = {"scale": self.scale}
        if self.kind == "power":
            out["b"] = self.b
        return out

    def transforms(self):
        return {k: ("unit" if k == "b" else "log") for k in self.params()}

    def with_params(self, values):
        return CatalogFunction(self.kind, values.get("b", self.b), values.get("scale", self.scale))


@dataclass(frozen=True, eq=False)
class SpaceTimeAsymParams:
    """Asymmetry parameters: a time-delay direction in latent space and two velocities."""

    lambda_xi: np.ndarray = None
    gamma_h: np.ndarray = None
    gamma_xi: np.ndarray = None

    def __post_init__(self):
        for name in ("lambda_xi", "gamma_h", "gamma_xi"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, _frozen_array(np.atleast_1d(val), 1, name))


def st_cov(sigma2, phi1, psi1, psi2, d, h2, u2, v2):
    """Evaluate the latent space-time class on squared norms (broadcasting)."""
    p2 = psi2(v2)
    p1 = psi1(u2 / p2)
    return sigma2 / (p1 ** (d / 2.0) * np.sqrt(p2)) * phi1(h2 / p1)


@dataclass(frozen=True, eq=False)
class SpaceTimeLatentModel(CrossCovModel):
    """Multivariate space-time covariance from latent variable coordinates ``xis``.

    ``asym`` selects an optional asymmetric variant: ``"delay"`` evaluates
    ``C(h, u - lambda_xi . v, v)`` and ``"velocity"`` evaluates
    ``C(h - gamma_h u, u, v - gamma_xi u)``.
    """

    sigma2: float
    phi1: CatalogFunction
    psi1: CatalogFunction
    psi2: CatalogFunction
    xis: np.ndarray
    d: int
    asym: str = None
    asym_params: SpaceTimeAsymParams = None

    family = "spacetime"
    isotropic = False

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ParameterError("sigma2 must be positive")
        if self.phi1.kind not in PHI_KINDS:
            raise ParameterError(f"phi1 must be one of {PHI_KINDS}")
        for psi in (self.psi1, self.psi2):
            if psi.kind not in PSI_KINDS:
                raise ParameterError(f"psi functions must be one of {PSI_KINDS}")
        xis = _frozen_array(np.atleast_2d(self.xis), 2, "xis")
        if xis.shape[1] > xis.shape[0]:
            raise ParameterError("latent dimension k must not exceed p")
        if int(self.d) != self.d or self.d < 1:
            raise ParameterError("spatial dimension d must be a positive integer")
        object.__setattr__(self, "xis", xis)
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "sigma2", float(self.sigma2))
        if self.asym not in (None, "delay", "velocity"):
            raise ParameterError(f"unknown asymmetry {self.asym!r}")
        ap = self.asym_params
        if self.asym == "delay":
            if ap is None or ap.lambda_xi is None or ap.lambda_xi.shape != (xis.shape[1],):
                raise ParameterError("delay asymmetry needs lambda_xi of latent dimension k")
        if self.asym == "velocity":
            if ap is None or ap.gamma_h is None or ap.gamma_xi is None:
                raise ParameterError("velocity asymmetry needs gamma_h and gamma_xi")
            if ap.gamma_h.shape != (self.d,) or ap.gamma_xi.shape != (xis.shape[1],):
                raise ParameterError("gamma_h must have length d and gamma_xi length k")

    @property
    def p(self):
        return self.xis.shape[0]

    @property
    def dim(self):
        return self.d

    def length_scale(self):
        return 1.0 / np.sqrt(self.phi1.scale)

    def time_scale(self):
        return 1.0 / np.sqrt(self.psi1.scale)

    def _base(self, h2, u2, v2):
        return st_cov(self.sigma2, self.phi1, self.psi1, self.psi2, self.d, h2, u2, v2)

    def lag_cov(self, i, j, H, U, asym=None, asym_params=None):
        """Covariance for variables ``i, j`` at lags ``H`` (..., d) and ``U`` (...)."""
        H = np.asarray(H, dtype=float)
        U = np.asarray(U, dtype=float)
        if H.shape[-1] != self.d:
            raise ParameterError(f"spatial lag must be {self.d}-dimensional, got {H.shape[-1]}")
        v = self.xis[i] - self.xis[j]
        asym = self.asym if asym is None else asym
        ap = self.asym_params if asym_params is None else asym_params
        if asym == "delay":
            U = U - float(ap.lambda_xi @ v)
            V2 = np.full(U.shape, v @ v)
        elif asym == "velocity":
            H = H - U[..., None] * ap.gamma_h
            V = v - U[..., None] * ap.gamma_xi
            V2 = np.einsum("...k,...k->...", V, V)
        else:
            V2 = np.full(U.shape, v @ v)
        return self._base(np.einsum("...k,...k->...", H, H), U**2, V2)

    def joint_matrix(self, X1, X2, T1=None, T2=None, nugget=True):
        X1, X2 = _coords(X1), _coords(X2)
        T1 = np.zeros(X1.shape[0]) if T1 is None else np.asarray(T1, dtype=float)
        T2 = np.zeros(X2.shape[0]) if T2 is None else np.asarray(T2, dtype=float)
        H = X1[:, None, :] - X2[None, :, :]
        U = T1[:, None] - T2[None, :]
        p = self.p
        out = np.empty((X1.shape[0] * p, X2.shape[0] * p))
        for i in range(p):
            for j in range(p):
                out[i::p, j::p] = self.lag_cov(i, j, H, U)
        return out

    def cross_matrix(self, X1, X2, nugget=True):
        return self.joint_matrix(X1, X2, nugget=nugget)

    def params(self):
        out = {"sigma2": self.sigma2}
        p, k = self.xis.shape
        out.update({f"xi_{i + 1}_{m + 1}": float(self.xis[i, m]) for i in range(p) for m in range(k)})
        for name in ("phi1", "psi1", "psi2"):
            out.update(_prefixed(name, getattr(self, name).params()))
        return out

    def transforms(self):
        out = {"sigma2": "log"}
        out.update({k: "none" for k in self.params() if k.startswith("xi_")})
        for name in ("phi1", "psi1", "psi2"):
            out.update(_prefixed(name, getattr(self, name).transforms()))
        return out

    def with_params(self, values):
        xis = np.array(self.xis)
        p, k = xis.shape
        for i in range(p):
            for m in range(k):
                xis[i, m] = values.get(f"xi_{i + 1}_{m + 1}", xis[i, m])
        return SpaceTimeLatentModel(
            values.get("sigma2", self.sigma2),
            self.phi1.with_params(_strip("phi1", values)),
            self.psi1.with_params(_strip("psi1", values)),
            self.psi2.with_params(_strip("psi2", values)),
            xis,
            self.d,
            self.asym,
            self.asym_params,
        )


def _check_index(model, i, j):
    for idx in (i, j):
        if not 0 <= idx < model.p:
            raise ParameterError(f"variable index {idx} out of range for p={model.p}")


def eval_st(model, i, j, h, u):
    """Symmetric class value ``C(h, u, xi_i - xi_j)``, ignoring any asymmetry setting."""
    _check_index(model, i, j)
    return float(model.lag_cov(i, j, np.atleast_1d(h), np.asarray(u, dtype=float), asym="none"))


def eval_st_asym_delay(model, params, i, j, h, u):
    """Time-delayed variant ``C(h, u - lambda_xi . (xi_i - xi_j), xi_i - xi_j)``."""
    _check_index(model, i, j)
    if params.lambda_xi is None or params.lambda_xi.shape != (model.xis.shape[1],):
        raise ParameterError("lambda_xi must have the latent dimension k")
    return float(
        model.lag_cov(i, j, np.atleast_1d(h), np.asarray(u, dtype=float), "delay", params)
    )


def eval_st_asym_velocity(model, params, i, j, h, u):
    """Velocity variant ``C(h - gamma_h u, u, xi_i - xi_j - gamma_xi u)``."""
    _check_index(model, i, j)
    if params.gamma_h is None or params.gamma_h.shape != (model.d,):
        raise ParameterError("gamma_h must have length d")
    if params.gamma_xi is None or params.gamma_xi.shape != (model.xis.shape[1],):
        raise ParameterError("gamma_xi must have the latent dimension k")
    return float(
        model.lag_cov(i, j, np.atleast_1d(h), np.asarray(u, dtype=float), "velocity", params)
    )
