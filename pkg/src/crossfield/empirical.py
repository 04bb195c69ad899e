"""Moment estimators of cross-covariances and cross-variograms.

Lag conventions: a pair ``(k, l)`` has lag ``h = s_k - s_l``.  Omnidirectional
bins contain both orientations of every pair, directional bins only those
whose lag points within ``angle_tol`` of ``direction``.

The covariance-based cross-variogram is reported *without* the conventional
factor 1/2: the diagonal equals ``2 gamma_ii(h)``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataError, ParameterError
from .kernels import smoothing_kernel

__all__ = [
    "LagBinning",
    "BinnedEstimate",
    "empirical_cross_cov",
    "cross_variogram",
    "pseudo_cross_variogram",
    "kernel_cross_cov",
    "kernel_cov_matrix",
]


@dataclass(frozen=True, eq=False)
class LagBinning:
    """Distance bins ``[edges[b], edges[b+1])`` with an optional direction.

    Parameters
    ----------
    edges : array_like
        Increasing bin edges in distance units.
    direction : array_like, optional
        Lag direction; when given, only pairs whose lag lies within
        ``angle_tol`` radians of it are used (zero lags always qualify).
    angle_tol : float
        Angular tolerance in radians.
    """

    edges: np.ndarray
    direction: np.ndarray = None
    angle_tol: float = np.pi / 8

    def __post_init__(self):
        edges = np.array(self.edges, dtype=float)
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise ParameterError("bin edges must be a strictly increasing sequence of length >= 2")
        if edges[0] < 0:
            raise ParameterError("bin edges must be nonnegative")
        object.__setattr__(self, "edges", edges)
        if self.direction is not None:
            u = np.array(self.direction, dtype=float)
            norm = np.linalg.norm(u)
            if norm == 0:
                raise ParameterError("direction must be nonzero")
            object.__setattr__(self, "direction", u / norm)

    @classmethod
    def regular(cls, max_lag, nbins, **kw):
        return cls(np.linspace(0.0, max_lag, nbins + 1), **kw)

    @property
    def nbins(self):
        return self.edges.size - 1

    @property
    def centers(self):
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def reflected(self):
        """The binning for lags ``-h``."""
        if self.direction is None:
            return self
        return LagBinning(self.edges, -self.direction, self.angle_tol)

    def assign(self, coords):
        """Bin index (or -1) of every ordered site pair, as an (n, n) int array."""
        H = coords[:, None, :] - coords[None, :, :]
        r = np.sqrt(np.einsum("ijk,ijk->ij", H, H))
        b = np.searchsorted(self.edges, r, side="right") - 1
        b[(r >= self.edges[-1]) | (b < 0)] = -1
        if self.direction is not None:
            if H.shape[2] != self.direction.size:
                raise ParameterError("direction dimension does not match the design")
            with np.errstate(invalid="ignore", divide="ignore"):
                cosang = (H @ self.direction) / r
            ok = (r == 0) | (cosang >= np.cos(self.angle_tol) - 1e-12)
            b[~ok] = -1
        return b, r


@dataclass(frozen=True, eq=False)
class BinnedEstimate:
    """Per-bin p x p estimates; bins without pairs hold NaN and ``empty`` is True."""

    kind: str
    binning: LagBinning
    estimates: np.ndarray
    counts: np.ndarray
    mean_lag: np.ndarray
    variables: tuple

    @property
    def empty(self):
        return self.counts.sum(axis=(1, 2)) == 0

    def rows(self):
        """Tidy rows: one per bin and variable pair."""
        out = []
        p = self.estimates.shape[1]
        for b in range(self.binning.nbins):
            for i in range(p):
                for j in range(p):
                    out.append(
                        {
                            "kind": self.kind,
                            "bin": b,
                            "lag_lo": float(self.binning.edges[b]),
                            "lag_hi": float(self.binning.edges[b + 1]),
                            "lag_center": float(self.binning.centers[b]),
                            "mean_lag": float(self.mean_lag[b]),
                            "var_i": self.variables[i],
                            "var_j": self.variables[j],
                            "count": int(self.counts[b, i, j]),
                            "estimate": float(self.estimates[b, i, j]),
                        }
                    )
        return out


def _prepare(sample, centered):
    if sample.n < 2:
        raise DataError("at least two sites are required")
    return sample.values if centered else sample.centered().values


def _finish(kind, binning, sums, counts, lagsum, paircount, variables):
    with np.errstate(invalid="ignore", divide="ignore"):
        est = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
        mean_lag = np.where(paircount > 0, lagsum / np.maximum(paircount, 1), np.nan)
    return BinnedEstimate(kind, binning, est, counts, mean_lag, variables)


def empirical_cross_cov(sample, binning, centered=False):
    """Empirical cross-covariance matrix per lag bin.

    Each replication is centered by its own sample mean (skipped when
    ``centered=True``, for inputs that are already residuals), the average of
    ``(Z(s_k) - Zbar)(Z(s_l) - Zbar)'`` over the pairs in the bin is taken,
    and the per-replication estimates are averaged.  Missing values drop the
    affected products only.
    """
    V = _prepare(sample, centered)
    T, n, p = V.shape
    assign, r = binning.assign(sample.design.coords)
    nb = binning.nbins
    per_rep = np.zeros((T, nb, p, p))
    per_rep_n = np.zeros((T, nb, p, p))
    lagsum = np.zeros(nb)
    paircount = np.zeros(nb, dtype=np.int64)
    for b in range(nb):
        M = (assign == b).astype(float)
        paircount[b] = int(M.sum())
        lagsum[b] = float((M * r).sum())
        if not paircount[b]:
            continue
        for t in range(T):
            Y = V[t]
            O = (~np.isnan(Y)).astype(float)
            Y0 = np.nan_to_num(Y)
            per_rep[t, b] = Y0.T @ M @ Y0
            per_rep_n[t, b] = O.T @ M @ O
    with np.errstate(invalid="ignore", divide="ignore"):
        rep_est = np.where(per_rep_n > 0, per_rep / np.maximum(per_rep_n, 1), np.nan)
    used = per_rep_n > 0
    counts = per_rep_n.sum(axis=0).astype(np.int64)
    nrep = used.sum(axis=0)
    sums = np.where(nrep > 0, np.nansum(rep_est, axis=0), 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        est = np.where(nrep > 0, sums / np.maximum(nrep, 1), np.nan)
        mean_lag = np.where(paircount > 0, lagsum / np.maximum(paircount, 1), np.nan)
    return BinnedEstimate("cross_cov", binning, est, counts, mean_lag, sample.variables)


def cross_variogram(sample, binning):
    """Covariance-based cross-variogram ``cov{Z_i(s1)-Z_i(s2), Z_j(s1)-Z_j(s2)}`` per bin.

    Only pairs where both variables are observed at both sites contribute to
    an off-diagonal entry.  Reported without the factor 1/2.
    """
    V = sample.values
    T, n, p = V.shape
    if n < 2:
        raise DataError("at least two sites are required")
    assign, r = binning.assign(sample.design.coords)
    k_idx, l_idx = np.nonzero(assign >= 0)
    bins = assign[k_idx, l_idx]
    nb = binning.nbins
    sums = np.zeros((nb, p, p))
    counts = np.zeros((nb, p, p), dtype=np.int64)
    for t in range(T):
        D = V[t, k_idx, :] - V[t, l_idx, :]
        ok = ~np.isnan(D)
        D0 = np.nan_to_num(D)
        for i in range(p):
            for j in range(p):
                both = ok[:, i] & ok[:, j]
                sums[:, i, j] += np.bincount(bins[both], D0[both, i] * D0[both, j], minlength=nb)
                counts[:, i, j] += np.bincount(bins[both], minlength=nb)
    if counts.sum() == 0:
        raise DataError("no pair has co-located observations of the variables")
    lagsum = np.bincount(bins, r[k_idx, l_idx], minlength=nb)
    paircount = np.bincount(bins, minlength=nb)
    return _finish("cross_variogram", binning, sums, counts, lagsum, paircount, sample.variables)


def pseudo_cross_variogram(sample, binning, centered=False):
    """Pseudo cross-variogram ``var{Z_i(s1) - Z_j(s2)}`` per bin.

    Variables are centered per replication first (unless ``centered``), so
    differing means do not leak into the estimate.  No co-location is needed.
    """
    V = _prepare(sample, centered)
    T, n, p = V.shape
    assign, r = binning.assign(sample.design.coords)
    k_idx, l_idx = np.nonzero(assign >= 0)
    bins = assign[k_idx, l_idx]
    nb = binning.nbins
    sums = np.zeros((nb, p, p))
    counts = np.zeros((nb, p, p), dtype=np.int64)
    for t in range(T):
        A = V[t, k_idx, :]
        B = V[t, l_idx, :]
        for i in range(p):
            for j in range(p):
                diff = A[:, i] - B[:, j]
                ok = ~np.isnan(diff)
                sums[:, i, j] += np.bincount(bins[ok], diff[ok] ** 2, minlength=nb)
                counts[:, i, j] += np.bincount(bins[ok], minlength=nb)
    if counts.sum() == 0:
        raise DataError("no usable pairs")
    lagsum = np.bincount(bins, r[k_idx, l_idx], minlength=nb)
    paircount = np.bincount(bins, minlength=nb)
    return _finish("pseudo_cross_variogram", binning, sums, counts, lagsum, paircount, sample.variables)


def _kernel_means(sample, lam, X, centered):
    """Kernel-weighted means a_t(x) of shape (T, m, p)."""
    V = sample.values if not centered else sample.centered().values
    X = np.atleast_2d(np.asarray(X, dtype=float))
    S = sample.design.coords
    if X.shape[1] != S.shape[1]:
        raise ParameterError("evaluation points and sites differ in dimension")
    diff = X[:, None, :] - S[None, :, :]
    W = smoothing_kernel(np.sqrt(np.einsum("ijk,ijk->ij", diff, diff)), lam)
    O = (~np.isnan(V)).astype(float)
    V0 = np.nan_to_num(V)
    num = np.einsum("mk,tkp->tmp", W, V0)
    den = np.einsum("mk,tkp->tmp", W, O)
    if np.any(den <= 0):
        raise DataError(
            f"kernel weights vanish at an evaluation point for bandwidth {lam:g}; "
            "use a larger bandwidth"
        )
    return num / den


def kernel_cross_cov(sample, lam, x, y, centered=False):
    """Kernel-smoothed nonparametric cross-covariance matrix at locations ``x`` and ``y``.

    ``C_ij(x, y)`` is the ``K_lam(|x - s_k|) K_lam(|y - s_l|)``-weighted
    average of ``Z_i(s_k) Z_j(s_l)``, averaged over replications.  The data
    are taken as mean zero; ``centered=True`` first subtracts per-replication
    means.
    """
    A = _kernel_means(sample, lam, [x, y], centered)
    return np.einsum("ti,tj->ij", A[:, 0, :], A[:, 1, :]) / sample.T


def kernel_cov_matrix(sample, lam, points, centered=False):
    """Joint kernel-estimator matrix over ``points`` (site-major, variable-minor)."""
    A = _kernel_means(sample, lam, points, centered)
    T, m, p = A.shape
    F = A.reshape(T, m * p)
    return F.T @ F / T
