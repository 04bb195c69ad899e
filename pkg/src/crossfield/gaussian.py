"""Joint covariance assembly, Cholesky factorization, simulation and likelihood.

All joint matrices use site-major, variable-minor ordering: entry
``(k * p + i, l * p + j)`` is ``cov{Z_i(s_k), Z_j(s_l)}``.
"""

import logging
import struct
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import lapack, solve_triangular

from .data import FieldSample, SpatialDesign
from .errors import DataError, IndefiniteMatrixError, ParameterError
from .io import atomic_write

__all__ = [
    "DEFAULT_JITTER",
    "JointCovariance",
    "assemble_sigma",
    "factorize",
    "simulate",
    "loglik",
    "dump_binary",
    "load_binary",
]

logger = logging.getLogger(__name__)

# multiples of the mean diagonal tried in turn
DEFAULT_JITTER = (0.0, 1e-10, 1e-8, 1e-6)
ORDERING_TAG = b"SITEVAR\0"
_MAGIC = b"XCOVDUMP"


@dataclass(frozen=True, eq=False)
class JointCovariance:
    """Joint covariance matrix of a p-variate field on a design.

    ``jitter`` is the absolute value added to the diagonal to obtain
    ``cholesky``; it is ``None`` until :func:`factorize` has run.
    """

    design: SpatialDesign
    p: int
    sigma: np.ndarray
    cholesky: np.ndarray = None
    logdet: float = None
    jitter: float = None

    def block(self, k, l):
        p = self.p
        return self.sigma[k * p:(k + 1) * p, l * p:(l + 1) * p]

    def index(self, site, variable):
        return site * self.p + variable


def assemble_sigma(model, design):
    """Assemble the joint covariance matrix of ``model`` on ``design``.

    The upper triangle is evaluated and mirrored, so the result is exactly
    symmetric.
    """
    S = model.joint_matrix(design.coords, design.coords, design.times, design.times)
    S = np.triu(S) + np.triu(S, 1).T
    return JointCovariance(design, model.p, S)


def _cholesky(S, jitters):
    n = S.shape[0]
    if n == 0:
        return np.zeros((0, 0)), 0.0, 0.0
    if not np.all(np.isfinite(S)):
        raise IndefiniteMatrixError("covariance matrix has non-finite entries")
    if not np.any(S):
        return np.zeros_like(S), -np.inf, 0.0
    mean_diag = float(np.mean(np.diag(S)))
    pivot = None
    for level in jitters:
        eps = level * mean_diag
        A = S + eps * np.eye(n) if eps else S
        c, info = lapack.dpotrf(A, lower=1, clean=1, overwrite_a=0)
        if info == 0:
            L = c
            return L, 2.0 * float(np.sum(np.log(np.diag(L)))), eps
        if info < 0:
            raise IndefiniteMatrixError(f"LAPACK dpotrf argument error {info}")
        pivot = info - 1
    raise IndefiniteMatrixError(
        f"matrix is not positive definite even with jitter {jitters[-1]:g} x mean diagonal; "
        f"failure at pivot {pivot}",
        pivot=pivot,
    )


def factorize(jc, jitters=DEFAULT_JITTER):
    """Cholesky-factorize ``jc.sigma`` with an explicit jitter escalation.

    Jitter ``eps = level * mean(diag)`` is tried for each level in turn until
    the factorization succeeds; the value used is recorded on the result.
    An all-zero matrix yields a zero factor and ``logdet = -inf``.

    Raises
    ------
    IndefiniteMatrixError
        If every level fails.  The message names the (site, variable) pivot.
    """
    try:
        L, logdet, eps = _cholesky(jc.sigma, jitters)
    except IndefiniteMatrixError as err:
        if err.pivot is not None:
            site, var = divmod(err.pivot, jc.p)
            raise IndefiniteMatrixError(
                f"{err} (site {site}, variable {var})", pivot=err.pivot
            ) from None
        raise
    return replace(jc, cholesky=L, logdet=logdet, jitter=eps)


def simulate(model, design, T, seed=None, jitters=DEFAULT_JITTER):
    """Draw ``T`` independent mean-zero realizations ``z = L w``.

    Returns a :class:`FieldSample` of shape (T, n, p); identical seeds give
    bit-identical output.
    """
    if int(T) != T or T < 1:
        raise ParameterError(f"replication count must be a positive integer, got {T}")
    jc = factorize(assemble_sigma(model, design), jitters)
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((jc.sigma.shape[0], int(T)))
    Z = jc.cholesky @ W
    return FieldSample(design, Z.T.reshape(int(T), design.n, model.p))


def _pattern_groups(flat):
    """Group replication indices by their missing-value pattern."""
    observed = ~np.isnan(flat)
    groups = {}
    for t, row in enumerate(observed):
        groups.setdefault(row.tobytes(), (row, []))[1].append(t)
    return list(groups.values())


def loglik(model, sample, jitters=DEFAULT_JITTER, info=None):
    """Gaussian log-likelihood of mean-zero independent replications.

    ``-(T/2)(m log 2 pi + log det Sigma) - 1/2 sum_t z_t' Sigma^{-1} z_t``,
    with the observed entries of each replication.  Returns ``-inf`` when the
    covariance cannot be factorized; the reason is stored under
    ``info["error"]`` when a dict is supplied.
    """
    try:
        S = assemble_sigma(model, sample.design).sigma
    except ParameterError as err:
        if info is not None:
            info["error"] = str(err)
        return -np.inf
    flat = sample.flat()
    total = 0.0
    for mask, reps in _pattern_groups(flat):
        idx = np.flatnonzero(mask)
        if idx.size == 0:
            continue
        try:
            L, logdet, eps = _cholesky(S[np.ix_(idx, idx)], jitters)
        except IndefiniteMatrixError as err:
            logger.debug("likelihood factorization failed: %s", err)
            if info is not None:
                info["error"] = str(err)
            return -np.inf
        if not np.isfinite(logdet):
            return -np.inf
        Z = flat[np.ix_(reps, idx)].T
        W = solve_triangular(L, Z, lower=True, check_finite=False)
        m = idx.size
        total += -0.5 * (len(reps) * (m * np.log(2 * np.pi) + logdet) + float(np.sum(W * W)))
        if info is not None:
            info["jitter"] = max(info.get("jitter", 0.0), eps)
    return total


def dump_binary(jc, path):
    """Write Sigma (and L when present) as little-endian float64, row-major.

    Header: 8-byte magic, int64 n, int64 p, 8-byte ordering tag, int64 flag
    (1 when the Cholesky factor follows Sigma).
    """
    n = jc.design.n
    has_l = jc.cholesky is not None
    parts = [
        _MAGIC,
        struct.pack("<qq", n, jc.p),
        ORDERING_TAG,
        struct.pack("<q", int(has_l)),
        np.ascontiguousarray(jc.sigma, dtype="<f8").tobytes(),
    ]
    if has_l:
        parts.append(np.ascontiguousarray(jc.cholesky, dtype="<f8").tobytes())
    atomic_write(path, b"".join(parts))


def load_binary(path):
    """Read a dump written by :func:`dump_binary`; returns ``(sigma, cholesky_or_None, n, p)``."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != _MAGIC:
        raise DataError(f"{path}: not a covariance dump")
    n, p = struct.unpack("<qq", raw[8:24])
    if raw[24:32] != ORDERING_TAG:
        raise DataError(f"{path}: unknown ordering tag {raw[24:32]!r}")
    (has_l,) = struct.unpack("<q", raw[32:40])
    m = n * p
    body = np.frombuffer(raw[40:], dtype="<f8")
    if body.size != m * m * (1 + has_l):
        raise DataError(f"{path}: truncated dump")
    sigma = body[: m * m].reshape(m, m).copy()
    L = body[m * m:].reshape(m, m).copy() if has_l else None
    return sigma, L, n, p
