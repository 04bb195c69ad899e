"""Sampling designs and multivariate field samples."""

from dataclasses import dataclass

import numpy as np

from .errors import DataError, ParameterError

__all__ = ["SpatialDesign", "FieldSample"]


@dataclass(frozen=True, eq=False)
class SpatialDesign:
    """Ordered sites in R^d with optional time stamps and site identifiers."""

    coords: np.ndarray
    times: np.ndarray = None
    site_ids: tuple = None

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float)
        if coords.ndim == 1:
            coords = coords[:, None]
        if coords.ndim != 2 or not np.all(np.isfinite(coords)):
            raise ParameterError("coordinates must be a finite (n, d) array")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        if self.times is not None:
            times = np.array(self.times, dtype=float).reshape(-1)
            if times.shape != (coords.shape[0],):
                raise ParameterError("one time stamp per site required")
            times.setflags(write=False)
            object.__setattr__(self, "times", times)
        ids = self.site_ids
        if ids is None:
            ids = tuple(str(k) for k in range(coords.shape[0]))
        ids = tuple(str(s) for s in ids)
        if len(ids) != coords.shape[0]:
            raise ParameterError("one identifier per site required")
        object.__setattr__(self, "site_ids", ids)

    @property
    def n(self):
        return self.coords.shape[0]

    @property
    def d(self):
        return self.coords.shape[1]

    @classmethod
    def grid(cls, shape, spacing=1.0, origin=0.0):
        """Regular grid; ``shape`` like ``(10, 10)``.  Sites are ordered row-major."""
        axes = [origin + spacing * np.arange(m) for m in shape]
        mesh = np.meshgrid(*axes, indexing="ij")
        coords = np.column_stack([m.reshape(-1) for m in mesh])
        return cls(coords)

    def subset(self, idx):
        idx = np.asarray(idx)
        times = None if self.times is None else self.times[idx]
        return SpatialDesign(self.coords[idx], times, tuple(np.asarray(self.site_ids)[idx]))

    def diameter(self):
        lo, hi = self.coords.min(axis=0), self.coords.max(axis=0)
        return float(np.linalg.norm(hi - lo))


@dataclass(frozen=True, eq=False)
class FieldSample:
    """``T`` replications of a p-variate field on a design; ``values`` has shape (T, n, p).

    Missing observations are NaN.
    """

    design: SpatialDesign
    values: np.ndarray
    variables: tuple = None
    rep_ids: tuple = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 2:
            values = values[None]
        if values.ndim != 3 or values.shape[1] != self.design.n:
            raise DataError(
                f"values must have shape (T, n={self.design.n}, p), got {values.shape}"
            )
        if np.any(np.isinf(values)):
            raise DataError("values contain infinities")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        names = self.variables
        if names is None:
            names = tuple(f"z{i + 1}" for i in range(values.shape[2]))
        names = tuple(names)
        if len(names) != values.shape[2]:
            raise DataError("one variable name per column required")
        object.__setattr__(self, "variables", names)
        reps = self.rep_ids
        reps = tuple(str(t) for t in (range(values.shape[0]) if reps is None else reps))
        if len(reps) != values.shape[0]:
            raise DataError("one identifier per replication required")
        object.__setattr__(self, "rep_ids", reps)

    @property
    def T(self):
        return self.values.shape[0]

    @property
    def n(self):
        return self.values.shape[1]

    @property
    def p(self):
        return self.values.shape[2]

    def subset_sites(self, idx):
        return FieldSample(self.design.subset(idx), self.values[:, idx, :], self.variables, self.rep_ids)

    def centered(self):
        """Subtract the per-replication, per-variable sample mean."""
        with np.errstate(invalid="ignore"):
            means = np.nanmean(self.values, axis=1, keepdims=True)
        return FieldSample(
            self.design, self.values - np.nan_to_num(means), self.variables, self.rep_ids
        )

    def flat(self):
        """Values as (T, n * p) in site-major, variable-minor order."""
        return self.values.reshape(self.T, self.n * self.p)
