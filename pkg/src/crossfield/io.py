"""Comma-separated dataset, site and result tables.

Dataset layout: a header row, then one row per (site, replication)::

    site,rep,x1,x2,z1,z2
    A,0,0.0,0.0,1.25,-0.3
    A,1,0.0,0.0,0.97,
    ...

``x1..xd`` are coordinates, an optional ``t`` column holds time stamps, and
every other column is a variable.  Empty cells are missing values.  Sites
and replications are ordered by first appearance.
"""

import csv
import io as _io
import os
import tempfile

import numpy as np

from .data import FieldSample, SpatialDesign
from .errors import DataError

__all__ = [
    "atomic_write",
    "read_dataset",
    "write_dataset",
    "read_sites",
    "write_table",
    "format_value",
]


def atomic_write(path, content):
    """Write ``content`` (str or bytes) to a temporary file, then rename it over ``path``."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    mode = "wb" if isinstance(content, (bytes, bytearray)) else "w"
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"newline": ""})) as fh:
            fh.write(content)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_value(x):
    """Shortest decimal that reads back as the same float; NaN as an empty cell."""
    if isinstance(x, (float, np.floating)):
        return "" if np.isnan(x) else repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def _float(cell, lineno, col):
    try:
        return float(cell)
    except ValueError:
        raise DataError(f"line {lineno}: column {col!r}: not a number: {cell!r}") from None


def _split_header(header, path):
    if len(set(header)) != len(header):
        raise DataError(f"{path}: line 1: duplicate column names")
    for req in ("site", "rep"):
        if req not in header:
            raise DataError(f"{path}: line 1: missing column {req!r}")
    coords = []
    k = 1
    while f"x{k}" in header:
        coords.append(f"x{k}")
        k += 1
    if not coords:
        raise DataError(f"{path}: line 1: no coordinate columns x1..xd")
    time = "t" if "t" in header else None
    reserved = {"site", "rep", "t", *coords}
    variables = [h for h in header if h not in reserved]
    return coords, time, variables


def _rows(path):
    try:
        with open(path, newline="") as fh:
            text = fh.read()
    except OSError as err:
        raise DataError(f"{path}: {err.strerror}") from None
    reader = csv.reader(_io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DataError(f"{path}: empty file") from None
    header = [h.strip() for h in header]
    return header, reader


def read_dataset(path, variables=None):
    """Read a dataset file into a :class:`FieldSample`.

    Parameters
    ----------
    variables : sequence of str, optional
        Restrict to these variable columns, in this order.

    Raises
    ------
    DataError
        Malformed rows, inconsistent coordinates for a site, rows without any
        observed variable, duplicate (site, rep) rows.  Messages carry the
        line number.
    """
    header, reader = _rows(path)
    coords, time, all_vars = _split_header(header, path)
    if variables is None:
        variables = all_vars
    else:
        missing = [v for v in variables if v not in all_vars]
        if missing:
            raise DataError(f"{path}: line 1: variables {missing} not in file")
    if not variables:
        raise DataError(f"{path}: line 1: no variable columns")
    col = {h: k for k, h in enumerate(header)}
    sites, reps = {}, {}
    site_xy, site_t = [], []
    cells = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataError(
                f"{path}: line {lineno}: expected {len(header)} fields, found {len(row)}"
            )
        row = [c.strip() for c in row]
        sid, rep = row[col["site"]], row[col["rep"]]
        if not sid or not rep:
            raise DataError(f"{path}: line {lineno}: empty site or rep")
        xy = tuple(_float(row[col[c]], f"{path}: line {lineno}", c) for c in coords)
        if not all(np.isfinite(xy)):
            raise DataError(f"{path}: line {lineno}: non-finite coordinate")
        tt = _float(row[col[time]], f"{path}: line {lineno}", time) if time else None
        if sid not in sites:
            sites[sid] = len(sites)
            site_xy.append(xy)
            site_t.append(tt)
        elif site_xy[sites[sid]] != xy or site_t[sites[sid]] != tt:
            raise DataError(
                f"{path}: line {lineno}: site {sid!r} has coordinates {xy} "
                f"but earlier {site_xy[sites[sid]]}"
            )
        if rep not in reps:
            reps[rep] = len(reps)
        key = (reps[rep], sites[sid])
        if key in cells:
            raise DataError(f"{path}: line {lineno}: duplicate row for site {sid!r}, rep {rep!r}")
        vals = [
            np.nan if row[col[v]] == "" else _float(row[col[v]], f"{path}: line {lineno}", v)
            for v in variables
        ]
        if all(np.isnan(vals)):
            raise DataError(f"{path}: line {lineno}: no observed variable")
        if any(np.isinf(vals)):
            raise DataError(f"{path}: line {lineno}: infinite value")
        cells[key] = vals
    if not cells:
        raise DataError(f"{path}: no data rows")
    V = np.full((len(reps), len(sites), len(variables)), np.nan)
    for (t, k), vals in cells.items():
        V[t, k] = vals
    design = SpatialDesign(np.array(site_xy), None if time is None else np.array(site_t), tuple(sites))
    return FieldSample(design, V, tuple(variables), tuple(reps))


def write_dataset(path, sample):
    """Write a :class:`FieldSample`, replication-major then site order."""
    d = sample.design
    coords = [f"x{k + 1}" for k in range(d.d)]
    header = ["site", "rep", *coords, *(["t"] if d.times is not None else []), *sample.variables]
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for t in range(sample.T):
        for k in range(d.n):
            row = [d.site_ids[k], sample.rep_ids[t], *d.coords[k]]
            if d.times is not None:
                row.append(d.times[k])
            row.extend(sample.values[t, k])
            w.writerow([format_value(v) for v in row])
    atomic_write(path, buf.getvalue())


def read_sites(path):
    """Read a target-site table (``site``, ``x1..xd``, optional ``t``)."""
    header, reader = _rows(path)
    if "site" not in header:
        raise DataError(f"{path}: line 1: missing column 'site'")
    coords = []
    k = 1
    while f"x{k}" in header:
        coords.append(f"x{k}")
        k += 1
    if not coords:
        raise DataError(f"{path}: line 1: no coordinate columns x1..xd")
    col = {h: i for i, h in enumerate(header)}
    ids, xy, tt = [], [], []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataError(f"{path}: line {lineno}: expected {len(header)} fields, found {len(row)}")
        row = [c.strip() for c in row]
        ids.append(row[col["site"]])
        xy.append([_float(row[col[c]], f"{path}: line {lineno}", c) for c in coords])
        if "t" in col:
            tt.append(_float(row[col["t"]], f"{path}: line {lineno}", "t"))
    if not ids:
        raise DataError(f"{path}: no sites")
    return SpatialDesign(np.array(xy), np.array(tt) if tt else None, tuple(ids))


def write_table(path, rows, columns):
    """Write dict rows with the given column order; ``path=None`` returns the text."""
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([format_value(r[c]) for c in columns])
    if path is None:
        return buf.getvalue()
    atomic_write(path, buf.getvalue())
    return None
