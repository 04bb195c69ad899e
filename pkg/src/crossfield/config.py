"""YAML model configuration files.

One model per document, tagged by ``family``.  Nested objects (correlation
functions, wrapped base models, catalog functions, gridded surfaces) are
mappings of their own.  Unknown keys are errors.  Floats are written with 17
significant digits so that a dump/load round trip is exact.  A fitted model
may carry a ``fit`` mapping with its optimization report, which loading
ignores.
"""

import dataclasses
import math

import numpy as np
import yaml

from . import crosscov, spacetime
from .errors import DataError, ParameterError
from .kernels import CORRELATIONS

__all__ = ["to_config", "from_config", "dumps", "loads", "load", "save", "format_float"]

_CORR_NAMES = {cls: name for name, cls in CORRELATIONS.items()}

_MODELS = {
    cls.family: cls
    for cls in (
        crosscov.SeparableModel,
        crosscov.LMCModel,
        crosscov.MultiMaternModel,
        crosscov.LatentDimModel,
        crosscov.MultiAskeyModel,
        crosscov.AsymShiftWrapper,
        crosscov.VarianceScaleWrapper,
        crosscov.TaperWrapper,
        spacetime.SpaceTimeLatentModel,
    )
}

RESERVED = ("family", "fit")


def format_float(x):
    """17 significant digits, always in a form YAML reads back as a float."""
    x = float(x)
    if math.isnan(x):
        return ".nan"
    if math.isinf(x):
        return ".inf" if x > 0 else "-.inf"
    s = f"{x:.17g}"
    if "." not in s:
        s = s.replace("e", ".0e") if "e" in s else s + ".0"
    return s


class _Dumper(yaml.SafeDumper):
    pass


_Dumper.add_representer(
    float, lambda dumper, x: dumper.represent_scalar("tag:yaml.org,2002:float", format_float(x))
)


def _plain(x):
    """Convert numpy containers and scalars to builtin types."""
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    return x


def _encode(value):
    if isinstance(value, crosscov.CrossCovModel):
        return to_config(value)
    if type(value) in _CORR_NAMES:
        out = {"type": _CORR_NAMES[type(value)]}
        out.update(_fields(value))
        return out
    if isinstance(value, (spacetime.CatalogFunction, spacetime.SpaceTimeAsymParams)):
        return _fields(value)
    if isinstance(value, crosscov.GriddedField):
        return {"sites": _plain(value.sites), "values": _plain(value.values)}
    if isinstance(value, (list, tuple)):
        return [_encode(v) for v in value]
    return _plain(value)


def _fields(obj):
    out = {}
    for f in dataclasses.fields(obj):
        if f.name.startswith("_"):
            continue
        v = getattr(obj, f.name)
        if v is None:
            continue
        out[f.name] = _encode(v)
    return out


def to_config(model):
    """Nested dict describing ``model``; inverse of :func:`from_config`."""
    if model.family not in _MODELS:
        raise ParameterError(f"no configuration format for family {model.family!r}")
    out = {"family": model.family}
    out.update(_fields(model))
    return out


def _check_keys(d, allowed, where):
    if not isinstance(d, dict):
        raise ParameterError(f"{where}: expected a mapping, got {type(d).__name__}")
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ParameterError(f"{where}: unknown keys {unknown}; allowed {sorted(allowed)}")


def _build(cls, d, where, decoders, skip=()):
    flds = [f for f in dataclasses.fields(cls) if not f.name.startswith("_")]
    names = [f.name for f in flds]
    _check_keys(d, names + list(skip), where)
    kwargs = {}
    for f in flds:
        if f.name not in d:
            if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING:
                raise ParameterError(f"{where}: missing required key {f.name!r}")
            continue
        dec = decoders.get(f.name)
        kwargs[f.name] = dec(d[f.name], f"{where}.{f.name}") if dec else d[f.name]
    try:
        return cls(**kwargs)
    except ParameterError as err:
        raise ParameterError(f"{where}: {err}") from None
    except (TypeError, ValueError) as err:
        raise ParameterError(f"{where}: {err}") from None


def _correlation(d, where):
    if not isinstance(d, dict) or "type" not in d:
        raise ParameterError(f"{where}: correlation needs a 'type' ({sorted(CORRELATIONS)})")
    kind = d["type"]
    if kind not in CORRELATIONS:
        raise ParameterError(f"{where}: unknown correlation type {kind!r}")
    return _build(CORRELATIONS[kind], {k: v for k, v in d.items() if k != "type"}, where, {})


def _list_of(dec):
    def f(items, where):
        if not isinstance(items, list):
            raise ParameterError(f"{where}: expected a list")
        return tuple(dec(v, f"{where}[{k}]") for k, v in enumerate(items))

    return f


def _catalog(d, where):
    return _build(spacetime.CatalogFunction, d, where, {})


def _asym_params(d, where):
    arr = lambda v, w: np.asarray(v, dtype=float)  # noqa: E731
    return _build(
        spacetime.SpaceTimeAsymParams, d, where, {"lambda_xi": arr, "gamma_h": arr, "gamma_xi": arr}
    )


def _gridded(d, where):
    return _build(crosscov.GriddedField, d, where, {})


def _model(d, where):
    if not isinstance(d, dict):
        raise ParameterError(f"{where}: expected a mapping")
    fam = d.get("family")
    if fam not in _MODELS:
        raise ParameterError(f"{where}: unknown or missing family {fam!r}; known {sorted(_MODELS)}")
    decoders = {
        "rho": _correlation,
        "rhos": _list_of(_correlation),
        "taper": _correlation,
        "base": _model,
        "phi1": _catalog,
        "psi1": _catalog,
        "psi2": _catalog,
        "sigma_fields": _list_of(_gridded),
        "asym_params": _asym_params,
    }
    return _build(_MODELS[fam], d, where, decoders, skip=RESERVED)


def from_config(d):
    """Build a model from a nested dict; raises :class:`ParameterError` on any problem."""
    return _model(d, "model")


def dumps(model, fit_report=None):
    doc = to_config(model)
    if fit_report is not None:
        doc["fit"] = _plain(fit_report)
    return yaml.dump(doc, Dumper=_Dumper, sort_keys=False, default_flow_style=None)


def loads(text):
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise DataError(f"malformed configuration: {err}") from None
    return from_config(doc)


def load(path):
    with open(path) as fh:
        return loads(fh.read())


def save(model, path, fit_report=None):
    from .io import atomic_write

    atomic_write(path, dumps(model, fit_report))
