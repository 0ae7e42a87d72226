"""Experiment configuration: strict TOML schema with documented defaults."""

import math
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from .errors import ParseError, ValidationError

KINDS = ("flow", "local-flow", "exhaustion", "cover", "sweep", "oracle-check",
         "transfer-rate")

# section -> key -> (type, default); None default means required-if-used
_SCHEMA = {
    None: {"kind": (str, None), "seed": (int, 0)},
    "model": {
        "type": (str, "warped"),
        "topology": (str, "sphere"),
        "n": (int, 3),
        "grid_points": (int, 401),
        "profile": (str, "round-sphere"),
        "curvature": (float, 1.0),
        "extent": (float, 10.0),
        "amplitude": (float, 5e-5),
        "bump_center": (float, 1.5),
        "bump_halfwidth": (float, 0.5),
        "length": (float, 12.0),
        "csv_path": (str, ""),
        "factors": (list, ()),
    },
    "solver": {
        "t_end": (float, 0.2),
        "dt_safety": (float, 0.5),
        "snapshot_interval": (float, 0.0),
        "stop_on_doubling": (bool, False),
        "rm_cap": (float, math.inf),
        "extinction_proximity": (float, 1e-7),
        "filter_sigma": (float, 1.0),
        "pole_guard_width": (float, 0.0),
    },
    "cover": {
        "recipe": (str, "trivial"),
        "rbar": (float, 1.0),
        "alpha": (float, 1.0),
        "beta": (float, 1.0),
        "gamma": (float, -1.0),
        "p": (float, 0.0),
        "spacing": (float, 0.0),
        "radius": (float, 0.08),
        "ball_spacing": (float, 0.15),
        "K": (float, 0.0),
        "Kbar": (float, 0.0),
        "A": (float, 1.0),
        "Gamma": (float, 1.0),
        "domain": (list, ()),
    },
    "cutoff": {
        "omega": (list, (0.0, 8.0)),
        "omega_hat": (list, (0.0, 10.7)),
    },
    "exhaustion": {
        "omegas": (list, ((0.0, 4.0), (0.0, 6.0), (0.0, 8.0))),
        "hat_margin": (float, 2.7),
        "conv_tol": (float, 1e-3),
        "probe": (list, ()),
    },
    "monitors": {
        "c_n": (float, 1.0 / 16.0),
        "barrier_lambda": (float, 1.0),
        "barrier_m": (list, (0, 1, 2)),
        "residual_t_min": (float, 0.0),
        "doubling_factor": (float, 2.0),
    },
    "transfer": {
        "omega0": (list, (0.0, 3.0)),
        "alpha": (float, 0.1),
        "fit_range": (list, (3.0, 9.0)),
        "m": (int, 0),
        "fit_time": (float, -1.0),
    },
    "oracle": {
        "count": (int, 20),
        "stencil_order": (int, 4),
        "rel_tol": (float, 1e-4),
        "grid_points": (int, 601),
    },
    "sweep": {
        "parameter": (str, "epsilon"),
        "values": (list, (1e-1, 1e-2, 1e-3, 1e-4)),
        "rm_norm": (float, 100.0),
        "dim": (int, 3),
    },
    "output": {
        "formats": (list, ("json",)),
        "directory": (str, "out"),
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int
    sections: dict = field(repr=False, default_factory=dict)

    def __getitem__(self, section):
        return self.sections[section]


def _coerce(section, key, expected, value):
    where = key if section is None else f"{section}.{key}"
    if expected is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(where, f"expected a number, got {value!r}")
        return float(value)
    if expected is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValidationError(where, f"expected an integer, got {value!r}")
        return int(value)
    if expected is bool:
        if not isinstance(value, bool):
            raise ValidationError(where, f"expected a boolean, got {value!r}")
        return value
    if expected is str:
        if not isinstance(value, str):
            raise ValidationError(where, f"expected a string, got {value!r}")
        return value
    if expected is list:
        if not isinstance(value, (list, tuple)):
            raise ValidationError(where, f"expected an array, got {value!r}")
        return tuple(_freeze(v) for v in value)
    raise ValidationError(where, "unsupported schema type")


def _freeze(v):
    if isinstance(v, (list, tuple)):
        return tuple(_freeze(x) for x in v)
    if isinstance(v, dict):
        return {k: _freeze(x) for k, x in v.items()}
    return v


def _validate(cfg):
    kind = cfg.kind
    if kind not in KINDS:
        raise ValidationError("kind", f"must be one of {KINDS}, got {kind!r}")
    solver = cfg["solver"]
    if not 0.0 < solver["dt_safety"] <= 1.0:
        raise ValidationError("solver.dt_safety", "must lie in (0, 1]")
    if solver["t_end"] <= 0.0:
        raise ValidationError("solver.t_end", "must be positive")
    if solver["snapshot_interval"] < 0.0:
        raise ValidationError("solver.snapshot_interval", "must be nonnegative")
    model = cfg["model"]
    if model["type"] not in ("warped", "einstein-product"):
        raise ValidationError("model.type", f"unknown model type {model['type']!r}")
    if model["type"] == "warped" and model["n"] < 3:
        raise ValidationError("model.n", "ambient dimension must be >= 3")
    if model["grid_points"] < 9:
        raise ValidationError("model.grid_points", "need at least 9 nodes")
    for f in model["factors"]:
        if not isinstance(f, dict):
            raise ValidationError("model.factors", "factors must be tables")
        for req in ("dim", "lam", "rm_norm"):
            if req not in f:
                raise ValidationError("model.factors", f"factor missing {req!r}")
    tr = cfg["transfer"]
    if len(tr["fit_range"]) != 2 or tr["fit_range"][0] >= tr["fit_range"][1]:
        raise ValidationError("transfer.fit_range", "need [lo, hi] with lo < hi")
    if cfg["oracle"]["rel_tol"] <= 0:
        raise ValidationError("oracle.rel_tol", "tolerance must be positive")
    if cfg["exhaustion"]["conv_tol"] <= 0:
        raise ValidationError("exhaustion.conv_tol", "tolerance must be positive")
    sweep = cfg["sweep"]
    if kind == "sweep" and not sweep["values"]:
        raise ValidationError("sweep.values", "sweep needs at least one value")
    for fmt in cfg["output"]["formats"]:
        if fmt not in ("json", "csv", "md"):
            raise ValidationError("output.formats", f"unknown format {fmt!r}")


def config_from_dict(raw, strict=True):
    sections = {}
    top = dict(_SCHEMA[None])
    out_top = {}
    for key, (typ, default) in top.items():
        if key in raw:
            out_top[key] = _coerce(None, key, typ, raw[key])
        else:
            out_top[key] = default
    if out_top["kind"] is None:
        raise ValidationError("kind", "missing required key")
    for key in raw:
        if key in top:
            continue
        if key not in _SCHEMA:
            if strict:
                raise ValidationError(key, "unknown key")
            continue
        if not isinstance(raw[key], dict):
            raise ValidationError(key, "expected a table")
    for section, schema in _SCHEMA.items():
        if section is None:
            continue
        given = raw.get(section, {})
        vals = {}
        for key, (typ, default) in schema.items():
            if key in given:
                vals[key] = _coerce(section, key, typ, given[key])
            else:
                vals[key] = _freeze(default)
        if strict:
            for key in given:
                if key not in schema:
                    raise ValidationError(f"{section}.{key}", "unknown key")
        sections[section] = vals
    cfg = ExperimentConfig(kind=out_top["kind"], seed=out_top["seed"],
                           sections=sections)
    _validate(cfg)
    return cfg


def load_config(path, strict=True):
    """Parse and validate a TOML experiment config; defaults filled in."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as err:
        raise ParseError(str(err)) from err
    return config_from_dict(raw, strict=strict)
