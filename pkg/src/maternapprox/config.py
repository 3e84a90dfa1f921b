"""Run configuration: flat INI sections, validated against a fixed schema.

Precedence (lowest first): built-in preset for the command and scale, the
``--config`` file, ``--set section.key=value`` overrides, dedicated CLI flags.

Schema (all keys optional)::

    [run]          seed, threads, repeats, out
    [experiment]   nu, ranges, lower, upper, m, sigma, grid, replicates, sim_cap
    [methods]      names, s_nodes, exact_nodes, db3_nodes, conv_nodes, taper_theta, expand,
                   fixed_count, taper_override
    [cov_error]    s_per_axis, u_per_axis, halfwidth, central_fraction
    [taper_sweep]  thetas, s_nodes
    [demo]         nu, range, grid

List values are whitespace separated; ``ranges`` and ``thetas`` also accept
``start:stop:step``.  ``conv_nodes`` and ``taper_theta`` accept either one
number or ``nu:value`` pairs such as ``2:11 3:13``.
"""
from __future__ import annotations

import configparser
from copy import deepcopy
from dataclasses import dataclass

import numpy as np

__all__ = ["ConfigError", "SCHEMA", "PRESETS", "RunConfig", "load_config", "parse_value"]


class ConfigError(ValueError):
    pass


def _floats(text):
    return tuple(float(t) for t in text.split())


def _ints(text):
    return tuple(int(t) for t in text.split())


def _names(text):
    return tuple(text.split())


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _per_nu(cast):
    def parse(text):
        parts = text.split()
        if len(parts) == 1 and ":" not in parts[0]:
            return cast(parts[0])
        out = {}
        for part in parts:
            key, _, val = part.partition(":")
            if not val:
                raise ValueError(f"expected nu:value, got {part!r}")
            out[float(key)] = cast(val)
        return out

    return parse


def _float_list(text):
    if ":" in text:
        start, stop, step = (float(t) for t in text.split(":"))
        count = int(round((stop - start) / step)) + 1
        return tuple(float(round(start + i * step, 10)) for i in range(count))
    return _floats(text)


SCHEMA = {
    "run": {"seed": int, "threads": int, "repeats": int, "out": str},
    "experiment": {
        "nu": _floats,
        "ranges": _float_list,
        "lower": _floats,
        "upper": _floats,
        "m": int,
        "sigma": float,
        "grid": _ints,
        "replicates": int,
        "sim_cap": int,
    },
    "methods": {
        "names": _names,
        "s_nodes": int,
        "exact_nodes": int,
        "db3_nodes": int,
        "conv_nodes": _per_nu(int),
        "taper_theta": _per_nu(float),
        "expand": float,
        "fixed_count": _bool,
        "taper_override": _bool,
    },
    "cov_error": {
        "s_per_axis": int,
        "u_per_axis": int,
        "halfwidth": float,
        "central_fraction": float,
    },
    "taper_sweep": {"thetas": _float_list, "s_nodes": int},
    "demo": {"nu": float, "range": float, "grid": _ints},
}

_BASE = {
    "run": {"seed": 0, "threads": 1, "repeats": 1, "out": "results"},
    "experiment": {
        "nu": (2.0,),
        "ranges": (0.1, 0.25, 0.5, 1.0, 2.0),
        "lower": (0.0, 0.0),
        "upper": (5.0, 5.0),
        "m": 1000,
        "sigma": 0.01,
        "grid": (40, 40),
        "replicates": 20,
        "sim_cap": 10000,
    },
    "methods": {
        "names": ("markov-s1", "markov-db3", "convolution", "taper"),
        "s_nodes": 45,
        "exact_nodes": 7,
        "db3_nodes": 18,
        "conv_nodes": {2.0: 11, 3.0: 13},
        "taper_theta": {1.0: 1.1, 2.0: 1.5},
        "expand": 2.0,
        "fixed_count": False,
        "taper_override": False,
    },
    "cov_error": {"s_per_axis": 5, "u_per_axis": 41, "halfwidth": 2.0, "central_fraction": 0.5},
    "taper_sweep": {"thetas": _float_list("0.05:2:0.05"), "s_nodes": 100},
    "demo": {"nu": 2.0, "range": 1.0, "grid": (40, 40)},
}

# Per command and scale, on top of _BASE.
PRESETS = {
    ("cov-error", "desk"): {
        "experiment": {"nu": (1.0, 2.0, 3.0), "ranges": (0.5, 1.0, 1.5, 2.0),
                       "lower": (0.0, 0.0), "upper": (10.0, 10.0)},
        "methods": {
            "names": ("markov-s1", "markov-s2", "markov-s3", "exact-s1", "exact-s2",
                      "exact-s3", "markov-db3", "convolution"),
            "s_nodes": 50, "db3_nodes": 50, "conv_nodes": 7,
        },
    },
    ("cov-error", "paper"): {
        "experiment": {"nu": (1.0, 2.0, 3.0), "ranges": tuple(0.2 * k for k in range(1, 11)),
                       "lower": (0.0, 0.0), "upper": (10.0, 10.0)},
        "methods": {
            "names": ("markov-s1", "markov-s2", "markov-s3", "exact-s1", "exact-s2",
                      "exact-s3", "markov-db3", "convolution"),
            "s_nodes": 100, "exact_nodes": 10, "db3_nodes": 100, "conv_nodes": 10,
        },
    },
    ("kriging-bench", "desk"): {},
    ("kriging-bench", "paper"): {
        "experiment": {"nu": (1.0, 2.0, 3.0), "ranges": tuple(round(0.1 * k, 10) for k in range(1, 41)),
                       "m": 5000, "grid": (70, 70)},
        "methods": {"s_nodes": 100, "db3_nodes": 40, "conv_nodes": {2.0: 25, 3.0: 29},
                    "taper_theta": {1.0: 0.4, 2.0: 0.55, 3.0: 0.7}, "taper_override": True},
    },
    ("taper-sweep", "desk"): {
        "experiment": {"ranges": (1.0, 0.25), "replicates": 5},
    },
    ("taper-sweep", "paper"): {
        "experiment": {"ranges": (1.0, 0.25), "m": 5000, "grid": (70, 70)},
    },
    ("demo-predict", "desk"): {
        "experiment": {"replicates": 1},
        "methods": {"names": ("markov-s1", "convolution", "taper"), "s_nodes": 60},
    },
    ("demo-predict", "paper"): {
        "experiment": {"replicates": 1, "m": 5000},
        "methods": {"names": ("markov-s1", "convolution", "taper"), "s_nodes": 100,
                    "conv_nodes": {2.0: 25, 3.0: 29}, "taper_theta": {1.0: 0.4, 2.0: 0.55}},
        "demo": {"grid": (200, 200)},
    },
    ("selftest", "desk"): {},
    ("selftest", "paper"): {},
}

COMMANDS = tuple(sorted({cmd for cmd, _ in PRESETS}))


def parse_value(section, key, text):
    try:
        caster = SCHEMA[section][key]
    except KeyError:
        raise ConfigError(f"unknown key {section}.{key}") from None
    try:
        return caster(text)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {section}.{key}: {exc}") from None


@dataclass
class RunConfig:
    command: str
    scale: str
    values: dict

    def __getitem__(self, section):
        return self.values[section]

    def section(self, name):
        return dict(self.values[name])

    def validate(self):
        ex = self.values["experiment"]
        if len(ex["lower"]) != len(ex["upper"]):
            raise ConfigError("experiment.lower and experiment.upper differ in length")
        if any(hi <= lo for lo, hi in zip(ex["lower"], ex["upper"])):
            raise ConfigError("experiment box is empty")
        if len(ex["grid"]) != len(ex["lower"]):
            raise ConfigError("experiment.grid must have one entry per axis")
        if ex["m"] < 1:
            raise ConfigError("experiment.m must be at least 1")
        if ex["sigma"] <= 0:
            raise ConfigError("experiment.sigma must be positive")
        if ex["replicates"] < 1:
            raise ConfigError("experiment.replicates must be at least 1")
        if any(r <= 0 for r in ex["ranges"]) or any(n <= 0 for n in ex["nu"]):
            raise ConfigError("ranges and nu must be positive")
        from .experiments import METHODS

        unknown = [n for n in self.values["methods"]["names"] if n not in METHODS]
        if unknown:
            raise ConfigError(f"unknown methods: {', '.join(unknown)}")
        if self.values["run"]["threads"] < 1 or self.values["run"]["repeats"] < 1:
            raise ConfigError("run.threads and run.repeats must be at least 1")
        thetas = np.asarray(self.values["taper_sweep"]["thetas"])
        if thetas.size == 0 or np.any(thetas <= 0):
            raise ConfigError("taper_sweep.thetas must be positive")
        return self


def _merge(into, overrides):
    for section, keys in overrides.items():
        into.setdefault(section, {}).update(keys)


def load_config(command, scale="desk", path=None, overrides=()):
    """Build a validated :class:`RunConfig`.

    ``overrides`` holds ``section.key=value`` strings.
    """
    if (command, scale) not in PRESETS:
        raise ConfigError(f"unknown command/scale {command!r}/{scale!r}")
    values = deepcopy(_BASE)
    _merge(values, deepcopy(PRESETS[(command, scale)]))
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        parser.optionxform = str
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except configparser.Error as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from None
        for section in parser.sections():
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]")
            for key, text in parser.items(section):
                values[section][key] = parse_value(section, key, text)
    for item in overrides:
        lhs, sep, text = item.partition("=")
        section, dot, key = lhs.strip().partition(".")
        if not sep or not dot:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        values[section][key] = parse_value(section, key, text.strip())
    return RunConfig(command, scale, values).validate()
