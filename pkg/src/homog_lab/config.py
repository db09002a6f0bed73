"""Experiment configuration: INI-style ``key = value`` files with sections.

Every key has a documented default; unknown sections or keys are errors, so
a typo can never silently fall back to a default.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

from .fields import FieldSpec

# section -> key -> (type, default); None defaults mean "experiment decides"
SCHEMA: dict[str, dict[str, tuple]] = {
    "experiment": {
        "name": (str, None),
        "seed": (int, 20240601),
        "workers": (int, 1),
        "out": (str, "results"),
    },
    "field": {
        "kernel": (str, "box"),
        "dependence_range": (float, 1.0),
        "a_marginal": (str, "two_point"),
        "a_lo": (float, 1.0),
        "a_hi": (float, 4.0),
        "a_p": (float, 0.5),
        "c_marginal": (str, "rademacher"),
        "sigma": (float, 0.5),
        "coupling": (str, "independent"),
    },
    "evaluation": {
        "eps": ("floats", None),
        "points": ("points", None),
        "g": (str, "gaussian_bump"),
        "x0": (float, 0.0),
        "t": (float, None),
    },
    "budget": {
        "n_fields": (int, None),
        "n_W": (int, None),
        "n_paths": (int, None),
        "n_seeds": (int, None),
        "n_cells": (int, None),
    },
    "numerics": {
        "c_dt": (float, 0.01),
        "dt_divisor": (float, None),
        "dt": (float, None),
        "delta": (float, None),
        "delta_W": (float, None),
        "h_divisor": (float, 16.0),
        "pde_dt": (float, None),
        "scheme": (str, "implicit_euler"),
        "interface": (str, "exact"),
        "tol": (float, 1e-6),
        "n_mollify": (float, 64.0),
        "gamma": (float, 0.25),
        "R": (float, 1000.0),
        "levels": (int, None),
    },
}


def _parse(kind, text: str):
    text = text.strip()
    if kind is str:
        return text
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    if kind == "floats":
        return tuple(float(v) for v in text.replace(",", " ").split())
    if kind == "points":
        # "t:x, t:x, ..."
        out = []
        for item in text.split(","):
            item = item.strip()
            if not item:
                continue
            t, x = item.split(":")
            out.append((float(t), float(x)))
        return tuple(out)
    raise TypeError(kind)


def _format(value) -> str:
    if isinstance(value, tuple) and value and isinstance(value[0], tuple):
        return ", ".join(f"{t!r}:{x!r}" for t, x in value)
    if isinstance(value, tuple):
        return ", ".join(repr(v) for v in value)
    return str(value)


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat view of a configuration; ``None`` fields take experiment defaults."""

    name: str
    seed: int = 20240601
    workers: int = 1
    out: str = "results"
    field_spec: FieldSpec = field(default_factory=FieldSpec)
    values: tuple = ()  # sorted (key, value) pairs of the other sections

    def get(self, key: str, default=None):
        for k, v in self.values:
            if k == key:
                return default if v is None else v
        return default

    def with_overrides(self, **kw) -> "ExperimentConfig":
        base = {f.name for f in fields(self)}
        direct = {k: v for k, v in kw.items() if k in base}
        rest = {k: v for k, v in kw.items() if k not in base}
        known = {k for sec in ("evaluation", "budget", "numerics") for k in SCHEMA[sec]}
        bad = set(rest) - known
        if bad:
            raise KeyError(f"unknown configuration keys: {sorted(bad)}")
        vals = dict(self.values)
        vals.update(rest)
        return replace(self, values=tuple(sorted(vals.items())), **direct)

    def to_text(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp["experiment"] = {"name": self.name, "seed": str(self.seed),
                            "workers": str(self.workers), "out": self.out}
        cp["field"] = self.field_spec.to_dict()
        vals = dict(self.values)
        for sec in ("evaluation", "budget", "numerics"):
            items = {k: _format(vals[k]) for k in SCHEMA[sec] if vals.get(k) is not None}
            if items:
                cp[sec] = items
        lines = []
        for sec in cp.sections():
            lines.append(f"[{sec}]")
            lines.extend(f"{k} = {v}" for k, v in cp[sec].items())
            lines.append("")
        return "\n".join(lines)

    def digest(self) -> str:
        """Hash of the numerically relevant configuration (workers and out excluded)."""
        text = self.with_overrides(workers=1, out="-").to_text()
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def parse_config(text: str, name: Optional[str] = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    cp.read_string(text)
    unknown_sections = set(cp.sections()) - set(SCHEMA)
    if unknown_sections:
        raise KeyError(f"unknown configuration sections: {sorted(unknown_sections)}")
    parsed: dict[str, dict] = {}
    for sec in cp.sections():
        schema = SCHEMA[sec]
        for key, raw in cp[sec].items():
            if key not in schema:
                raise KeyError(f"unknown key {key!r} in section [{sec}]")
            try:
                parsed.setdefault(sec, {})[key] = _parse(schema[key][0], raw)
            except ValueError as err:
                raise ValueError(f"bad value for [{sec}] {key}: {raw!r}") from err
    exp = parsed.get("experiment", {})
    exp_name = name or exp.get("name")
    if not exp_name:
        raise KeyError("experiment name missing ([experiment] name or command line)")
    fdict = {k: str(v) for k, v in parsed.get("field", {}).items()}
    spec = FieldSpec.from_dict(fdict) if fdict else FieldSpec()
    vals = {}
    for sec in ("evaluation", "budget", "numerics"):
        for k, (_, default) in SCHEMA[sec].items():
            vals[k] = parsed.get(sec, {}).get(k, default)
    cfg = ExperimentConfig(
        name=exp_name,
        seed=exp.get("seed", SCHEMA["experiment"]["seed"][1]),
        workers=exp.get("workers", 1),
        out=exp.get("out", "results"),
        field_spec=spec,
        values=tuple(sorted(vals.items())),
    )
    if cfg.workers < 1:
        raise ValueError("workers must be >= 1")
    eps = cfg.get("eps")
    if eps is not None:
        if any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("eps values must be positive and strictly decreasing")
    return cfg


def load_config(path, name: Optional[str] = None) -> ExperimentConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"), name)


def default_config(name: str, **overrides) -> ExperimentConfig:
    return parse_config(f"[experiment]\nname = {name}\n").with_overrides(**overrides)
