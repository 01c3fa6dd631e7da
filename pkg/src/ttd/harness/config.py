"""Named parameter presets and the flat ``key = value`` experiment file format.

Settings are merged in this order, later sources winning: preset, config
file, ``TTD_*`` environment variables, command-line flags.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Mapping, Optional

from ..learners import LearnerConfig
from ..td_core import ConfigError, TdConfig
from .experiment import ExperimentSpec

ENV_PREFIX = "TTD_"

# key -> parser; keys double as long CLI flag names (underscores become dashes)
FIELDS = {
    "env": str,
    "algo": str,
    "lambda": float,
    "m": int,
    "gamma": float,
    "alpha": float,
    "beta": float,
    "temperature": float,
    "episodes": int,
    "runs": int,
    "seed": int,
    "seeds": lambda s: [int(x) for x in str(s).replace(",", " ").split()],
    "engine": str,
    "step_cap": int,
    "episode_cap": int,
    "window": int,
    "resync": int,
    "adaptive_lambda": lambda s: str(s).lower() in ("1", "true", "yes", "on"),
}

DEFAULTS = {
    "env": "car_parking",
    "algo": "ahc",
    "lambda": 0.9,
    "m": 25,
    "gamma": 0.95,
    "alpha": 0.25,
    "beta": 0.25,
    "temperature": 0.02,
    "episodes": 250,
    "runs": 25,
    "seed": 0,
    "engine": "iterative",
    "window": 5,
    "resync": 1000,
    "adaptive_lambda": False,
}


def _car(lam, m, rate):
    return {"env": "car_parking", "algo": "ahc", "lambda": lam, "m": m, "alpha": rate, "beta": rate,
            "gamma": 0.95, "temperature": 0.02, "episodes": 250, "runs": 25}


PRESETS = {
    # study 1: effect of lambda, m = 25
    "car-l0": _car(0.0, 25, 0.7),
    "car-l0.3": _car(0.3, 25, 0.5),
    "car-l0.5": _car(0.5, 25, 0.5),
    "car-l0.7": _car(0.7, 25, 0.5),
    "car-l0.8": _car(0.8, 25, 0.5),
    "car-l0.9": _car(0.9, 25, 0.25),
    "car-l1": _car(1.0, 25, 0.25),
    # study 2: effect of m, lambda = 0.9
    "car-m5": _car(0.9, 5, 0.25),
    "car-m10": _car(0.9, 10, 0.25),
    "car-m15": _car(0.9, 15, 0.25),
    "car-m20": _car(0.9, 20, 0.25),
    "car-m25": _car(0.9, 25, 0.25),
    "cartpole": {"env": "cart_pole", "algo": "ahc", "lambda": 0.9, "m": 25, "gamma": 0.95,
                 "alpha": 0.1, "beta": 0.05, "temperature": 0.0001, "episodes": 100, "runs": 10,
                 "step_cap": 500_000},
}


def parse_config_text(text: str) -> dict:
    out = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value', got {raw!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.replace("-", "_")
        if key == "preset":
            out["preset"] = value
            continue
        if key not in FIELDS:
            raise ConfigError(f"line {n}: unknown key {key!r}")
        try:
            out[key] = FIELDS[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {n}: bad value for {key}: {value!r}") from exc
    return out


def load_config_file(path: Path) -> dict:
    return parse_config_text(Path(path).read_text())


def from_environ(environ: Optional[Mapping[str, str]] = None) -> dict:
    environ = os.environ if environ is None else environ
    out = {}
    for key, parse in FIELDS.items():
        raw = environ.get(ENV_PREFIX + key.upper())
        if raw is not None:
            try:
                out[key] = parse(raw)
            except ValueError as exc:
                raise ConfigError(f"{ENV_PREFIX}{key.upper()}: bad value {raw!r}") from exc
    if ENV_PREFIX + "PRESET" in environ:
        out["preset"] = environ[ENV_PREFIX + "PRESET"]
    return out


def merge_settings(*layers: Mapping) -> dict:
    """Merge setting layers; a ``preset`` key expands to its values under that layer's own keys."""
    settings = dict(DEFAULTS)
    for layer in layers:
        layer = {k: v for k, v in layer.items() if v is not None}
        preset = layer.pop("preset", None)
        if preset is not None:
            if preset not in PRESETS:
                raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
            settings.update(PRESETS[preset])
            if "step_cap" not in PRESETS[preset]:
                settings.pop("step_cap", None)
        settings.update(layer)
    return settings


def spec_from_settings(settings: Mapping) -> ExperimentSpec:
    """Build and validate an experiment from merged settings."""
    s = dict(settings)
    # an explicit seed list overrides runs
    seeds = s.get("seeds") or [s["seed"] + i for i in range(s["runs"])]
    td = TdConfig(gamma=s["gamma"], lam=s["lambda"], m=s["m"], engine=s["engine"],
                  resync_period=s["resync"])
    learner = LearnerConfig(algorithm=s["algo"], alpha=s["alpha"], beta=s["beta"],
                            temperature=s["temperature"], td=td,
                            adaptive_lambda=s.get("adaptive_lambda", False))
    spec = ExperimentSpec(
        environment=s["env"],
        learner=learner,
        episodes=s["episodes"],
        seeds=list(seeds),
        step_cap_total=s.get("step_cap"),
        metric_window=s["window"],
        episode_step_cap=s.get("episode_cap"),
    )
    spec.validate()
    return spec


def preset_spec(name: str, **overrides) -> ExperimentSpec:
    return spec_from_settings(merge_settings({"preset": name}, overrides))
