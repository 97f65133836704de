"""Run configuration: one TOML file with a table per stage.

Every key is optional; unknown keys are rejected. Example::

    seed = 7

    [wedge]
    n_traces = 51

    [noise]
    sigma = 0.07

    [schedule]
    t = 2            # or: alphas = [0.5, 1.0]

    [model]
    feature_dim = 16
    n_residual_units = 4
    learning_rate = 0.001

    [training]
    corpus_size = 40

    [fx]
    filter_length_traces = 4

    [metrics]
    bands = [[0, 10], [10, 20]]

A top-level ``seed`` fills in ``noise.seed``, ``model.seed`` and
``training.corpus_seed`` unless those are given explicitly.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError
from .fx import FxConfig
from .metrics import DEFAULT_BANDS
from .nn.model import DenoiserConfig
from .synthgen import NoiseSpec, WedgeConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

CONFIG_ENV = "N2NSEISMIC_CONFIG"


@dataclass(frozen=True)
class ScheduleConfig:
    t: int = 2
    alphas: tuple[float, ...] | None = None


@dataclass(frozen=True)
class TrainingConfig:
    corpus_size: int = 40
    image_size: int = 128
    saturated_fraction: float = 0.0
    corpus_seed: int = 0


@dataclass(frozen=True)
class MetricsConfig:
    bands: tuple[tuple[float, float], ...] = DEFAULT_BANDS
    f_max: float = 60.0
    velocity: float | None = None


@dataclass(frozen=True)
class RunConfig:
    seed: int | None = None
    wedge: WedgeConfig = field(default_factory=WedgeConfig)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    model: DenoiserConfig = field(default_factory=DenoiserConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    fx: FxConfig = field(default_factory=FxConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)


_SECTIONS = {
    "wedge": WedgeConfig,
    "noise": NoiseSpec,
    "schedule": ScheduleConfig,
    "model": DenoiserConfig,
    "training": TrainingConfig,
    "fx": FxConfig,
    "metrics": MetricsConfig,
}
_SEEDED = {"noise": "seed", "model": "seed", "training": "corpus_seed"}
_TUPLE_FIELDS = {("schedule", "alphas"), ("fx", "band_hz")}


def _build(section: str, cls, values: dict):
    known = {f.name for f in fields(cls)}
    for key in values:
        if key not in known:
            raise ConfigError(f"unknown config key '{section}.{key}'")
    kw = dict(values)
    for key in kw:
        if (section, key) in _TUPLE_FIELDS and kw[key] is not None:
            kw[key] = tuple(kw[key])
    if section == "metrics" and "bands" in kw:
        kw["bands"] = tuple((float(lo), float(hi)) for lo, hi in kw["bands"])
    try:
        return cls(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [{section}] config: {exc}") from None


def parse_config(data: dict) -> RunConfig:
    for key in data:
        if key != "seed" and key not in _SECTIONS:
            raise ConfigError(f"unknown config key '{key}'")
        if key in _SECTIONS and not isinstance(data[key], dict):
            raise ConfigError(f"config key '{key}' must be a table")
    seed = data.get("seed")
    if seed is not None and (not isinstance(seed, int) or seed < 0):
        raise ConfigError("config key 'seed' must be a non-negative integer")
    built = {}
    for name, cls in _SECTIONS.items():
        values = dict(data.get(name, {}))
        if seed is not None and name in _SEEDED:
            values.setdefault(_SEEDED[name], seed)
        built[name] = _build(name, cls, values)
    return RunConfig(seed=seed, **built)


def load_config(path=None) -> RunConfig:
    """Parse ``path``, else the file named by $N2NSEISMIC_CONFIG, else defaults."""
    if path is None:
        path = os.environ.get(CONFIG_ENV)
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(data)
