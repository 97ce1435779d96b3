"""Run configuration: a flat JSON-compatible key-value format.

Defaults follow the usual library settings (sigma = beta2 = 0.999,
epsilon = 1e-8, weight decay 0.01, beta1 = 0.9). The same file drives every
optimizer: switching the ``optimizer`` key reuses the schedule, weight decay
and sigma unchanged, which is the pairing the tuning protocol relies on.
Validation happens before any compute, including the well-posedness guard
``sup_k gamma_k < beta`` for the inertial-Newton family.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, fields, replace
from importlib import resources
from typing import Optional

import numpy as np

from ..errors import ConfigError
from ..numerics import Precision, RngStream
from ..problems import (
    Problem,
    generate_synthetic,
    load_csv_dataset,
    make_problem,
)
from ..schedulers import ScheduleSpec, stays_below

OPTIMIZER_KINDS = (
    "innaprop",
    "innaprop_plain",
    "innaprop_momentum",
    "dinadam",
    "inna",
    "adamw",
    "adam",
    "sgd",
    "momentum",
    "nesterov",
    "rmsprop_momentum",
    "nadam",
)

INERTIAL_KINDS = ("innaprop", "innaprop_plain", "innaprop_momentum", "inna", "dinadam")

# Purpose offsets for per-run randomness; every stream is keyed by the config
# seed alone so grid cells see identical data, inits and batch orders.
STREAM_DATA = 0
STREAM_INIT = 1
STREAM_BATCH = 2


@dataclass(frozen=True)
class RunConfig:
    # problem
    problem: str = "quadratic"
    dim: Optional[int] = None
    spectrum: Optional[tuple] = None
    hidden: tuple = (8,)
    activation: str = "tanh"
    dataset: Optional[str] = None
    n_samples: int = 240
    split_fraction: float = 0.75
    separation: float = 6.0
    noise: float = 0.0
    label_column: Optional[str] = None
    # optimizer
    optimizer: str = "innaprop"
    alpha: Optional[float] = None
    beta: Optional[float] = None
    sigma: float = 0.999
    beta1: float = 0.9
    sigma1: float = 0.9
    epsilon: float = 1e-8
    weight_decay: float = 0.01
    bias_correction: bool = True
    grad_clip: Optional[float] = None
    form: Optional[str] = None
    # schedule
    schedule: str = "constant"
    lr: float = 1e-3
    lr_min: float = 0.0
    t_max: Optional[int] = None
    t_warmup: int = 0
    t_decay: Optional[int] = None
    # loop
    steps: int = 100
    batch_size: Optional[int] = None
    batch_order: str = "shuffled-epoch"
    log_every: int = 1
    seed: int = 0
    precision: str = "f64"
    init_scale: float = 1.0
    # ode command extras
    t_end: float = 1.0
    ode_dt: float = 1e-3


_FIELDS = {f.name: f for f in fields(RunConfig)}
_LIST_FIELDS = {"spectrum", "hidden"}


def _coerce(key: str, value):
    if value is None:
        return None
    if key in _LIST_FIELDS:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"key {key!r} must be a list")
        return tuple(float(v) if key == "spectrum" else int(v) for v in value)
    if key in ("bias_correction",):
        if not isinstance(value, bool):
            raise ConfigError(f"key {key!r} must be a boolean")
        return value
    if key in ("dim", "t_max", "t_warmup", "t_decay", "steps", "batch_size",
               "log_every", "seed", "n_samples"):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"key {key!r} must be an integer")
        return value
    if key in ("problem", "optimizer", "schedule", "precision", "activation",
               "dataset", "label_column", "form", "batch_order"):
        if not isinstance(value, str):
            raise ConfigError(f"key {key!r} must be a string")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"key {key!r} must be a number")
    return float(value)


def parse_config_dict(raw: dict) -> RunConfig:
    """Validate a raw key-value mapping into a RunConfig."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    data = dict(raw)
    if "beta2" in data:
        beta2 = data.pop("beta2")
        if "sigma" in data and float(data["sigma"]) != float(beta2):
            raise ConfigError("keys 'sigma' and 'beta2' are aliases but disagree")
        data["sigma"] = beta2
    cleaned = {}
    for key, value in data.items():
        if key not in _FIELDS:
            raise ConfigError(f"unknown key {key!r}")
        cleaned[key] = _coerce(key, value)
    config = RunConfig(**cleaned)
    validate_config(config)
    return config


def parse_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return parse_config_dict(raw)


def validate_config(config: RunConfig):
    if config.problem not in ("quadratic", "rosenbrock", "logistic_regression", "tiny_mlp"):
        raise ConfigError(f"unknown problem {config.problem!r}")
    if config.optimizer not in OPTIMIZER_KINDS:
        raise ConfigError(f"unknown optimizer {config.optimizer!r}")
    if config.steps <= 0:
        raise ConfigError("key 'steps' must be positive")
    if config.log_every <= 0:
        raise ConfigError("key 'log_every' must be positive")
    if not config.lr > 0:
        raise ConfigError("key 'lr' must be positive")
    if not 0.0 <= config.sigma <= 1.0:
        raise ConfigError("key 'sigma' must lie in [0, 1]")
    if not 0.0 <= config.beta1 < 1.0:
        raise ConfigError("key 'beta1' must lie in [0, 1)")
    if config.batch_size is not None and config.batch_size <= 0:
        raise ConfigError("key 'batch_size' must be positive")
    if config.precision not in ("f32", "f64"):
        raise ConfigError("key 'precision' must be 'f32' or 'f64'")
    if not config.init_scale > 0:
        raise ConfigError("key 'init_scale' must be positive")
    if config.optimizer in INERTIAL_KINDS:
        if config.alpha is None or config.beta is None:
            raise ConfigError(f"optimizer {config.optimizer!r} needs keys 'alpha' and 'beta'")
    schedule = build_schedule(config)
    if config.optimizer in INERTIAL_KINDS and config.optimizer != "dinadam":
        if not stays_below(schedule, config.beta):
            raise ConfigError(
                f"well-posedness violated: schedule can emit gamma={schedule.gamma0} "
                f">= beta={config.beta}"
            )


def emit_config(config: RunConfig) -> dict:
    """Canonical JSON-compatible dict; parse(emit(c)) == c."""
    out = {}
    for f in fields(RunConfig):
        value = getattr(config, f.name)
        if isinstance(value, tuple):
            value = list(value)
        out[f.name] = value
    return out


def content_hash(config: RunConfig) -> str:
    blob = json.dumps(emit_config(config), sort_keys=True).encode()
    return hashlib.sha1(blob).hexdigest()


def build_schedule(config: RunConfig) -> ScheduleSpec:
    t_max = config.t_max if config.t_max is not None else config.steps
    kwargs = {}
    if config.schedule == "cosine_warmup":
        kwargs["t_decay"] = config.t_decay
    try:
        return ScheduleSpec(
            kind=config.schedule,
            gamma0=config.lr,
            t_max=t_max,
            gamma_min=config.lr_min,
            t_warmup=config.t_warmup,
            **kwargs,
        )
    except Exception as exc:
        raise ConfigError(f"invalid schedule: {exc}") from None


def build_problem(config: RunConfig) -> Problem:
    if config.problem == "quadratic":
        spectrum = config.spectrum if config.spectrum is not None else (1.0, 10.0)
        if config.dim is not None and config.spectrum is None:
            spectrum = tuple(np.linspace(1.0, 10.0, config.dim))
        return make_problem("quadratic", spectrum=spectrum)
    if config.problem == "rosenbrock":
        return make_problem("rosenbrock", dim=config.dim or 2)
    dataset_kind = config.dataset or "two_gaussians"
    if dataset_kind.endswith(".csv"):
        if config.label_column is None:
            raise ConfigError("CSV datasets need key 'label_column'")
        dataset = load_csv_dataset(
            dataset_kind, config.label_column, config.split_fraction, config.seed
        )
    else:
        dataset = generate_synthetic(
            dataset_kind,
            n=config.n_samples,
            dim=config.dim or 2,
            seed=config.seed,
            split_fraction=config.split_fraction,
            separation=config.separation,
            noise=config.noise,
        )
    if config.problem == "logistic_regression":
        return make_problem("logistic_regression", dataset=dataset)
    return make_problem(
        "tiny_mlp", dataset=dataset, hidden=config.hidden, activation=config.activation
    )


def init_stream(config: RunConfig) -> RngStream:
    return RngStream(config.seed, STREAM_INIT)


def batch_stream(config: RunConfig) -> RngStream:
    return RngStream(config.seed, STREAM_BATCH)


def precision_of(config: RunConfig) -> Precision:
    return Precision.of(config.precision)


def preset_names() -> list[str]:
    pkg = resources.files("innaprop.presets")
    return sorted(p.name[:-5] for p in pkg.iterdir() if p.name.endswith(".json"))


def load_preset(name: str) -> RunConfig:
    """Parse one of the shipped preset files by bare name."""
    pkg = resources.files("innaprop.presets")
    candidate = pkg / f"{name}.json"
    if not candidate.is_file():
        raise ConfigError(f"unknown preset {name!r}; shipped: {preset_names()}")
    return parse_config_dict(json.loads(candidate.read_text(encoding="utf-8")))


def with_optimizer(config: RunConfig, optimizer: str, **overrides) -> RunConfig:
    """Swap the optimizer while reusing schedule, decay and sigma settings."""
    cfg = replace(config, optimizer=optimizer, **overrides)
    validate_config(cfg)
    return cfg
