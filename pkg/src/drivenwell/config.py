"""Flat key-value run configuration for the experiment driver.

Format: UTF-8 text, one ``key = value`` per line, ``#`` starts a comment,
blank lines ignored.  Unknown keys and out-of-range values are rejected
with their line number.  Defaults reproduce the headline regime of the
study: D=2, F=1e-3, omega=1.5, N=64, gamma=1e-6, k_B T=1e-4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .doublewell import ModelParams
from .dissipation import BathParams

EXPERIMENTS = ("spectrum", "dynamics", "decoherence", "asymptotic")


class ConfigError(ValueError):
    """Configuration text could not be parsed or validated."""


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams = field(default_factory=ModelParams)
    bath: BathParams = field(default_factory=BathParams)
    experiment: str = "spectrum"
    sweep_axis: str = "omega"
    sweep_min: float = 1.4
    sweep_max: float = 1.6
    sweep_points: int = 101
    temperatures: tuple = (1e-4, 1e-3, 1e-2)
    steps_per_period: int = 512
    samples_per_period: int = 256
    dt: float = 0.0          # 0 = choose from the kernel's time scales
    entropy_target: float = 0.2
    max_cycles: int = 2**20
    dynamics_cycles: int = 4
    output: str = ""         # empty = "<experiment>.csv"
    threads: int = 0         # 0 = FLOQUET_THREADS or all execution units

    def output_path(self) -> str:
        return self.output or f"{self.experiment}.csv"


# key -> (target object, attribute, type)
_SCHEMA = {
    "experiment": ("self", "experiment", str),
    "D": ("model", "D", float),
    "F": ("model", "F", float),
    "omega": ("model", "omega", float),
    "N": ("model", "N", int),
    "sigma": ("model", "sigma", float),
    "gamma": ("bath", "gamma", float),
    "temperature": ("bath", "temperature", float),
    "n_f": ("bath", "n_f", int),
    "K": ("bath", "K", int),
    "sweep_axis": ("self", "sweep_axis", str),
    "sweep_min": ("self", "sweep_min", float),
    "sweep_max": ("self", "sweep_max", float),
    "sweep_points": ("self", "sweep_points", int),
    "temperatures": ("self", "temperatures", "float_list"),
    "steps_per_period": ("self", "steps_per_period", int),
    "samples_per_period": ("self", "samples_per_period", int),
    "dt": ("self", "dt", float),
    "entropy_target": ("self", "entropy_target", float),
    "max_cycles": ("self", "max_cycles", int),
    "dynamics_cycles": ("self", "dynamics_cycles", int),
    "output": ("self", "output", str),
    "threads": ("self", "threads", int),
}


# per-key range/enum checks, applied while the line number is still known
_CHECKS = {
    "experiment": (lambda v: v in EXPERIMENTS,
                   f"must be one of {', '.join(EXPERIMENTS)}"),
    "sweep_axis": (lambda v: v in ("omega", "F"), "must be omega or F"),
    "D": (lambda v: v > 0, "must be > 0"),
    "F": (lambda v: v >= 0, "must be >= 0"),
    "omega": (lambda v: v > 0, "must be > 0"),
    "N": (lambda v: v >= 8, "must be >= 8"),
    "sigma": (lambda v: v > 0, "must be > 0"),
    "gamma": (lambda v: v > 0, "must be > 0"),
    "temperature": (lambda v: v >= 0, "must be >= 0"),
    "n_f": (lambda v: v >= 3, "must be >= 3"),
    "K": (lambda v: v >= 1, "must be >= 1"),
    "sweep_points": (lambda v: v >= 1, "must be >= 1"),
    "temperatures": (lambda v: len(v) > 0 and all(t > 0 for t in v),
                     "must be a non-empty list of positive values"),
    "steps_per_period": (lambda v: v >= 2, "must be >= 2"),
    "samples_per_period": (lambda v: v >= 2, "must be >= 2"),
    "dt": (lambda v: v >= 0, "must be >= 0"),
    "entropy_target": (lambda v: v > 0, "must be > 0"),
    "max_cycles": (lambda v: v >= 1, "must be >= 1"),
    "dynamics_cycles": (lambda v: v >= 1, "must be >= 1"),
    "threads": (lambda v: v >= 0, "must be >= 0"),
}


def _convert(raw: str, kind, key: str, lineno: int):
    try:
        if kind is int:
            value = float(raw)
            if value != int(value):
                raise ValueError
            value = int(value)
        elif kind is float:
            value = float(raw)
        elif kind == "float_list":
            value = tuple(float(tok) for tok in raw.split(",") if tok.strip())
        else:
            value = raw
    except ValueError:
        raise ConfigError(
            f"line {lineno}: value {raw!r} for key {key!r} is not a valid "
            f"{getattr(kind, '__name__', kind)}"
        ) from None
    if key in _CHECKS:
        ok, message = _CHECKS[key]
        if not ok(value):
            raise ConfigError(f"line {lineno}: {key} = {raw} {message}")
    return value


def _validate(config: RunConfig) -> RunConfig:
    if config.experiment not in EXPERIMENTS:
        raise ConfigError(
            f"experiment must be one of {', '.join(EXPERIMENTS)}, "
            f"got {config.experiment!r}"
        )
    if config.sweep_axis not in ("omega", "F"):
        raise ConfigError(f"sweep_axis must be omega or F, got {config.sweep_axis!r}")
    if config.sweep_points < 1:
        raise ConfigError(f"sweep_points must be >= 1, got {config.sweep_points}")
    if config.sweep_points > 1 and not config.sweep_max > config.sweep_min:
        raise ConfigError(
            f"sweep range [{config.sweep_min}, {config.sweep_max}] is empty"
        )
    if not config.temperatures or any(t <= 0 for t in config.temperatures):
        raise ConfigError(f"temperatures must be positive, got {config.temperatures}")
    if config.steps_per_period % config.samples_per_period != 0:
        raise ConfigError(
            f"steps_per_period ({config.steps_per_period}) must be a multiple "
            f"of samples_per_period ({config.samples_per_period})"
        )
    if config.dt < 0:
        raise ConfigError(f"dt must be >= 0, got {config.dt}")
    if not 0 < config.entropy_target < 2 * math.log(config.bath.n_f):
        raise ConfigError(f"entropy_target {config.entropy_target} out of range")
    if config.max_cycles < 1 or config.dynamics_cycles < 1:
        raise ConfigError("cycle counts must be >= 1")
    if config.threads < 0:
        raise ConfigError(f"threads must be >= 0, got {config.threads}")
    if config.bath.n_f > config.model.N:
        raise ConfigError(
            f"n_f ({config.bath.n_f}) exceeds basis dimension ({config.model.N})"
        )
    if config.bath.K * 2 + 2 > config.samples_per_period:
        raise ConfigError(
            f"K={config.bath.K} needs samples_per_period >= {2 * config.bath.K + 2}"
        )
    return config


def parse_config(text: str) -> RunConfig:
    """Parse and validate a key-value document into a RunConfig."""
    model_kw = {}
    bath_kw = {}
    self_kw = {}
    seen = set()
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        target, attr, kind = _SCHEMA[key]
        value = _convert(raw, kind, key, lineno)
        {"model": model_kw, "bath": bath_kw, "self": self_kw}[target][attr] = value
    try:
        model = ModelParams(**model_kw)
        bath = BathParams(**bath_kw)
        return _validate(RunConfig(model=model, bath=bath, **self_kw))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def serialize_config(config: RunConfig) -> str:
    """Emit a document that parses back to an identical configuration."""
    lines = []
    for key, (target, attr, kind) in _SCHEMA.items():
        obj = config if target == "self" else getattr(config, target)
        value = getattr(obj, attr)
        if kind == "float_list":
            rendered = ",".join(f"{v:.17g}" for v in value)
        elif kind is float:
            rendered = f"{value:.17g}"
        else:
            rendered = str(value)
        lines.append(f"{key} = {rendered}")
    return "\n".join(lines) + "\n"


def with_overrides(config: RunConfig, experiment: str | None = None,
                   output: str | None = None,
                   threads: int | None = None) -> RunConfig:
    """Apply command-line overrides and re-validate."""
    updated = config
    if experiment is not None:
        updated = replace(updated, experiment=experiment)
    if output is not None:
        updated = replace(updated, output=output)
    if threads is not None:
        updated = replace(updated, threads=threads)
    return _validate(updated)
