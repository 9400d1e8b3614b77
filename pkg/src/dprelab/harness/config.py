"""Experiment configuration, canonical serialization and hashing."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from typing import Any, Optional

import yaml

from ..env_field import EnvironmentSpec
from ..errors import ConfigError, ParameterError

OUTPUT_ENV = "DPRELAB_OUTPUT_DIR"

COMMANDS = (
    "estimate-free-energy",
    "sweep-beta",
    "fractional-upper",
    "variance-profile",
    "intermediate-disorder",
    "continuum-free-energy",
    "ck-check",
    "scaling-check",
    "second-moment-series",
    "verify-identities",
    "coarse-grain-tail",
)

# execution settings: not part of the config echo or hash
EXECUTION_FIELDS = ("workers", "output")

# fields each command cannot run without
REQUIRED = {
    "estimate-free-energy": ("beta", "N", "replicas"),
    "sweep-beta": ("betas", "replicas"),
    "fractional-upper": ("beta", "theta", "T", "n", "replicas"),
    "variance-profile": ("beta", "N_grid", "replicas"),
    "intermediate-disorder": ("T", "n", "replicas"),
    "continuum-free-energy": ("n", "replicas"),
    "ck-check": ("beta", "N"),
    "scaling-check": ("T", "n", "replicas"),
    "second-moment-series": ("beta", "T", "k_max"),
    "verify-identities": (),
    "coarse-grain-tail": ("theta", "n"),
}


@dataclass
class ExperimentConfig:
    command: str
    family: str = "gaussian-unit"
    params: list = field(default_factory=list)
    beta: Optional[float] = None
    betas: Optional[list] = None
    N: Optional[int] = None
    N_grid: Optional[list] = None
    N_multiplier: float = 100.0
    min_multiplier: float = 1.0
    T: Optional[float] = None
    Ts: Optional[list] = None
    n: Optional[int] = None
    r: float = 1.0
    theta: Optional[float] = None
    k_max: Optional[int] = None
    c: float = 1.0
    kind: str = "point-to-line"
    doubling: bool = True
    draws: int = 100
    tol: float = 1e-8
    replicas: Optional[int] = None
    seed: int = 0
    workers: int = 1
    output: Optional[str] = None

    # ---------------------------------------------------------------
    def validate(self) -> "ExperimentConfig":
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}", field="command")
        for name in REQUIRED[self.command]:
            if getattr(self, name) is None:
                raise ConfigError(f"{self.command} needs {name}", field=name)
        if self.command == "coarse-grain-tail" and self.T is None and self.Ts is None:
            raise ConfigError("coarse-grain-tail needs T or Ts", field="T")
        if self.command == "continuum-free-energy" and self.T is None and self.Ts is None:
            raise ConfigError("continuum-free-energy needs T or Ts", field="T")
        try:
            EnvironmentSpec(self.family, tuple(self.params))
        except ParameterError as exc:
            raise ConfigError(str(exc), field="family/params") from exc
        for name in ("beta", "T", "r", "theta", "N_multiplier", "min_multiplier", "c", "tol"):
            v = getattr(self, name)
            if v is not None and not math.isfinite(float(v)):
                raise ConfigError(f"{name} must be finite", field=name)
        for name in ("N", "n", "k_max", "replicas"):
            v = getattr(self, name)
            if v is not None and int(v) < 1:
                raise ConfigError(f"{name} must be >= 1", field=name)
        if self.replicas is not None and self.command not in ("ck-check",) and self.replicas < 2:
            raise ConfigError("need at least 2 replicas", field="replicas")
        if int(self.workers) < 1:
            raise ConfigError("workers must be >= 1", field="workers")
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise ConfigError("seed must lie in [0, 2^64)", field="seed")
        return self

    @property
    def spec(self) -> EnvironmentSpec:
        return EnvironmentSpec(self.family, tuple(self.params))

    def echo(self) -> dict:
        """The config as plain JSON data, execution settings removed."""
        d = {k: _plain(v) for k, v in dataclasses.asdict(self).items() if k not in EXECUTION_FIELDS}
        return d

    def to_dict(self) -> dict:
        return {k: _plain(v) for k, v in dataclasses.asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            key = sorted(unknown)[0]
            raise ConfigError(f"unknown config field {key!r}", field=key)
        if "command" not in d:
            raise ConfigError("config has no command", field="command")
        return cls(**{_field_name(k): v for k, v in d.items()})

    def config_hash(self) -> str:
        return hashlib.sha256(canonical_json(self.echo()).encode()).hexdigest()

    def default_output(self) -> str:
        root = os.environ.get(OUTPUT_ENV, ".")
        return os.path.join(root, f"{self.command}-{self.config_hash()[:12]}.jsonl")


def _field_name(k):
    return k.replace("-", "_") if k != "N-grid" else "N_grid"


def _plain(v: Any):
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    if isinstance(v, list):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if hasattr(v, "item") and callable(v.item):  # numpy scalars
        return _plain(v.item())
    if isinstance(v, float) and not math.isfinite(v):
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return v


def canonical_json(obj) -> str:
    """Sorted keys, no whitespace, shortest round-trip floats."""
    return json.dumps(_plain(obj), sort_keys=True, separators=(",", ":"), allow_nan=False)


def load_config_file(path: str) -> dict:
    """Read a YAML or JSON config file into a dict."""
    with open(path) as fh:
        text = fh.read()
    if path.endswith(".json"):
        data = json.loads(text)
    else:
        data = yaml.safe_load(text)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a mapping", field="config")
    return data


def build_config(command: str, file_values: dict, overrides: dict) -> ExperimentConfig:
    """File values, then command-line overrides (non-None ones win)."""
    d = dict(file_values)
    if d.get("command", command) != command:
        raise ConfigError(f"config file is for {d['command']!r}, not {command!r}", field="command")
    d["command"] = command
    d.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(d).validate()
