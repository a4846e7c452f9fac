"""Experiment configuration: one YAML file per experiment."""

from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .counts import CountError, CountModel, make_count
from .models import HeavyTailModel, ModelError, make_model


class _Loader(yaml.SafeLoader):
    """SafeLoader that also reads 1e6-style floats as numbers."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:[0-9][0-9_]*)(?:\.[0-9_]*)?[eE][-+]?[0-9]+$"),
    list("-+0123456789"),
)


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration."""


@dataclass
class ModelSpec:
    family: str
    params: dict = field(default_factory=dict)

    def build(self) -> HeavyTailModel:
        try:
            return make_model(self.family, **self.params)
        except ModelError as exc:
            raise ConfigError(f"model.{_field_of(exc, self.params)}: {exc}") from None


@dataclass
class CountSpec:
    family: str
    params: dict = field(default_factory=dict)

    def build(self) -> CountModel:
        try:
            count = make_count(self.family, **self.params)
            count._check()
        except CountError as exc:
            raise ConfigError(f"count.{_field_of(exc, self.params)}: {exc}") from None
        return count


@dataclass
class LatticeSpec:
    step: float = 0.01
    x_max: float | None = None  # default: grid x_max plus a margin
    method: str = "auto"
    budget: int = 200_000_000

    def validate(self):
        if not self.step > 0:
            raise ConfigError("lattice.step: must be > 0")
        if self.x_max is not None and not self.x_max > self.step:
            raise ConfigError("lattice.x_max: must exceed lattice.step")
        if self.method not in ("auto", "panjer", "series"):
            raise ConfigError("lattice.method: must be auto, panjer or series")
        if not self.budget > 0:
            raise ConfigError("lattice.budget: must be > 0")


@dataclass
class GridSpec:
    x_min: float = 10.0
    x_max: float = 1000.0
    ratio: float = 10 ** (1 / 8)
    compound_x_max: float | None = None  # shorter grid for compound tails

    def validate(self):
        if not 0 < self.x_min < self.x_max:
            raise ConfigError("grid: need 0 < x_min < x_max")
        if self.compound_x_max is not None and not self.x_min < self.compound_x_max:
            raise ConfigError("grid.compound_x_max: must exceed grid.x_min")
        if not self.ratio > 1:
            raise ConfigError("grid.ratio: must be > 1")


@dataclass
class DiagnosticsSpec:
    probe_t: list = field(default_factory=lambda: [0.5, 1.0, 2.0])
    tol: float = 0.10
    local_ratio_tol: float = 0.01
    zero_tol: float = 0.05
    bounded_tol: float = 0.10
    window: int = 8
    closed_x_max: float = 1e6
    y_set: list = field(default_factory=lambda: [0.5, 2.0])
    A_values: list = field(default_factory=lambda: [10.0, 50.0])
    nfold: list = field(default_factory=list)
    check_halving: bool = True
    kesten: bool = True
    eps: float = 0.5
    n_max: int = 8
    equivalence: bool = True
    max_cancellation_fraction: float = 0.25

    def validate(self):
        if not self.probe_t or any(not t > 0 for t in self.probe_t):
            raise ConfigError("diagnostics.probe_t: values must be > 0")
        for name in ("tol", "local_ratio_tol", "zero_tol", "bounded_tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"diagnostics.{name}: must be > 0")
        if self.window < 2:
            raise ConfigError("diagnostics.window: must be >= 2")
        if any(not y > 0 for y in self.y_set):
            raise ConfigError("diagnostics.y_set: values must be > 0")
        if any(int(n) != n or n < 2 for n in self.nfold):
            raise ConfigError("diagnostics.nfold: values must be integers >= 2")
        if not self.eps > 0:
            raise ConfigError("diagnostics.eps: must be > 0")
        if int(self.n_max) < 2:
            raise ConfigError("diagnostics.n_max: must be >= 2")
        if not 0 <= self.max_cancellation_fraction <= 1:
            raise ConfigError("diagnostics.max_cancellation_fraction: must lie in [0, 1]")


@dataclass
class MonteCarloSpec:
    n_samples: int = 1_000_000
    seed: int | None = None
    min_exceedances: float = 100.0

    def validate(self):
        if int(self.n_samples) < 10_000:
            raise ConfigError("montecarlo.n_samples: must be >= 10000")


@dataclass
class OutputSpec:
    dir: str = "out"
    formats: list = field(default_factory=lambda: ["csv", "json"])

    def validate(self):
        bad = set(self.formats) - {"csv", "json"}
        if bad:
            raise ConfigError(f"output.formats: unsupported {sorted(bad)}")


@dataclass
class ExperimentConfig:
    name: str
    model: ModelSpec
    count: CountSpec | None = None
    lattice: LatticeSpec = field(default_factory=LatticeSpec)
    grid: GridSpec = field(default_factory=GridSpec)
    diagnostics: DiagnosticsSpec = field(default_factory=DiagnosticsSpec)
    montecarlo: MonteCarloSpec = field(default_factory=MonteCarloSpec)
    output: OutputSpec = field(default_factory=OutputSpec)
    source: Path | None = field(default=None, compare=False)

    def validate(self) -> "ExperimentConfig":
        self.model.build()
        if self.count is not None:
            self.count.build()
        for part in (self.lattice, self.grid, self.diagnostics, self.montecarlo, self.output):
            part.validate()
        return self

    @property
    def lattice_x_max(self) -> float:
        if self.lattice.x_max is not None:
            return float(self.lattice.x_max)
        return self.grid.x_max + max(self.diagnostics.probe_t) + 1.0 + 8 * self.lattice.step


_SECTIONS = {
    "lattice": LatticeSpec,
    "grid": GridSpec,
    "diagnostics": DiagnosticsSpec,
    "montecarlo": MonteCarloSpec,
    "output": OutputSpec,
}


def _field_of(exc: Exception, params: dict) -> str:
    msg = str(exc)
    for key in params:
        if key in msg:
            return key
    return "family" if "family" in msg else "params"


def _section(cls, raw: Any, name: str):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"{name}: expected a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"{name}: unknown keys {sorted(unknown)}")
    try:
        return cls(**raw)
    except TypeError as exc:
        raise ConfigError(f"{name}: {exc}") from None


def _dist(raw: Any, name: str, cls):
    if not isinstance(raw, dict) or "family" not in raw:
        raise ConfigError(f"{name}.family: required")
    params = {k: v for k, v in raw.items() if k != "family"}
    return cls(str(raw["family"]), params)


def from_dict(raw: dict, source: Path | None = None) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be a mapping")
    allowed = {"name", "model", "count", *_SECTIONS}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"config: unknown sections {sorted(unknown)}")
    if "model" not in raw:
        raise ConfigError("model: required")
    cfg = ExperimentConfig(
        name=str(raw.get("name") or (source.stem if source else "experiment")),
        model=_dist(raw["model"], "model", ModelSpec),
        count=_dist(raw["count"], "count", CountSpec) if raw.get("count") is not None else None,
        source=source,
        **{k: _section(cls, raw.get(k), k) for k, cls in _SECTIONS.items()},
    )
    for value in (cfg.lattice.step, cfg.grid.x_min, cfg.grid.x_max):
        if isinstance(value, (int, float)) and not math.isfinite(value):
            raise ConfigError("config: non-finite number")
    try:
        return cfg.validate()
    except TypeError as exc:
        raise ConfigError(f"config: wrong value type ({exc})") from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = yaml.load(path.read_text(), Loader=_Loader)
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config: malformed YAML: {exc}") from None
    return from_dict(raw, path)
