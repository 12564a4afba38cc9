"""Simulation configuration: geometry, system sizes, tolerances and seeds.

Powers are given in dBm at this boundary and converted to watts for all
internal computation. Angles are in radians, spacings in wavelengths,
distances in meters.
"""
from __future__ import annotations

import dataclasses
import enum
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

__all__ = [
    "BenchmarkScheme",
    "GeometryConfig",
    "SystemConfig",
    "ConfigError",
    "dbm_to_watt",
    "load_config",
]


class ConfigError(ValueError):
    pass


class BenchmarkScheme(str, enum.Enum):
    """Which block solvers are exact (SESD) and which quantize a continuous solution."""

    SesdBoth = "SesdBoth"
    SesdPrecodingOnly = "SesdPrecodingOnly"
    SesdRisOnly = "SesdRisOnly"
    NoSesd = "NoSesd"

    @property
    def sesd_precoding(self) -> bool:
        return self in (BenchmarkScheme.SesdBoth, BenchmarkScheme.SesdPrecodingOnly)

    @property
    def sesd_ris(self) -> bool:
        return self in (BenchmarkScheme.SesdBoth, BenchmarkScheme.SesdRisOnly)

    @classmethod
    def parse(cls, name: str) -> "BenchmarkScheme":
        key = name.strip().replace("-", "").replace("_", "").lower()
        for s in cls:
            if s.value.lower() == key:
                return s
        raise ConfigError(f"unknown scheme {name!r}; choose from {[s.value for s in cls]}")


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class GeometryConfig:
    bs_spacing: float = 0.5
    ris_spacing_h: float = 0.25
    ris_spacing_v: float = 0.25
    bs_aod: float = math.pi / 6
    ris_aoa_az: float = -math.pi / 3
    ris_aoa_el: float = math.pi / 6
    angle_std: float = math.pi / 12
    rician_kappa: float = 3.0
    bs_ris_distance: float = 20.0
    ue_distance_range: tuple[float, float] = (20.0, 40.0)
    ue_az_range: tuple[float, float] = (0.0, math.pi / 3)
    ue_el_range: tuple[float, float] = (-math.pi / 12, 0.0)
    # kappa -> infinity: drop the NLOS part entirely
    los_only: bool = False
    quadrature_order: int = 20

    def __post_init__(self):
        for name in ("ue_distance_range", "ue_az_range", "ue_el_range"):
            val = tuple(float(v) for v in getattr(self, name))
            if len(val) != 2 or val[0] > val[1]:
                raise ConfigError(f"{name} must be an increasing pair, got {val}")
            object.__setattr__(self, name, val)
        for name in ("bs_spacing", "ris_spacing_h", "ris_spacing_v", "rician_kappa", "bs_ris_distance"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.ue_distance_range[0] <= 0:
            raise ConfigError("UE distances must be positive")
        if self.angle_std < 0:
            raise ConfigError("angle_std must be nonnegative")
        if self.quadrature_order < 2:
            raise ConfigError("quadrature_order must be >= 2")


_SCHEMES_ALL = tuple(BenchmarkScheme)


@dataclass(frozen=True)
class SystemConfig:
    M: int = 4
    N_H: int = 8
    N_V: int = 8
    K: int = 3
    L: int = 4
    b: int = 1
    P_dbm: float = 30.0
    N0_dbm: float = -100.0
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    # None: sigma = sqrt(P / (2 M K)); a number fixes sigma in sqrt(W)
    alphabet_scale: float | None = None
    alpha: float = 1.0
    eps_outer: float = 1e-4
    eps_power: float = 1e-3  # relative to P
    ao_tol: float = 1e-6
    max_iters: int = 200
    sesd_node_budget: int | None = 10**7
    trials: int = 20
    seed: int = 0
    schemes: tuple[BenchmarkScheme, ...] = _SCHEMES_ALL
    power_sweep_dbm: tuple[float, ...] = (10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0)

    def __post_init__(self):
        for name in ("M", "N_H", "N_V", "K", "max_iters", "trials"):
            if int(getattr(self, name)) != getattr(self, name) or getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if self.L < 2 or self.L % 2:
            raise ConfigError("L must be an even integer >= 2")
        if not 1 <= self.b <= 8:
            raise ConfigError("b must lie in [1, 8]")
        if self.alpha <= 0:
            raise ConfigError("alpha must be positive")
        if self.alphabet_scale is not None and self.alphabet_scale <= 0:
            raise ConfigError("alphabet_scale must be positive")
        for name in ("eps_outer", "eps_power", "ao_tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.sesd_node_budget is not None and self.sesd_node_budget < 1:
            raise ConfigError("sesd_node_budget must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        schemes = tuple(s if isinstance(s, BenchmarkScheme) else BenchmarkScheme.parse(s) for s in self.schemes)
        if not schemes:
            raise ConfigError("at least one scheme is required")
        object.__setattr__(self, "schemes", schemes)
        object.__setattr__(self, "power_sweep_dbm", tuple(float(p) for p in self.power_sweep_dbm))
        if isinstance(self.geometry, dict):
            object.__setattr__(self, "geometry", GeometryConfig(**self.geometry))

    @property
    def N(self) -> int:
        return self.N_H * self.N_V

    @property
    def P(self) -> float:
        return dbm_to_watt(self.P_dbm)

    @property
    def N0(self) -> float:
        return dbm_to_watt(self.N0_dbm)

    @property
    def label_sigma(self) -> float:
        if self.alphabet_scale is not None:
            return float(self.alphabet_scale)
        return math.sqrt(self.P / (2 * self.M * self.K))

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["schemes"] = [s.value for s in self.schemes]
        d["power_sweep_dbm"] = list(self.power_sweep_dbm)
        g = d["geometry"]
        for k, v in g.items():
            if isinstance(v, tuple):
                g[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "SystemConfig":
        data = dict(data)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        geom = data.pop("geometry", None) or {}
        gknown = {f.name for f in dataclasses.fields(GeometryConfig)}
        if set(geom) - gknown:
            raise ConfigError(f"unknown geometry keys: {sorted(set(geom) - gknown)}")
        try:
            return cls(geometry=GeometryConfig(**geom), **data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]


def load_config(path: str | Path) -> SystemConfig:
    """Read a YAML config file, or recover the config from a result file's manifest."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for line in text.splitlines():
        if not line.startswith("#"):
            break
        if line.startswith("# config: "):
            return SystemConfig.from_dict(json.loads(line[len("# config: "):]))
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a mapping")
    return SystemConfig.from_dict(data)
