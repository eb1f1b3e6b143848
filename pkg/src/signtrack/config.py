"""Run configuration: JSON schema, presets, and scenario construction.

A run is configured by a single JSON document (nested key/value structure).
Three named presets reproduce the standard scalar three-state setup at each
stepsize/transition-scale coupling; a config may start from a preset and
override individual keys.  Unknown keys are rejected at every nesting level,
and parse -> serialize -> parse is the identity, so configs are stable
provenance records.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError
from .experiment import Coupling, Scenario
from .filters import ALGORITHMS, FilterConfig
from .regime import GeneratorMatrix, RegimeModel
from .signals import DistSpec, SignalModel

__all__ = [
    "DEFAULT_MASTER_SEED",
    "PRESET_NAMES",
    "RunConfig",
    "preset_config",
    "parse_config",
    "load_config",
    "serialize_config",
    "config_digest",
]

# Documented default master seed: a bare preset run is fully reproducible.
DEFAULT_MASTER_SEED = 4

PRESET_NAMES = ("e_eq_mu", "e_ll_mu", "e_gg_mu")

_ROOT_KEYS = {
    "preset",
    "regime",
    "signal",
    "filter",
    "coupling",
    "n_steps",
    "replications",
    "master_seed",
    "burn_in",
    "horizon",
    "dt_ode",
    "mu_grid",
}
_REGIME_KEYS = {"states", "generator", "initial_dist"}
_SIGNAL_KEYS = {"regressor", "noise"}
_DIST_KEYS = {"kind", "cov", "clip"}
_FILTER_KEYS = {"algorithms", "mu", "theta0", "divergence_guard"}
_COUPLING_KEYS = {"kind", "value"}


@dataclass(frozen=True)
class RunConfig:
    """Fully validated run configuration."""

    states: np.ndarray
    generator: GeneratorMatrix
    initial_dist: np.ndarray
    regressor: DistSpec
    noise: DistSpec
    algorithms: tuple[str, ...]
    mu: float
    theta0: np.ndarray
    divergence_guard: float
    coupling: Coupling
    n_steps: int
    replications: int
    master_seed: int
    burn_in: int | None = None
    horizon: float | None = None
    dt_ode: float | None = None
    mu_grid: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if not self.algorithms:
            raise ConfigError("at least one algorithm is required")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {a!r}; choose from {ALGORITHMS}")
        if len(set(self.algorithms)) != len(self.algorithms):
            raise ConfigError("duplicate algorithm in algorithms")
        if self.mu_grid is not None:
            if not self.mu_grid:
                raise ConfigError("mu_grid must be non-empty when given")
            for m in self.mu_grid:
                if not m > 0.0:
                    raise ConfigError("mu_grid entries must be positive")
        if self.burn_in is not None and self.burn_in < 0:
            raise ConfigError("burn_in must be >= 0")

    @property
    def signal(self) -> SignalModel:
        return SignalModel(regressor=self.regressor, noise=self.noise)

    def regime(self, mu: float | None = None) -> RegimeModel:
        m = self.mu if mu is None else mu
        return RegimeModel(
            states=self.states,
            generator=self.generator,
            epsilon=self.coupling.epsilon(m),
            initial_dist=self.initial_dist,
        )

    def filter_for(self, algorithm: str, mu: float | None = None) -> FilterConfig:
        return FilterConfig(
            algorithm=algorithm,
            mu=self.mu if mu is None else mu,
            theta0=self.theta0,
            divergence_guard=self.divergence_guard,
        )

    def scenario_for(
        self,
        algorithm: str,
        mu: float | None = None,
        n_steps: int | None = None,
        replications: int | None = None,
    ) -> Scenario:
        return Scenario(
            regime=self.regime(mu),
            signal=self.signal,
            filter=self.filter_for(algorithm, mu),
            coupling=self.coupling,
            n_steps=self.n_steps if n_steps is None else n_steps,
            n_replications=self.replications if replications is None else replications,
            master_seed=self.master_seed,
        )

    def with_overrides(
        self, master_seed: int | None = None, replications: int | None = None
    ) -> "RunConfig":
        cfg = self
        if master_seed is not None:
            cfg = replace(cfg, master_seed=int(master_seed))
        if replications is not None:
            if replications < 1:
                raise ConfigError("replications must be >= 1")
            cfg = replace(cfg, replications=int(replications))
        return cfg


def _preset_dict(name: str) -> dict:
    if name not in PRESET_NAMES:
        raise ConfigError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
    coupling = {
        "e_eq_mu": {"kind": "proportional", "value": 0.6},
        "e_ll_mu": {"kind": "slow", "value": 1.0},
        "e_gg_mu": {"kind": "fast", "value": 0.5},
    }[name]
    return {
        "regime": {
            "states": [[-1.0], [0.0], [1.0]],
            "generator": [[-0.6, 0.4, 0.2], [0.2, -0.5, 0.3], [0.4, 0.1, -0.5]],
            "initial_dist": [0.75, 0.125, 0.125],
        },
        "signal": {
            "regressor": {"kind": "gaussian", "cov": [[1.0]], "clip": None},
            "noise": {"kind": "gaussian", "cov": [[0.25]], "clip": None},
        },
        "filter": {
            "algorithms": ["SE", "SR", "LMS"],
            "mu": 0.05,
            "theta0": [0.0],
            "divergence_guard": 1e6,
        },
        "coupling": coupling,
        "n_steps": 10000 if name == "e_ll_mu" else 1000,
        "replications": 1,
        "master_seed": DEFAULT_MASTER_SEED,
        "burn_in": None,
        "horizon": None,
        "dt_ode": None,
        "mu_grid": None,
    }


def _check_keys(data: dict, allowed: set, where: str) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) at {where}: {sorted(unknown)}")


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def _require(data: dict, key: str, where: str):
    if key not in data:
        raise ConfigError(f"missing required key {key!r} at {where}")
    return data[key]


def _parse_dist(data, where: str) -> DistSpec:
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be an object")
    _check_keys(data, _DIST_KEYS, where)
    return DistSpec(
        kind=_require(data, "kind", where),
        cov=_require(data, "cov", where),
        clip=data.get("clip"),
    )


def parse_config(data: dict) -> RunConfig:
    """Validate a parsed JSON document and build the run configuration."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")
    _check_keys(data, _ROOT_KEYS, "config root")
    if "preset" in data:
        preset = data["preset"]
        if not isinstance(preset, str):
            raise ConfigError("preset must be a string")
        base = _preset_dict(preset)
        rest = {k: v for k, v in data.items() if k != "preset"}
        data = _merge(base, rest)

    regime = _require(data, "regime", "config root")
    _check_keys(regime, _REGIME_KEYS, "regime")
    signal = _require(data, "signal", "config root")
    _check_keys(signal, _SIGNAL_KEYS, "signal")
    filt = _require(data, "filter", "config root")
    _check_keys(filt, _FILTER_KEYS, "filter")
    coupling = _require(data, "coupling", "config root")
    _check_keys(coupling, _COUPLING_KEYS, "coupling")

    states = np.asarray(_require(regime, "states", "regime"), dtype=float)
    theta0 = np.asarray(_require(filt, "theta0", "filter"), dtype=float)
    mu = float(_require(filt, "mu", "filter"))
    mu_grid = data.get("mu_grid")
    burn_in = data.get("burn_in")
    horizon = data.get("horizon")
    dt_ode = data.get("dt_ode")
    return RunConfig(
        states=states,
        generator=GeneratorMatrix(_require(regime, "generator", "regime")),
        initial_dist=np.asarray(_require(regime, "initial_dist", "regime"), dtype=float),
        regressor=_parse_dist(_require(signal, "regressor", "signal"), "signal.regressor"),
        noise=_parse_dist(_require(signal, "noise", "signal"), "signal.noise"),
        algorithms=tuple(_require(filt, "algorithms", "filter")),
        mu=mu,
        theta0=theta0,
        divergence_guard=float(filt.get("divergence_guard", 1e6)),
        coupling=Coupling(
            kind=_require(coupling, "kind", "coupling"),
            value=float(_require(coupling, "value", "coupling")),
        ),
        n_steps=int(_require(data, "n_steps", "config root")),
        replications=int(_require(data, "replications", "config root")),
        master_seed=int(_require(data, "master_seed", "config root")),
        burn_in=None if burn_in is None else int(burn_in),
        horizon=None if horizon is None else float(horizon),
        dt_ode=None if dt_ode is None else float(dt_ode),
        mu_grid=None if mu_grid is None else tuple(float(m) for m in mu_grid),
    )


def preset_config(name: str) -> RunConfig:
    """The named preset as a ready-to-run configuration."""
    return parse_config({"preset": name})


def load_config(path: str) -> RunConfig:
    """Parse a config file; the path may also name a built-in preset."""
    if path in PRESET_NAMES:
        return preset_config(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config file {path} is not valid JSON: line {exc.lineno}, "
            f"column {exc.colno}: {exc.msg}"
        )
    return parse_config(data)


def serialize_config(cfg: RunConfig) -> dict:
    """Canonical fully expanded form; parse(serialize(cfg)) reproduces cfg."""
    return {
        "regime": {
            "states": cfg.states.tolist(),
            "generator": cfg.generator.entries.tolist(),
            "initial_dist": cfg.initial_dist.tolist(),
        },
        "signal": {
            "regressor": {
                "kind": cfg.regressor.kind,
                "cov": cfg.regressor.cov.tolist(),
                "clip": cfg.regressor.clip,
            },
            "noise": {
                "kind": cfg.noise.kind,
                "cov": cfg.noise.cov.tolist(),
                "clip": cfg.noise.clip,
            },
        },
        "filter": {
            "algorithms": list(cfg.algorithms),
            "mu": cfg.mu,
            "theta0": cfg.theta0.tolist(),
            "divergence_guard": cfg.divergence_guard,
        },
        "coupling": {"kind": cfg.coupling.kind, "value": cfg.coupling.value},
        "n_steps": cfg.n_steps,
        "replications": cfg.replications,
        "master_seed": cfg.master_seed,
        "burn_in": cfg.burn_in,
        "horizon": cfg.horizon,
        "dt_ode": cfg.dt_ode,
        "mu_grid": None if cfg.mu_grid is None else list(cfg.mu_grid),
    }


def config_digest(cfg: RunConfig) -> str:
    """SHA-256 of the canonical JSON serialization."""
    payload = json.dumps(serialize_config(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("ascii")).hexdigest()
