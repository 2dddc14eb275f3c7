"""Run configuration: TOML ingestion, strict validation, CLI overrides.

A run is described by a TOML document with the tables below; unknown keys
anywhere are rejected.  Every value has a default, so a config file (or any
subset of keys) only needs to state what it changes.

    scenario = "simulate"            # optional; the subcommand wins
    output_dir = "runs/out"

    [grid]      d, n_points
    [params]    gamma, nu, lambda, alpha, c, pressure
    [initial]   family, amplitude, mode, kmax, seed, width, apply_to, u_mean
    [stepper]   scheme, dt ("auto" or a number), cfl, t_end,
                positivity_floor, sample_every
    [diagnostics] m, mu ("auto" or a number), c_d
    [snapshots] count
    [relax_limit] eps, t_end, samples
    [audit]     dts, t_end
    [dispersion] modes

Overrides use dotted paths, e.g. ``--set params.nu=0.5`` or
``--set stepper.dt=1e-4``; values are parsed as TOML literals.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import tomli

from .errors import ConfigError, ParameterError
from .initial import InitialConditionSpec
from .model import Params
from .spectral import Grid
from .timestep import StepperConfig

__all__ = ["RunConfig", "load_config", "default_config", "apply_overrides"]

_DEFAULTS: dict[str, Any] = {
    "scenario": "simulate",
    "output_dir": "runs/out",
    "grid": {"d": 1, "n_points": 128},
    "params": {
        "gamma": 2.0,
        "nu": 1.0,
        "lambda": 0.05,
        "alpha": 0.5,
        "c": 1.0,
        "pressure": True,
    },
    "initial": {
        "family": "single-mode",
        "amplitude": 0.01,
        "mode": 1,
        "kmax": 4,
        "seed": 0,
        "width": 0.5,
        "apply_to": "h",
        "u_mean": 0.0,
    },
    "stepper": {
        "scheme": "rk4-exp-damping",
        "dt": "auto",
        "cfl": 0.4,
        "t_end": 10.0,
        "positivity_floor": 1e-8,
        "sample_every": 4,
    },
    "diagnostics": {"m": 3, "mu": "auto", "c_d": 1.5},
    "snapshots": {"count": 0},
    "relax_limit": {"eps": [0.2, 0.1, 0.05], "t_end": 1.0, "samples": 20},
    "audit": {"dts": [1e-3, 5e-4], "t_end": 0.3},
    "dispersion": {"modes": [1, 2, 4, 8]},
}

_SCENARIOS = (
    "simulate",
    "decay",
    "energy-audit",
    "relax-limit",
    "dispersion",
    "constants",
    "selftest",
)


def default_config() -> dict:
    return copy.deepcopy(_DEFAULTS)


def _reject_unknown(doc: Any, schema: Any, path: str = "") -> None:
    if not isinstance(schema, dict) or not isinstance(doc, dict):
        return
    for key, value in doc.items():
        here = f"{path}.{key}" if path else key
        if key not in schema:
            raise ConfigError(f"unknown configuration key {here!r}")
        _reject_unknown(value, schema[key], here)


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path: Optional[str] = None, overrides: Optional[list[str]] = None) -> dict:
    """Read, merge, and syntactically validate a configuration document."""
    doc = default_config()
    if path is not None:
        try:
            raw = Path(path).read_bytes()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        try:
            parsed = tomli.loads(raw.decode("utf-8"))
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
        _reject_unknown(parsed, _DEFAULTS)
        doc = _merge(doc, parsed)
    if overrides:
        doc = apply_overrides(doc, overrides)
    return doc


def apply_overrides(doc: dict, assignments: list[str]) -> dict:
    """Apply ``key.path=value`` assignments; values parse as TOML literals."""
    out = copy.deepcopy(doc)
    for item in assignments:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key_path, _, raw_value = item.partition("=")
        keys = key_path.strip().split(".")
        try:
            value = tomli.loads(f"v = {raw_value.strip()}")["v"]
        except tomli.TOMLDecodeError:
            value = raw_value.strip()
        node = out
        schema = _DEFAULTS
        for k in keys[:-1]:
            if not isinstance(schema, dict) or k not in schema:
                raise ConfigError(f"unknown configuration key {key_path!r}")
            schema = schema[k]
            node = node.setdefault(k, {})
        leaf = keys[-1]
        if not isinstance(schema, dict) or leaf not in schema:
            raise ConfigError(f"unknown configuration key {key_path!r}")
        node[leaf] = value
    return out


@dataclass
class RunConfig:
    """Validated view of one run's configuration."""

    doc: dict = field(default_factory=default_config)

    @classmethod
    def from_file(
        cls,
        path: Optional[str] = None,
        overrides: Optional[list[str]] = None,
        scenario: Optional[str] = None,
    ) -> "RunConfig":
        doc = load_config(path, overrides)
        if scenario is not None:
            doc["scenario"] = scenario
        cfg = cls(doc)
        cfg.validate()
        return cfg

    # -- typed sections -----------------------------------------------------

    @property
    def scenario(self) -> str:
        return self.doc["scenario"]

    @property
    def output_dir(self) -> Path:
        return Path(self.doc["output_dir"])

    def grid(self) -> Grid:
        g = self.doc["grid"]
        try:
            return Grid(int(g["d"]), int(g["n_points"]))
        except ParameterError as exc:
            raise ConfigError(f"grid: {exc}") from exc

    def params(self) -> Params:
        q = self.doc["params"]
        try:
            return Params(
                gamma=float(q["gamma"]),
                nu=float(q["nu"]),
                lam=float(q["lambda"]),
                alpha=float(q["alpha"]),
                d=int(self.doc["grid"]["d"]),
                c=float(q["c"]),
                include_pressure=bool(q["pressure"]),
            )
        except ParameterError as exc:
            raise ConfigError(f"params: {exc}") from exc

    def initial_spec(self) -> InitialConditionSpec:
        q = self.doc["initial"]
        try:
            return InitialConditionSpec(
                family=str(q["family"]),
                amplitude=float(q["amplitude"]),
                mode=q["mode"],
                kmax=int(q["kmax"]),
                seed=int(q["seed"]),
                width=float(q["width"]),
                apply_to=str(q["apply_to"]),
                u_mean=q["u_mean"],
            )
        except ParameterError as exc:
            raise ConfigError(f"initial: {exc}") from exc

    def stepper(self) -> StepperConfig:
        q = self.doc["stepper"]
        dt = q["dt"]
        if isinstance(dt, str):
            if dt != "auto":
                raise ConfigError(f"stepper.dt must be a number or 'auto', got {dt!r}")
            dt_val = None
        else:
            dt_val = float(dt)
        try:
            return StepperConfig(
                t_end=float(q["t_end"]),
                dt=dt_val,
                scheme=str(q["scheme"]),
                cfl=float(q["cfl"]),
                positivity_floor=float(q["positivity_floor"]),
                sample_every=int(q["sample_every"]),
            )
        except ParameterError as exc:
            raise ConfigError(f"stepper: {exc}") from exc

    @property
    def diag_m(self) -> int:
        return int(self.doc["diagnostics"]["m"])

    @property
    def diag_mu(self) -> Optional[float]:
        mu = self.doc["diagnostics"]["mu"]
        if isinstance(mu, str):
            if mu != "auto":
                raise ConfigError(f"diagnostics.mu must be a number or 'auto', got {mu!r}")
            return None
        return float(mu)

    @property
    def c_d(self) -> float:
        return float(self.doc["diagnostics"]["c_d"])

    @property
    def snapshot_count(self) -> int:
        return int(self.doc["snapshots"]["count"])

    @property
    def relax_eps(self) -> list[float]:
        eps = [float(e) for e in self.doc["relax_limit"]["eps"]]
        if not eps:
            raise ConfigError("relax_limit.eps must be a nonempty list")
        if any(e <= 0 for e in eps):
            raise ConfigError("relax_limit.eps entries must be > 0")
        if sorted(eps, reverse=True) != eps:
            raise ConfigError("relax_limit.eps must be decreasing")
        return eps

    @property
    def relax_t_end(self) -> float:
        return float(self.doc["relax_limit"]["t_end"])

    @property
    def relax_samples(self) -> int:
        return int(self.doc["relax_limit"]["samples"])

    @property
    def audit_dts(self) -> list[float]:
        dts = [float(v) for v in self.doc["audit"]["dts"]]
        if len(dts) < 2 or any(v <= 0 for v in dts):
            raise ConfigError("audit.dts must list at least two positive steps")
        return dts

    @property
    def audit_t_end(self) -> float:
        return float(self.doc["audit"]["t_end"])

    @property
    def dispersion_modes(self) -> list[float]:
        return [float(v) for v in self.doc["dispersion"]["modes"]]

    def validate(self) -> None:
        """Validate every section eagerly; raises ConfigError with context."""
        if self.doc["scenario"] not in _SCENARIOS:
            raise ConfigError(
                f"unknown scenario {self.doc['scenario']!r}; expected one of {_SCENARIOS}"
            )
        _reject_unknown(self.doc, _DEFAULTS)
        self.grid()
        self.params()
        self.initial_spec()
        self.stepper()
        if self.diag_m < 1:
            raise ConfigError("diagnostics.m must be >= 1")
        self.diag_mu
        if self.c_d <= 1.0:
            raise ConfigError("diagnostics.c_d must be > 1")
        if self.snapshot_count < 0:
            raise ConfigError("snapshots.count must be >= 0")
        kmax = int(self.doc["initial"]["kmax"])
        if self.doc["initial"]["family"] == "random-band" and kmax > self.doc["grid"]["n_points"] / 3:
            raise ConfigError("initial.kmax must be <= n_points/3 (dealiased band)")
