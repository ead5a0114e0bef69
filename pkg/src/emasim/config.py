"""YAML experiment configuration: schema, validation, object construction.

One human-editable file describes the whole experiment (plant constants,
fringing variant and uncertainty band, controller gains, scenario, outputs,
optional sweep grid), so a run is reproducible from a single diffable
artifact.  The schema is versioned through the mandatory ``schema_version``
key and validation is strict: unknown keys are rejected with their dotted
path.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from .controller import DERIVATIVE_MODES, MU_LOWER_MODES, ControllerGains
from .model import (
    ConstantSurfaces,
    FringingModel,
    GeometricSurfaces,
    PiecewiseSurfaces,
    PlantParams,
    State,
    SurfaceBounds,
    WeightedSurfaces,
)
from .sim import INTEGRATORS, ReferenceSchedule, Scenario

SCHEMA_VERSION = 1
CONFIG_DIR_ENV = "EMASIM_CONFIG_DIR"


class ConfigError(ValueError):
    """Invalid or unreadable configuration."""


def _require(mapping: dict, key: str, path: str) -> Any:
    if key not in mapping:
        raise ConfigError(f"{path}.{key}: missing required key")
    return mapping[key]


def _as_mapping(value: Any, path: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(value).__name__}")
    return value


def _as_number(value: Any, path: str) -> float:
    # YAML 1.1 reads exponents like 2.8e10 (no sign) as strings; accept them.
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"{path}: expected a number, got {value!r}") from None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    return float(value)


def _as_int(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    return value


def _as_bool(value: Any, path: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"{path}: expected a boolean, got {value!r}")
    return value

def _as_str(value: Any, path: str, choices: tuple[str, ...] | None = None) -> str:
    if not isinstance(value, str):
        raise ConfigError(f"{path}: expected a string, got {value!r}")
    if choices and value not in choices:
        raise ConfigError(f"{path}: must be one of {choices}, got {value!r}")
    return value


def _reject_unknown(mapping: dict, allowed: set[str], path: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {sorted(unknown)}")


def _number_pair(value: Any, path: str) -> tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{path}: expected [lower, upper]")
    return (_as_number(value[0], f"{path}[0]"), _as_number(value[1], f"{path}[1]"))


def _build_fringing(node: Any, path: str) -> FringingModel:
    node = _as_mapping(node, path)
    variant = _as_str(_require(node, "variant", path), f"{path}.variant",
                      ("constant", "weighted", "geometric", "piecewise"))
    bounds_node = _as_mapping(_require(node, "bounds", path), f"{path}.bounds")
    _reject_unknown(bounds_node, {"s1", "s3"}, f"{path}.bounds")
    s1_lo, s1_hi = _number_pair(_require(bounds_node, "s1", f"{path}.bounds"), f"{path}.bounds.s1")
    s3_lo, s3_hi = _number_pair(_require(bounds_node, "s3", f"{path}.bounds"), f"{path}.bounds.s3")
    bounds = SurfaceBounds(s1_lower=s1_lo, s1_upper=s1_hi, s3_lower=s3_lo, s3_upper=s3_hi)
    stroke = _as_number(node.get("stroke", 6.0e-3), f"{path}.stroke")

    common = {"variant", "bounds", "stroke"}
    try:
        if variant == "constant":
            _reject_unknown(node, common | {"s1", "s3"}, path)
            return ConstantSurfaces(
                s1=_as_number(_require(node, "s1", path), f"{path}.s1"),
                s3=_as_number(_require(node, "s3", path), f"{path}.s3"),
                bounds=bounds,
                stroke=stroke,
            )
        if variant == "weighted":
            _reject_unknown(node, common | {"alpha1", "alpha3", "s_cm1", "s_cm3"}, path)
            return WeightedSurfaces(
                alpha1=_as_number(_require(node, "alpha1", path), f"{path}.alpha1"),
                alpha3=_as_number(_require(node, "alpha3", path), f"{path}.alpha3"),
                s_cm1=_as_number(_require(node, "s_cm1", path), f"{path}.s_cm1"),
                s_cm3=_as_number(_require(node, "s_cm3", path), f"{path}.s_cm3"),
                bounds=bounds,
                stroke=stroke,
            )
        if variant == "geometric":
            _reject_unknown(node, common | {"a1", "b1", "a3", "b3"}, path)
            return GeometricSurfaces(
                a1=_as_number(_require(node, "a1", path), f"{path}.a1"),
                b1=_as_number(_require(node, "b1", path), f"{path}.b1"),
                a3=_as_number(_require(node, "a3", path), f"{path}.a3"),
                b3=_as_number(_require(node, "b3", path), f"{path}.b3"),
                bounds=bounds,
                stroke=stroke,
            )
        _reject_unknown(node, common | {"knots", "s1_values", "s3_values"}, path)
        knots = tuple(_as_number(v, f"{path}.knots[{i}]") for i, v in enumerate(_require(node, "knots", path)))
        s1_values = tuple(_as_number(v, f"{path}.s1_values[{i}]") for i, v in enumerate(_require(node, "s1_values", path)))
        s3_values = tuple(_as_number(v, f"{path}.s3_values[{i}]") for i, v in enumerate(_require(node, "s3_values", path)))
        return PiecewiseSurfaces(
            knots=knots, s1_values=s1_values, s3_values=s3_values, bounds=bounds, stroke=stroke
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def build_plant(node: Any, path: str = "plant") -> PlantParams:
    node = _as_mapping(node, path)
    allowed = {"rho_x", "rho_0", "N", "lambda_f", "K", "m", "R", "mu_0", "x0", "hard_stop", "fringing"}
    _reject_unknown(node, allowed, path)
    x0_node = node.get("x0", [0.0, 0.0, 0.0])
    if not isinstance(x0_node, (list, tuple)) or len(x0_node) != 3:
        raise ConfigError(f"{path}.x0: expected [x1, x2, x3]")
    x0 = State(*(_as_number(v, f"{path}.x0[{i}]") for i, v in enumerate(x0_node)))
    kwargs: dict[str, Any] = {
        "rho_x": _as_number(_require(node, "rho_x", path), f"{path}.rho_x"),
        "rho_0": _as_number(_require(node, "rho_0", path), f"{path}.rho_0"),
        "N": _as_int(_require(node, "N", path), f"{path}.N"),
        "lambda_f": _as_number(_require(node, "lambda_f", path), f"{path}.lambda_f"),
        "K": _as_number(_require(node, "K", path), f"{path}.K"),
        "m": _as_number(_require(node, "m", path), f"{path}.m"),
        "R": _as_number(_require(node, "R", path), f"{path}.R"),
        "fringing": _build_fringing(_require(node, "fringing", path), f"{path}.fringing"),
        "x0": x0,
        "hard_stop": _as_bool(node.get("hard_stop", False), f"{path}.hard_stop"),
    }
    if "mu_0" in node:
        kwargs["mu_0"] = _as_number(node["mu_0"], f"{path}.mu_0")
    try:
        return PlantParams(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def build_gains(node: Any, path: str = "gains") -> ControllerGains:
    node = _as_mapping(node, path)
    allowed = {
        "alpha1", "alpha2", "epsilon1", "theta",
        "mu_lower_at", "derivative_mode", "derivative_time_constant", "boundary_layer",
    }
    _reject_unknown(node, allowed, path)
    kwargs: dict[str, Any] = {
        "alpha1": _as_number(_require(node, "alpha1", path), f"{path}.alpha1"),
        "alpha2": _as_number(_require(node, "alpha2", path), f"{path}.alpha2"),
        "epsilon1": _as_number(_require(node, "epsilon1", path), f"{path}.epsilon1"),
    }
    if "theta" in node:
        kwargs["theta"] = _as_number(node["theta"], f"{path}.theta")
    if "mu_lower_at" in node:
        kwargs["mu_lower_at"] = _as_str(node["mu_lower_at"], f"{path}.mu_lower_at", MU_LOWER_MODES)
    if "derivative_mode" in node:
        kwargs["derivative_mode"] = _as_str(node["derivative_mode"], f"{path}.derivative_mode", DERIVATIVE_MODES)
    if "derivative_time_constant" in node:
        kwargs["derivative_time_constant"] = _as_number(
            node["derivative_time_constant"], f"{path}.derivative_time_constant"
        )
    if "boundary_layer" in node:
        kwargs["boundary_layer"] = _as_number(node["boundary_layer"], f"{path}.boundary_layer")
    try:
        return ControllerGains(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def build_scenario(node: Any, plant: PlantParams, gains: ControllerGains, path: str = "scenario") -> Scenario:
    node = _as_mapping(node, path)
    allowed = {"reference", "dt", "duration", "integrator", "decimation", "control_period", "seed"}
    _reject_unknown(node, allowed, path)
    ref_node = _require(node, "reference", path)
    if not isinstance(ref_node, list) or not ref_node:
        raise ConfigError(f"{path}.reference: expected a non-empty list of [time, value] pairs")
    knots = []
    for i, pair in enumerate(ref_node):
        t, y = _number_pair(pair, f"{path}.reference[{i}]")
        knots.append((t, y))
    try:
        reference = ReferenceSchedule(tuple(knots))
        return Scenario(
            plant=plant,
            gains=gains,
            reference=reference,
            dt=_as_number(node.get("dt", 1.0e-6), f"{path}.dt"),
            duration=_as_number(node.get("duration", 0.5), f"{path}.duration"),
            integrator=_as_str(node.get("integrator", "rk4"), f"{path}.integrator", INTEGRATORS),
            decimation=_as_int(node.get("decimation", 100), f"{path}.decimation"),
            control_period=_as_int(node.get("control_period", 1), f"{path}.control_period"),
            seed=_as_int(node.get("seed", 0), f"{path}.seed"),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


@dataclass(frozen=True)
class OutputSpec:
    trajectory_csv: str = "trajectory.csv"
    report: str = "report.txt"
    figures: bool = True


def build_outputs(node: Any, path: str = "outputs") -> OutputSpec:
    if node is None:
        return OutputSpec()
    node = _as_mapping(node, path)
    _reject_unknown(node, {"trajectory_csv", "report", "figures"}, path)
    return OutputSpec(
        trajectory_csv=_as_str(node.get("trajectory_csv", "trajectory.csv"), f"{path}.trajectory_csv"),
        report=_as_str(node.get("report", "report.txt"), f"{path}.report"),
        figures=_as_bool(node.get("figures", True), f"{path}.figures"),
    )


@dataclass(frozen=True)
class SweepSpec:
    """Cartesian sweep grid: gains x initial positions x fringing realizations."""

    initial_positions: tuple[float, ...]
    alpha1: tuple[float, ...]
    alpha2: tuple[float, ...]
    fringing_realizations: int
    seed: int

    def is_empty(self) -> bool:
        return not (self.initial_positions and self.alpha1 and self.alpha2)


def build_sweep(node: Any, gains: ControllerGains, path: str = "sweep") -> SweepSpec:
    node = _as_mapping(node, path)
    allowed = {"initial_positions", "alpha1", "alpha2", "fringing_realizations", "seed"}
    _reject_unknown(node, allowed, path)

    def number_list(key: str, default: list[float]) -> tuple[float, ...]:
        raw = node.get(key, default)
        if not isinstance(raw, list):
            raise ConfigError(f"{path}.{key}: expected a list of numbers")
        return tuple(_as_number(v, f"{path}.{key}[{i}]") for i, v in enumerate(raw))

    realizations = _as_int(node.get("fringing_realizations", 0), f"{path}.fringing_realizations")
    if realizations < 0:
        raise ConfigError(f"{path}.fringing_realizations: must be >= 0")
    return SweepSpec(
        initial_positions=number_list("initial_positions", []),
        alpha1=number_list("alpha1", [gains.alpha1]),
        alpha2=number_list("alpha2", [gains.alpha2]),
        fringing_realizations=realizations,
        seed=_as_int(node.get("seed", 0), f"{path}.seed"),
    )


@dataclass(frozen=True)
class Config:
    plant: PlantParams
    gains: ControllerGains
    scenario: Scenario
    outputs: OutputSpec
    sweep: SweepSpec | None
    source: Path


def load_config(path: str | Path) -> Config:
    """Parse and validate one experiment file; YAML errors keep line numbers."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        detail = str(exc)
        raise ConfigError(f"cannot parse config {path}: {detail}") from exc
    raw = _as_mapping(raw, "config")
    _reject_unknown(raw, {"schema_version", "plant", "gains", "scenario", "outputs", "sweep"}, "config")
    version = _as_int(_require(raw, "schema_version", "config"), "config.schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"config.schema_version: expected {SCHEMA_VERSION}, got {version}")
    plant = build_plant(_require(raw, "plant", "config"))
    gains = build_gains(_require(raw, "gains", "config"))
    scenario = build_scenario(_require(raw, "scenario", "config"), plant, gains)
    outputs = build_outputs(raw.get("outputs"))
    sweep = build_sweep(raw["sweep"], gains) if "sweep" in raw else None
    return Config(plant=plant, gains=gains, scenario=scenario, outputs=outputs, sweep=sweep, source=path)


def bundled_config_names() -> list[str]:
    pkg = resources.files("emasim.configs")
    return sorted(p.name for p in pkg.iterdir() if p.name.endswith(".yaml"))


def find_config(name_or_path: str) -> Path:
    """Resolve a config argument: explicit path, $EMASIM_CONFIG_DIR, bundled.

    Bare names may omit the ``.yaml`` suffix.
    """
    direct = Path(name_or_path)
    if direct.is_file():
        return direct
    candidates = [name_or_path] if name_or_path.endswith(".yaml") else [name_or_path + ".yaml", name_or_path]
    env_dir = os.environ.get(CONFIG_DIR_ENV)
    if env_dir:
        for cand in candidates:
            p = Path(env_dir) / cand
            if p.is_file():
                return p
    pkg = resources.files("emasim.configs")
    for cand in candidates:
        res = pkg / cand
        if res.is_file():
            return Path(str(res))
    raise ConfigError(
        f"config {name_or_path!r} not found (looked at the path, ${CONFIG_DIR_ENV}, "
        f"and bundled configs {bundled_config_names()})"
    )
