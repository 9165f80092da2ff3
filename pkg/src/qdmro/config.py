"""Strict, unit-suffixed run configuration (TOML).

Every physical quantity carries its unit ("1 GHz", "100 us", "950 nm").
Unknown keys are rejected. ``echo_config`` writes the resolved values back
in internal units (rad/ns, ns, W, m) so they reload to an equal config.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .lindblad import IntegratorConfig
from .model import RateSet
from .protocol import INITIAL_STATES, ProtocolParams
from .states import Level
from .units import UnitError, fmt, parse_fraction, parse_length, parse_power, parse_rate, parse_time


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AxisSpec:
    """Grid axis: either (min, max, count, scale) or an explicit value list."""

    min: float | None = None
    max: float | None = None
    count: int = 1
    scale: str = "lin"
    values: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.values is not None:
            if len(self.values) == 0:
                raise ValueError("explicit axis values must be non-empty")
            if any(b <= a for a, b in zip(self.values, self.values[1:])):
                raise ValueError("explicit axis values must be strictly increasing")
            return
        if self.min is None or self.max is None:
            raise ValueError("axis needs min and max, or explicit values")
        if self.scale not in ("lin", "log"):
            raise ValueError(f"axis scale must be 'lin' or 'log', got {self.scale!r}")
        if int(self.count) != self.count or self.count < 1:
            raise ValueError("axis count must be an integer >= 1")
        if self.count > 1 and not self.max > self.min:
            raise ValueError("axis max must exceed min")
        if self.scale == "log" and not self.min > 0:
            raise ValueError("log axis needs min > 0")

    def points(self) -> np.ndarray:
        if self.values is not None:
            return np.array(self.values, dtype=float)
        if self.count == 1:
            return np.array([self.min], dtype=float)
        if self.scale == "log":
            return np.geomspace(self.min, self.max, self.count)
        return np.linspace(self.min, self.max, self.count)


def _default_grids() -> dict[str, AxisSpec]:
    return {
        "t_readout": AxisSpec(1.0, 10e3, 60, "log"),
        "eta": AxisSpec(1e-4, 1e-1, 60, "log"),
        "omega_MW": AxisSpec(parse_rate("30 MHz"), parse_rate("10 GHz"), 11, "log"),
        "gamma_F": AxisSpec(values=tuple(parse_rate(f"{v} MHz") for v in ("0.1", "0.3", "1", "3", "5", "10"))),
    }


def _default_sweep() -> dict[str, AxisSpec]:
    return {
        "t_readout": AxisSpec(10.0, 10e3, 10, "log"),
        "eta": AxisSpec(1e-4, 1e-1, 10, "log"),
    }


@dataclass(frozen=True)
class FigureOptions:
    fig2b_threshold: int = 1
    fig2c_threshold: int = 5
    fig2d_efficiencies: tuple[float, ...] = (0.001, 0.003, 0.01, 0.03, 0.1)
    eta_min_bounds: tuple[float, float] = (1e-6, 1.0)
    pi_pulse_samples: int = 4001


@dataclass(frozen=True)
class RunConfig:
    rates: RateSet = field(default_factory=RateSet)
    protocol: ProtocolParams = field(default_factory=ProtocolParams)
    eta: float = 0.01
    grids: Mapping[str, AxisSpec] = field(default_factory=_default_grids)
    sweep: Mapping[str, AxisSpec] = field(default_factory=_default_sweep)
    thresholds: tuple[int, ...] = tuple(range(1, 21))
    figures: FigureOptions = field(default_factory=FigureOptions)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    output_dir: str = "results"
    workers: int = 1

    def __post_init__(self):
        if not 0 < self.eta <= 1:
            raise ValueError(f"η ∈ (0,1] violated (got {self.eta})")
        if int(self.workers) != self.workers or self.workers < 1:
            raise ValueError("workers must be an integer >= 1")
        if not self.thresholds or min(self.thresholds) < 1:
            raise ValueError("thresholds must be integers >= 1")

    def protocol_params(self, **changes) -> ProtocolParams:
        from dataclasses import replace

        return replace(self.protocol, rates=changes.pop("rates", self.rates), **changes)


SWEEP_AXES = ("gamma_F", "omega_MW", "t_readout", "eta")

# key -> (parser from file value, formatter to echo)
_RATE_KEYS = ("gamma_O", "gamma_F", "gamma_1", "gamma_2_ST", "gamma_2_T", "omega_C", "omega_MW")
_AXIS_PARSERS: dict[str, tuple[Callable[[Any], float], Callable[[float], Any]]] = {
    "t_readout": (parse_time, lambda v: fmt(v, "ns")),
    "eta": (parse_fraction, float),
    "omega_MW": (parse_rate, lambda v: fmt(v, "rad/ns")),
    "gamma_F": (parse_rate, lambda v: fmt(v, "rad/ns")),
}


def _reject_unknown(section: str, data: Mapping[str, Any], allowed) -> None:
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        where = f"[{section}]" if section else "top level"
        raise ConfigError(f"unknown key(s) {', '.join(unknown)} in {where}; allowed: {', '.join(sorted(allowed))}")


def _table(data: Mapping[str, Any], key: str) -> Mapping[str, Any]:
    value = data.get(key, {})
    if not isinstance(value, Mapping):
        raise ConfigError(f"[{key}] must be a table")
    return value


def _field(name: str, parser: Callable[[Any], Any], value: Any) -> Any:
    try:
        return parser(value)
    except (UnitError, ValueError, TypeError) as exc:
        raise ConfigError(f"{name}: {exc}") from None


def _parse_axis(name: str, axis: str, raw: Mapping[str, Any]) -> AxisSpec:
    parse, _ = _AXIS_PARSERS[axis]
    if not isinstance(raw, Mapping):
        raise ConfigError(f"{name}: axis must be a table")
    _reject_unknown(name, raw, ("min", "max", "count", "scale", "values"))
    try:
        if "values" in raw:
            if set(raw) - {"values"}:
                raise ConfigError(f"{name}: give either 'values' or min/max/count/scale, not both")
            return AxisSpec(values=tuple(_field(f"{name}.values", parse, v) for v in raw["values"]))
        return AxisSpec(
            min=_field(f"{name}.min", parse, raw["min"]),
            max=_field(f"{name}.max", parse, raw["max"]),
            count=raw.get("count", 1),
            scale=raw.get("scale", "lin"),
        )
    except KeyError as exc:
        raise ConfigError(f"{name}: missing {exc.args[0]!r}") from None
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{name}: {exc}") from None


def _parse_grids(section: str, raw: Mapping[str, Any], defaults: dict[str, AxisSpec], keep_defaults: bool):
    _reject_unknown(section, raw, _AXIS_PARSERS)
    grids = dict(defaults) if keep_defaults else {}
    for name, spec in raw.items():
        grids[name] = _parse_axis(f"{section}.{name}", name, spec)
    return grids


def _level_pair(text: str) -> tuple[Level, Level]:
    try:
        src, dst = (Level.from_label(s.strip()) for s in text.split("->"))
    except (KeyError, ValueError):
        raise ConfigError(f"rates.depolarization: bad pair {text!r}, expected e.g. 'S->T+'") from None
    return src, dst


def config_from_mapping(data: Mapping[str, Any]) -> RunConfig:
    """Build a validated RunConfig from parsed TOML (or an echoed config)."""
    _reject_unknown(
        "",
        data,
        ("rates", "protocol", "grids", "sweep", "thresholds", "figures", "integrator", "output_dir", "workers"),
    )

    raw_rates = _table(data, "rates")
    _reject_unknown("rates", raw_rates, _RATE_KEYS + ("depolarization", "forbidden_cross_connections"))
    rate_kwargs: dict[str, Any] = {k: _field(f"rates.{k}", parse_rate, raw_rates[k]) for k in _RATE_KEYS if k in raw_rates}
    depol = raw_rates.get("depolarization", {})
    if not isinstance(depol, Mapping):
        raise ConfigError("[rates.depolarization] must be a table")
    rate_kwargs["depolarization_overrides"] = tuple(
        (_level_pair(pair), _field(f"rates.depolarization.{pair}", parse_rate, v)) for pair, v in sorted(depol.items())
    )
    if "forbidden_cross_connections" in raw_rates:
        flag = raw_rates["forbidden_cross_connections"]
        if not isinstance(flag, bool):
            raise ConfigError("rates.forbidden_cross_connections must be true or false")
        rate_kwargs["forbidden_cross_connections"] = flag
    try:
        rates = RateSet(**rate_kwargs)
    except ValueError as exc:
        raise ConfigError(f"rates: {exc}") from None

    raw_proto = _table(data, "protocol")
    proto_parsers = {
        "t_readout": parse_time,
        "initial": lambda v: v,
        "laser_power": parse_power,
        "attenuation": parse_fraction,
        "wavelength": parse_length,
        "background_multiplier": parse_fraction,
    }
    _reject_unknown("protocol", raw_proto, tuple(proto_parsers) + ("eta",))
    proto_kwargs = {k: _field(f"protocol.{k}", proto_parsers[k], raw_proto[k]) for k in proto_parsers if k in raw_proto}
    if "initial" in proto_kwargs and proto_kwargs["initial"] not in INITIAL_STATES:
        raise ConfigError(f"protocol.initial must be one of {INITIAL_STATES}")
    try:
        protocol = ProtocolParams(rates=rates, **proto_kwargs)
    except ValueError as exc:
        raise ConfigError(f"protocol: {exc}") from None
    eta = _field("protocol.eta", parse_fraction, raw_proto.get("eta", 0.01))
    if not 0 < eta <= 1:
        raise ConfigError(f"protocol.eta: η ∈ (0,1] violated (got {eta})")

    grids = _parse_grids("grids", _table(data, "grids"), _default_grids(), keep_defaults=True)
    for axis_name in ("eta",):
        pts = grids[axis_name].points()
        if np.any(pts <= 0) or np.any(pts > 1):
            raise ConfigError(f"grids.{axis_name}: η ∈ (0,1] violated")
    if np.any(grids["t_readout"].points() <= 0):
        raise ConfigError("grids.t_readout: durations must be > 0")

    raw_sweep = _table(data, "sweep")
    sweep = _parse_grids("sweep", raw_sweep, _default_sweep(), keep_defaults=not raw_sweep)
    if "eta" in sweep and (np.any(sweep["eta"].points() <= 0) or np.any(sweep["eta"].points() > 1)):
        raise ConfigError("sweep.eta: η ∈ (0,1] violated")
    if "t_readout" in sweep and np.any(sweep["t_readout"].points() <= 0):
        raise ConfigError("sweep.t_readout: durations must be > 0")

    thresholds = data.get("thresholds", list(range(1, 21)))
    if (
        not isinstance(thresholds, list)
        or not thresholds
        or any(isinstance(n, bool) or not isinstance(n, int) or n < 1 for n in thresholds)
    ):
        raise ConfigError("thresholds: must be a non-empty list of integers >= 1")

    raw_fig = _table(data, "figures")
    _reject_unknown("figures", raw_fig, [f.name for f in fields(FigureOptions)])
    fig_kwargs: dict[str, Any] = {}
    for key in ("fig2b_threshold", "fig2c_threshold", "pi_pulse_samples"):
        if key in raw_fig:
            v = raw_fig[key]
            if isinstance(v, bool) or not isinstance(v, int) or v < (3 if key == "pi_pulse_samples" else 1):
                raise ConfigError(f"figures.{key}: must be a positive integer")
            fig_kwargs[key] = v
    if "fig2d_efficiencies" in raw_fig:
        effs = tuple(_field("figures.fig2d_efficiencies", parse_fraction, v) for v in raw_fig["fig2d_efficiencies"])
        if not effs or any(not 0 < e <= 1 for e in effs):
            raise ConfigError("figures.fig2d_efficiencies: η ∈ (0,1] violated")
        fig_kwargs["fig2d_efficiencies"] = effs
    if "eta_min_bounds" in raw_fig:
        b = tuple(_field("figures.eta_min_bounds", parse_fraction, v) for v in raw_fig["eta_min_bounds"])
        if len(b) != 2 or not 0 < b[0] < b[1] <= 1:
            raise ConfigError("figures.eta_min_bounds: need [lo, hi] with 0 < lo < hi <= 1")
        fig_kwargs["eta_min_bounds"] = b
    figures = FigureOptions(**fig_kwargs)

    raw_int = _table(data, "integrator")
    _reject_unknown("integrator", raw_int, ("rel_tol", "abs_tol", "max_step", "initial_step"))
    int_kwargs = {}
    for key in ("rel_tol", "abs_tol"):
        if key in raw_int:
            int_kwargs[key] = _field(f"integrator.{key}", parse_fraction, raw_int[key])
    for key in ("max_step", "initial_step"):
        if key in raw_int:
            int_kwargs[key] = _field(f"integrator.{key}", parse_time, raw_int[key])
    try:
        integrator = IntegratorConfig(**int_kwargs)
    except ValueError as exc:
        raise ConfigError(f"integrator: {exc}") from None

    output_dir = data.get("output_dir", "results")
    if not isinstance(output_dir, str) or not output_dir:
        raise ConfigError("output_dir: must be a non-empty path string")
    workers = data.get("workers", 1)
    if isinstance(workers, bool) or not isinstance(workers, int) or workers < 1:
        raise ConfigError("workers: must be an integer >= 1")

    return RunConfig(
        rates=rates,
        protocol=protocol,
        eta=eta,
        grids=grids,
        sweep=sweep,
        thresholds=tuple(thresholds),
        figures=figures,
        integrator=integrator,
        output_dir=output_dir,
        workers=workers,
    )


def load_config(path: str | Path | None) -> RunConfig:
    """Parse a TOML config file; a JSON run manifest reloads its echoed config."""
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from None
    if path.suffix == ".json":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from None
        return config_from_mapping(doc.get("config", doc))
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_mapping(data)


def _echo_axis(name: str, axis: AxisSpec) -> dict[str, Any]:
    _, out = _AXIS_PARSERS[name]
    if axis.values is not None:
        return {"values": [out(v) for v in axis.values]}
    return {"min": out(axis.min), "max": out(axis.max), "count": axis.count, "scale": axis.scale}


def echo_config(cfg: RunConfig) -> dict[str, Any]:
    """Fully resolved config in internal units; ``config_from_mapping`` inverts it."""
    r = cfg.rates
    p = cfg.protocol
    rates = {k: fmt(getattr(r, k), "rad/ns") for k in _RATE_KEYS}
    rates["depolarization"] = {f"{a.label}->{b.label}": fmt(v, "rad/ns") for (a, b), v in r.depolarization_overrides}
    rates["forbidden_cross_connections"] = r.forbidden_cross_connections
    return {
        "rates": rates,
        "protocol": {
            "t_readout": fmt(p.t_readout, "ns"),
            "initial": p.initial,
            "laser_power": fmt(p.laser_power, "W"),
            "attenuation": p.attenuation,
            "wavelength": fmt(p.wavelength, "m"),
            "background_multiplier": p.background_multiplier,
            "eta": cfg.eta,
        },
        "grids": {k: _echo_axis(k, v) for k, v in cfg.grids.items()},
        "sweep": {k: _echo_axis(k, v) for k, v in cfg.sweep.items()},
        "thresholds": list(cfg.thresholds),
        "figures": {
            "fig2b_threshold": cfg.figures.fig2b_threshold,
            "fig2c_threshold": cfg.figures.fig2c_threshold,
            "fig2d_efficiencies": list(cfg.figures.fig2d_efficiencies),
            "eta_min_bounds": list(cfg.figures.eta_min_bounds),
            "pi_pulse_samples": cfg.figures.pi_pulse_samples,
        },
        "integrator": {
            "rel_tol": cfg.integrator.rel_tol,
            "abs_tol": cfg.integrator.abs_tol,
            "max_step": fmt(cfg.integrator.max_step, "ns"),
            "initial_step": fmt(cfg.integrator.initial_step, "ns"),
        },
        "output_dir": cfg.output_dir,
        "workers": cfg.workers,
    }

