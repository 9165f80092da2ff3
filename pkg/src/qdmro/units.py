"""Unit-suffixed quantity parsing and the single frequency -> angular conversion.

Internal units: ns for time, rad/ns for every rate and Rabi frequency, W for
power, m for length. Ordinary frequencies ("1 GHz") are converted with a
factor 2*pi; lifetimes ("100 us") become rates 1/T without it.
"""

from __future__ import annotations

import math
import re

TWO_PI = 2.0 * math.pi


class UnitError(ValueError):
    pass


_FREQ = {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9, "THz": 1e12}  # -> Hz
_TIME = {"s": 1e9, "ms": 1e6, "us": 1e3, "µs": 1e3, "μs": 1e3, "ns": 1.0, "ps": 1e-3}  # -> ns
_POWER = {"W": 1.0, "mW": 1e-3, "uW": 1e-6, "µW": 1e-6, "μW": 1e-6, "nW": 1e-9, "pW": 1e-12}
_LENGTH = {"m": 1.0, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "μm": 1e-6, "nm": 1e-9}

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|[-+]?inf)\s*(\S+)?\s*$")


def hz_to_rad_per_ns(freq_hz: float) -> float:
    """Ordinary frequency in Hz to angular frequency in rad/ns."""
    return TWO_PI * freq_hz * 1e-9


def rad_per_ns_to_hz(omega: float) -> float:
    return omega / TWO_PI * 1e9


def split_quantity(text: str) -> tuple[float, str]:
    if not isinstance(text, str):
        raise UnitError(f"expected a unit-suffixed string, got {text!r}")
    m = _QUANTITY.match(text)
    if not m:
        raise UnitError(f"cannot parse quantity {text!r}")
    value = float(m.group(1))
    unit = m.group(2) or ""
    return value, unit


def parse_time(text: str) -> float:
    """Return a duration in ns."""
    value, unit = split_quantity(text)
    if unit not in _TIME:
        raise UnitError(f"{text!r}: expected a time unit ({', '.join(_TIME)})")
    return value * _TIME[unit]


def parse_rate(text: str) -> float:
    """Return an angular rate in rad/ns.

    Accepts ordinary frequencies (x 2 pi), lifetimes (1/T), and explicit
    ``rad/<time>`` or ``1/<time>`` rates.
    """
    value, unit = split_quantity(text)
    if unit in _FREQ:
        return hz_to_rad_per_ns(value * _FREQ[unit])
    if unit in _TIME:
        if value <= 0:
            raise UnitError(f"{text!r}: lifetime must be > 0")
        if math.isinf(value):
            return 0.0
        return 1.0 / (value * _TIME[unit])
    for prefix in ("rad/", "1/", "/"):
        if unit.startswith(prefix) and unit[len(prefix):] in _TIME:
            return value / _TIME[unit[len(prefix):]]
    raise UnitError(f"{text!r}: expected a frequency, lifetime, or rad/<time> rate")


def parse_power(text: str) -> float:
    value, unit = split_quantity(text)
    if unit not in _POWER:
        raise UnitError(f"{text!r}: expected a power unit ({', '.join(_POWER)})")
    return value * _POWER[unit]


def parse_length(text: str) -> float:
    value, unit = split_quantity(text)
    if unit not in _LENGTH:
        raise UnitError(f"{text!r}: expected a length unit ({', '.join(_LENGTH)})")
    return value * _LENGTH[unit]


def parse_fraction(value) -> float:
    """Dimensionless number, or a string with an optional ``%`` suffix."""
    if isinstance(value, bool):
        raise UnitError(f"expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    number, unit = split_quantity(value)
    if unit == "%":
        return number / 100.0
    if unit:
        raise UnitError(f"{value!r}: dimensionless value cannot carry unit {unit!r}")
    return number


def fmt(value: float, unit: str) -> str:
    """Round-trip formatting used by the config echo."""
    return f"{value!r} {unit}"
