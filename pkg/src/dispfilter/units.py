"""Strict parsing of unit-suffixed quantities such as ``20ps``, ``90.08 mm`` or ``125 kHz``.

Bare numbers are rejected for dimensional quantities; a duration flag will
not accept a length and vice versa.
"""

from __future__ import annotations

import re

from dispfilter.errors import ConfigurationError

_UNITS = {
    "time": {"fs": 1e-15, "ps": 1e-12, "ns": 1e-9, "us": 1e-6, "µs": 1e-6, "ms": 1e-3, "s": 1.0},
    "length": {"nm": 1e-9, "um": 1e-6, "µm": 1e-6, "mm": 1e-3, "cm": 1e-2, "m": 1.0, "km": 1e3},
    "frequency": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9},
    "attenuation": {"dB": 1.0},
    "rate": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "cps": 1.0, "/s": 1.0},
}

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-zµ/]+)\s*$")


def parse_quantity(text, kind: str) -> float:
    """Parse ``text`` as a quantity of ``kind`` and return it in SI base units."""
    units = _UNITS[kind]
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        raise ConfigurationError(f"{text!r} has no unit; expected a {kind} such as 1{next(iter(units))}")
    m = _QUANTITY.match(str(text))
    if not m:
        raise ConfigurationError(f"cannot parse {text!r} as a {kind} (expected e.g. '20ps')")
    value, unit = m.groups()
    if unit not in units:
        raise ConfigurationError(
            f"unit {unit!r} is not a {kind} unit; use one of {', '.join(units)}"
        )
    return float(value) * units[unit]


def duration(text) -> float:
    return parse_quantity(text, "time")


def length(text) -> float:
    return parse_quantity(text, "length")


def frequency(text) -> float:
    return parse_quantity(text, "frequency")


def decibels(text) -> float:
    return parse_quantity(text, "attenuation")


def rate(text) -> float:
    return parse_quantity(text, "rate")
