"""YAML run configuration with explicit units.

Example::

    scenario:
      platform: Ti:LN
      pulse_fwhm: 1 ps
      pump_photons: 1.0e9
    detector:
      jitter_fwhm: 20 ps
    loop:
      loop_delay: 156.9 ns
      rep_rate: 125 kHz
      loop_loss: 0.5 dB
    output:
      path: out.csv
      format: CSV

Unknown sections or keys are rejected by name.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from dispfilter import units
from dispfilter.errors import ConfigurationError
from dispfilter.loop import LoopConfig
from dispfilter.temporal import DetectorSpec, WidthConvention


def _number(value):
    # YAML 1.1 reads "1e9" as a string, so numeric strings are accepted
    if isinstance(value, bool):
        raise ConfigurationError(f"expected a number, got {value!r}")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"expected a number, got {value!r}") from None


def _integer(value):
    number = _number(value)
    if number != int(number):
        raise ConfigurationError(f"expected an integer, got {value!r}")
    return int(number)


def _convention(value):
    try:
        return WidthConvention(value)
    except ValueError:
        options = ", ".join(c.value for c in WidthConvention)
        raise ConfigurationError(f"unknown width convention {value!r} (use {options})") from None


# section -> key -> (target field, parser)
_SCHEMA = {
    "scenario": {
        "platform": ("platform", str),
        "platform_file": ("platform_file", str),
        "pulse_fwhm": ("pulse_fwhm", units.duration),
        "pump_photons": ("pump_photons", _number),
        "pair_probability": ("pair_probability", _number),
        "width_convention": ("width_convention", _convention),
        "contamination_threshold": ("contamination_threshold", _number),
    },
    "detector": {
        "jitter_fwhm": ("jitter_fwhm", units.duration),
        "efficiency": ("efficiency", _number),
        "dead_time": ("dead_time", units.duration),
        "dark_count_rate": ("dark_count_rate", units.rate),
    },
    "loop": {
        "loop_delay": ("loop_delay", units.duration),
        "rep_rate": ("rep_rate", units.frequency),
        "bins": ("bins", _integer),
        "tap_ratio": ("tap_ratio", _number),
        "loop_loss": ("loop_loss_db", units.decibels),
        "differential_delay": ("differential_delay", units.duration),
        "creation_probability": ("creation_probability", _number),
        "pump_clicks_per_bin_scale": ("pump_clicks_per_bin_scale", _number),
        "pulse_fwhm": ("pulse_fwhm", units.duration),
        "trigger_offset": ("trigger_offset", units.duration),
        "hist_bin_width": ("hist_bin_width", units.duration),
    },
    "output": {
        "path": ("path", str),
        "format": ("format", str),
    },
}


@dataclass
class RunConfig:
    scenario: dict = field(default_factory=dict)
    detector: dict = field(default_factory=dict)
    loop: LoopConfig = field(default_factory=LoopConfig)
    output_path: str | None = None
    output_format: str = "CSV"
    source: str = "<defaults>"

    def detector_spec(self, base: DetectorSpec) -> DetectorSpec:
        return replace(base, **self.detector)


def parse_run_config(text: str, source: str = "<string>") -> RunConfig:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f":{mark.line + 1}:{mark.column + 1}" if mark else ""
        raise ConfigurationError(f"{source}{where}: invalid YAML: {getattr(exc, 'problem', exc)}") from exc
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigurationError(f"{source}: top level must be a mapping of sections")

    parsed: dict[str, dict] = {}
    for section, body in doc.items():
        if section not in _SCHEMA:
            raise ConfigurationError(
                f"{source}: unknown section {section!r} (known: {', '.join(_SCHEMA)})"
            )
        if body is None:
            body = {}
        if not isinstance(body, dict):
            raise ConfigurationError(f"{source}: section {section!r} must be a mapping")
        values = {}
        for key, raw in body.items():
            spec = _SCHEMA[section].get(key)
            if spec is None:
                raise ConfigurationError(f"{source}: unknown key {section}.{key}")
            target, parse = spec
            try:
                values[target] = parse(raw)
            except ConfigurationError as exc:
                raise ConfigurationError(f"{source}: {section}.{key}: {exc}") from None
        parsed[section] = values

    loop_values = parsed.get("loop", {})
    output = parsed.get("output", {})
    fmt = output.get("format", "CSV").upper()
    if fmt not in ("CSV", "JSON"):
        raise ConfigurationError(f"{source}: output.format must be CSV or JSON, got {fmt!r}")
    try:
        loop = LoopConfig(**loop_values)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{source}: loop: {exc}") from None
    return RunConfig(
        scenario=parsed.get("scenario", {}),
        detector=parsed.get("detector", {}),
        loop=loop,
        output_path=output.get("path"),
        output_format=fmt,
        source=source,
    )


def load_run_config(path: str | os.PathLike) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_run_config(text, str(path))
