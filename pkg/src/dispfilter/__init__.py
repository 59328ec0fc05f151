"""Dispersion-based temporal pump filtering for heralded single-photon sources."""

from dispfilter.errors import (
    ConfigurationError,
    DispfilterError,
    DomainError,
    ModelError,
)
from dispfilter.temporal import DetectorSpec, PulseSpec, SampledDensity, TemporalGrid
from dispfilter.dispersion import PlatformSpec, WaveChannel, builtin_platforms, get_platform
from dispfilter.feasibility import ScenarioConfig, evaluate_at_distance, solve_separation_distance

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "DetectorSpec",
    "DispfilterError",
    "DomainError",
    "ModelError",
    "PlatformSpec",
    "PulseSpec",
    "SampledDensity",
    "ScenarioConfig",
    "TemporalGrid",
    "WaveChannel",
    "builtin_platforms",
    "evaluate_at_distance",
    "get_platform",
    "solve_separation_distance",
]
