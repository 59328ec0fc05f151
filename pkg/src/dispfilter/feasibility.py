"""Pump contamination inside the signal's detection window, and the distance solver.

A signal pulse (mean photon number = pair probability) and a pump pulse
(mean photon number = pump photons) leave the source together and drift apart
by ``length * (n_g,pump - n_g,signal) / c``. Both are attenuated by their
channel losses. The detection window is the signal's jittered click density
mean +- 3 std; contamination is the pump's share of the windowed click
probability.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

from dispfilter.dispersion import (
    PlatformSpec,
    arrival_separation,
    attenuate,
    propagation_loss_db,
)
from dispfilter.errors import (
    ConfigurationError,
    DegenerateDensityError,
    DispfilterError,
    ModelError,
    NonMonotoneError,
    SeparationUnreachableError,
    SignalExtinguishedError,
)
from dispfilter.temporal import (
    DetectorSpec,
    PulseSpec,
    WidthConvention,
    click_probability,
    convolve_jitter,
    covering_grid,
    density_moments,
    sample_click_density,
    windowed_click_probability,
)

log = logging.getLogger(__name__)

WINDOW_HALF_WIDTH_STDS = 3.0
MIN_WINDOW_MASS = 0.99
# pump grid gets extra leading margin: the window integral reaches into the pump's far tail
PUMP_TAIL_SIGMAS = 16.0


@dataclass(frozen=True)
class ScenarioConfig:
    platform: PlatformSpec
    detector: DetectorSpec = field(default_factory=DetectorSpec)
    pulse_fwhm: float = 1e-12
    pump_photons: float = 1e9
    pair_probability: float = 0.1
    width_convention: WidthConvention = WidthConvention.SECH2_EXACT
    contamination_threshold: float = 0.01

    def __post_init__(self):
        if not 0 < self.pair_probability < 1:
            raise ConfigurationError(f"pair_probability must be in (0, 1), got {self.pair_probability!r}")
        if not self.pump_photons >= 1:
            raise ConfigurationError(f"pump_photons must be >= 1, got {self.pump_photons!r}")
        if not 0 < self.contamination_threshold < 1:
            raise ConfigurationError(
                f"contamination_threshold must be in (0, 1), got {self.contamination_threshold!r}"
            )
        if not self.pulse_fwhm > 0:
            raise ConfigurationError(f"pulse_fwhm must be > 0, got {self.pulse_fwhm!r}")
        object.__setattr__(self, "width_convention", WidthConvention(self.width_convention))

    @classmethod
    def for_platform(cls, platform: PlatformSpec, jitter_fwhm: float = 20e-12, **kwargs) -> "ScenarioConfig":
        kwargs.setdefault("pump_photons", platform.default_pump_photons)
        kwargs.setdefault("pair_probability", platform.default_pair_probability)
        kwargs.setdefault("detector", DetectorSpec(jitter_fwhm=jitter_fwhm))
        return cls(platform=platform, **kwargs)

    def with_jitter(self, jitter_fwhm: float) -> "ScenarioConfig":
        return replace(self, detector=replace(self.detector, jitter_fwhm=jitter_fwhm))

    @property
    def intensity_ratio(self) -> float:
        return self.pump_photons / self.pair_probability


def suppression_db(p_signal: float, p_pump: float, intensity_ratio: float = 1e10) -> float:
    """Equivalent spectral pump suppression.

    Equal windowed probabilities correspond to suppressing the pump down to
    the signal level, i.e. ``10 log10(intensity_ratio)`` dB (100 dB for the
    default 1e10 ratio).
    """
    anchor = 10.0 * math.log10(intensity_ratio)
    if p_pump == 0:
        return math.inf
    if p_signal == 0:
        return -math.inf
    return anchor + 10.0 * math.log10(p_signal / p_pump)


@dataclass(frozen=True)
class WindowReport:
    window: tuple[float, float]
    p_signal: float
    p_pump: float
    contamination: float
    suppression_db: float
    filtered_signal_probability: float
    signal_mu: float = math.nan
    pump_mu: float = math.nan
    window_mass_fraction: float = math.nan


@dataclass(frozen=True)
class SeparationResult:
    distance: float
    arrival_separation: float
    signal_loss_db: float
    pump_loss_db: float
    report: WindowReport
    iterations: int
    bracket: tuple[float, float] = (math.nan, math.nan)


def build_pulses(cfg: ScenarioConfig, length: float, extra_loss_db: float = 0.0) -> tuple[PulseSpec, PulseSpec]:
    """Attenuated (signal, pump) pulses after ``length`` metres; the signal is centred at t = 0."""
    plat = cfg.platform
    sig_loss = propagation_loss_db(length, plat.signal) + extra_loss_db
    pump_loss = propagation_loss_db(length, plat.pump) + extra_loss_db
    eff = cfg.detector.efficiency
    mu_s = attenuate(cfg.pair_probability, sig_loss) * eff
    mu_p = attenuate(cfg.pump_photons, pump_loss) * eff
    if mu_s == 0.0:
        raise SignalExtinguishedError(sig_loss)
    tau = arrival_separation(length, plat)
    signal = PulseSpec(cfg.pulse_fwhm, 0.0, mu_s, "signal", cfg.width_convention)
    pump = PulseSpec(cfg.pulse_fwhm, tau, mu_p, "pump", cfg.width_convention)
    return signal, pump


def signal_window(cfg: ScenarioConfig, signal: PulseSpec) -> tuple[float, float, float]:
    """(lo, hi, total) of the +-3 std window around the jittered signal click density."""
    density = convolve_jitter(sample_click_density(signal, covering_grid(signal)), cfg.detector.jitter_fwhm)
    total, mean, std = density_moments(density)
    half = WINDOW_HALF_WIDTH_STDS * std
    return mean - half, mean + half, total


def evaluate_at_distance(cfg: ScenarioConfig, length: float, extra_loss_db: float = 0.0) -> WindowReport:
    """Windowed signal and pump click probabilities after ``length`` metres.

    ``extra_loss_db`` adds the same fixed loss (e.g. coupling) to both channels.
    """
    if length < 0:
        raise ConfigurationError(f"length must be >= 0, got {length!r}")
    if extra_loss_db < 0:
        raise ConfigurationError(f"extra_loss_db must be >= 0, got {extra_loss_db!r}")
    signal, pump = build_pulses(cfg, length, extra_loss_db)
    try:
        lo, hi, total = signal_window(cfg, signal)
    except DegenerateDensityError as exc:
        # mean photon number is positive but its density underflows everywhere
        loss = propagation_loss_db(length, cfg.platform.signal) + extra_loss_db
        raise SignalExtinguishedError(loss) from exc
    jitter = cfg.detector.jitter_fwhm
    p_signal = windowed_click_probability(signal, lo, hi, jitter)
    p_pump = windowed_click_probability(pump, lo, hi, jitter, tail_sigmas=PUMP_TAIL_SIGMAS)
    if not p_signal > 0:
        raise SignalExtinguishedError(propagation_loss_db(length, cfg.platform.signal) + extra_loss_db)
    mass_fraction = p_signal / click_probability(signal.mean_photons)
    if mass_fraction < MIN_WINDOW_MASS:
        raise ModelError(
            f"window captures only {mass_fraction:.4f} of the signal click probability"
        )
    contamination = p_pump / (p_pump + p_signal)
    return WindowReport(
        window=(lo, hi),
        p_signal=p_signal,
        p_pump=p_pump,
        contamination=contamination,
        suppression_db=suppression_db(p_signal, p_pump, cfg.intensity_ratio),
        filtered_signal_probability=p_signal / (p_pump + p_signal),
        signal_mu=signal.mean_photons,
        pump_mu=pump.mean_photons,
        window_mass_fraction=mass_fraction,
    )


def filtered_signal_curve(cfg: ScenarioConfig, lengths: Sequence[float]) -> list[tuple[float, float]]:
    if len(lengths) == 0:
        raise ConfigurationError("lengths must not be empty")
    return [(L, evaluate_at_distance(cfg, L).filtered_signal_probability) for L in lengths]


def solve_separation_distance(
    cfg: ScenarioConfig,
    start: float = 1e-3,
    max_length: float = 1e6,
    rel_tol: float = 1e-4,
) -> SeparationResult:
    """Shortest length at which contamination drops to the threshold.

    Doubles the length from ``start`` until the threshold is met, then bisects
    the last bracket to a relative width of ``rel_tol``. Contamination must
    decrease monotonically inside the bracket; if it does not, the bracket is
    rejected instead of returning a possibly wrong root.
    """
    if cfg.platform.delta_group_index == 0:
        raise ConfigurationError("platform has no group-index difference")
    if cfg.platform.delta_group_index < 0:
        raise ConfigurationError(
            f"{cfg.platform.name}: signal is slower than the pump, it never leads"
        )
    thr = cfg.contamination_threshold
    evaluations = 0

    def contamination(L):
        nonlocal evaluations
        evaluations += 1
        return evaluate_at_distance(cfg, L).contamination

    lo, c_lo = 0.0, contamination(0.0)
    if c_lo <= thr:
        hi, c_hi = 0.0, c_lo
    else:
        hi = start
        while True:
            try:
                c_hi = contamination(hi)
            except SignalExtinguishedError as exc:
                raise SeparationUnreachableError(
                    f"separation unreachable: {exc} at {hi:.6g} m before contamination fell to {thr}"
                ) from exc
            if c_hi <= thr:
                break
            lo, c_lo = hi, c_hi
            hi *= 2.0
            if hi > max_length:
                raise SeparationUnreachableError(
                    f"separation unreachable within {max_length:.6g} m "
                    f"(contamination {c_lo:.4g} at {lo:.6g} m)"
                )
    bracket = (lo, hi)
    # tiny numerical wiggle is tolerated, genuine reversals are not
    slack = 1e-9
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        c_mid = contamination(mid)
        if c_mid > c_lo + slack or c_mid < c_hi - slack:
            raise NonMonotoneError(
                f"contamination is not monotone in [{lo:.6g}, {hi:.6g}] m "
                f"({c_lo:.6g}, {c_mid:.6g}, {c_hi:.6g}); rerun with a finer scan"
            )
        if c_mid > thr:
            lo, c_lo = mid, c_mid
        else:
            hi, c_hi = mid, c_mid
    report = evaluate_at_distance(cfg, hi)
    log.debug("solved %s: %.6g m after %d evaluations", cfg.platform.name, hi, evaluations)
    return SeparationResult(
        distance=hi,
        arrival_separation=arrival_separation(hi, cfg.platform),
        signal_loss_db=propagation_loss_db(hi, cfg.platform.signal),
        pump_loss_db=propagation_loss_db(hi, cfg.platform.pump),
        report=report,
        iterations=evaluations,
        bracket=bracket,
    )


@dataclass(frozen=True)
class SweepRow:
    jitter: float
    result: SeparationResult | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.result is not None


def _sweep_row(args) -> SweepRow:
    cfg, jitter = args
    try:
        return SweepRow(jitter, solve_separation_distance(cfg.with_jitter(jitter)))
    except DispfilterError as exc:
        return SweepRow(jitter, error=str(exc))


def jitter_sweep(cfg: ScenarioConfig, jitters: Sequence[float], workers: int = 1) -> list[SweepRow]:
    """Solve the separation distance for each jitter FWHM, rows sorted by jitter.

    A failing row carries its error message instead of being dropped.
    """
    if len(jitters) == 0:
        raise ConfigurationError("jitters must not be empty")
    for j in jitters:
        if j < 0:
            raise ConfigurationError(f"jitter must be ≥ 0, got {j!r}")
    tasks = [(cfg, j) for j in sorted(jitters)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_row, tasks))
    return [_sweep_row(t) for t in tasks]
