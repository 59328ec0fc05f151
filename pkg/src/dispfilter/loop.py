"""Monte Carlo emulation of a fiber delay loop fed with signal photons and residual pump.

Each laser trigger may create photon pairs; the signal photons and a weak
pump share a 10/90 loop coupler, so every round trip k releases the fraction

    tap * (1 - tap)**(k - 1) * 10**(-k * loop_loss_db / 10)

of each channel. The pump falls behind the signal by ``differential_delay``
per round trip. Clicks are drawn per channel with Poisson statistics, smeared
by pulse width and detector jitter, filtered by dead time, and histogrammed
against the trigger clock.

Trials are simulated in fixed-size blocks, each with its own generator derived
from ``(seed, block_index)``, so results do not depend on how blocks are
scheduled across workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from dispfilter.dispersion import FUSED_SILICA, SPEED_OF_LIGHT, group_index
from dispfilter.errors import ConfigurationError, NotSeparatedError
from dispfilter.temporal import DetectorSpec, gaussian_sigma

BLOCK_SIZE = 1 << 16
MIN_CENTROID_COUNTS = 100
SEPARATION_SPREADS = 3.0


def bulk_silica_differential_delay(
    fiber_length: float = 30.0, pump_nm: float = 775.0, signal_nm: float = 1550.0
) -> float:
    """Pump-minus-signal delay (s) accumulated over ``fiber_length`` metres of bulk silica."""
    ng_pump = group_index(FUSED_SILICA, pump_nm * 1e-3)
    ng_signal = group_index(FUSED_SILICA, signal_nm * 1e-3)
    return fiber_length * (ng_pump - ng_signal) / SPEED_OF_LIGHT


DEFAULT_DIFFERENTIAL_DELAY = bulk_silica_differential_delay()

# detector assumed for the loop experiment when none is given
DEFAULT_LOOP_DETECTOR = DetectorSpec(
    jitter_fwhm=100e-12, efficiency=0.8, dead_time=50e-9, dark_count_rate=100.0
)


@dataclass(frozen=True)
class LoopConfig:
    loop_delay: float = 156.9e-9
    rep_rate: float = 125e3
    bins: int = 51
    tap_ratio: float = 0.1
    loop_loss_db: float = 0.5
    differential_delay: float = DEFAULT_DIFFERENTIAL_DELAY
    creation_probability: float = 0.615
    pump_clicks_per_bin_scale: float = 2.0
    pulse_fwhm: float = 1.0e-9
    trigger_offset: float = 0.0
    hist_bin_width: float = 0.2e-9

    def __post_init__(self):
        if not self.loop_delay > 0:
            raise ConfigurationError("loop_delay must be > 0")
        if not self.rep_rate > 0:
            raise ConfigurationError("rep_rate must be > 0")
        if self.bins < 1:
            raise ConfigurationError("bins must be >= 1")
        if not 0 < self.tap_ratio < 1:
            raise ConfigurationError(f"tap_ratio must be in (0, 1), got {self.tap_ratio!r}")
        if self.loop_loss_db < 0:
            raise ConfigurationError("loop_loss_db must be >= 0")
        if not 0 <= self.creation_probability < 1:
            raise ConfigurationError("creation_probability must be in [0, 1)")
        if self.pump_clicks_per_bin_scale < 0:
            raise ConfigurationError("pump_clicks_per_bin_scale must be >= 0")
        if self.pulse_fwhm < 0:
            raise ConfigurationError("pulse_fwhm must be >= 0")
        if self.trigger_offset < 0:
            raise ConfigurationError("trigger_offset must be >= 0")
        if not self.hist_bin_width > 0:
            raise ConfigurationError("hist_bin_width must be > 0")
        # the last pulse of a train must arrive before the first pulse of the next one
        if (self.bins - 1) * self.loop_delay >= self.period:
            raise ConfigurationError(
                f"{self.bins} bins of {self.loop_delay * 1e9:.4g} ns overrun the "
                f"{self.period * 1e6:.4g} us trigger period; the detector would not resolve the pulses"
            )

    @property
    def period(self) -> float:
        return 1.0 / self.rep_rate

    @property
    def round_trip_ratio(self) -> float:
        return (1.0 - self.tap_ratio) * 10.0 ** (-self.loop_loss_db / 10.0)

    @property
    def mean_pairs(self) -> float:
        """Poisson mean giving P(at least one pair) = creation_probability."""
        return -math.log1p(-self.creation_probability)

    def round_trip_fractions(self) -> np.ndarray:
        k = np.arange(1, self.bins + 1)
        return self.tap_ratio * (1.0 - self.tap_ratio) ** (k - 1) * 10.0 ** (-k * self.loop_loss_db / 10.0)

    def total_outcoupled_fraction(self) -> float:
        """Sum of round_trip_fractions over infinitely many round trips."""
        att = 10.0 ** (-self.loop_loss_db / 10.0)
        return self.tap_ratio * att / (1.0 - self.round_trip_ratio)

    def timing_spread(self, detector: DetectorSpec) -> float:
        """Std of a click time about its pulse centre: jitter and pulse width in quadrature."""
        return math.hypot(gaussian_sigma(detector.jitter_fwhm), gaussian_sigma(self.pulse_fwhm))

    def hist_edges(self) -> np.ndarray:
        span = self.trigger_offset + (self.bins + 0.5) * self.loop_delay
        n = int(math.ceil(span / self.hist_bin_width))
        return self.hist_bin_width * np.arange(n + 1)


@dataclass
class _Tally:
    hist: np.ndarray
    counts: np.ndarray
    sum_offset: np.ndarray
    sum_offset2: np.ndarray

    @classmethod
    def empty(cls, n_hist: int, bins: int) -> "_Tally":
        return cls(np.zeros(n_hist, np.int64), np.zeros(bins, np.int64), np.zeros(bins), np.zeros(bins))

    def add(self, other: "_Tally") -> None:
        self.hist += other.hist
        self.counts += other.counts
        self.sum_offset += other.sum_offset
        self.sum_offset2 += other.sum_offset2


@dataclass(frozen=True)
class HistogramResult:
    config: LoopConfig
    detector: DetectorSpec
    trials: int
    seed: int
    bin_edges: np.ndarray = field(repr=False)
    counts_signal: np.ndarray = field(repr=False)
    counts_pump: np.ndarray = field(repr=False)
    round_trips: np.ndarray = field(repr=False)
    round_trip_counts_signal: np.ndarray = field(repr=False)
    round_trip_counts_pump: np.ndarray = field(repr=False)
    t_signal: np.ndarray = field(repr=False)
    t_pump: np.ndarray = field(repr=False)
    std_signal: np.ndarray = field(repr=False)
    std_pump: np.ndarray = field(repr=False)

    @property
    def separation(self) -> np.ndarray:
        return self.t_pump - self.t_signal

    @property
    def separation_stderr(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.sqrt(
                self.std_signal**2 / self.round_trip_counts_signal
                + self.std_pump**2 / self.round_trip_counts_pump
            )

    @property
    def populated(self) -> np.ndarray:
        """Round trips whose centroids are defined (>= 100 counts in both channels)."""
        return (self.round_trip_counts_signal >= MIN_CENTROID_COUNTS) & (
            self.round_trip_counts_pump >= MIN_CENTROID_COUNTS
        )

    def centroid_rows(self):
        for i in np.flatnonzero(self.populated):
            yield int(self.round_trips[i]), self.t_signal[i], self.t_pump[i], self.separation[i]


def _dead_time_mask(trial: np.ndarray, times: np.ndarray, dead_time: float) -> np.ndarray:
    """Keep-mask dropping clicks within ``dead_time`` of the previous accepted click.

    Inputs must be sorted by (trial, time).
    """
    keep = np.ones(times.size, bool)
    if dead_time <= 0 or times.size < 2:
        return keep
    close = (trial[1:] == trial[:-1]) & (np.diff(times) < dead_time)
    if not close.any():
        return keep
    for tr in np.unique(trial[1:][close]):
        idx = np.flatnonzero(trial == tr)
        last = -math.inf
        for i in idx:
            if times[i] - last < dead_time:
                keep[i] = False
            else:
                last = times[i]
    return keep


def _channel(rng, n, lam, centers, spread, dark_rate, period, dead_time, edges):
    bins = lam.size
    fire = rng.random((n, bins)) < -np.expm1(-lam)
    trial, kidx = np.nonzero(fire)
    times = centers[kidx] + spread * rng.standard_normal(trial.size)
    label = kidx + 1
    if dark_rate > 0:
        n_dark = rng.poisson(dark_rate * period, n)
        d_trial = np.repeat(np.arange(n), n_dark)
        d_times = period * rng.random(d_trial.size)
        trial = np.concatenate([trial, d_trial])
        times = np.concatenate([times, d_times])
        label = np.concatenate([label, np.zeros(d_trial.size, label.dtype)])
    order = np.lexsort((times, trial))
    trial, times, label = trial[order], times[order], label[order]
    keep = _dead_time_mask(trial, times, dead_time)
    times, label = times[keep], label[keep]

    tally = _Tally.empty(edges.size - 1, bins)
    tally.hist += np.histogram(times, edges)[0]
    photon = label > 0
    k0 = label[photon] - 1
    offset = times[photon] - centers[k0]
    tally.counts += np.bincount(k0, minlength=bins)
    tally.sum_offset += np.bincount(k0, offset, minlength=bins)
    tally.sum_offset2 += np.bincount(k0, offset * offset, minlength=bins)
    return tally


def _simulate_block(args):
    cfg, detector, seed, block, n = args
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))
    frac = cfg.round_trip_fractions() * detector.efficiency
    k = np.arange(1, cfg.bins + 1)
    sig_centers = cfg.trigger_offset + k * cfg.loop_delay
    pump_centers = cfg.trigger_offset + k * (cfg.loop_delay + cfg.differential_delay)
    spread = cfg.timing_spread(detector)
    edges = cfg.hist_edges()
    # dark counts are indistinguishable from heralded photons; book them as signal clicks
    sig = _channel(rng, n, cfg.mean_pairs * frac, sig_centers, spread,
                   detector.dark_count_rate, cfg.period, detector.dead_time, edges)
    pump = _channel(rng, n, cfg.pump_clicks_per_bin_scale * frac, pump_centers, spread,
                    0.0, cfg.period, detector.dead_time, edges)
    return sig, pump


def _centroids(tally: _Tally, centers: np.ndarray):
    with np.errstate(divide="ignore", invalid="ignore"):
        mean = tally.sum_offset / tally.counts
        var = tally.sum_offset2 / tally.counts - mean**2
    t = np.where(tally.counts >= MIN_CENTROID_COUNTS, centers + mean, np.nan)
    std = np.where(tally.counts >= MIN_CENTROID_COUNTS, np.sqrt(np.clip(var, 0, None)), np.nan)
    return t, std


def run_emulation(
    cfg: LoopConfig,
    detector: DetectorSpec = DEFAULT_LOOP_DETECTOR,
    trials: int = 1_000_000,
    seed: int = 0,
    workers: int = 1,
    block_size: int = BLOCK_SIZE,
) -> HistogramResult:
    """Simulate ``trials`` laser triggers and histogram the clicks.

    Identical ``(cfg, detector, trials, seed, block_size)`` always give
    identical results, whatever ``workers`` is.
    """
    if trials < 1:
        raise ConfigurationError(f"trials must be >= 1, got {trials!r}")
    if seed < 0:
        raise ConfigurationError(f"seed must be >= 0, got {seed!r}")
    edges = cfg.hist_edges()
    tasks = []
    for block, start in enumerate(range(0, trials, block_size)):
        tasks.append((cfg, detector, seed, block, min(block_size, trials - start)))
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_simulate_block, tasks))
    else:
        parts = [_simulate_block(t) for t in tasks]

    sig = _Tally.empty(edges.size - 1, cfg.bins)
    pump = _Tally.empty(edges.size - 1, cfg.bins)
    for s, p in parts:
        sig.add(s)
        pump.add(p)

    k = np.arange(1, cfg.bins + 1)
    t_sig, std_sig = _centroids(sig, cfg.trigger_offset + k * cfg.loop_delay)
    t_pump, std_pump = _centroids(pump, cfg.trigger_offset + k * (cfg.loop_delay + cfg.differential_delay))
    return HistogramResult(
        config=cfg,
        detector=detector,
        trials=trials,
        seed=seed,
        bin_edges=edges,
        counts_signal=sig.hist,
        counts_pump=pump.hist,
        round_trips=k,
        round_trip_counts_signal=sig.counts,
        round_trip_counts_pump=pump.counts,
        t_signal=t_sig,
        t_pump=t_pump,
        std_signal=std_sig,
        std_pump=std_pump,
    )


def first_separated_round_trip(result: HistogramResult, detector: DetectorSpec | None = None) -> int:
    """First round trip whose signal and pump centroids are more than three timing spreads apart."""
    detector = detector or result.detector
    populated = np.flatnonzero(result.populated)
    if populated.size < 3:
        raise ConfigurationError(
            f"need at least 3 populated round trips, found {populated.size}; increase trials"
        )
    threshold = SEPARATION_SPREADS * result.config.timing_spread(detector)
    for i in populated:
        if abs(result.separation[i]) > threshold:
            return int(result.round_trips[i])
    raise NotSeparatedError(
        f"not separated within bin budget: no populated round trip exceeds {threshold * 1e9:.4g} ns"
    )

