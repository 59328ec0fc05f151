"""Pulse shapes, Poisson click statistics and jitter convolution on time grids.

All times are in seconds. A pulse is a sech^2 photon-number density

    S(t) = A / (2 sigma) * sech^2((t - t_c) / sigma)

whose integral is the mean photon number A. Clicks follow Poisson statistics
for a non-photon-number-resolving detector: the probability of at least one
click given mu photons is 1 - exp(-mu).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import expit, ndtr

from dispfilter.errors import ConfigurationError, DegenerateDensityError, DomainError

GAUSS_FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))
SECH2_FWHM_PER_SIGMA = 2.0 * math.log(1.0 + math.sqrt(2.0))

KERNEL_HALF_WIDTH_SIGMAS = 6.0
GRID_TAIL_SIGMAS = 8.0


class PulseShape(str, enum.Enum):
    SECH2 = "Sech2"


class WidthConvention(str, enum.Enum):
    """How a sech^2 pulse's width parameter is derived from its FWHM."""

    SECH2_EXACT = "Sech2Exact"
    GAUSSIAN_EQUIVALENT = "GaussianEquivalent"
    PAPER_LITERAL = "PaperLiteral"


class DensityKind(str, enum.Enum):
    PHOTON_NUMBER = "PhotonNumberDensity"
    CLICK_PROBABILITY = "ClickProbabilityDensity"


def sigma_from_fwhm(fwhm: float, convention: WidthConvention | str = WidthConvention.SECH2_EXACT) -> float:
    """Width parameter of a sech^2 pulse with the given FWHM.

    ``Sech2Exact`` places the half maximum exactly at the FWHM,
    ``GaussianEquivalent`` divides by the Gaussian factor 2*sqrt(2 ln 2) and
    ``PaperLiteral`` multiplies by it.
    """
    if not fwhm > 0:
        raise DomainError(f"fwhm must be > 0, got {fwhm!r}")
    convention = WidthConvention(convention)
    if convention is WidthConvention.SECH2_EXACT:
        return fwhm / SECH2_FWHM_PER_SIGMA
    if convention is WidthConvention.GAUSSIAN_EQUIVALENT:
        return fwhm / GAUSS_FWHM_PER_SIGMA
    return fwhm * GAUSS_FWHM_PER_SIGMA


def gaussian_sigma(fwhm: float) -> float:
    if fwhm < 0:
        raise DomainError(f"jitter must be ≥ 0, got {fwhm!r}")
    return fwhm / GAUSS_FWHM_PER_SIGMA


@dataclass(frozen=True)
class PulseSpec:
    fwhm: float
    center: float = 0.0
    mean_photons: float = 0.0
    label: str = ""
    width_convention: WidthConvention = WidthConvention.SECH2_EXACT
    shape: PulseShape = PulseShape.SECH2

    def __post_init__(self):
        if not self.fwhm > 0:
            raise DomainError(f"pulse fwhm must be > 0, got {self.fwhm!r}")
        if not self.mean_photons >= 0:
            raise DomainError(f"mean_photons must be >= 0, got {self.mean_photons!r}")
        object.__setattr__(self, "width_convention", WidthConvention(self.width_convention))
        object.__setattr__(self, "shape", PulseShape(self.shape))

    @property
    def sigma(self) -> float:
        return sigma_from_fwhm(self.fwhm, self.width_convention)

    @property
    def spike_advance(self) -> float:
        """How far ahead of the centre the click density may peak."""
        return 0.5 * self.sigma * math.log(max(self.mean_photons, math.e))


@dataclass(frozen=True)
class TemporalGrid:
    start: float
    step: float
    count: int

    def __post_init__(self):
        if not self.step > 0:
            raise ConfigurationError(f"grid step must be > 0, got {self.step!r}")
        if self.count < 2:
            raise ConfigurationError(f"grid needs at least 2 points, got {self.count}")

    @classmethod
    def spanning(cls, lo: float, hi: float, step: float) -> "TemporalGrid":
        """Smallest grid with the given step starting at ``lo`` that reaches ``hi``."""
        count = max(2, int(math.ceil((hi - lo) / step - 1e-9)) + 1)
        return cls(lo, step, count)

    @property
    def times(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.count)

    @property
    def stop(self) -> float:
        return self.start + self.step * (self.count - 1)


@dataclass(frozen=True)
class SampledDensity:
    grid: TemporalGrid
    values: np.ndarray = field(repr=False)
    kind: DensityKind = DensityKind.CLICK_PROBABILITY

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.count,):
            raise ConfigurationError(
                f"values shape {values.shape} does not match grid count {self.grid.count}"
            )
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ConfigurationError("density values must be finite and non-negative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "kind", DensityKind(self.kind))

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def integral(self) -> float:
        return float(trapezoid(self.values, dx=self.grid.step))

    def __add__(self, other: "SampledDensity") -> "SampledDensity":
        if other.grid != self.grid:
            raise ConfigurationError("densities live on different grids")
        return SampledDensity(self.grid, self.values + other.values, self.kind)

    def __mul__(self, factor: float) -> "SampledDensity":
        return SampledDensity(self.grid, self.values * factor, self.kind)

    __rmul__ = __mul__


@dataclass(frozen=True)
class DetectorSpec:
    """Detector and clock model. Dead time and dark counts only matter for the loop emulator."""

    jitter_fwhm: float = 0.0
    efficiency: float = 1.0
    dead_time: float = 0.0
    dark_count_rate: float = 0.0

    def __post_init__(self):
        if not self.jitter_fwhm >= 0:
            raise DomainError(f"jitter must be ≥ 0, got {self.jitter_fwhm!r}")
        if not 0.0 <= self.efficiency <= 1.0:
            raise DomainError(f"efficiency must be in [0, 1], got {self.efficiency!r}")
        if not self.dead_time >= 0:
            raise DomainError(f"dead_time must be >= 0, got {self.dead_time!r}")
        if not self.dark_count_rate >= 0:
            raise DomainError(f"dark_count_rate must be >= 0, got {self.dark_count_rate!r}")


def _sech2(u):
    # 4 e^{-2|u|} / (1 + e^{-2|u|})^2 never overflows
    e = np.exp(-2.0 * np.abs(u))
    return 4.0 * e / (1.0 + e) ** 2


def photon_number_density(t, pulse: PulseSpec):
    """Photons per second arriving at time ``t``."""
    sigma = pulse.sigma
    u = (np.asarray(t, dtype=float) - pulse.center) / sigma
    return pulse.mean_photons / (2.0 * sigma) * _sech2(u)


def cumulative_mean_photons(t, pulse: PulseSpec):
    """Mean number of photons that arrived before ``t``.

    Uses the logistic form A * expit(2u) rather than A/2 * (1 + tanh u), which
    keeps relative precision on the leading tail.
    """
    u = (np.asarray(t, dtype=float) - pulse.center) / pulse.sigma
    return pulse.mean_photons * expit(2.0 * u)


def click_probability(mu):
    """Probability of at least one click, 1 - exp(-mu)."""
    mu = np.asarray(mu, dtype=float)
    if np.any(mu < 0) or np.any(np.isnan(mu)):
        raise DomainError("mean photon number must be >= 0")
    out = -np.expm1(-mu)
    return float(out) if out.ndim == 0 else out


def cumulative_click_probability(t, pulse: PulseSpec):
    return click_probability(cumulative_mean_photons(t, pulse))


def click_density(t, pulse: PulseSpec):
    """Time derivative of the cumulative click probability, S(t) exp(-mu(t))."""
    return photon_number_density(t, pulse) * np.exp(-cumulative_mean_photons(t, pulse))


def required_span(pulse: PulseSpec, tail_sigmas: float = GRID_TAIL_SIGMAS) -> tuple[float, float]:
    """Interval a grid must cover to resolve the whole click density of ``pulse``."""
    sigma = pulse.sigma
    return (pulse.center - pulse.spike_advance - tail_sigmas * sigma, pulse.center + tail_sigmas * sigma)


def covering_grid(pulse: PulseSpec, step: float | None = None, tail_sigmas: float = GRID_TAIL_SIGMAS) -> TemporalGrid:
    if step is None:
        step = pulse.sigma / 10.0
    lo, hi = required_span(pulse, tail_sigmas)
    return TemporalGrid.spanning(lo, hi, step)


def _check_grid(pulse: PulseSpec, grid: TemporalGrid) -> None:
    sigma = pulse.sigma
    if grid.step > sigma / 10.0 * (1.0 + 1e-9):
        raise ConfigurationError(
            f"grid step {grid.step:.4g} s exceeds sigma/10 = {sigma / 10.0:.4g} s"
        )
    lo, hi = required_span(pulse)
    slack = 1e-9 * sigma
    if grid.start > lo + slack:
        if pulse.mean_photons > math.e:
            raise ConfigurationError(
                f"grid misses leading-tail click spike: starts at {grid.start:.6g} s, "
                f"needs <= {lo:.6g} s"
            )
        raise ConfigurationError(f"grid starts at {grid.start:.6g} s, needs <= {lo:.6g} s")
    if grid.stop < hi - slack:
        raise ConfigurationError(f"grid ends at {grid.stop:.6g} s, needs >= {hi:.6g} s")


def sample_photon_density(pulse: PulseSpec, grid: TemporalGrid) -> SampledDensity:
    return SampledDensity(grid, photon_number_density(grid.times, pulse), DensityKind.PHOTON_NUMBER)


def sample_click_density(pulse: PulseSpec, grid: TemporalGrid) -> SampledDensity:
    _check_grid(pulse, grid)
    return SampledDensity(grid, click_density(grid.times, pulse), DensityKind.CLICK_PROBABILITY)


def jitter_kernel(jitter_fwhm: float, step: float) -> np.ndarray:
    """Discrete unit-sum Gaussian kernel truncated at +-6 sigma."""
    sigma = gaussian_sigma(jitter_fwhm)
    if sigma == 0.0:
        return np.ones(1)
    half = int(math.ceil(KERNEL_HALF_WIDTH_SIGMAS * sigma / step))
    offsets = step * np.arange(-half, half + 1)
    weights = np.exp(-0.5 * (offsets / sigma) ** 2)
    return weights / weights.sum()


def convolve_jitter(density: SampledDensity, jitter_fwhm: float) -> SampledDensity:
    """Broaden ``density`` with a Gaussian detector jitter of the given FWHM.

    The output grid is extended by the kernel half width on both sides.
    """
    kernel = jitter_kernel(jitter_fwhm, density.grid.step)
    if kernel.size == 1:
        return density
    half = kernel.size // 2
    grid = density.grid
    out_grid = TemporalGrid(grid.start - half * grid.step, grid.step, grid.count + 2 * half)
    values = np.convolve(density.values, kernel, mode="full")
    return SampledDensity(out_grid, np.clip(values, 0.0, None), density.kind)


def density_moments(density: SampledDensity) -> tuple[float, float, float]:
    """Total mass, mean and standard deviation by trapezoidal quadrature."""
    t = density.times
    dx = density.grid.step
    total = float(trapezoid(density.values, dx=dx))
    if not total > 0:
        raise DegenerateDensityError("density has zero total mass")
    mean = float(trapezoid(density.values * t, dx=dx)) / total
    var = float(trapezoid(density.values * (t - mean) ** 2, dx=dx)) / total
    return total, mean, math.sqrt(max(var, 0.0))


def _window_weight(t: np.ndarray, lo: float, hi: float, sigma: float) -> np.ndarray:
    """P(lo <= t + jitter < hi) for Gaussian jitter, accurate in both tails."""
    a = (lo - t) / sigma
    b = (hi - t) / sigma
    # t right of the window: both negative; t left of it: both positive
    lower = ndtr(b) - ndtr(a)
    upper = ndtr(-a) - ndtr(-b)
    return np.where(a > 0, upper, lower)


def windowed_click_probability(
    pulse: PulseSpec,
    lo: float,
    hi: float,
    jitter_fwhm: float,
    tail_sigmas: float = GRID_TAIL_SIGMAS,
) -> float:
    """Probability that the jittered click of ``pulse`` falls inside ``[lo, hi)``.

    Equivalent to integrating the jitter-convolved click density over the
    window, with the window integral taken against the exact Gaussian CDF so
    the result stays accurate far into the kernel tails.
    """
    if pulse.mean_photons == 0:
        return 0.0
    sigma_j = gaussian_sigma(jitter_fwhm)
    if sigma_j == 0.0:
        mu_lo = float(cumulative_mean_photons(lo, pulse))
        mu_hi = float(cumulative_mean_photons(hi, pulse))
        return math.exp(-mu_lo) * -math.expm1(-(mu_hi - mu_lo))
    grid = covering_grid(pulse, tail_sigmas=tail_sigmas)
    t = grid.times
    weights = _window_weight(t, lo, hi, sigma_j)
    return float(trapezoid(click_density(t, pulse) * weights, dx=grid.step))
