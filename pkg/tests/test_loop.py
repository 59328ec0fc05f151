import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dispfilter.errors import ConfigurationError, NotSeparatedError
from dispfilter.loop import (
    DEFAULT_DIFFERENTIAL_DELAY,
    DEFAULT_LOOP_DETECTOR,
    LoopConfig,
    _dead_time_mask,
    bulk_silica_differential_delay,
    first_separated_round_trip,
    run_emulation,
)
from dispfilter.temporal import DetectorSpec

NS = 1e-9


def fit_log_linear(k, counts, trials):
    """Weighted fit of ln(lambda_k) = a + b k from Bernoulli click counts.

    lambda_k = -ln(1 - n/N) inverts the click probability; its log has
    variance p / (N (1 - p) lambda^2) by the delta method.
    Returns (exp(b), stderr of exp(b)).
    """
    p = counts / trials
    lam = -np.log1p(-p)
    var = p / (trials * (1 - p) * lam**2)
    w = 1.0 / var
    X = np.column_stack([np.ones_like(k, dtype=float), k.astype(float)])
    cov = np.linalg.inv(X.T @ (X * w[:, None]))
    a, b = cov @ (X.T @ (w * np.log(lam)))
    ratio = math.exp(b)
    return ratio, ratio * math.sqrt(cov[1, 1])


@pytest.fixture(scope="module")
def default_run():
    return run_emulation(LoopConfig(), trials=200_000, seed=7)


class TestLoopConfig:
    def test_default_differential_delay(self):
        # bulk silica, 775 vs 1550 nm, 30 m (group indices from the Sellmeier oracle)
        assert DEFAULT_DIFFERENTIAL_DELAY == pytest.approx(30 * (1.46799 - 1.46260) / 299792458, rel=1e-3)
        assert DEFAULT_DIFFERENTIAL_DELAY == pytest.approx(0.5399 * NS, rel=1e-3)

    def test_delay_scales_with_length(self):
        assert bulk_silica_differential_delay(60.0) == pytest.approx(2 * DEFAULT_DIFFERENTIAL_DELAY)

    def test_mean_pairs(self):
        assert LoopConfig().mean_pairs == pytest.approx(-math.log(1 - 0.615), rel=1e-14)

    def test_fractions(self):
        cfg = LoopConfig()
        f = cfg.round_trip_fractions()
        assert f[0] == pytest.approx(0.1 * 10 ** (-0.05), rel=1e-14)
        assert f[1] / f[0] == pytest.approx(cfg.round_trip_ratio, rel=1e-14)

    @settings(max_examples=50)
    @given(tap=st.floats(0.01, 0.99), loss=st.floats(0.0, 10.0))
    def test_energy_accounting(self, tap, loss):
        # geometric series: what leaves through the tap plus what the loop absorbs is all the input
        cfg = LoopConfig(tap_ratio=tap, loop_loss_db=loss, bins=1)
        att = 10 ** (-loss / 10)
        total = cfg.total_outcoupled_fraction()
        assert total <= 1.0 + 1e-12
        assert total == pytest.approx(tap * att / (1 - (1 - tap) * att), rel=1e-12)
        if loss == 0:
            assert total == pytest.approx(1.0, rel=1e-12)
        k = np.arange(1, 20001)
        partial = np.sum(tap * (1 - tap) ** (k - 1) * att**k)
        assert partial == pytest.approx(total, rel=1e-9)

    def test_bin_budget(self):
        # 51 pulses at 156.9 ns just fit in the 8 us period
        assert LoopConfig().bins == 51
        with pytest.raises(ConfigurationError, match="overrun"):
            LoopConfig(bins=52)

    @pytest.mark.parametrize(
        "kwargs", [{"tap_ratio": 0.0}, {"tap_ratio": 1.0}, {"loop_loss_db": -1.0},
                   {"creation_probability": 1.0}, {"loop_delay": 0.0}, {"hist_bin_width": 0.0}]
    )
    def test_rejects(self, kwargs):
        with pytest.raises(ConfigurationError):
            LoopConfig(**kwargs)

    def test_timing_spread(self):
        spread = LoopConfig().timing_spread(DEFAULT_LOOP_DETECTOR)
        assert spread == pytest.approx(math.hypot(100e-12, 1e-9) / 2.3548200450309493, rel=1e-12)


class TestEmulation:
    def test_histogram_shape(self, default_run):
        r = default_run
        assert r.counts_signal.shape == r.counts_pump.shape == (r.bin_edges.size - 1,)
        assert r.counts_signal.sum() > 0

    def test_geometric_decay(self, default_run):
        r = default_run
        ratio = r.config.round_trip_ratio
        for counts in (r.round_trip_counts_signal, r.round_trip_counts_pump):
            mask = counts >= 100
            got, err = fit_log_linear(r.round_trips[mask], counts[mask], r.trials)
            assert abs(got - ratio) <= 3 * err

    def test_centroid_separation_linear(self, default_run):
        r = default_run
        mask = r.populated
        k = r.round_trips[mask]
        sep = r.separation[mask]
        err = r.separation_stderr[mask]
        assert np.all(np.abs(sep - k * r.config.differential_delay) <= 3 * err)

    def test_first_separated_round_trip(self, default_run):
        assert first_separated_round_trip(default_run) == 3

    def test_zero_differential_delay(self):
        cfg = LoopConfig(bins=10, differential_delay=0.0)
        r = run_emulation(cfg, trials=100_000, seed=4)
        m = r.populated
        assert np.all(np.abs(r.separation[m]) <= 3 * r.separation_stderr[m])
        with pytest.raises(NotSeparatedError, match="not separated"):
            first_separated_round_trip(r)

    def test_doubled_delay_halves_round_trip(self, default_run):
        cfg = LoopConfig(differential_delay=2 * DEFAULT_DIFFERENTIAL_DELAY)
        k = first_separated_round_trip(run_emulation(cfg, trials=200_000, seed=7))
        base = first_separated_round_trip(default_run)
        assert abs(k - max(1, base / 2)) <= 1

    def test_total_clicks_match_expectation(self):
        # without dark counts, photon clicks per round trip are Bernoulli(1 - exp(-lambda_k))
        cfg = LoopConfig()
        det = DetectorSpec(jitter_fwhm=100e-12, efficiency=0.8, dead_time=50e-9)
        r = run_emulation(cfg, det, trials=200_000, seed=11)
        lam = cfg.mean_pairs * det.efficiency * cfg.round_trip_fractions()
        p = -np.expm1(-lam)
        expected = r.trials * p.sum()
        sigma = math.sqrt(r.trials * np.sum(p * (1 - p)))
        assert abs(r.round_trip_counts_signal.sum() - expected) <= 3 * sigma
        # the finite bin budget captures all but ratio**bins of the infinite series
        truncated = cfg.round_trip_fractions().sum()
        assert truncated == pytest.approx(cfg.total_outcoupled_fraction(), rel=2 * cfg.round_trip_ratio**cfg.bins)

    def test_not_separated(self):
        cfg = LoopConfig(bins=5, differential_delay=0.01 * NS)
        r = run_emulation(cfg, trials=20_000, seed=1)
        with pytest.raises(NotSeparatedError, match="not separated within bin budget"):
            first_separated_round_trip(r)

    def test_too_few_populated(self):
        r = run_emulation(LoopConfig(), trials=10, seed=1)
        with pytest.raises(ConfigurationError, match="populated"):
            first_separated_round_trip(r)

    def test_same_seed_identical(self):
        a = run_emulation(LoopConfig(bins=10), trials=50_000, seed=3)
        b = run_emulation(LoopConfig(bins=10), trials=50_000, seed=3)
        assert np.array_equal(a.counts_signal, b.counts_signal)
        assert np.array_equal(a.counts_pump, b.counts_pump)

    def test_different_seed_differs(self):
        a = run_emulation(LoopConfig(bins=10), trials=50_000, seed=3)
        b = run_emulation(LoopConfig(bins=10), trials=50_000, seed=4)
        assert not np.array_equal(a.counts_signal, b.counts_signal)

    def test_workers_do_not_change_result(self):
        cfg = LoopConfig(bins=10)
        a = run_emulation(cfg, trials=150_000, seed=5, workers=1, block_size=50_000)
        b = run_emulation(cfg, trials=150_000, seed=5, workers=3, block_size=50_000)
        assert np.array_equal(a.counts_signal, b.counts_signal)
        assert np.array_equal(a.t_signal[a.populated], b.t_signal[b.populated])

    def test_zero_trials(self):
        with pytest.raises(ConfigurationError, match="trials"):
            run_emulation(LoopConfig(), trials=0)

    def test_dark_counts_only(self):
        cfg = LoopConfig(bins=3, creation_probability=0.0, pump_clicks_per_bin_scale=0.0)
        det = DetectorSpec(dark_count_rate=1e5)
        r = run_emulation(cfg, det, trials=20_000, seed=2)
        # dark clicks are uniform over the period; the histogram covers only its start
        expected = 1e5 * r.bin_edges[-1] * r.trials
        assert r.counts_signal.sum() == pytest.approx(expected, rel=0.05)
        assert r.counts_pump.sum() == 0
        assert not r.populated.any()


class TestDeadTime:
    def test_mask_drops_close_clicks(self):
        trial = np.array([0, 0, 0, 1])
        times = np.array([0.0, 10.0, 60.0, 5.0])
        assert _dead_time_mask(trial, times, 50.0).tolist() == [True, False, True, True]

    def test_blocked_click_does_not_extend_dead_time(self):
        trial = np.zeros(3, int)
        times = np.array([0.0, 40.0, 55.0])
        assert _dead_time_mask(trial, times, 50.0).tolist() == [True, False, True]

    @settings(max_examples=50, deadline=None)
    @given(
        times=st.lists(st.floats(0, 1000), min_size=1, max_size=60),
        dead=st.floats(0.1, 200),
    )
    def test_spacing_property(self, times, dead):
        t = np.sort(np.array(times))
        keep = _dead_time_mask(np.zeros(t.size, int), t, dead)
        kept = t[keep]
        assert keep[0]
        assert np.all(np.diff(kept) >= dead)
        # every dropped click lies within the dead time of an accepted one
        for x in t[~keep]:
            assert np.any((x - kept >= 0) & (x - kept < dead))
