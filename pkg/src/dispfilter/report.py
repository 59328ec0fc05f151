"""CSV and JSON rendering of simulator results.

Column sets are frozen; new columns may only be appended. Every column name
carries its unit.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import trapezoid

from dispfilter.dispersion import PlatformSpec
from dispfilter.feasibility import ScenarioConfig, SeparationResult, SweepRow, build_pulses
from dispfilter.loop import HistogramResult
from dispfilter.temporal import (
    TemporalGrid,
    convolve_jitter,
    cumulative_click_probability,
    photon_number_density,
    required_span,
    sample_click_density,
)

PLATFORM_COLUMNS = [
    "name", "process",
    "pump_wavelength_nm", "pump_polarization",
    "signal_wavelength_nm", "signal_polarization",
    "pump_group_index", "signal_group_index",
    "pump_loss_db_per_cm", "signal_loss_db_per_cm",
]
SEPARATION_COLUMNS = [
    "platform", "jitter_ps", "distance_m", "arrival_separation_ps",
    "signal_loss_db", "pump_loss_db", "contamination", "suppression_db",
]
SWEEP_COLUMNS = ["jitter_ps", "distance_m", "signal_loss_db", "pump_loss_db", "contamination", "suppression_db"]
PROFILE_COLUMNS = [
    "t_ps",
    "signal_photon_density", "pump_photon_density",
    "signal_cumulative", "pump_cumulative",
    "signal_click_density_jittered", "pump_click_density_jittered",
]
HISTOGRAM_COLUMNS = ["bin_start_ns", "counts_signal", "counts_pump"]
CENTROID_COLUMNS = ["round_trip", "t_signal_ns", "t_pump_ns", "separation_ns"]


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.10g}"


def _csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _json_number(x):
    x = float(x)
    return x if math.isfinite(x) else str(x)


# -- platforms --------------------------------------------------------------------

def platform_row(p: PlatformSpec) -> list:
    return [
        p.name, p.process.value,
        p.pump.wavelength, p.pump.polarization.value,
        p.signal.wavelength, p.signal.polarization.value,
        p.pump.group_index, p.signal.group_index,
        p.pump.loss, p.signal.loss,
    ]


def platforms_csv(platforms: Sequence[PlatformSpec]) -> str:
    return _csv(PLATFORM_COLUMNS, (platform_row(p) for p in platforms))


def platforms_json(platforms: Sequence[PlatformSpec]) -> str:
    return json.dumps([p.to_dict() for p in platforms], indent=2) + "\n"


# -- separation and sweep ---------------------------------------------------------

def separation_record(cfg: ScenarioConfig, result: SeparationResult) -> dict:
    return {
        "platform": cfg.platform.name,
        "jitter_ps": cfg.detector.jitter_fwhm * 1e12,
        "distance_m": result.distance,
        "arrival_separation_ps": result.arrival_separation * 1e12,
        "signal_loss_db": result.signal_loss_db,
        "pump_loss_db": result.pump_loss_db,
        "contamination": result.report.contamination,
        "suppression_db": result.report.suppression_db,
    }


def separation_csv(cfg: ScenarioConfig, result: SeparationResult) -> str:
    rec = separation_record(cfg, result)
    return _csv(SEPARATION_COLUMNS, [[rec[c] for c in SEPARATION_COLUMNS]])


def separation_json(cfg: ScenarioConfig, result: SeparationResult) -> str:
    rec = separation_record(cfg, result)
    rec = {k: (v if isinstance(v, str) else _json_number(v)) for k, v in rec.items()}
    rec["iterations"] = result.iterations
    return json.dumps(rec, indent=2) + "\n"


def separation_text(cfg: ScenarioConfig, result: SeparationResult) -> str:
    r = result
    lines = [
        ("platform", cfg.platform.name),
        ("jitter", f"{cfg.detector.jitter_fwhm * 1e12:g} ps"),
        ("distance", f"{r.distance:.6g} m"),
        ("arrival separation", f"{r.arrival_separation * 1e12:.4f} ps"),
        ("signal loss", f"{r.signal_loss_db:.4f} dB"),
        ("pump loss", f"{r.pump_loss_db:.4f} dB"),
        ("contamination", f"{r.report.contamination:.6f}"),
        ("suppression", f"{r.report.suppression_db:.2f} dB"),
    ]
    return "".join(f"{k:<20}{v}\n" for k, v in lines)


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    failed = any(not r.ok for r in rows)
    header = SWEEP_COLUMNS + (["error"] if failed else [])
    out = []
    for row in rows:
        if row.ok:
            res = row.result
            values = [row.jitter * 1e12, res.distance, res.signal_loss_db, res.pump_loss_db,
                      res.report.contamination, res.report.suppression_db]
            if failed:
                values.append("")
        else:
            values = [row.jitter * 1e12, "", "", "", "", "", row.error]
        out.append(values)
    return _csv(header, out)


def sweep_json(platform: str, rows: Sequence[SweepRow]) -> str:
    items = []
    for row in rows:
        item = {"jitter_ps": row.jitter * 1e12}
        if row.ok:
            res = row.result
            item.update(
                distance_m=res.distance,
                signal_loss_db=res.signal_loss_db,
                pump_loss_db=res.pump_loss_db,
                contamination=res.report.contamination,
                suppression_db=_json_number(res.report.suppression_db),
            )
        else:
            item["error"] = row.error
        items.append(item)
    return json.dumps({"platform": platform, "rows": items}, indent=2) + "\n"


# -- profile ----------------------------------------------------------------------

@dataclass(frozen=True)
class Profile:
    t: np.ndarray
    columns: dict

    def integral(self, name: str) -> float:
        return float(trapezoid(self.columns[name], self.t))


def density_profile(cfg: ScenarioConfig, length: float) -> Profile:
    """Densities of both pulses on one grid wide enough for the jitter kernel.

    Densities are per second; the CSV rendering converts them to per picosecond.
    """
    signal, pump = build_pulses(cfg, length)
    step = min(signal.sigma, pump.sigma) / 10.0
    s_lo, s_hi = required_span(signal)
    p_lo, p_hi = required_span(pump)
    grid = TemporalGrid.spanning(min(s_lo, p_lo), max(s_hi, p_hi), step)
    jitter = cfg.detector.jitter_fwhm
    sig_j = convolve_jitter(sample_click_density(signal, grid), jitter)
    pump_j = convolve_jitter(sample_click_density(pump, grid), jitter)
    t = sig_j.times
    return Profile(
        t=t,
        columns={
            "signal_photon_density": photon_number_density(t, signal),
            "pump_photon_density": photon_number_density(t, pump),
            "signal_cumulative": cumulative_click_probability(t, signal),
            "pump_cumulative": cumulative_click_probability(t, pump),
            "signal_click_density_jittered": sig_j.values,
            "pump_click_density_jittered": pump_j.values,
        },
    )


def profile_csv(profile: Profile) -> str:
    per_ps = {"signal_photon_density", "pump_photon_density",
              "signal_click_density_jittered", "pump_click_density_jittered"}
    cols = [profile.t * 1e12] + [
        profile.columns[c] * (1e-12 if c in per_ps else 1.0) for c in PROFILE_COLUMNS[1:]
    ]
    return _csv(PROFILE_COLUMNS, zip(*cols))


def profile_json(profile: Profile) -> str:
    data = {"t_ps": (profile.t * 1e12).tolist()}
    for c in PROFILE_COLUMNS[1:]:
        scale = 1.0 if c.endswith("cumulative") else 1e-12
        data[c] = (profile.columns[c] * scale).tolist()
    return json.dumps(data) + "\n"


# -- loop histogram -----------------------------------------------------------------

def histogram_csv(result: HistogramResult) -> str:
    edges = result.bin_edges
    hist = _csv(HISTOGRAM_COLUMNS, zip(edges[:-1] * 1e9, result.counts_signal, result.counts_pump))
    centroids = _csv(
        CENTROID_COLUMNS,
        ((k, ts * 1e9, tp * 1e9, sep * 1e9) for k, ts, tp, sep in result.centroid_rows()),
    )
    return hist + "\n" + centroids


def histogram_json(result: HistogramResult) -> str:
    data = {
        "trials": result.trials,
        "seed": result.seed,
        "bin_start_ns": (result.bin_edges[:-1] * 1e9).tolist(),
        "counts_signal": result.counts_signal.tolist(),
        "counts_pump": result.counts_pump.tolist(),
        "centroids": [
            {"round_trip": k, "t_signal_ns": ts * 1e9, "t_pump_ns": tp * 1e9, "separation_ns": sep * 1e9}
            for k, ts, tp, sep in result.centroid_rows()
        ],
    }
    return json.dumps(data) + "\n"
