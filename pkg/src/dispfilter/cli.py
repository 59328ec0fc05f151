"""Command line interface.

Exit codes: 0 success, 2 configuration or parse error, 3 solver/model error.
"""

from __future__ import annotations

import argparse
import logging
import os
import re
import sys
from dataclasses import replace
from pathlib import Path

from dispfilter import report, units
from dispfilter.config import RunConfig, load_run_config
from dispfilter.dispersion import (
    SPEED_OF_LIGHT,
    builtin_platforms,
    get_platform,
    load_platform_file,
    platform_schema,
)
from dispfilter.errors import ConfigurationError, ModelError
from dispfilter.feasibility import ScenarioConfig, jitter_sweep, solve_separation_distance
from dispfilter.loop import DEFAULT_LOOP_DETECTOR, first_separated_round_trip, run_emulation
from dispfilter.temporal import DetectorSpec, WidthConvention

log = logging.getLogger("dispfilter")

EXIT_OK, EXIT_CONFIG, EXIT_MODEL = 0, 2, 3

# options whose values may legitimately start with '-' (e.g. "--jitter -1ps")
_QUANTITY_OPTIONS = {"--jitter", "--length", "--propagation-time", "--from", "--to", "--step"}
_NEGATIVE_QUANTITY = re.compile(r"^-\d")


def _glue_negative_values(argv: list[str]) -> list[str]:
    out, i = [], 0
    while i < len(argv):
        arg = argv[i]
        if arg in _QUANTITY_OPTIONS and i + 1 < len(argv) and _NEGATIVE_QUANTITY.match(argv[i + 1]):
            out.append(f"{arg}={argv[i + 1]}")
            i += 2
        else:
            out.append(arg)
            i += 1
    return out


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _run_config(args) -> RunConfig:
    return load_run_config(args.config) if getattr(args, "config", None) else RunConfig()


def _extra_platforms(args, run: RunConfig) -> list:
    extra = []
    files = list(getattr(args, "file", None) or [])
    if run.scenario.get("platform_file"):
        files.append(run.scenario["platform_file"])
    for f in files:
        extra.extend(load_platform_file(f))
    return extra


def _scenario(args, run: RunConfig, platform_name: str | None = None) -> ScenarioConfig:
    name = platform_name or args.platform or run.scenario.get("platform")
    if not name:
        raise ConfigurationError("no platform given (use --platform or scenario.platform)")
    platform = get_platform(name, _extra_platforms(args, run))
    detector = run.detector_spec(DetectorSpec(jitter_fwhm=20e-12))
    jitter = getattr(args, "jitter", None)
    if jitter is not None:
        j = units.duration(jitter)
        if j < 0:
            raise ConfigurationError("jitter must be ≥ 0")
        detector = replace(detector, jitter_fwhm=j)
    kwargs = {
        "pulse_fwhm": run.scenario.get("pulse_fwhm", 1e-12),
        "pump_photons": run.scenario.get("pump_photons", platform.default_pump_photons),
        "pair_probability": run.scenario.get("pair_probability", platform.default_pair_probability),
        "width_convention": run.scenario.get("width_convention", WidthConvention.SECH2_EXACT),
        "contamination_threshold": run.scenario.get("contamination_threshold", 0.01),
    }
    if getattr(args, "pulse_fwhm", None):
        kwargs["pulse_fwhm"] = units.duration(args.pulse_fwhm)
    if getattr(args, "pump_photons", None) is not None:
        kwargs["pump_photons"] = args.pump_photons
    if getattr(args, "pair_probability", None) is not None:
        kwargs["pair_probability"] = args.pair_probability
    if getattr(args, "width_convention", None):
        kwargs["width_convention"] = args.width_convention
    if getattr(args, "threshold", None) is not None:
        kwargs["contamination_threshold"] = args.threshold
    return ScenarioConfig(platform=platform, detector=detector, **kwargs)


def _format(args, run: RunConfig) -> str:
    if getattr(args, "json", False):
        return "JSON"
    if getattr(args, "csv", False):
        return "CSV"
    return run.output_format if getattr(args, "config", None) else "TEXT"


# -- commands ----------------------------------------------------------------------

def cmd_platforms(args) -> int:
    if args.action == "schema":
        import json

        sys.stdout.write(json.dumps(platform_schema(), indent=2) + "\n")
        return EXIT_OK
    platforms = builtin_platforms()
    for f in args.file or []:
        platforms.extend(load_platform_file(f))
    text = report.platforms_json(platforms) if args.json else report.platforms_csv(platforms)
    _emit(text, None)
    return EXIT_OK


def cmd_separation(args) -> int:
    run = _run_config(args)
    cfg = _scenario(args, run)
    result = solve_separation_distance(cfg)
    fmt = _format(args, run)
    if fmt == "CSV":
        text = report.separation_csv(cfg, result)
    elif fmt == "JSON":
        text = report.separation_json(cfg, result)
    else:
        text = report.separation_text(cfg, result)
    _emit(text, args.output or run.output_path)
    return EXIT_OK


def _jitter_range(args) -> list[float]:
    lo, hi, step = units.duration(args.start), units.duration(args.stop), units.duration(args.step)
    if lo < 0:
        raise ConfigurationError("jitter must be ≥ 0")
    if step <= 0:
        raise ConfigurationError("--step must be > 0")
    if hi < lo:
        raise ConfigurationError(f"empty jitter range {args.start}..{args.stop}")
    n = int((hi - lo) / step + 1e-9) + 1
    return [lo + i * step for i in range(n)]


def cmd_sweep(args) -> int:
    run = _run_config(args)
    jitters = _jitter_range(args)
    names = args.platform or ([run.scenario["platform"]] if run.scenario.get("platform") else [])
    if not names:
        raise ConfigurationError("no platform given (use --platform)")
    if names == ["all"]:
        names = [p.name for p in builtin_platforms()]
    if len(names) > 1 and not args.output_dir:
        raise ConfigurationError("several platforms need --output-dir")
    any_ok = False
    for name in names:
        cfg = _scenario(args, run, platform_name=name)
        rows = jitter_sweep(cfg, jitters, workers=args.workers)
        any_ok |= any(r.ok for r in rows)
        for r in rows:
            if not r.ok:
                log.warning("%s at %.4g ps: %s", name, r.jitter * 1e12, r.error)
        text = report.sweep_json(name, rows) if args.json else report.sweep_csv(rows)
        if args.output_dir:
            out_dir = Path(args.output_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            safe = re.sub(r"[^A-Za-z0-9_.-]", "_", name)
            (out_dir / f"{safe}.{'json' if args.json else 'csv'}").write_text(text)
        else:
            _emit(text, args.output or run.output_path)
    return EXIT_OK if any_ok else EXIT_MODEL


def cmd_profile(args) -> int:
    run = _run_config(args)
    if args.jitter is None:
        args.jitter = "8ps"
    cfg = _scenario(args, run)
    if (args.length is None) == (args.propagation_time is None):
        raise ConfigurationError("give exactly one of --length or --propagation-time")
    if args.length is not None:
        length = units.length(args.length)
    else:
        # travel time of the signal through the waveguide
        length = units.duration(args.propagation_time) * SPEED_OF_LIGHT / cfg.platform.signal.group_index
    if length < 0:
        raise ConfigurationError("length must be >= 0")
    prof = report.density_profile(cfg, length)
    text = report.profile_json(prof) if args.json else report.profile_csv(prof)
    _emit(text, args.output or run.output_path)
    return EXIT_OK


def cmd_loop_sim(args) -> int:
    run = _run_config(args)
    if args.trials < 1:
        raise ConfigurationError(f"trials must be >= 1, got {args.trials}")
    loop = run.loop
    if args.differential_delay is not None:
        loop = replace(loop, differential_delay=units.duration(args.differential_delay))
    detector = run.detector_spec(DEFAULT_LOOP_DETECTOR)
    result = run_emulation(loop, detector, trials=args.trials, seed=args.seed, workers=args.workers)
    fmt = "JSON" if args.json else ("CSV" if args.csv or not args.config else run.output_format)
    text = report.histogram_json(result) if fmt == "JSON" else report.histogram_csv(result)
    _emit(text, args.output or run.output_path)
    try:
        k = first_separated_round_trip(result)
        log.info("first separated round trip: %d", k)
    except (ModelError, ConfigurationError) as exc:
        log.info("separation: %s", exc)
    return EXIT_OK


# -- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dispfilter",
        description="Dispersion-based temporal pump filtering: feasibility and fiber-loop emulation.",
    )
    parser.add_argument("--log-level", default="WARNING", help="logging level (default WARNING)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("platforms", help="list platforms or print the platform-file schema")
    p.add_argument("action", choices=["list", "schema"], nargs="?", default="list")
    p.add_argument("--file", action="append", help="extra platform JSON file (repeatable)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_platforms)

    def scenario_options(p, jitter_default=None):
        p.add_argument("--config", help="YAML run configuration")
        p.add_argument("--file", action="append", help="extra platform JSON file (repeatable)")
        p.add_argument("--pulse-fwhm", help="pulse FWHM, e.g. 1ps")
        p.add_argument("--pump-photons", type=float, help="pump photons per pulse")
        p.add_argument("--pair-probability", type=float, help="pairs per pump pulse")
        p.add_argument("--width-convention", choices=[c.value for c in WidthConvention])
        p.add_argument("--threshold", type=float, help="contamination threshold (default 0.01)")
        p.add_argument("-o", "--output", help="write to file instead of stdout")
        p.add_argument("--json", action="store_true", help="emit JSON")

    p = sub.add_parser("separation", help="solve the minimum propagation distance")
    p.add_argument("--platform", help="platform name, e.g. Ti:LN")
    p.add_argument("--jitter", help="detector jitter FWHM, e.g. 20ps (default 20ps)")
    p.add_argument("--csv", action="store_true", help="emit one CSV header and row")
    scenario_options(p)
    p.set_defaults(func=cmd_separation)

    p = sub.add_parser("sweep", help="solve the distance over a range of jitters")
    p.add_argument("--platform", action="append", help="platform name (repeatable, or 'all')")
    p.add_argument("--from", dest="start", default="4ps", help="first jitter (default 4ps)")
    p.add_argument("--to", dest="stop", default="20ps", help="last jitter (default 20ps)")
    p.add_argument("--step", default="4ps", help="jitter step (default 4ps)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--output-dir", help="one file per platform")
    scenario_options(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("profile", help="photon, cumulative and jittered click densities")
    p.add_argument("--platform", help="platform name")
    p.add_argument("--length", help="propagation length, e.g. 90mm")
    p.add_argument("--propagation-time", help="signal travel time, e.g. 200ps")
    p.add_argument("--jitter", help="detector jitter FWHM (default 8ps)")
    scenario_options(p)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("loop-sim", help="Monte Carlo fiber-loop emulation")
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--trials", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--differential-delay", help="pump-minus-signal delay per round trip, e.g. 0.54ns")
    p.add_argument("--csv", action="store_true")
    p.add_argument("--json", action="store_true")
    p.add_argument("-o", "--output", help="write to file instead of stdout")
    p.set_defaults(func=cmd_loop_sim)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(_glue_negative_values(argv))
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except BrokenPipeError:
        # downstream reader (e.g. `head`) went away; not an error
        sys.stdout = open(os.devnull, "w")
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
