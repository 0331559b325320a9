"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 I/O failure.
"""
from __future__ import annotations

import argparse
import sys

from .analysis import NoPeakError, _fmt, beat_period, detect_echo_peak
from .config import PRESETS, ConfigError, load_scenario, preset
from .model import ValidationError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="photon-echo", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the base scenario (sweep section ignored)")
    p.add_argument("config")
    p.add_argument("-o", "--output", help="output directory (overrides [run] output_dir)")
    p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("sweep", help="run every value of the [sweep] section")
    p.add_argument("config")
    p.add_argument("-o", "--output")
    p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("analyze", help="detect the echo peak and beat period in a trace CSV")
    p.add_argument("trace")
    p.add_argument("--window", nargs=2, type=float, metavar=("T_A", "T_B"),
                   help="echo search window in seconds (default: whole trace)")

    p = sub.add_parser("compare-modes", help="equal against unequal probe/coupling phase")
    p.add_argument("config")
    p.add_argument("--phase-difference", type=float)

    p = sub.add_parser("preset", help="print a preset scenario file")
    p.add_argument("name", choices=sorted(PRESETS))
    return ap


def _run(args) -> int:
    from dataclasses import replace

    from .runner import compare_modes, read_trace, run

    if args.command == "preset":
        sys.stdout.write(preset(args.name))
        return EXIT_OK

    if args.command == "analyze":
        trace = read_trace(args.trace)
        window = args.window or (trace.t_grid[0], trace.t_grid[-1])
        t_peak, i_peak = detect_echo_peak(trace, window)
        print(f"t_echo_detected = {_fmt(t_peak)}")
        print(f"peak_intensity = {_fmt(i_peak)}")
        print(f"beat_period = {_fmt(beat_period(trace, args.window))}")
        return EXIT_OK

    sc = load_scenario(args.config)
    if args.command == "compare-modes":
        for line in compare_modes(sc, args.phase_difference).lines():
            print(line)
        return EXIT_OK

    if args.command == "simulate":
        sc = replace(sc, sweep_axis=None, sweep_values=())
    elif not sc.sweep_axis:
        raise ConfigError("sweep needs a [sweep] section")
    res = run(sc, output_dir=args.output, plots=not args.no_plots)
    for f in res.files:
        print(f)
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _run(args)
    except (ConfigError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NoPeakError, ArithmeticError, ValueError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
