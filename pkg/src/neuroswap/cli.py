"""Command-line entry point: ``neuroswap {sweep,simulate,analyze-em,flash-info}``.

Exit status: 0 success, 1 configuration or usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from contextlib import contextmanager
from pathlib import Path
from typing import Optional

from . import __version__
from .config import MB, UJ, US, Scenario, default_scenario_path, parse_config
from .emcost import EmModel, fft_cost, mergesort_cost, scan_cost, weighted_cost
from .errors import ConfigError, NeuroswapError
from .feasibility import FeasibilityMap, FeasibilityReport, VERDICTS, sweep, sweep_rows
from .flash import FlashOp, sustained_bandwidth
from .sim import TRACE_COLUMNS, Simulator

SWEEP_COLUMNS = ("channels", "sampling_rate_hz", "verdict", "timing", "power_ok", "swap_bytes",
                 "window_s", "io_s", "watts")
EM_COLUMNS = ("algorithm", "n", "m", "b", "reads", "writes", "weighted_latency", "weighted_energy")
FLASH_COLUMNS = ("k", "read_mb_per_s", "program_mb_per_s")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{x:.9g}"
    return str(x)


@contextmanager
def _output(path: Optional[str]):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def sweep_rows_csv(fmap: FeasibilityMap) -> list[list[str]]:
    rows = []
    for channels, rep in fmap.reports.items():
        if isinstance(rep, FeasibilityReport):
            rows.append([_fmt(v) for v in (
                channels, rep.sampling_rate, rep.verdict, rep.timing, rep.power_ok, rep.swap_bytes,
                rep.window_s, rep.io_s, rep.watts)])
        else:
            rows.append([str(channels), "", "error", "", "", "", "", "", ""])
    return rows


def write_gnuplot(path: str, maps: dict[str, FeasibilityMap]) -> None:
    """Whitespace grid, one block per row, for ``plot ... using 1:2:3 with image``."""
    codes = {v: i for i, v in enumerate(VERDICTS)}
    codes["error"] = -1
    with open(path, "w") as fh:
        fh.write("# verdict codes: " + " ".join(f"{i}={v}" for v, i in codes.items()) + "\n")
        fh.write("# rows: " + " ".join(f"{i}={name}" for i, name in enumerate(maps)) + "\n")
        fh.write("# channels row verdict_code\n")
        for row, fmap in enumerate(maps.values()):
            for channels, rep in fmap.reports.items():
                fh.write(f"{channels} {row} {codes[rep.verdict]}\n")
            fh.write("\n")


def cmd_sweep(args, scenario: Scenario) -> int:
    mode = args.mode or scenario.mode
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        fmap = sweep(scenario, mode=mode, workers=args.workers)
        rows = sweep_rows(scenario, mode=mode) if args.gnuplot and len(scenario.kernels) > 1 else None
    if caught:
        print(f"warning: {len(caught)} degenerate operating points (< 1 Hz) excluded",
              file=sys.stderr)
    with _output(args.out) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        writer.writerows(sweep_rows_csv(fmap))
    if args.gnuplot:
        path = args.gnuplot if isinstance(args.gnuplot, str) else (
            str(Path(args.out).with_suffix(".dat")) if args.out and args.out != "-" else "sweep.dat")
        write_gnuplot(path, rows or {"all": fmap})
    return EXIT_OK


def cmd_simulate(args, scenario: Scenario) -> int:
    sim = Simulator(scenario, args.channels, args.horizon, args.mode)
    report = sim.run()
    with _output(args.out) as fh:
        json.dump(report.to_dict(), fh, sort_keys=True)
        fh.write("\n")
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(TRACE_COLUMNS)
            writer.writerows([[_fmt(v) for v in row] for row in sim.trace_rows()])
    return EXIT_OK


def cmd_analyze_em(args, scenario: Optional[Scenario]) -> int:
    r, w, er, ew = args.r, args.w, args.er, args.ew
    if scenario is not None:
        t, p = scenario.flash.timing, scenario.flash.power
        r = t.t_read / US if r is None else r
        w = t.t_program / US if w is None else w
        er = p.e_read_page / UJ if er is None else er
        ew = p.e_program_page / UJ if ew is None else ew
    r = 1.0 if r is None else r
    w = 1.0 if w is None else w
    er = 1.0 if er is None else er
    ew = 1.0 if ew is None else ew
    algorithms = [("scan", scan_cost), ("mergesort", mergesort_cost), ("fft", fft_cost)]
    rows = []
    for m in args.m:
        for b in args.b:
            model = EmModel(M=m, B=b, word_bytes=args.word_bytes)
            for n in args.n:
                for name, fn in algorithms:
                    if name == "fft" and (n < 1 or n & (n - 1)):
                        continue
                    io = fn(n, model)
                    rows.append([name, n, m, b, io.reads, io.writes,
                                 _fmt(weighted_cost(io, r, w)), _fmt(weighted_cost(io, er, ew))])
    with _output(args.out) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EM_COLUMNS)
        writer.writerows(rows)
    return EXIT_OK


def cmd_flash_info(args, scenario: Scenario) -> int:
    g, t = scenario.flash.geometry, scenario.flash.timing
    with _output(args.out) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(FLASH_COLUMNS)
        for k in range(1, g.max_parallel_units + 1):
            writer.writerow([k, _fmt(sustained_bandwidth(FlashOp.READ, k, g, t) / MB),
                             _fmt(sustained_bandwidth(FlashOp.PROGRAM, k, g, t) / MB)])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="neuroswap", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p, config_required=False):
        p.add_argument("--config", metavar="PATH", required=config_required,
                       help="scenario JSON (default: the shipped scenario)")
        p.add_argument("--out", metavar="PATH", help="output file (default: stdout)")

    p = sub.add_parser("sweep", help="classify every operating point of the scenario grid")
    common(p)
    p.add_argument("--mode", choices=("naive", "em"))
    p.add_argument("--gnuplot", nargs="?", const=True, metavar="PATH",
                   help="also write a heat-map grid file (default: OUT with .dat suffix)")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("simulate", help="run the discrete-event simulation at one operating point")
    common(p)
    p.add_argument("--channels", type=int, required=True)
    p.add_argument("--horizon", type=float, metavar="SECONDS",
                   help="simulated time (default: 10 windows of the slowest kernel)")
    p.add_argument("--mode", choices=("naive", "em"))
    p.add_argument("--trace", metavar="PATH", help="write a per-window CSV trace")

    p = sub.add_parser("analyze-em", help="external-memory I/O counts and weighted costs")
    common(p)
    p.add_argument("--n", type=int, nargs="+", required=True, help="problem sizes in words")
    p.add_argument("--m", type=int, nargs="+", required=True, help="fast-memory words")
    p.add_argument("--b", type=int, nargs="+", required=True, help="block words")
    p.add_argument("--r", type=float, help="latency weight per block read")
    p.add_argument("--w", type=float, help="latency weight per block write")
    p.add_argument("--er", type=float, help="energy weight per block read")
    p.add_argument("--ew", type=float, help="energy weight per block write")
    p.add_argument("--word-bytes", type=int, default=4)

    p = sub.add_parser("flash-info", help="sustained read/program bandwidth per parallelism")
    common(p)
    return parser


COMMANDS = {"sweep": cmd_sweep, "simulate": cmd_simulate, "analyze-em": cmd_analyze_em,
            "flash-info": cmd_flash_info}


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "analyze-em" and args.config is None:
            scenario = None
        else:
            scenario = parse_config(args.config or default_scenario_path())
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args, scenario)
    except (NeuroswapError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
