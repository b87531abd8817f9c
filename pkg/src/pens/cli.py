"""Command line entry point.

Exit codes: 0 every criterion passed, 1 a criterion failed, 2 configuration
or input error, 3 a simulation aborted.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import PRESETS, ConfigError, parse_config, parse_param, preset_template
from .diagnostics import TimeSeries, fit_decay
from .presets import (
    EXIT_CONFIG, EXIT_FAIL, EXIT_PASS, HEAT_MATCH_TOL, Report, convergence_study, new_report,
    run_preset, sweep, write_outputs,
)


def _print_report(report: Report, out=None):
    out = out or sys.stdout
    print("criterion\tstatus\tmeasured\tthreshold", file=out)
    for line in report.lines():
        print(line, file=out)
    status = "PASS" if report.passed else ("ABORT" if report.abort else "FAIL")
    print(f"overall\t{status}\texit={report.exit_code}\t{report.preset}", file=out)


def _load(args):
    cfg = parse_config(args.config)
    hooks = getattr(args, "hook", None)
    if hooks:
        cfg = cfg.with_overrides({"scheme.hooks": sorted(set(cfg.values["scheme"]["hooks"]) | set(hooks))})
    return cfg


def cmd_run(args) -> int:
    cfg = _load(args)
    report = run_preset(cfg, out_dir=args.out_dir)
    _print_report(report)
    return report.exit_code


def cmd_convergence(args) -> int:
    cfg = _load(args)
    report = new_report(cfg)
    report.preset = "convergence"
    state, series, report = convergence_study(cfg, report)
    out = Path(args.out_dir) if args.out_dir else cfg.out_dir
    write_outputs(cfg, report, series, out)
    _print_report(report)
    return report.exit_code


def cmd_sweep(args) -> int:
    cfg = _load(args)
    params = [parse_param(p) for p in args.param or []]
    rep = sweep(cfg, params, out_dir=args.out_dir, zip_params=args.zip, jobs=args.jobs)
    sys.stdout.write(rep.table())
    for c in rep.criteria:
        print(c.line())
    print(f"overall\t{'PASS' if rep.exit_code == EXIT_PASS else 'FAIL'}\texit={rep.exit_code}\tsweep")
    return rep.exit_code


def _parse_window(text: str):
    a, sep, b = text.partition(":")
    if not sep:
        raise ConfigError("expected a:b", "--window")
    try:
        return float(a), float(b)
    except ValueError:
        raise ConfigError(f"bad window {text!r}", "--window") from None


def _read_csv(path) -> TimeSeries:
    try:
        return TimeSeries.from_csv(path)
    except FileNotFoundError:
        raise ConfigError(f"no such file {path}", "--csv") from None
    except ValueError as exc:
        raise ConfigError(str(exc), "--csv") from None


def cmd_fit(args) -> int:
    series = _read_csv(args.csv)
    window = _parse_window(args.window)
    try:
        values = series.column(args.column)
        fit = fit_decay(series.column("t"), values, window)
    except (KeyError, ValueError) as exc:
        raise ConfigError(str(exc).strip("'\""), "--column/--window") from None
    print("column\talpha\tlog_amplitude\tr2\tsamples\twindow")
    print(f"{args.column}\t{fit.alpha:.10g}\t{fit.log_amplitude:.10g}\t{fit.r2:.10g}\t"
          f"{fit.samples}\t{window[0]:g}:{window[1]:g}")
    return EXIT_PASS


def cmd_compare_heat(args) -> int:
    series = _read_csv(args.csv)
    v = series.column("l2_v")
    w = series.column("l2_w")
    q = series.column("l2_q")
    scale = np.where(w > 0, w, 1.0)
    err = float(np.max(np.abs(v - w) / scale))
    qrel = float(np.max(q / scale))
    ok = err <= args.tol and qrel <= args.tol
    print("quantity\tstatus\tmeasured\tthreshold")
    print(f"norm-mismatch\t{'PASS' if err <= args.tol else 'FAIL'}\t{err:.6g}\t<= {args.tol:g}")
    print(f"difference-field\t{'PASS' if qrel <= args.tol else 'FAIL'}\t{qrel:.6g}\t<= {args.tol:g}")
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_report(args) -> int:
    d = Path(args.dir)
    sweep_file = d / "sweep.json"
    report_file = d / "report.json"
    if report_file.exists():
        report = Report.load(report_file)
        csv = d / "diagnostics.csv"
        if csv.exists() and not args.no_figures:
            from .plotting import render_run_figures

            render_run_figures(d, TimeSeries.from_csv(csv), report)
        _print_report(report)
        return report.exit_code
    if sweep_file.exists():
        data = json.loads(sweep_file.read_text())
        sys.stdout.write((d / "sweep.tsv").read_text() if (d / "sweep.tsv").exists() else "")
        for c in data["criteria"]:
            print(f"{c['name']}\t{'PASS' if c['passed'] else 'FAIL'}\t{c['measured']}\t{c['threshold']}")
        return int(data["exit_code"])
    raise ConfigError(f"no report.json or sweep.json in {d}", "--dir")


def cmd_template(args) -> int:
    sys.stdout.write(preset_template(args.preset))
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pens", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(sp):
        sp.add_argument("--config", required=True, help="TOML run configuration")
        sp.add_argument("--out-dir", default=None, help="output directory (default: output.dir)")
        sp.add_argument("--hook", action="append", choices=["no-nonlinear", "no-drag"],
                        help="test hook; may be repeated")

    sp = sub.add_parser("run", help="run a preset and evaluate its criteria")
    with_config(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("convergence", help="temporal self-convergence study")
    with_config(sp)
    sp.set_defaults(func=cmd_convergence)

    sp = sub.add_parser("sweep", help="run a parameter grid")
    with_config(sp)
    sp.add_argument("--param", action="append", help="section.key=v1,v2,... (repeatable)")
    sp.add_argument("--zip", action="store_true", help="pair parameter lists instead of crossing them")
    sp.add_argument("--jobs", type=int, default=1, help="concurrent runs")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("fit", help="fit a decay exponent to a diagnostics CSV column")
    sp.add_argument("--csv", required=True)
    sp.add_argument("--column", required=True)
    sp.add_argument("--window", required=True, help="a:b")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("compare-heat", help="compare simulated ||v|| with the exact heat flow")
    sp.add_argument("--csv", required=True)
    sp.add_argument("--tol", type=float, default=HEAT_MATCH_TOL)
    sp.set_defaults(func=cmd_compare_heat)

    sp = sub.add_parser("report", help="re-render figures and print a stored report")
    sp.add_argument("--dir", required=True)
    sp.add_argument("--no-figures", action="store_true")
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("template", help="print a preset's default configuration")
    sp.add_argument("--preset", required=True, choices=PRESETS)
    sp.set_defaults(func=cmd_template)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
