"""Command line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 acceptance failure.
"""

from __future__ import annotations

import argparse
from concurrent.futures import ProcessPoolExecutor
import csv
import json
from pathlib import Path
import sys

from . import __version__, fem, spectral
from .asymptotics import HorizonTooShort, NotExceptionalError
from .config import ConfigError, load_config
from .runner import ValidationFailure, analyze, check_config, run, run_config

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ACCEPTANCE = 0, 2, 3, 4

NUMERICAL_ERRORS = (fem.NewtonFailure, fem.StepUnderflow, fem.EigenIterationError,
                    spectral.SpectralError, HorizonTooShort, FloatingPointError,
                    ArithmeticError)


def _write_table(header, rows, dest):
    fh = sys.stdout if dest is None else open(dest, "w", newline="")
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    finally:
        if dest is not None:
            fh.close()


def cmd_validate(args):
    cfg = load_config(args.config)
    reports = check_config(cfg)
    for name, report in reports.items():
        print(f"{name}: {report.describe()}")
    exceptional = spectral.is_exceptional(cfg.params.J, cfg.params)
    print("J: " + ("generic" if exceptional is None else f"exceptional (ell = {exceptional})"))
    return EXIT_OK if all(r.passed for r in reports.values()) else EXIT_CONFIG


def cmd_spectrum(args):
    cfg = load_config(args.config)
    modes = spectral.find_modes(args.operator, cfg.params, args.count)
    rows = [(m.index, *(repr(float(v)) for v in
                        (m.p, m.mu_abs, m.uL, m.duL, spectral.eigen_residual(m, cfg.params))))
            for m in modes]
    _write_table(("n", "p", "mu_abs", "uL", "duL", "residual"), rows, args.output)
    return EXIT_OK


def cmd_jset(args):
    cfg = load_config(args.config)
    rows = [(ell, repr(float(J))) for ell, J in spectral.exceptional_set(cfg.params, args.lmax)]
    _write_table(("ell", "J_ell"), rows, args.output)
    return EXIT_OK


def _summary(manifest):
    limit = manifest.limit
    return (f"{manifest.directory}: {limit['classification']} "
            f"(tail energy {limit['nu_estimate']:.3e}, orbit error {limit['orbit_error']:.3e})")


def cmd_simulate(args):
    manifest = run_config(args.config)
    print(_summary(manifest))
    return EXIT_OK


def cmd_analyze(args):
    result = analyze(args.manifest)
    print(json.dumps(result["limit"], indent=2))
    return EXIT_OK


def _sweep_one(path):
    cfg = load_config(path)
    manifest = run(cfg)
    return _summary(manifest)


def cmd_sweep(args):
    configs = [load_config(p) for p in args.configs]
    outputs = [c.output for c in configs]
    if len(set(outputs)) != len(outputs):
        raise ConfigError("sweep configurations must write to distinct output directories")
    with ProcessPoolExecutor(max_workers=args.workers) as pool:
        for line in pool.map(_sweep_one, args.configs):
            print(line)
    return EXIT_OK


def cmd_verify(args):
    from .acceptance import run_suite

    results = run_suite(args.suite, echo=print)
    report = {"suite": args.suite, "version": __version__,
              "passed": all(r.passed for r in results),
              "criteria": [r.as_dict() for r in results]}
    text = json.dumps(report, indent=2, default=float) + "\n"
    if args.report:
        Path(args.report).write_text(text)
    else:
        print(text, end="")
    return EXIT_OK if report["passed"] else EXIT_ACCEPTANCE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tipbeam", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check parameters and feedback laws of a config")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("spectrum", help="eigen-wavenumbers and mode data as CSV")
    p.add_argument("config")
    p.add_argument("--operator", choices=spectral.OPERATORS, default="A")
    p.add_argument("--count", type=int, default=6)
    p.add_argument("-o", "--output", help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("jset", help="exceptional rotary inertias as CSV")
    p.add_argument("config")
    p.add_argument("--lmax", type=int, default=10)
    p.add_argument("-o", "--output", help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_jset)

    p = sub.add_parser("simulate", help="run a configuration and persist its artifacts")
    p.add_argument("config")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="classify the long-time limit of a finished run")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", help="run several configurations in parallel")
    p.add_argument("configs", nargs="+")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run an acceptance suite")
    p.add_argument("suite", choices=("spectral", "energy", "dichotomy", "all"))
    p.add_argument("--report", help="write the JSON report here instead of stdout")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "count", 1) < 1 or getattr(args, "lmax", 1) < 1:
        print("error: counts must be positive", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ValidationFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, NotExceptionalError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
