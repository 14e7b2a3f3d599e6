"""Command-line entry point: ``csdlab {simulate, probe, convergence, selftest}``.

Exit codes: 0 success, 1 invariant or acceptance failure, 2 configuration
error, 3 blow-up detected.  CSD_THREADS caps FFT threads and probe workers.
"""
from __future__ import annotations

import argparse
import logging
import sys
import warnings

from . import __version__, runs
from .config import COMMAND_DEFAULTS, SCHEMA, ConfigError, ConfigWarning, keys_for, parse_config
from .selftest import FAULTS, format_report, selftest

EPILOG = ("exit codes: 0 success, 1 invariant/acceptance failure, 2 config error, 3 blow-up.\n"
          "CSD_THREADS caps FFT threads and probe worker processes; CSD_FFT=scipy selects the scipy FFT.")

_DESCRIPTIONS = {
    "simulate": "Evolve initial data with exponential RK4; write CSDF snapshots, report.csv and summary.txt.",
    "probe": "Run an inequality probe over dyadic scales; write records.csv and summary.txt.",
    "convergence": "Self-convergence study at (dt, dt/2, dt/4) and (N, 2N).",
    "selftest": "Run the invariant suite of every module at 32^2 and 64^2.",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: config error: {message}", file=sys.stderr)
        sys.exit(runs.EXIT_CONFIG)


def _add_keys(p, command):
    for key in keys_for(command):
        if command == "probe" and key.name == "probe":
            continue
        default = COMMAND_DEFAULTS.get(command, {}).get(key.name, key.default)
        choices = getattr(key.parse, "options", None)
        extra = f" (one of: {', '.join(choices)})" if choices else ""
        req = "required" if key.required else f"default: {default if default is not None else 'auto'}"
        p.add_argument(f"--{key.name}", dest=key.name, default=None, metavar="V",
                       help=f"{key.doc}{extra}; {req}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="csdlab", description=__doc__.splitlines()[0], epilog=EPILOG,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"csdlab {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for command, desc in _DESCRIPTIONS.items():
        p = sub.add_parser(command, help=desc, description=desc, epilog=EPILOG,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        if command == "probe":
            p.add_argument("probe", choices=SCHEMA["probe"].parse.options, help="probe name")
        if command == "selftest":
            p.add_argument("--inject-fault", choices=FAULTS, default=None,
                           help="test hook: corrupt a constant so its check must fail")
            p.add_argument("--out", default=None, metavar="DIR", help="also write selftest.txt here")
        else:
            p.add_argument("--config", default=None, metavar="FILE",
                           help="key = value file; flags override it")
            _add_keys(p, command)
    return parser


def _warn(message, *_args, **_kwargs):
    print(f"warning: {message}", file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    with warnings.catch_warnings():
        warnings.simplefilter("always", ConfigWarning)
        warnings.showwarning = _warn
        return _dispatch(args)


def _dispatch(args) -> int:
    if args.command == "selftest":
        report = selftest(fault=args.inject_fault)
        lines = format_report(report)
        print("\n".join(lines))
        if args.out:
            from pathlib import Path
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            (out / "selftest.txt").write_text("\n".join(lines) + "\n")
        return runs.EXIT_OK if all(r["passed"] for r in report.values()) else runs.EXIT_FAIL

    flags = {k.name: getattr(args, k.name, None) for k in keys_for(args.command)}
    try:
        cfg = parse_config(args.command, file=args.config, flags=flags)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return runs.EXIT_CONFIG

    try:
        if args.command == "simulate":
            report = runs.simulate(cfg)
        elif args.command == "probe":
            report = runs.run_probe(cfg)
        else:
            report = runs.convergence_study(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return runs.EXIT_CONFIG
    for key, value in report.summary.items():
        print(f"{key} = {value}")
    return report.exit_code


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
