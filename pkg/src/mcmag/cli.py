"""Command-line front end.

Subcommands:
  sweep <config>      evaluate a sweep config, write its CSV
  neumark <config>    dump the projective extension at one point
  validate <config>   run Monte Carlo consistency checks
  plot <csv>          render a sweep CSV as an SVG file

Exit codes: 0 success, 2 configuration/validation error, 3 numerical
contract violation (including failed Monte Carlo consistency), 1 I/O or
unexpected failure.  MCMAG_THREADS sets the sweep worker count; output
bytes do not depend on it.
"""

from __future__ import annotations

import argparse
import sys

from . import sweep
from .errors import ConfigError, DomainError, NumericalContractError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcmag",
        description="Maximum-confidence magnetic-field detection toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sweep = sub.add_parser("sweep", help="run a sweep config, write CSV")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--out", default=None, help="override the config's out path")

    p_neu = sub.add_parser("neumark", help="dump the projective extension")
    p_neu.add_argument("config")
    p_neu.add_argument("--out", default=None, help="write the dump here instead of stdout")

    p_val = sub.add_parser("validate", help="Monte Carlo consistency checks")
    p_val.add_argument("config")
    p_val.add_argument("--out", default=None, help="also write the report here")

    p_plot = sub.add_parser("plot", help="render a sweep CSV to SVG")
    p_plot.add_argument("csv")
    p_plot.add_argument("--out", default=None, help="SVG path (default: csv path with .svg)")
    return parser


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "sweep":
            cfg = sweep.load_config(args.config)
            path = sweep.write_sweep(cfg, out_path=args.out)
            print(f"wrote {path}")
        elif args.command == "neumark":
            cfg = sweep.load_config(args.config)
            report = sweep.neumark_report(cfg)
            out = args.out or cfg.out
            if out:
                _write_text(out, report)
                print(f"wrote {out}")
            else:
                sys.stdout.write(report)
        elif args.command == "validate":
            cfg = sweep.load_config(args.config)
            report, ok = sweep.validate_report(cfg)
            out = args.out or cfg.out
            if out:
                _write_text(out, report)
            sys.stdout.write(report)
            if not ok:
                return 3
        elif args.command == "plot":
            with open(args.csv, "r", encoding="utf-8") as fh:
                csv_text = fh.read()
            svg = sweep.plot_csv(csv_text, title=args.csv)
            out = args.out or (args.csv.rsplit(".", 1)[0] + ".svg")
            _write_text(out, svg)
            print(f"wrote {out}")
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalContractError as exc:
        print(f"numerical contract violation: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
