"""Command line entry point: ``qtripod simulate|preset|sweep``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from qtripod.config import FIGURE_IDS, ConfigError, load_config
from qtripod.dynamics import PremiseError
from qtripod.observables import NormalizationError
from qtripod.oracle import StepSizeError
from qtripod.runner import preset, run_timeseries, sweep

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("qtripod")


def _read_config(path, overrides):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return load_config(text, overrides)


def _parse_vary(items):
    vary = {}
    for item in items:
        key, sep, values = item.partition("=")
        if not sep or not values.strip():
            raise ConfigError(f"--vary expects key=v1,v2,..., got {item!r}")
        key = key.strip()
        if key in vary:
            raise ConfigError(f"--vary {key} given twice")
        vary[key] = [v.strip() for v in values.split(",")]
    return vary


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qtripod", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one time series")
    sim.add_argument("--config", required=True)
    sim.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")

    pre = sub.add_parser("preset", help="reproduce the curves of one figure panel")
    pre.add_argument("--figure", required=True, choices=FIGURE_IDS, metavar="ID")
    pre.add_argument("--out", required=True)
    pre.add_argument("--jobs", type=int, default=1)

    sw = sub.add_parser("sweep", help="Cartesian parameter sweep")
    sw.add_argument("--config", required=True)
    sw.add_argument("--vary", action="append", required=True, metavar="KEY=V1,V2,...")
    sw.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    sw.add_argument("--out", required=True)
    sw.add_argument("--jobs", type=int, default=1)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        if args.command == "simulate":
            c = _read_config(args.config, args.overrides)
            c.model()
            s = run_timeseries(c)
            log.info("wrote %s (%s engine)", c.output, s.metadata["engine"])
        elif args.command == "preset":
            for path in preset(args.figure, args.out, jobs=max(1, args.jobs)):
                log.info("wrote %s", path)
        else:
            c = _read_config(args.config, args.overrides)
            c.model()
            summary = sweep(c, _parse_vary(args.vary), args.out, jobs=max(1, args.jobs))
            log.info("wrote %s", summary)
    except (PremiseError, StepSizeError, NormalizationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (OSError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
