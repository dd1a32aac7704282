import argparse
import logging
import sys
from typing import List, Optional

from revzeta.cli.commands import run
from revzeta.cli.config_file import apply_overrides, build_run_config, read_config_file
from revzeta.cli.models import Command
from revzeta.config import LOG_LEVEL
from revzeta.core.errors import RevzetaError

logger = logging.getLogger("revzeta")


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="revzeta",
        description="Spectral zeta quantities of the Laplacian on surfaces of revolution.",
    )
    parser.add_argument("command", choices=[c.value for c in Command], help="What to compute.")
    parser.add_argument("--config", help="Flat key = value configuration file.")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="Override one configuration entry (repeatable).")
    parser.add_argument("--out", help="Output path (CSV for sweeps; the summary is written beside it).")
    parser.add_argument("--jobs", type=int, help="Worker processes for sweeps.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="Increase verbosity (-v, -vv).")
    parser.add_argument("--quiet", action="store_true", help="Only log errors and hide progress bars.")
    return parser.parse_args(argv)


def configure_logging(verbose: int, quiet: bool) -> None:
    if quiet:
        level = logging.ERROR
    elif verbose:
        level = max(logging.WARNING - 10 * verbose, logging.DEBUG)
    else:
        level = getattr(logging, LOG_LEVEL.upper(), logging.WARNING)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s"))
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(level)


def main(argv: Optional[List[str]] = None) -> int:
    args = parse_args(argv)
    configure_logging(args.verbose, args.quiet)
    try:
        entries = read_config_file(args.config) if args.config else {}
        entries = apply_overrides(entries, args.overrides)
        config = build_run_config(entries, command=args.command, output_path=args.out, jobs=args.jobs)
    except RevzetaError as exc:
        logger.error("%s", exc)
        return exc.exit_code
    try:
        return run(config, progress=not args.quiet)
    except Exception:
        logger.exception("unexpected failure")
        return 1


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
