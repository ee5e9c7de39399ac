"""
Main entry point of the `conv-rl` command.
Configures logging, parses arguments and maps errors onto exit codes.
"""

import logging
import sys
from typing import Optional, Sequence

from src.cli.commands import build_parser, dispatch
from src.config.settings import settings
from src.core.errors import ConfigError, ConvRlError, GeometryMismatchError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def configure_logging() -> None:
    logging.basicConfig(
        level=settings.log_level.upper(),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Runs one subcommand and returns its exit code.

    Config and geometry errors exit with 2, every other framework error
    with 1. Messages go to stderr; a refused transfer also prints the
    geometry diff.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE

    logger.info("Starting %s %s", settings.app_name, args.command)
    try:
        return dispatch(args)
    except GeometryMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(exc.render_diff(), file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvRlError, OSError) as exc:
        logger.error("%s failed: %s", args.command, exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


def run() -> None:
    """Console-script wrapper."""
    configure_logging()
    sys.exit(main())


if __name__ == "__main__":
    run()
