"""
Command-line entry point: python -m src.coneweyl.main <subcommand> --config <path> --out <path>
"""
import argparse
import logging
import sys
from typing import List, Optional

from src.coneweyl import __version__
from src.coneweyl.cli.commands import COMMANDS
from src.coneweyl.config import get_settings
from src.coneweyl.metrics import write_metrics

logger = logging.getLogger("coneweyl")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coneweyl",
        description="Eigenvalue counting and Weyl-law studies for Robin Laplacians on conical domains",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="Overrides CONEWEYL_LOG_LEVEL")
    parser.add_argument("--metrics-out", default=None, help="Write Prometheus metrics to this file on exit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        command = sub.add_parser(name)
        command.add_argument("--config", required=True, help="JSON configuration file")
        command.add_argument("--out", default=None, help="Output file")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = (args.log_level or get_settings().log_level).upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    logger.info("coneweyl %s: %s --config %s", __version__, args.command, args.config)

    code = COMMANDS[args.command](args.config, args.out)

    if args.metrics_out:
        write_metrics(args.metrics_out)
    if code != 0:
        logger.error("%s exited with status %d", args.command, code)
    return code


if __name__ == "__main__":
    sys.exit(main())
