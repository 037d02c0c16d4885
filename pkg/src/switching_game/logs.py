"""Logging set-up for the command line."""

import logging

import coloredlogs


def configure_logging(level: int = logging.INFO) -> None:
    """Replace the root handlers with coloredlogs' colored stream handler."""
    for handler in list(logging.root.handlers):
        logging.root.removeHandler(handler)
    coloredlogs.install(level=level, fmt="%(asctime)s %(name)s %(levelname)s %(message)s")
