"""Logging setup for the qfvae package."""

import logging

from rich.console import Console
from rich.logging import RichHandler

LOGGER_NAME = "qfvae"


def setup_logging(level: int | str = logging.INFO, console: Console | None = None) -> logging.Logger:
    """
    Route the package logger through a rich handler.

    Calling this again replaces the previous handler instead of adding one.

    Args:
        level: Logging level for the package logger
        console: Console to write to (stderr when None)

    Returns:
        The package logger
    """
    logger = logging.getLogger(LOGGER_NAME)
    for handler in list(logger.handlers):
        if isinstance(handler, RichHandler):
            logger.removeHandler(handler)
    handler = RichHandler(
        console=console or Console(stderr=True),
        show_path=False,
        rich_tracebacks=False,
        markup=False,
    )
    handler.setFormatter(logging.Formatter("%(message)s"))
    logger.addHandler(handler)
    logger.setLevel(level)
    logger.propagate = False
    return logger
