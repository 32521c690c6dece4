import logging
import os
from logging.handlers import RotatingFileHandler

from rich.console import Console
from rich.logging import RichHandler

from src.config import settings

LOG_FILE_PATH = settings.LOG_FILE_PATH
os.makedirs(os.path.dirname(LOG_FILE_PATH), exist_ok=True)

_PACKAGE_PREFIXES = ("src.", "__main__", "liftcheck")


def get_logger(name: str) -> logging.Logger:
    logger = logging.getLogger(name)

    if not logger.hasHandlers():
        console = RichHandler(console=Console(stderr=True), show_path=False, rich_tracebacks=True)
        console.setFormatter(logging.Formatter("[%(name)s]: %(message)s"))
        logger.addHandler(console)

        file_handler = RotatingFileHandler(
            LOG_FILE_PATH,
            maxBytes=204800,
            backupCount=0,
        )
        file_handler.setFormatter(
            logging.Formatter("[%(asctime)s] [%(levelname)s] [%(name)s]: %(message)s")
        )
        logger.addHandler(file_handler)

        logger.setLevel(logging.DEBUG if settings.DEBUG else logging.INFO)
        logger.propagate = False

    return logger


def set_log_level(level: int) -> None:
    """Apply `level` to every logger created through get_logger."""
    for name, logger in logging.Logger.manager.loggerDict.items():
        if isinstance(logger, logging.Logger) and name.startswith(_PACKAGE_PREFIXES):
            logger.setLevel(level)
