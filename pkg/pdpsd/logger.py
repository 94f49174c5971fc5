import logging
import os

logger = logging.getLogger("pdpsd")

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

_handler: logging.Handler | None = None


def configure_logging(level: str) -> None:
    """Route pdpsd logs to stderr at `level`. Safe to call more than once."""
    global _handler
    level = level.upper()
    logger.setLevel(level)
    if _handler is None:
        _handler = logging.StreamHandler()
        _handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(_handler)
    _handler.setLevel(level)


log_level = os.getenv("LOG_LEVEL")
if log_level:
    configure_logging(log_level)
