import sys
from typing import Optional

from loguru import logger

LOG_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} - {name} - {level} - {message}"


def get_logger(level: str = "INFO", log_file: Optional[str] = None):
    """
    Set up and configure the loguru logger for the analysis pipeline.

    The default loguru sink is replaced by a stderr sink using the project's
    "time - module - level - message" layout. An optional file sink receives the
    same records and is rotated once it grows past 10 MB.

    Args:
        level (str): Minimum level for emitted records (e.g. "DEBUG", "INFO").
        log_file (Optional[str]): Path of an additional log file, if any.

    Returns:
        loguru.Logger: The configured logger instance.

    Example:
        >>> log = get_logger("DEBUG")
        >>> log.info("segmenting take_01.wav")
    """
    logger.remove()
    logger.add(sys.stderr, level=level.upper(), format=LOG_FORMAT)
    if log_file:
        logger.add(log_file, level=level.upper(), format=LOG_FORMAT, rotation="10 MB")
    return logger
