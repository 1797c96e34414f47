"""
Logging setup for cramerlab using Loguru.

Console output is colorized and short; the optional file sink keeps the
full DEBUG trace of a run with rotation and compression.
"""

import sys
from pathlib import Path
from typing import Optional

from loguru import logger

CONSOLE_FORMAT = (
    "<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | <level>{message}</level>"
)
FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {name}:{function}:{line} | {message}"


def init_logger(
    level: str = "INFO",
    log_dir: Optional[Path] = None,
    console: bool = True,
    file_logging: bool = False,
    rotation: str = "50 MB",
    retention: str = "14 days",
) -> None:
    """
    Initialize the loguru logger for a lab session.

    Args:
        level: Console logging level (TRACE, DEBUG, INFO, SUCCESS, WARNING, ERROR)
        log_dir: Directory for log files (defaults to ./logs)
        console: Enable console output on stderr
        file_logging: Enable the rotating file sink
        rotation: When to rotate log files (size or time based)
        retention: How long to keep old log files
    """
    logger.remove()

    if log_dir is None:
        log_dir = Path.cwd() / "logs"

    if console:
        # stderr keeps stdout free for JSON reports
        logger.add(sys.stderr, format=CONSOLE_FORMAT, level=level.upper(), colorize=True)

    if file_logging:
        log_dir.mkdir(parents=True, exist_ok=True)
        logger.add(
            log_dir / "cramerlab_{time:YYYY-MM-DD}.log",
            format=FILE_FORMAT,
            level="DEBUG",
            rotation=rotation,
            retention=retention,
            compression="zip",
            enqueue=True,
        )

    logger.debug(f"Logger initialized with level: {level}")
