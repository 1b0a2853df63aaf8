"""
Quench - Logging Configuration
Console and rotating file logging for the planner. Modules log through
``get_logger(__name__)``; the CLI calls ``setup_logging`` once per command.
"""

from __future__ import annotations

import logging
import os
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Any


# =============================================================================
# Custom Formatter with Colors
# =============================================================================

class ColoredFormatter(logging.Formatter):
    """Formatter with ANSI level colors for console output."""

    COLORS = {
        "DEBUG": "\033[36m",
        "INFO": "\033[32m",
        "WARNING": "\033[33m",
        "ERROR": "\033[31m",
        "CRITICAL": "\033[35m",
    }
    RESET = "\033[0m"
    DIM = "\033[2m"

    def __init__(self, fmt: str | None = None, use_colors: bool = True) -> None:
        super().__init__(fmt)
        self.use_colors = use_colors and sys.stderr.isatty()

    def format(self, record: logging.LogRecord) -> str:
        if not self.use_colors:
            return super().format(record)
        levelname, name = record.levelname, record.name
        record.levelname = f"{self.COLORS.get(levelname, '')}{levelname}{self.RESET}"
        record.name = f"{self.DIM}{name}{self.RESET}"
        try:
            return super().format(record)
        finally:
            record.levelname, record.name = levelname, name


# =============================================================================
# Logger Configuration
# =============================================================================

LOG_FORMAT = "%(asctime)s | %(levelname)-8s | %(name)s | %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"
LOG_FILE = "quench.log"
QUIET_LIBRARIES = ("matplotlib", "numexpr", "asyncio")

# None until something logs; "implicit" after the console-only fallback of
# get_logger; "explicit" once a command has called setup_logging.
_state: str | None = None
_log_dir: Path | None = None
_handlers: list[logging.Handler] = []


def get_log_dir() -> Path:
    """Directory of ``quench.log``: ``set_log_dir``, then QUENCH_LOG_DIR, then ~/.quench/logs."""
    global _log_dir
    if _log_dir is None:
        env_dir = os.getenv("QUENCH_LOG_DIR")
        _log_dir = Path(env_dir) if env_dir else Path.home() / ".quench" / "logs"
    return _log_dir


def set_log_dir(path: Path | str) -> None:
    """Point the file handler at ``path``; read when ``setup_logging`` first installs handlers."""
    global _log_dir
    _log_dir = Path(path)


def _resolve_level(level: str | int | None, verbose: bool) -> int:
    if level is None:
        level = logging.DEBUG if verbose else os.getenv("QUENCH_LOG_LEVEL", "INFO")
    if isinstance(level, str):
        return getattr(logging, level.upper(), logging.INFO)
    return level


def _install(level: int, *, log_file: bool, console: bool, log_format: str) -> None:
    root_logger = logging.getLogger()
    for handler in _handlers:
        root_logger.removeHandler(handler)
        handler.close()
    _handlers.clear()

    if console:
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setFormatter(ColoredFormatter(log_format))
        _handlers.append(console_handler)

    if log_file:
        log_dir = get_log_dir()
        try:
            log_dir.mkdir(parents=True, exist_ok=True)
            file_handler = RotatingFileHandler(
                log_dir / LOG_FILE,
                maxBytes=5 * 1024 * 1024,
                backupCount=3,
                encoding="utf-8",
            )
            file_handler.setFormatter(logging.Formatter(log_format, datefmt=DATE_FORMAT))
            _handlers.append(file_handler)
        except OSError as e:
            if console:
                root_logger.warning(f"Could not create log file in {log_dir}: {e}")

    for handler in _handlers:
        root_logger.addHandler(handler)
    set_level(level)

    for name in QUIET_LIBRARIES:
        logging.getLogger(name).setLevel(logging.WARNING)


def setup_logging(
    level: str | int | None = None,
    log_file: bool = True,
    console: bool = True,
    log_format: str = LOG_FORMAT,
    verbose: bool = False,
) -> None:
    """
    Configure the root logger for a command.

    The first call installs the stderr and file handlers, replacing the
    console-only fallback that ``get_logger`` sets up on import. Later
    calls only change the level.

    Args:
        level: Log level name or number. Defaults to QUENCH_LOG_LEVEL or INFO.
        log_file: Whether to write ``quench.log`` under ``get_log_dir()``.
        console: Whether to log to stderr.
        log_format: Format string for log records.
        verbose: Select DEBUG unless ``level`` is given.
    """
    global _state
    resolved = _resolve_level(level, verbose)
    if _state == "explicit":
        set_level(resolved)
        return
    _install(resolved, log_file=log_file, console=console, log_format=log_format)
    _state = "explicit"


def get_logger(name: str) -> logging.Logger:
    """
    Get a logger instance for a module.

    Usage:
        from logging_config import get_logger
        logger = get_logger(__name__)
    """
    global _state
    if _state is None:
        _install(_resolve_level(None, False), log_file=False, console=True, log_format=LOG_FORMAT)
        _state = "implicit"
    return logging.getLogger(name)


def set_level(level: str | int) -> None:
    """Change the root level and the level of every handler installed here."""
    resolved = _resolve_level(level, False)
    logging.getLogger().setLevel(resolved)
    for handler in _handlers:
        handler.setLevel(resolved)


# =============================================================================
# Convenience Functions
# =============================================================================

def log_exception(
    logger: logging.Logger,
    message: str,
    exc: Exception | None = None,
    level: int = logging.ERROR,
) -> None:
    """Log ``message`` with the exception type and text, or the active traceback."""
    if exc:
        logger.log(level, f"{message}: {type(exc).__name__}: {exc}")
    else:
        logger.log(level, message, exc_info=True)


def log_operation(
    logger: logging.Logger,
    operation: str,
    success: bool,
    details: dict[str, Any] | None = None,
) -> None:
    """Log ``<operation> completed|failed: k=v, ...`` at INFO or ERROR."""
    status = "completed" if success else "failed"
    level = logging.INFO if success else logging.ERROR

    if details:
        details_str = ", ".join(f"{k}={v}" for k, v in details.items())
        logger.log(level, f"{operation} {status}: {details_str}")
    else:
        logger.log(level, f"{operation} {status}")


# =============================================================================
# Exports
# =============================================================================

__all__ = [
    "setup_logging",
    "get_logger",
    "set_level",
    "set_log_dir",
    "get_log_dir",
    "log_exception",
    "log_operation",
    "ColoredFormatter",
]
