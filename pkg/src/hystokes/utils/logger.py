import logging
import sys
from pathlib import Path

ROOT_LOGGER = "hystokes"

CONSOLE_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
# kernels are built on worker threads; the file log keeps track of which one
FILE_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - [%(threadName)s] %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

# numpy/scipy report ill-conditioning through the warnings module
WARNINGS_LOGGER = "py.warnings"


def _resolve_level(level: str) -> int:
    resolved = logging.getLevelName(level.upper())
    if not isinstance(resolved, int):
        error_msg = f"Unknown log level '{level}'"
        raise ValueError(error_msg)  # noqa: TRY004
    return resolved


def _reset_handlers(logger: logging.Logger) -> None:
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()


def setup_logging(level: str = "INFO", log_file: Path | None = None, verbose: bool = False) -> None:
    """
    Configure console (stdout) and optional file logging for a hystokes run.

    ``verbose`` forces DEBUG. The file handler always records DEBUG so that per-cell diagnostics
    (coercivity, unisolvence, residuals) are available after a run even when the console is quiet.
    """
    numeric_level = logging.DEBUG if verbose else _resolve_level(level)

    root_logger = logging.getLogger()
    root_logger.setLevel(numeric_level if log_file is None else logging.DEBUG)
    _reset_handlers(root_logger)

    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setLevel(numeric_level)
    console_handler.setFormatter(logging.Formatter(CONSOLE_FORMAT, datefmt=DATE_FORMAT))
    root_logger.addHandler(console_handler)

    if log_file:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_file)
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(logging.Formatter(FILE_FORMAT, datefmt=DATE_FORMAT))
        root_logger.addHandler(file_handler)

    logging.getLogger(ROOT_LOGGER).setLevel(logging.DEBUG if log_file else numeric_level)

    # showwarning may have been replaced since the last call (pytest does this per test)
    logging.captureWarnings(False)
    logging.captureWarnings(True)
    logging.getLogger(WARNINGS_LOGGER).setLevel(logging.WARNING)


def get_logger(name: str) -> logging.Logger:
    """Logger under the ``hystokes`` namespace (module ``__name__`` values are already inside it)."""
    if name == ROOT_LOGGER or name.startswith(f"{ROOT_LOGGER}."):
        return logging.getLogger(name)
    return logging.getLogger(f"{ROOT_LOGGER}.{name}")
