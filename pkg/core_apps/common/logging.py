import logging
from contextlib import contextmanager
from pathlib import Path

from django.conf import settings
from loguru import logger


class InterceptHandler(logging.Handler):
    """Forward stdlib ``logging`` records (Django, torch, matplotlib) to loguru."""

    def emit(self, record: logging.LogRecord) -> None:
        try:
            level = logger.level(record.levelname).name
        except ValueError:
            level = record.levelno

        frame, depth = logging.currentframe(), 2
        while frame.f_code.co_filename == logging.__file__:
            frame = frame.f_back
            depth += 1

        logger.opt(depth=depth, exception=record.exc_info).log(level, record.getMessage())


def add_run_sink(log_path: Path, enqueue: bool = False) -> int:
    log_path.parent.mkdir(parents=True, exist_ok=True)
    return logger.add(
        log_path,
        level=getattr(settings, "LOG_LEVEL", "DEBUG"),
        format=getattr(settings, "LOG_FORMAT", "{time} | {level: <8} | {message}"),
        enqueue=enqueue,
    )


@contextmanager
def run_log(out_dir: Path):
    """Mirror everything logged during a command into ``<out_dir>/run.log``."""
    sink_id = add_run_sink(Path(out_dir) / "run.log")
    try:
        yield
    finally:
        logger.remove(sink_id)
