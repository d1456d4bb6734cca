import sys

from loguru import logger

from .base import *  # noqa
from .base import BASE_DIR, LOG_FORMAT

DATABASES = {
    "default": {
        "ENGINE": "django.db.backends.sqlite3",
        "NAME": ":memory:",
    }
}

OUTPUT_DIR = BASE_DIR / "runs" / "test"

# Tests keep the file sinks quiet and only surface warnings on stderr.
logger.remove()
logger.add(sys.stderr, level="WARNING", format=LOG_FORMAT)
