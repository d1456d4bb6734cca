import sys

from loguru import logger

from .base import *  # noqa
from .base import LOG_FORMAT, LOG_LEVEL

DEBUG = True

# Echo to the terminal while experimenting locally.
logger.add(sys.stderr, level=LOG_LEVEL, format=LOG_FORMAT)
