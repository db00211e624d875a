"""Logger factory; level comes from BENCH_LOG_LEVEL."""
from __future__ import annotations

import logging
import os

LOG_LEVEL = os.getenv("BENCH_LOG_LEVEL", "INFO").upper()
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

_configured = False


def get_logger(name: str) -> logging.Logger:
    global _configured
    if not _configured:
        logging.basicConfig(level=getattr(logging, LOG_LEVEL, logging.INFO), format=LOG_FORMAT)
        _configured = True
    return logging.getLogger(name)
