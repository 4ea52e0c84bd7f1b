from __future__ import annotations

import logging
import os

from config import settings


_ROOT = "arena"
_configured = False


def _configure_root() -> logging.Logger:
    global _configured
    root = logging.getLogger(_ROOT)
    if _configured:
        return root
    level_name = os.getenv(settings.LOG_LEVEL_ENV, settings.LOG_LEVEL_DEFAULT).strip().upper()
    root.setLevel(getattr(logging, level_name, logging.INFO))
    if not root.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
        root.addHandler(handler)
    root.propagate = False
    _configured = True
    return root


def get_logger(name: str) -> logging.Logger:
    """
    Project logger: every module hangs under arena.*
    - name is usually __name__
    """
    _configure_root()
    short = str(name or "").strip() or "main"
    return logging.getLogger(f"{_ROOT}.{short}")
