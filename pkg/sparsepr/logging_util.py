"""
Shared logging helpers for sparsepr.

``debug_log`` is for solver internals and only prints when ``config.VERBOSE``
is set; ``status_log`` is for progress the user asked for and always prints.
Both use the same millisecond-precision timestamp.
"""

import datetime
from typing import Optional

from sparsepr import config


def _stamp() -> str:
    return datetime.datetime.now().strftime("%Y-%m-%d %H:%M:%S.%f")[:-3]


def status_log(message: str, end: Optional[str] = None) -> None:
    """
    Print a message with a millisecond-precision timestamp.

    Args:
        message: The message to print
        end: Optional ending character (default is newline)
    """
    if end is not None:
        print(f"[{_stamp()}] {message}", end=end, flush=True)
    else:
        print(f"[{_stamp()}] {message}")


def debug_log(message: str, end: Optional[str] = None) -> None:
    """Like ``status_log`` but silent unless ``config.VERBOSE`` is true."""
    if getattr(config, "VERBOSE", False):
        status_log(message, end=end)
