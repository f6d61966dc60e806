"""
Logging Utilities

Helpers to set the verbosity of the root logger and to turn failed checks
into logged, typed errors.

Modules of this package log through the root logger directly
(``logging.info(f"...")``); this module only configures it.
"""

import logging
from typing import Type

from .error_utils import EarSiftError, InternalInvariantError

_LEVELS = {
    0: logging.ERROR,
    1: logging.WARNING,
    2: logging.INFO,
    3: logging.DEBUG,
}


def verbosity(level: int = 1) -> int:
    """
    Set the verbosity of the root logger.

    Parameters
    ----------
    level : int, optional
        0 errors only, 1 warnings (default), 2 info, 3 debug. Values above 3
        are treated as 3, values below 0 as 0.

    Returns
    -------
    int
        The ``logging`` level that was applied.

    Example
    -------
    >>> verbosity(2)
    20
    """
    level = min(max(int(level), 0), 3)
    log_level = _LEVELS[level]
    logging.basicConfig(
        level=log_level,
        format="%(asctime)s %(levelname)s %(message)s",
        force=True,
    )
    return log_level


def check(
    condition: bool,
    message: str,
    error: Type[EarSiftError] = InternalInvariantError,
) -> None:
    """
    Raise ``error(message)`` after logging it when ``condition`` is false.

    Parameters
    ----------
    condition : bool
        The condition that must hold.
    message : str
        Explanation logged at ERROR level and carried by the exception.
    error : Type[EarSiftError], optional
        Exception class to raise. Defaults to InternalInvariantError.

    Raises
    ------
    EarSiftError
        The requested subclass, when the condition does not hold.

    Example
    -------
    >>> check(1 + 1 == 2, "arithmetic is broken")
    """
    if not condition:
        logging.error(message)
        raise error(message)
