"""Time Utilities Module."""

from typing import Callable, Optional
import time
import logging
from functools import wraps


class Stopwatch:
    """Wall-clock timer for a block of code.

    Example::
        >>> from stmmreg.time import Stopwatch
        >>> with Stopwatch() as watch:
        ...     total = sum(range(1000))
        >>> watch.seconds >= 0.0
        True
    """

    def __init__(self) -> None:
        self._start: Optional[float] = None
        self._stop: Optional[float] = None

    def __enter__(self) -> "Stopwatch":
        self._start = time.perf_counter()
        self._stop = None
        return self

    def __exit__(self, *exc_info) -> None:
        self._stop = time.perf_counter()

    @property
    def seconds(self) -> float:
        """Elapsed seconds; keeps running until the block exits."""
        if self._start is None:
            return 0.0
        stop = self._stop if self._stop is not None else time.perf_counter()
        return stop - self._start


def time_stamp() -> str:
    """
    Return the current local time.

    Returns:
        str: Time string format "%Y-%m-%d %H:%M:%S".
    """
    return time.strftime("%Y-%m-%d %H:%M:%S", time.localtime())


def hr_time(time_in: float) -> str:
    """
    Return human readable time as string.

    Args:
        time_in (float): time in seconds.

    Returns:
        str: string to print.

    Example::
        >>> from stmmreg.time import hr_time
        >>> hr_time(2.5)
        '2.500 s'
        >>> hr_time(120)
        '02 min 00 s'
        >>> hr_time(3 * 3600 + 5)
        '03 hr 00 min 05 s'
    """
    if time_in < 60:
        return "%.3f s" % time_in
    if time_in < 60 * 60:
        return time.strftime("%M min %S s", time.gmtime(time_in))
    if time_in < 24 * 60 * 60:
        return time.strftime("%H hr %M min %S s", time.gmtime(time_in))
    return "%.0f s" % time_in


def timeit(method: Callable) -> Callable:
    """Log how long each call of `method` takes, at INFO level.

    Args:
        method (Callable): the function to wrap.

    Returns:
        Callable: wrapped function with the same signature.
    """

    @wraps(method)
    def timed(*args, **kw):
        with Stopwatch() as watch:
            result = method(*args, **kw)
        logging.getLogger(method.__module__).info(
            "%s took %s", method.__name__, hr_time(watch.seconds)
        )
        return result

    return timed
