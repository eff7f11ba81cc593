"""
Shared utilities for the numerical modules.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, TypeVar

import numpy as np

from config.settings import SCATTERER_THREADS

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


@dataclass(frozen=True)
class BisectionResult:
    root: float
    value: float
    iterations: int
    converged: bool


def bisect_monotone(
    func: Callable[[float], float],
    lo: float,
    hi: float,
    increasing: bool = True,
    xtol: float = 1e-12,
    ftol: Optional[float] = None,
    max_iter: int = 400,
) -> BisectionResult:
    """
    Bisection for a strictly monotone function on the open interval (lo, hi).

    The endpoints are never evaluated (they may be poles): the sign of func
    near lo and hi is implied by the direction of monotonicity. Stops when the
    bracket is below xtol*(1+|x|) and, if ftol is given, |func(x)| <= ftol, or
    when the bracket can no longer be split in double precision.

    The returned root is the evaluated point with the smallest |func|, and
    value is func at that point. With ftol given, converged is True only if
    |value| <= ftol.
    """
    if not lo < hi:
        raise ValueError(f"empty bracket ({lo}, {hi})")

    iterations = 0
    converged = False
    best_x, best_value = None, math.inf
    while iterations < max_iter:
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            converged = ftol is None or abs(best_value) <= ftol
            break
        value = func(mid)
        iterations += 1
        if abs(value) < abs(best_value):
            best_x, best_value = mid, value
        if value == 0.0:
            return BisectionResult(mid, 0.0, iterations, True)
        if (value < 0.0) == increasing:
            lo = mid
        else:
            hi = mid
        if hi - lo <= xtol * (1.0 + abs(mid)) and (ftol is None or abs(value) <= ftol):
            converged = True
            break

    if best_x is None:
        return BisectionResult(0.5 * (lo + hi), math.nan, iterations, False)
    return BisectionResult(best_x, best_value, iterations, converged)


def pole_distance_ok(value: float, pole: float, guard: float) -> bool:
    """True when value is farther than guard (relative) from pole."""
    return abs(value - pole) > guard * max(1.0, abs(pole))


def dyadic_window(values) -> np.ndarray:
    """Index j of the dyadic window [2^j, 2^(j+1)) containing each value."""
    arr = np.asarray(values, dtype=float)
    out = np.full(arr.shape, -1, dtype=np.int64)
    positive = arr > 0
    out[positive] = np.floor(np.log2(arr[positive])).astype(np.int64)
    return out


def parallel_map(func: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None) -> List[R]:
    """
    Map func over items, preserving input order.

    Uses a thread pool capped by SCATTERER_THREADS; a single thread runs
    inline.
    """
    items = list(items)
    workers = SCATTERER_THREADS if threads is None else max(1, threads)
    if workers == 1 or len(items) < 2:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def fit_power_law(xs, ys) -> tuple:
    """
    Least-squares fit of log y = log C + e log x.

    Returns (exponent, constant). Non-positive points are dropped.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    keep = (x > 0) & (y > 0)
    if keep.sum() < 2:
        return (math.nan, math.nan)
    slope, intercept = np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)
    return (float(slope), float(math.exp(intercept)))
