"""
Tail control for lattice sums sum_{|xi|^2 > R} f(|xi|^2).

For f smooth, positive and decreasing beyond R, summation by parts against
N(t) = pi t + P(t) gives

    sum_{|xi|^2 > R} f(|xi|^2) = pi * int_R^inf f(t) dt + E,
    |E| <= |P(R)| f(R) + int_R^inf |P(t)| |f'(t)| dt <= 2 C R^theta f(R)

whenever |P(t)| <= C t^theta for t >= R. The constant C is fitted on a
reference table and inflated by a safety factor, so the bound is an
estimate, not a certificate.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

from config.settings import TAIL_TABLE_CAP
from scatterer.lattice import LatticeSpec, build_norm_table, remainder_constant

logger = logging.getLogger(__name__)

REFERENCE_CUTOFF = 4096.0
SAFETY_FACTOR = 2.0


@dataclass(frozen=True)
class TailChoice:
    cutoff: float
    bound: float
    certified: bool


@lru_cache(maxsize=32)
def lattice_remainder_constant(spec: LatticeSpec, theta: float) -> float:
    """Fitted C with |N(t) - pi t| <= C t^theta on the reference range, inflated."""
    table = build_norm_table(spec, REFERENCE_CUTOFF, keep_vectors=False)
    fitted = remainder_constant(table, theta, x_min=REFERENCE_CUTOFF / 64)
    return SAFETY_FACTOR * max(fitted, 1.0)


def weyl_error_bound(spec: LatticeSpec, theta: float, cutoff: float, f_at_cutoff: float) -> float:
    """Bound 2 C R^theta f(R) on the error of the Weyl-integral tail."""
    return 2.0 * lattice_remainder_constant(spec, theta) * cutoff ** theta * abs(f_at_cutoff)


def choose_cutoff(
    spec: LatticeSpec,
    theta: float,
    f: Callable[[float], float],
    tol: float,
    start: float,
    cap: float = TAIL_TABLE_CAP,
) -> TailChoice:
    """
    Smallest cutoff R = start * 2^j whose tail error bound is below tol.

    Stops at cap; an uncertified choice is logged once per call.
    """
    cutoff = max(float(start), 1.0)
    while True:
        bound = weyl_error_bound(spec, theta, cutoff, f(cutoff))
        if bound < tol:
            return TailChoice(cutoff=cutoff, bound=bound, certified=True)
        if cutoff * 2 > cap:
            break
        cutoff *= 2

    cutoff = max(cutoff, cap)
    bound = weyl_error_bound(spec, theta, cutoff, f(cutoff))
    certified = bound < tol
    if not certified:
        logger.warning(
            f"Tail cutoff capped at {cutoff:.4g} on {spec.label}: "
            f"estimated error {bound:.3g} exceeds tolerance {tol:.3g}"
        )
    return TailChoice(cutoff=cutoff, bound=bound, certified=certified)


# =============================================================================
# CLOSED-FORM WEYL INTEGRALS  pi * int_R^inf f(t) dt
# =============================================================================

def tail_inverse_square_shift(cutoff: float, lam: float) -> float:
    """pi * int_R^inf dt / (t - lam)^2, R > lam."""
    return math.pi / (cutoff - lam)


def tail_inverse_quartic(cutoff: float) -> float:
    """pi * int_R^inf dt / (t^2 + 1)."""
    return math.pi * (0.5 * math.pi - math.atan(cutoff))


def tail_regularizer(cutoff: float) -> float:
    """pi * int_R^inf dt / (t (t^2 + 1))."""
    return 0.5 * math.pi * math.log1p(1.0 / (cutoff * cutoff))


def tail_scaled_power(cutoff: float, scale: float, j: int) -> float:
    """pi * int_R^inf (scale / t)^j dt / t, j >= 1."""
    return math.pi * (scale / cutoff) ** j / j
