"""
Regularized spectral function of the point scatterer and its perturbed spectrum.

    F(lambda) = sum_n r(n) { 1/(n - lambda) - n/(n^2 + 1) }

F is strictly increasing between consecutive norms, running from -inf to +inf,
so each interval (n_k, n_{k+1}) holds exactly one solution of
F(lambda) = c0 tan(phi/2).

Evaluation splits the norms three ways:
- near norms n <= R0 are summed exactly,
- far norms R0 < n <= R_far enter through lambda-independent moments of
  1/(n - lambda) - n/(n^2+1) = 1/(n(n^2+1)) + sum_j lambda^j / n^(j+1),
- beyond R_far the moments are completed with Weyl integrals (see tails).
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Callable, List, Optional, Sequence

import numpy as np
import pandas as pd
from numpy.polynomial import polynomial as P
from pydantic import BaseModel, ConfigDict, Field, field_validator

from config.settings import DEFAULT_TAIL_TOL, DEFAULT_THETA, DEFAULT_WINDOW, POLE_GUARD
from scatterer.errors import DomainError, PoleError, RangeError
from scatterer.lattice import LANDAU_RAMANUJAN, LatticeSpec, NormTable, build_norm_table
from scatterer.tails import (
    choose_cutoff,
    tail_inverse_quartic,
    tail_regularizer,
    tail_scaled_power,
)
from scatterer.utils import bisect_monotone, parallel_map, pole_distance_ok

logger = logging.getLogger(__name__)

# Terms of the far-field series; lambda/R0 <= 1/2 so 64 terms reach round-off
FAR_TERMS = 64
# Terms of the per-chunk local series; offsets ratio <= 1/LOCAL_RADIUS
LOCAL_TERMS = 30
LOCAL_RADIUS = 4.0
CHUNK_INTERVALS = 32

ROOT_XTOL = 1e-12
RESIDUAL_RTOL = 1e-9
RESIDUAL_CONTRACT = 1e-8
NARROW_INTERVAL = 1e-10
# phi closer than this to +-pi is treated as the unperturbed Laplacian
PHI_EDGE = 1e-9
C0_START = 64.0


# =============================================================================
# TYPES
# =============================================================================

class SpectralParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    phi: float = 0.0
    theta: float = DEFAULT_THETA
    tail_tol: float = Field(default=DEFAULT_TAIL_TOL, gt=0)
    window: float = Field(default=DEFAULT_WINDOW, gt=0)

    @field_validator("phi")
    @classmethod
    def _phi_inside(cls, value: float) -> float:
        if not math.isfinite(value) or abs(value) >= math.pi - PHI_EDGE:
            raise ValueError(
                f"phi must lie strictly inside (-pi, pi), got {value} "
                f"(phi = pi is the unperturbed Laplacian)"
            )
        return value

    @property
    def tan_half_phi(self) -> float:
        return math.tan(0.5 * self.phi)


@dataclass(frozen=True)
class PerturbedEigenvalue:
    k: int
    lower: float
    upper: float
    lam: float
    residual: float
    converged: bool = True


@dataclass(frozen=True, eq=False)
class PerturbedSpectrum:
    spec: LatticeSpec
    params: SpectralParams
    c0: float
    entries: List[PerturbedEigenvalue]
    X: float

    def __len__(self) -> int:
        return len(self.entries)

    @cached_property
    def lambdas(self) -> np.ndarray:
        return np.array([e.lam for e in self.entries], dtype=float)

    @cached_property
    def lowers(self) -> np.ndarray:
        return np.array([e.lower for e in self.entries], dtype=float)

    @cached_property
    def uppers(self) -> np.ndarray:
        return np.array([e.upper for e in self.entries], dtype=float)

    @property
    def unconverged(self) -> List[int]:
        """Indices k whose residual misses the contract."""
        return [e.k for e in self.entries if not e.converged]

    @property
    def target(self) -> float:
        return self.c0 * self.params.tan_half_phi

    def count_upto(self, x: float) -> int:
        return int(np.searchsorted(self.lambdas, x, side="right"))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "k": [e.k for e in self.entries],
            "n_k": self.lowers,
            "lambda_k": self.lambdas,
            "n_k1": self.uppers,
            "residual": [e.residual for e in self.entries],
            "converged": [e.converged for e in self.entries],
        })


# =============================================================================
# c0
# =============================================================================

@lru_cache(maxsize=32)
def _c0_cached(spec: LatticeSpec, tail_tol: float, theta: float) -> float:
    choice = choose_cutoff(spec, theta, lambda t: 1.0 / (t * t + 1.0), tail_tol, start=C0_START)
    table = build_norm_table(spec, choice.cutoff, keep_vectors=False)
    norms = table.norms
    body = float(np.sum(table.multiplicities / (norms * norms + 1.0)))
    value = body + tail_inverse_quartic(choice.cutoff)
    logger.info(
        f"c0 on {spec.label}: {value:.15g} (cutoff {choice.cutoff:g}, tail bound {choice.bound:.2e})"
    )
    return value


def compute_c0(spec: LatticeSpec, tail_tol: float = DEFAULT_TAIL_TOL, theta: float = DEFAULT_THETA) -> float:
    """c0 = sum over the dual lattice of 1/(|xi|^4 + 1)."""
    if not tail_tol > 0:
        raise DomainError(f"tail_tol must be positive, got {tail_tol}")
    return _c0_cached(spec, float(tail_tol), float(theta))


# =============================================================================
# EVALUATOR
# =============================================================================

class SpectralFunction:
    """
    F(lambda) for |lambda| <= lam_max on one lattice.

    Construction does the work proportional to the far table; each evaluation
    then sums only the norms up to R0 = max(2 lam_max, lam_max + 10 window).
    Callers keep lambda off the norms; no pole check is done here.
    """

    def __init__(
        self,
        spec: LatticeSpec,
        lam_max: float,
        tail_tol: float = DEFAULT_TAIL_TOL,
        theta: float = DEFAULT_THETA,
        window: float = DEFAULT_WINDOW,
    ):
        lam_max = float(lam_max)
        if not lam_max > 0:
            raise DomainError(f"lam_max must be positive, got {lam_max}")
        self.spec = spec
        self.lam_max = lam_max
        self.near_cutoff = max(2.0 * lam_max, lam_max + 10.0 * window)

        def tail_term(t: float) -> float:
            return (1.0 + lam_max * t) / ((t - lam_max) * (t * t + 1.0))

        start = 2.0 ** math.ceil(math.log2(2.0 * self.near_cutoff))
        choice = choose_cutoff(spec, theta, tail_term, tail_tol, start=start)
        self.far_cutoff = choice.cutoff
        self.tail_bound = choice.bound
        self.certified = choice.certified

        table = build_norm_table(spec, self.far_cutoff, keep_vectors=False)
        norms = table.norms
        mult = table.multiplicities.astype(float)
        split = int(np.searchsorted(norms, self.near_cutoff, side="right"))
        self.near_norms = norms[:split]
        self.near_mult = mult[:split]

        far, far_mult = norms[split:], mult[split:]
        constant = -float(np.sum(self.near_mult * self.near_norms / (self.near_norms ** 2 + 1.0)))
        constant += float(np.sum(far_mult / (far * (far * far + 1.0))))
        constant += tail_regularizer(self.far_cutoff)
        self.constant = constant

        # moments[j] = sum r (R0/n)^j / n, scaled so the series runs in lambda/R0
        ratio = self.near_cutoff / far
        weight = far_mult / far
        moments = np.zeros(FAR_TERMS + 1)
        power = ratio.copy()
        for j in range(1, FAR_TERMS + 1):
            moments[j] = float(np.sum(weight * power)) + tail_scaled_power(
                self.far_cutoff, self.near_cutoff, j
            )
            power *= ratio
        self.moments = moments
        self._moment_slope = P.polyder(moments)

        logger.debug(
            f"Spectral evaluator {spec.label} lam_max={lam_max:g}: "
            f"{split} near norms, far cutoff {self.far_cutoff:g}, tail bound {self.tail_bound:.2e}"
        )

    def far_part(self, lam):
        """Constant plus far-field series; accepts scalars or arrays."""
        return self.constant + P.polyval(np.asarray(lam, dtype=float) / self.near_cutoff, self.moments)

    def __call__(self, lam: float) -> float:
        lam = float(lam)
        return float(np.sum(self.near_mult / (self.near_norms - lam))) + float(self.far_part(lam))

    def evaluate_many(self, lams: Sequence[float], block: int = 512) -> np.ndarray:
        lams = np.asarray(lams, dtype=float)
        out = np.empty(lams.shape, dtype=float)
        for start in range(0, lams.size, block):
            part = lams[start:start + block]
            near = (self.near_mult / (self.near_norms[None, :] - part[:, None])).sum(axis=1)
            out[start:start + block] = near + self.far_part(part)
        return out

    def derivative(self, lam: float) -> float:
        """F'(lambda) = sum_n r(n) / (n - lambda)^2."""
        lam = float(lam)
        near = float(np.sum(self.near_mult / (self.near_norms - lam) ** 2))
        return near + float(P.polyval(lam / self.near_cutoff, self._moment_slope)) / self.near_cutoff

    def localize(self, lo: float, hi: float) -> "LocalSpectralFunction":
        """
        Evaluator valid on [lo, hi]: near norms farther than LOCAL_RADIUS
        half-widths from the centre are folded into a series in (lambda - centre).
        """
        if not lo < hi:
            raise DomainError(f"empty range ({lo}, {hi})")
        centre = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        offset = self.near_norms - centre
        band = np.abs(offset) <= LOCAL_RADIUS * half

        outer_offset = offset[~band]
        scaled = half / outer_offset
        weight = self.near_mult[~band] / outer_offset
        coeffs = np.empty(LOCAL_TERMS)
        power = np.ones_like(scaled)
        for j in range(LOCAL_TERMS):
            coeffs[j] = float(np.sum(weight * power))
            power *= scaled
        return LocalSpectralFunction(
            base=self,
            centre=centre,
            half_width=half,
            band_norms=self.near_norms[band],
            band_mult=self.near_mult[band],
            coeffs=coeffs,
        )


@dataclass(frozen=True, eq=False)
class LocalSpectralFunction:
    base: SpectralFunction
    centre: float
    half_width: float
    band_norms: np.ndarray
    band_mult: np.ndarray
    coeffs: np.ndarray

    def __call__(self, lam: float) -> float:
        lam = float(lam)
        band = float(np.sum(self.band_mult / (self.band_norms - lam)))
        outer = float(P.polyval((lam - self.centre) / self.half_width, self.coeffs))
        return band + outer + float(self.base.far_part(lam))


@lru_cache(maxsize=16)
def _cached_evaluator(spec: LatticeSpec, lam_max: float, tail_tol: float, theta: float, window: float) -> SpectralFunction:
    return SpectralFunction(spec, lam_max, tail_tol=tail_tol, theta=theta, window=window)


def evaluator_for(spec: LatticeSpec, lam: float, params: Optional[SpectralParams] = None) -> SpectralFunction:
    """Shared evaluator covering |lam|; lam_max is rounded up to a power of two."""
    params = params or SpectralParams()
    bucket = 2.0 ** math.ceil(math.log2(max(abs(float(lam)), 1.0)))
    return _cached_evaluator(spec, bucket, params.tail_tol, params.theta, params.window)


# =============================================================================
# OPERATIONS
# =============================================================================

def _with_phi(params: Optional[SpectralParams], phi: float) -> SpectralParams:
    base = (params or SpectralParams()).model_dump()
    base["phi"] = float(phi)
    return SpectralParams(**base)


def _check_pole(table: NormTable, lam: float) -> None:
    norms = table.norms
    index = int(np.searchsorted(norms, lam))
    for i in (index - 1, index):
        if 0 <= i < norms.size and not pole_distance_ok(lam, float(norms[i]), POLE_GUARD):
            raise PoleError(
                f"lambda={lam!r} lies on the norm {float(norms[i])!r}",
                index=i,
                nearest=float(norms[i]),
            )


def spectral_function(
    spec: LatticeSpec,
    table: NormTable,
    lam: float,
    params: Optional[SpectralParams] = None,
) -> float:
    """F(lambda) for lambda > 0 away from the norms."""
    params = params or SpectralParams()
    lam = float(lam)
    if table.spec != spec:
        raise DomainError(f"table built for {table.spec.label}, not {spec.label}")
    if not lam > 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    if table.X < lam + params.window:
        raise RangeError(f"table up to {table.X} does not cover lambda + window = {lam + params.window}")
    _check_pole(table, lam)
    return evaluator_for(spec, lam, params)(lam)


def _solve_bracket(
    func: Callable[[float], float],
    k: int,
    lower: float,
    upper: float,
    target: float,
) -> PerturbedEigenvalue:
    gap = upper - lower
    contract = RESIDUAL_CONTRACT * (1.0 + abs(target))
    if gap < NARROW_INTERVAL:
        lam = 0.5 * (lower + upper)
        logger.warning(f"Interval {k} ({lower!r}, {upper!r}) narrower than {NARROW_INTERVAL:g}; midpoint assigned")
        residual = abs(func(lam) - target)
        return PerturbedEigenvalue(k, lower, upper, lam, residual, residual <= contract)

    inset = min(max(1e-10 * gap, 4.0 * POLE_GUARD * max(1.0, abs(upper))), 0.25 * gap)
    result = bisect_monotone(
        lambda lam: func(lam) - target,
        lower + inset,
        upper - inset,
        increasing=True,
        xtol=ROOT_XTOL,
        ftol=RESIDUAL_RTOL * (1.0 + abs(target)),
    )
    residual = abs(result.value)
    converged = residual <= contract
    if not converged:
        # bracket exhausted in double precision before the residual dropped
        logger.warning(f"Interval {k} ({lower!r}, {upper!r}): residual {residual:.3g} above {contract:.3g}")
    return PerturbedEigenvalue(k, lower, upper, result.root, residual, converged)


def solve_interval(
    spec: LatticeSpec,
    table: NormTable,
    phi: float,
    k: int,
    params: Optional[SpectralParams] = None,
) -> PerturbedEigenvalue:
    """
    The perturbed eigenvalue in (n_k, n_{k+1}), k >= 1 counting positive norms.

    F is evaluated with the evaluator sized by table.X, the one
    perturbed_spectrum uses for the table it builds, so both agree to
    round-off on the same table.
    """
    params = _with_phi(params, phi)
    positive = table.positive_norms
    if not 1 <= k < positive.size:
        raise RangeError(f"k={k} outside 1..{positive.size - 1} for table up to {table.X}")
    lower, upper = float(positive[k - 1]), float(positive[k])
    if upper + params.window > table.X:
        raise RangeError(f"table up to {table.X} does not cover n_(k+1) + window = {upper + params.window}")
    target = compute_c0(spec, params.tail_tol, params.theta) * params.tan_half_phi
    return _solve_bracket(evaluator_for(spec, table.X, params), k, lower, upper, target)


def perturbed_spectrum(
    spec: LatticeSpec,
    phi: float,
    X: float,
    params: Optional[SpectralParams] = None,
) -> PerturbedSpectrum:
    """Every perturbed eigenvalue whose upper bracketing norm is <= X."""
    params = _with_phi(params, phi)
    X = float(X)
    table = build_norm_table(spec, X + params.window, keep_vectors=False)
    positive = table.positive_norms
    if positive.size == 0 or not X > positive[0]:
        raise DomainError(f"X={X} must exceed the first positive norm")

    intervals = int(np.searchsorted(positive, X, side="right")) - 1
    c0 = compute_c0(spec, params.tail_tol, params.theta)
    target = c0 * params.tan_half_phi
    func = evaluator_for(spec, table.X, params)

    chunks = [(first, min(first + CHUNK_INTERVALS, intervals)) for first in range(0, intervals, CHUNK_INTERVALS)]

    def solve_chunk(bounds):
        first, last = bounds
        local = func.localize(float(positive[first]), float(positive[last]))
        return [
            _solve_bracket(local, i + 1, float(positive[i]), float(positive[i + 1]), target)
            for i in range(first, last)
        ]

    entries = [entry for chunk in parallel_map(solve_chunk, chunks) for entry in chunk]
    logger.info(f"Perturbed spectrum {spec.label} phi={params.phi:g}: {len(entries)} eigenvalues up to X={X:g}")
    return PerturbedSpectrum(spec=spec, params=params, c0=c0, entries=entries, X=X)


def specfun_scan(
    spec: LatticeSpec,
    lambda_grid: Sequence[float],
    params: Optional[SpectralParams] = None,
) -> pd.DataFrame:
    """Rows (lambda, F) over a grid; grid points on a norm are omitted."""
    params = params or SpectralParams()
    grid = np.asarray(lambda_grid, dtype=float)
    if grid.size == 0:
        return pd.DataFrame({"lambda": [], "F": []})

    reach = float(np.max(np.abs(grid)))
    table = build_norm_table(spec, reach + params.window, keep_vectors=False)
    norms = table.norms
    index = np.searchsorted(norms, grid)
    left = norms[np.clip(index - 1, 0, norms.size - 1)]
    right = norms[np.clip(index, 0, norms.size - 1)]
    nearest = np.where(np.abs(grid - left) <= np.abs(right - grid), left, right)
    keep = np.abs(grid - nearest) > POLE_GUARD * np.maximum(1.0, np.abs(nearest))

    values = evaluator_for(spec, reach, params).evaluate_many(grid[keep])
    logger.info(f"Spectral function scan on {spec.label}: {int(keep.sum())} rows, {int((~keep).sum())} poles skipped")
    return pd.DataFrame({"lambda": grid[keep], "F": values})


def spectrum_weyl_ratio(spectrum: PerturbedSpectrum, x: float) -> float:
    """
    #{lambda_k <= x} against the Weyl law for distinct norms: B x/sqrt(log x)
    on rational tori (Landau-Ramanujan, exact for Z^2) and pi x/4 otherwise.
    """
    if spectrum.spec.is_rational:
        if x <= math.e:
            raise RangeError(f"x must exceed e, got {x}")
        expected = LANDAU_RAMANUJAN * x / math.sqrt(math.log(x))
    else:
        expected = 0.25 * math.pi * x
    return spectrum.count_upto(x) / expected
