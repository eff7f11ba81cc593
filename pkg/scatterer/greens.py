"""
Green's-function eigenfunctions of the point scatterer.

    G_lambda(x; x0) = -(1/4 pi^2) sum_xi exp(i <xi, x - x0>) c(xi),   c(xi) = 1/(|xi|^2 - lambda)

Integrals use the torus measure normalized by its area 4 pi^2, so
||G||^2 = (1/16 pi^4) sum c(xi)^2 and the normalized g = G/||G|| has
<e_zeta g, g> = e^{i<zeta, x0>} sum c(xi) c(xi - zeta) / sum c(xi)^2.

Truncations keep the annulus lambda - L < |xi|^2 < lambda + L.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Tuple, Union

import numpy as np
import pandas as pd

from config.settings import DEFAULT_EPS_GAP, DEFAULT_TAIL_TOL, DEFAULT_THETA, POLE_GUARD
from scatterer.errors import DomainError, PoleError
from scatterer.lattice import LatticeSpec, LatticeVector, annulus_block, enumerate_vectors
from scatterer.spectral import PerturbedSpectrum, SpectralParams, evaluator_for
from scatterer.tails import choose_cutoff, tail_inverse_square_shift
from scatterer.utils import parallel_map

logger = logging.getLogger(__name__)

FULL = "full"
GREEN_SCALE = 1.0 / (16.0 * math.pi ** 4)
POINT_BLOCK = 4096
DEFAULT_GRID = 512
REAL_TOL = 1e-10

Truncation = Union[float, str]


# =============================================================================
# TYPES
# =============================================================================

@dataclass(frozen=True)
class GreensContext:
    spec: LatticeSpec
    lam: float
    x0: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        lam = float(self.lam)
        if not math.isfinite(lam):
            raise DomainError(f"lambda must be finite, got {self.lam}")
        guard = POLE_GUARD * max(1.0, abs(lam))
        hits = enumerate_vectors(self.spec, lam - guard, lam + guard)
        if len(hits):
            nearest = float(hits.norm[0])
            raise PoleError(f"lambda={lam!r} lies on the norm {nearest!r}", nearest=nearest)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "x0", self.wrap(self.x0))

    @property
    def periods(self) -> Tuple[float, float]:
        """Side lengths 2 pi/a and 2 pi a of the fundamental domain."""
        a = math.sqrt(self.spec.a2)
        return (2.0 * math.pi / a, 2.0 * math.pi * a)

    def wrap(self, point) -> Tuple[float, float]:
        px, py = self.periods
        return (float(point[0]) % px, float(point[1]) % py)

    def phase(self, zeta: LatticeVector) -> complex:
        """e^{i <zeta, x0>}."""
        a = math.sqrt(self.spec.a2)
        return complex(np.exp(1j * (zeta.m * a * self.x0[0] + zeta.n * self.x0[1] / a)))


@dataclass(frozen=True, eq=False)
class GreensTruncation:
    context: GreensContext
    L: float
    m: np.ndarray
    n: np.ndarray
    norms: np.ndarray
    values: np.ndarray
    norm_sq_trunc: float
    tail_tol: float = DEFAULT_TAIL_TOL

    def __len__(self) -> int:
        return int(self.values.size)

    @cached_property
    def norm_sq_full(self) -> float:
        return green_norm_sq(self.context, self.tail_tol)

    @property
    def empty(self) -> bool:
        return self.values.size == 0

    @cached_property
    def coeffs(self) -> Dict[Tuple[int, int], float]:
        """Ordered map (m, n) -> c(xi) over the annulus."""
        return {(int(m), int(n)): float(c) for m, n, c in zip(self.m, self.n, self.values)}


@dataclass(frozen=True)
class TruncationError:
    defect: float
    normalized_distance: float
    bound: float


@dataclass(frozen=True)
class Observable:
    """Trigonometric polynomial a(x) = sum a_zeta e^{i <zeta, x>}, keys (m, n)."""

    coeffs: Dict[Tuple[int, int], complex] = field(default_factory=dict)

    @property
    def mean(self) -> complex:
        return complex(self.coeffs.get((0, 0), 0.0))

    @property
    def is_real(self) -> bool:
        for (m, n), value in self.coeffs.items():
            partner = complex(self.coeffs.get((-m, -n), 0.0))
            if abs(partner - complex(value).conjugate()) > 1e-15 * max(1.0, abs(value)):
                return False
        return True

    @classmethod
    def constant(cls, value: float = 1.0) -> "Observable":
        return cls({(0, 0): complex(value)})

    @classmethod
    def exponential(cls, zeta: LatticeVector) -> "Observable":
        return cls({(zeta.m, zeta.n): 1.0 + 0j})

    @classmethod
    def cosine(cls, zeta: LatticeVector) -> "Observable":
        if zeta.is_zero:
            return cls.constant()
        return cls({(zeta.m, zeta.n): 0.5 + 0j, (-zeta.m, -zeta.n): 0.5 + 0j})

    @classmethod
    def sine(cls, zeta: LatticeVector) -> "Observable":
        if zeta.is_zero:
            return cls({})
        return cls({(zeta.m, zeta.n): -0.5j, (-zeta.m, -zeta.n): 0.5j})

    def evaluate(self, spec: LatticeSpec, x, y) -> np.ndarray:
        a = math.sqrt(spec.a2)
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        total = np.zeros(np.broadcast(x, y).shape, dtype=complex)
        for (m, n), value in self.coeffs.items():
            total += value * np.exp(1j * (m * a * x + n * y / a))
        return total


# =============================================================================
# NORMS AND TRUNCATIONS
# =============================================================================

def green_norm_sq(context: GreensContext, tail_tol: float = DEFAULT_TAIL_TOL, theta: float = DEFAULT_THETA) -> float:
    """||G_lambda||^2 = (1/16 pi^4) sum_xi 1/(|xi|^2 - lambda)^2."""
    params = SpectralParams(tail_tol=tail_tol, theta=theta)
    return GREEN_SCALE * evaluator_for(context.spec, context.lam, params).derivative(context.lam)


def truncate(context: GreensContext, L: float, tail_tol: float = DEFAULT_TAIL_TOL) -> GreensTruncation:
    """Coefficients c(xi) over A(lambda, L), in annulus order."""
    block = annulus_block(context.spec, context.lam, L)
    values = 1.0 / (block.norm - context.lam)
    if values.size == 0:
        logger.debug(f"Empty annulus at lambda={context.lam:g}, L={L:g}")
    return GreensTruncation(
        context=context,
        L=float(L),
        m=block.m,
        n=block.n,
        norms=block.norm,
        values=values,
        norm_sq_trunc=GREEN_SCALE * float(np.sum(values * values)),
        tail_tol=tail_tol,
    )


def truncation_error(context: GreensContext, L: float, tail_tol: float = DEFAULT_TAIL_TOL) -> TruncationError:
    """
    Relative L^2 defect ||G - G_L|| / ||G|| = sqrt(1 - ||G_L||^2/||G||^2),
    the distance ||g - g_L|| of the normalized functions, and the bound
    2 ||G - G_L|| / ||G|| on the latter.
    """
    trunc = truncate(context, L, tail_tol)
    ratio = min(trunc.norm_sq_trunc / trunc.norm_sq_full, 1.0)
    defect = math.sqrt(1.0 - ratio)
    normalized = math.sqrt(max(2.0 - 2.0 * math.sqrt(ratio), 0.0))
    return TruncationError(defect=defect, normalized_distance=normalized, bound=2.0 * defect)


# =============================================================================
# MATRIX ELEMENTS
# =============================================================================

def _encode(m: np.ndarray, n: np.ndarray, offset: int) -> np.ndarray:
    width = 2 * offset + 1
    return (m + offset) * width + (n + offset)


def _truncated_overlap(trunc: GreensTruncation, zeta: LatticeVector) -> float:
    """sum over xi in A with xi - zeta in A of c(xi) c(xi - zeta)."""
    if trunc.empty:
        return 0.0
    offset = int(max(np.abs(trunc.m).max(), np.abs(trunc.n).max())) + abs(zeta.m) + abs(zeta.n) + 1
    codes = _encode(trunc.m, trunc.n, offset)
    order = np.argsort(codes)
    sorted_codes = codes[order]
    shifted = _encode(trunc.m - zeta.m, trunc.n - zeta.n, offset)
    index = np.clip(np.searchsorted(sorted_codes, shifted), 0, sorted_codes.size - 1)
    present = sorted_codes[index] == shifted
    partner = np.zeros_like(trunc.values)
    partner[present] = trunc.values[order[index[present]]]
    return float(np.sum(trunc.values * partner))


def _full_overlap(context: GreensContext, zeta: LatticeVector, tail_tol: float, theta: float) -> Tuple[float, float]:
    """(sum c(xi) c(xi - zeta), sum c(xi)^2) over the whole lattice, tails included."""
    spec, lam = context.spec, context.lam
    reach = 4.0 + abs(lam) ** 0.25
    nearby = enumerate_vectors(spec, lam - reach, lam + reach)
    local = 1.0 / (nearby.norm - lam)
    # the nearby mass bounds sum c^2 from below and sets the tail tolerance scale
    scale = float(np.sum(local * local)) if len(nearby) else 1.0 / (1.0 + lam * lam)
    start = 2.0 ** math.ceil(math.log2(max(4.0 * abs(lam), 64.0)))
    choice = choose_cutoff(spec, theta, lambda t: 1.0 / (t - lam) ** 2, tail_tol * scale, start=start)

    block = enumerate_vectors(spec, -1.0, choice.cutoff)
    c = 1.0 / (block.norm - lam)
    shifted = 1.0 / (spec.norm_sq(block.m - zeta.m, block.n - zeta.n) - lam)
    tail = tail_inverse_square_shift(choice.cutoff, lam)
    return float(np.sum(c * shifted)) + tail, float(np.sum(c * c)) + tail


def matrix_element(
    context: GreensContext,
    L: Truncation,
    zeta: LatticeVector,
    tail_tol: float = DEFAULT_TAIL_TOL,
    theta: float = DEFAULT_THETA,
) -> complex:
    """
    <e_zeta g, g> for the truncation g_{lambda,L} or, with L=FULL, for g_lambda.
    Returns exactly 1 at zeta = 0 and 0 for an empty truncation.
    """
    if zeta.is_zero:
        return complex(1.0)
    if L == FULL:
        numerator, denominator = _full_overlap(context, zeta, tail_tol, theta)
    else:
        trunc = truncate(context, float(L), tail_tol)
        if trunc.empty:
            return complex(0.0)
        numerator = _truncated_overlap(trunc, zeta)
        denominator = float(np.sum(trunc.values * trunc.values))
    return context.phase(zeta) * (numerator / denominator)


def observable_average(
    context: GreensContext,
    observable: Observable,
    L: Truncation,
    tail_tol: float = DEFAULT_TAIL_TOL,
) -> Union[float, complex]:
    """
    Integral of a(x) |g(x)|^2 against the normalized measure.

    A real observable gives a float once the imaginary round-off is below
    REAL_TOL.
    """
    total = 0j
    for (m, n), value in sorted(observable.coeffs.items()):
        total += complex(value) * matrix_element(context, L, context.spec.vector(m, n), tail_tol)
    if observable.is_real and abs(total.imag) < REAL_TOL:
        return total.real
    return total


# =============================================================================
# POINTWISE EVALUATION
# =============================================================================

def eval_pointwise(trunc: GreensTruncation, points, normalized: bool = False):
    """
    G_{lambda,L} at points shaped (..., 2); g_{lambda,L} when normalized.

    Only truncations are evaluated pointwise: the full series converges
    conditionally and not at x0.
    """
    pts = np.asarray(points, dtype=float)
    scalar = pts.ndim == 1
    pts = np.atleast_2d(pts)
    flat = pts.reshape(-1, 2)

    context = trunc.context
    a = math.sqrt(context.spec.a2)
    kx = trunc.m * a
    ky = trunc.n / a
    weights = trunc.values * np.exp(-1j * (kx * context.x0[0] + ky * context.x0[1]))

    out = np.empty(flat.shape[0], dtype=complex)
    for start in range(0, flat.shape[0], POINT_BLOCK):
        part = flat[start:start + POINT_BLOCK]
        phases = np.outer(part[:, 0], kx) + np.outer(part[:, 1], ky)
        out[start:start + POINT_BLOCK] = np.exp(1j * phases) @ weights
    out *= -1.0 / (4.0 * math.pi ** 2)
    if normalized and not trunc.empty:
        out /= math.sqrt(trunc.norm_sq_trunc)

    out = out.reshape(pts.shape[:-1])
    return complex(out[0]) if scalar else out


def _grid_values(trunc: GreensTruncation, size: int) -> np.ndarray:
    """g_{lambda,L} on the size x size grid x_ij = (i Px/size, j Py/size) via FFT."""
    if size < 1:
        raise DomainError(f"grid size must be positive, got {size}")
    context = trunc.context
    a = math.sqrt(context.spec.a2)
    grid = np.zeros((size, size), dtype=complex)
    shift = np.exp(-1j * (trunc.m * a * context.x0[0] + trunc.n / a * context.x0[1]))
    np.add.at(grid, (np.mod(trunc.m, size), np.mod(trunc.n, size)), trunc.values * shift)
    values = np.fft.ifft2(grid) * (size * size) * (-1.0 / (4.0 * math.pi ** 2))
    return values / math.sqrt(trunc.norm_sq_trunc)


def density_grid(trunc: GreensTruncation, size: int = 256) -> pd.DataFrame:
    """|g_{lambda,L}|^2 on a uniform grid; rows x, y, density with mean 1."""
    if trunc.empty:
        raise DomainError("density of an empty truncation is undefined")
    px, py = trunc.context.periods
    density = np.abs(_grid_values(trunc, size)) ** 2
    xs = np.arange(size) * (px / size)
    ys = np.arange(size) * (py / size)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return pd.DataFrame({"x": gx.ravel(), "y": gy.ravel(), "density": density.ravel()})


def quadrature_matrix_element(trunc: GreensTruncation, zeta: LatticeVector, size: int = DEFAULT_GRID) -> complex:
    """
    Trapezoidal rule for the integral of e_zeta |g_{lambda,L}|^2; exact once
    size exceeds the largest frequency of e_zeta |g|^2.
    """
    if trunc.empty:
        return complex(0.0)
    density = np.abs(_grid_values(trunc, size)) ** 2
    index = np.arange(size)
    wave = np.exp(2j * math.pi * np.add.outer(zeta.m * index, zeta.n * index) / size)
    return complex(np.mean(wave * density))


# =============================================================================
# LOWER BOUND SWEEP
# =============================================================================

def norm_lower_bound_sweep(
    spectrum: PerturbedSpectrum,
    epsilon: float = 0.25,
    epsilon_gap: float = DEFAULT_EPS_GAP,
    tail_tol: float = DEFAULT_TAIL_TOL,
) -> pd.DataFrame:
    """
    ||G_lambda|| along the gap-filtered eigenvalues against lambda^(-epsilon).

    The floor is applied to 4 pi^2 ||G_lambda|| = (sum c^2)^(1/2), which the
    nearest-norm term alone keeps above 1/gap. `gap_floor` is that bound for
    ||G_lambda|| itself.
    """
    frame = spectrum.to_frame()
    gaps = frame["n_k1"] - frame["n_k"]
    frame = frame[gaps <= np.power(frame["n_k"], epsilon_gap)].reset_index(drop=True)

    def norm_at(lam: float) -> float:
        return math.sqrt(green_norm_sq(GreensContext(spectrum.spec, lam), tail_tol, spectrum.params.theta))

    norms = np.array(parallel_map(norm_at, frame["lambda_k"].tolist()), dtype=float)
    out = pd.DataFrame({
        "lambda": frame["lambda_k"],
        "gap": frame["n_k1"] - frame["n_k"],
        "green_norm": norms,
    })
    out["scaled_norm"] = 4.0 * math.pi ** 2 * out["green_norm"]
    out["floor"] = np.power(out["lambda"], -epsilon)
    out["gap_floor"] = 1.0 / (4.0 * math.pi ** 2 * out["gap"])
    out["passes"] = out["scaled_norm"] >= out["floor"]
    logger.info(f"Norm lower bound sweep: {int(out['passes'].sum())}/{len(out)} above lambda^-{epsilon:g}")
    return out
