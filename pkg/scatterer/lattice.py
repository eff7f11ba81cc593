"""
Dual-lattice enumeration and counting for the flat torus R^2 / 2*pi*L0.

The dual lattice is {(m*a, n/a) : m, n in Z}, so every vector has norm
|xi|^2 = a^2 m^2 + n^2 / a^2. Equal norms are detected exactly:

- rational tori (a^4 = p/q): key = p*m^2 + q*n^2, and |xi|^2 = key / sqrt(p*q)
- irrational-generic tori:   key = (m^2, n^2)

Provides:
- LatticeSpec / LatticeVector / NormEntry / NormTable types
- build_norm_table, count_upto, weyl_residual
- annulus_points (and the array form used by the Green's function code)
- gap_stats and the Landau / Weyl-remainder diagnostics
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from config.settings import DEFAULT_EPS_GAP, MAX_NORM_CUTOFF, REPRESENTATIVE_CAP
from scatterer.errors import CapacityError, DomainError, RangeError
from scatterer.utils import dyadic_window, fit_power_law

logger = logging.getLogger(__name__)

# Landau-Ramanujan constant: #{n <= x : n = u^2 + v^2} ~ B x / sqrt(log x)
LANDAU_RAMANUJAN = 0.7642236535892206

# Exact integer keys must stay below this bound
_KEY_LIMIT = 2 ** 62


# =============================================================================
# TYPES
# =============================================================================

@dataclass(frozen=True)
class LatticeSpec:
    """
    Torus parameterization.

    a4 is the exact rational a^4 = p/q, or None for a torus declared
    irrational-generic, in which case a2 carries the real a^2.
    """

    a4: Optional[Fraction]
    a2: float

    def __post_init__(self):
        if self.a4 is not None:
            if self.a4 <= 0:
                raise DomainError(f"a^4 must be positive, got {self.a4}")
            expected = math.sqrt(self.a4.numerator / self.a4.denominator)
            if abs(expected - self.a2) > 1e-14 * expected:
                raise DomainError(f"a^2={self.a2} does not match sqrt({self.a4})")
        if not (math.isfinite(self.a2) and self.a2 > 0):
            raise DomainError(f"a^2 must be a positive finite number, got {self.a2}")

    @classmethod
    def rational(cls, p: int, q: int = 1) -> "LatticeSpec":
        if int(p) != p or int(q) != q or p < 1 or q < 1:
            raise DomainError(f"rational lattice needs integers p, q >= 1, got {p}/{q}")
        a4 = Fraction(int(p), int(q))
        return cls(a4=a4, a2=math.sqrt(a4.numerator / a4.denominator))

    @classmethod
    def irrational(cls, a2: float) -> "LatticeSpec":
        """Torus whose a^4 the caller declares irrational; a2 is not inspected."""
        return cls(a4=None, a2=float(a2))

    @classmethod
    def parse(cls, text: str) -> "LatticeSpec":
        """Parse "p/q", "p" or "irr:<a2>"."""
        text = str(text).strip()
        if text.lower().startswith("irr:"):
            try:
                return cls.irrational(float(text[4:]))
            except ValueError:
                raise DomainError(f"invalid irrational lattice '{text}'") from None
        parts = text.split("/")
        try:
            if len(parts) == 1:
                return cls.rational(int(parts[0]), 1)
            if len(parts) == 2:
                return cls.rational(int(parts[0]), int(parts[1]))
        except ValueError:
            pass
        raise DomainError(f"invalid lattice '{text}' (expected p/q or irr:<a2>)")

    @property
    def is_rational(self) -> bool:
        return self.a4 is not None

    @property
    def p(self) -> Optional[int]:
        return self.a4.numerator if self.a4 is not None else None

    @property
    def q(self) -> Optional[int]:
        return self.a4.denominator if self.a4 is not None else None

    @property
    def sqrt_pq(self) -> float:
        return math.sqrt(self.p * self.q)

    @property
    def label(self) -> str:
        if self.is_rational:
            return f"{self.p}/{self.q}"
        return f"irr:{self.a2!r}"

    @property
    def cell_diameter(self) -> float:
        """Diameter of the dual fundamental cell (sides a and 1/a)."""
        return math.sqrt(self.a2 + 1.0 / self.a2)

    def norm_sq(self, m, n):
        """Norm |xi|^2 of (m, n); scalars or arrays."""
        if self.is_rational:
            key = self.p * np.square(m) + self.q * np.square(n)
            return key / self.sqrt_pq
        return self.a2 * np.square(m) + np.square(n) / self.a2

    def key_of(self, m: int, n: int) -> Union[int, Tuple[int, int]]:
        if self.is_rational:
            return self.p * m * m + self.q * n * n
        return (m * m, n * n)

    def inner(self, m1, n1, m2, n2):
        """Euclidean inner product <(m1 a, n1/a), (m2 a, n2/a)>."""
        return self.a2 * m1 * m2 + n1 * n2 / self.a2

    def vector(self, m: int, n: int) -> "LatticeVector":
        m, n = int(m), int(n)
        return LatticeVector(m=m, n=n, norm_sq=float(self.norm_sq(m, n)), key=self.key_of(m, n), a2=self.a2)


@dataclass(frozen=True)
class LatticeVector:
    m: int
    n: int
    norm_sq: float
    key: Union[int, Tuple[int, int]]
    a2: float = field(default=1.0, repr=False, compare=False)

    @property
    def coords(self) -> Tuple[float, float]:
        a = math.sqrt(self.a2)
        return (self.m * a, self.n / a)

    @property
    def length(self) -> float:
        return math.sqrt(self.norm_sq)

    @property
    def is_zero(self) -> bool:
        return self.m == 0 and self.n == 0

    def inner(self, other: "LatticeVector") -> float:
        return self.a2 * self.m * other.m + self.n * other.n / self.a2


@dataclass(frozen=True)
class NormEntry:
    norm: float
    key: Union[int, Tuple[int, int]]
    multiplicity: int
    representatives: Tuple[LatticeVector, ...]


@dataclass(frozen=True)
class VectorBlock:
    """Flat arrays describing a set of lattice vectors (internal exchange format)."""

    m: np.ndarray
    n: np.ndarray
    norm: np.ndarray
    code: np.ndarray

    def __len__(self) -> int:
        return int(self.m.size)

    def subset(self, mask) -> "VectorBlock":
        return VectorBlock(self.m[mask], self.n[mask], self.norm[mask], self.code[mask])


@dataclass(frozen=True, eq=False)
class NormTable:
    """
    Distinct norms up to X with exact multiplicities.

    Arrays are read-only; `entries` materializes NormEntry objects on demand.
    """

    spec: LatticeSpec
    X: float
    norms: np.ndarray
    codes: np.ndarray
    multiplicities: np.ndarray
    cumulative: np.ndarray
    key_base: int = 0
    vectors: Optional[VectorBlock] = field(default=None, repr=False)
    starts: Optional[np.ndarray] = field(default=None, repr=False)

    def __len__(self) -> int:
        return int(self.norms.size)

    @property
    def total_vectors(self) -> int:
        return int(self.cumulative[-1]) if self.cumulative.size else 0

    @property
    def positive_norms(self) -> np.ndarray:
        return self.norms[self.norms > 0]

    def key_at(self, index: int) -> Union[int, Tuple[int, int]]:
        code = int(self.codes[index])
        if self.spec.is_rational:
            return code
        return (code // self.key_base, code % self.key_base)

    def key_labels(self) -> List[str]:
        if self.spec.is_rational:
            return [str(int(c)) for c in self.codes]
        return [f"{int(c) // self.key_base}:{int(c) % self.key_base}" for c in self.codes]

    def representatives(self, index: int, cap: int = REPRESENTATIVE_CAP) -> Tuple[LatticeVector, ...]:
        if self.vectors is None:
            return ()
        start = int(self.starts[index])
        stop = start + min(int(self.multiplicities[index]), cap)
        key = self.key_at(index)
        norm = float(self.norms[index])
        return tuple(
            LatticeVector(m=int(m), n=int(n), norm_sq=norm, key=key, a2=self.spec.a2)
            for m, n in zip(self.vectors.m[start:stop], self.vectors.n[start:stop])
        )

    @cached_property
    def entries(self) -> List[NormEntry]:
        return [
            NormEntry(
                norm=float(self.norms[i]),
                key=self.key_at(i),
                multiplicity=int(self.multiplicities[i]),
                representatives=self.representatives(i),
            )
            for i in range(len(self))
        ]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "norm": self.norms,
            "key": self.key_labels(),
            "multiplicity": self.multiplicities,
        })


@dataclass(frozen=True)
class GapReport:
    norms: np.ndarray
    gaps: np.ndarray
    max_gap: float
    mean_gap: float
    epsilon: float
    fraction_small: float
    fitted_c: float

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"n_k": self.norms, "gap": self.gaps})

    def windows(self) -> pd.DataFrame:
        """Fraction of gaps <= n_k^epsilon per dyadic window of n_k."""
        df = self.to_frame()
        df["window"] = dyadic_window(df["n_k"])
        df["small"] = df["gap"] <= np.power(df["n_k"], self.epsilon)
        out = df.groupby("window").agg(
            count=("gap", "size"),
            fraction_small=("small", "mean"),
            max_gap=("gap", "max"),
        ).reset_index()
        out["lo"] = np.power(2.0, out["window"])
        out["hi"] = 2.0 * out["lo"]
        return out[["window", "lo", "hi", "count", "fraction_small", "max_gap"]]


# =============================================================================
# ENUMERATION
# =============================================================================

def _check_capacity(spec: LatticeSpec, hi: float) -> Tuple[int, int]:
    """Row bounds for enumeration up to norm hi; raises if keys could overflow."""
    m_max = int(math.floor(math.sqrt(hi / spec.a2))) + 1
    n_max = int(math.floor(math.sqrt(hi * spec.a2))) + 1
    if spec.is_rational:
        largest = spec.p * m_max * m_max + spec.q * n_max * n_max
    else:
        largest = m_max * m_max * (n_max * n_max + 1) + n_max * n_max
    if largest >= _KEY_LIMIT:
        raise CapacityError(f"exact norm keys overflow for cutoff {hi} on lattice {spec.label}")
    return m_max, n_max


def enumerate_vectors(spec: LatticeSpec, lo: float, hi: float, include_hi: bool = True) -> VectorBlock:
    """
    All lattice vectors with lo < |xi|^2 <= hi (or < hi when include_hi is False).

    Rows are enumerated per m; within a row only the n range that can reach
    the shell is generated, so thin annuli are cheap.
    """
    if hi < 0 or (not include_hi and hi <= 0):
        empty = np.zeros(0, dtype=np.int64)
        return VectorBlock(empty, empty, np.zeros(0), empty)

    m_max, n_max = _check_capacity(spec, hi)
    a2 = spec.a2
    ms = np.arange(-m_max, m_max + 1, dtype=np.int64)
    base = a2 * ms.astype(float) ** 2

    top = (hi - base) * a2
    n_hi = np.where(top >= 0, np.floor(np.sqrt(np.clip(top, 0, None))) + 1, -1).astype(np.int64)
    bottom = (lo - base) * a2
    n_lo = np.where(
        bottom > 0,
        np.maximum(np.ceil(np.sqrt(np.clip(bottom, 0, None))) - 1, 0),
        0,
    ).astype(np.int64)

    counts = np.clip(n_hi - n_lo + 1, 0, None)
    total = int(counts.sum())
    m_all = np.repeat(ms, counts)
    offsets = np.repeat(np.cumsum(counts) - counts, counts)
    n_all = np.arange(total, dtype=np.int64) - offsets + np.repeat(n_lo, counts)

    mirrored = n_all > 0
    m_all = np.concatenate([m_all, m_all[mirrored]])
    n_all = np.concatenate([n_all, -n_all[mirrored]])

    if spec.is_rational:
        code = spec.p * m_all * m_all + spec.q * n_all * n_all
        norm = code / spec.sqrt_pq
    else:
        key_base = n_max * n_max + 1
        code = m_all * m_all * key_base + n_all * n_all
        norm = a2 * (m_all * m_all).astype(float) + (n_all * n_all).astype(float) / a2

    keep = (norm > lo) & ((norm <= hi) if include_hi else (norm < hi))
    return VectorBlock(m_all[keep], n_all[keep], norm[keep], code[keep])


def _sort_block(spec: LatticeSpec, block: VectorBlock) -> VectorBlock:
    """Order by norm (exact key for rational tori), then key, then m, then n."""
    if spec.is_rational:
        order = np.lexsort((block.n, block.m, block.code))
    else:
        order = np.lexsort((block.n, block.m, block.code, block.norm))
    return VectorBlock(block.m[order], block.n[order], block.norm[order], block.code[order])


def _freeze(*arrays):
    for arr in arrays:
        if arr is not None:
            arr.flags.writeable = False


@lru_cache(maxsize=8)
def _cached_table(spec: LatticeSpec, X: float, keep_vectors: bool) -> NormTable:
    block = _sort_block(spec, enumerate_vectors(spec, -1.0, X))

    boundaries = np.flatnonzero(np.diff(block.code)) + 1
    starts = np.concatenate([[0], boundaries]).astype(np.int64)
    multiplicities = np.diff(np.concatenate([starts, [len(block)]])).astype(np.int64)
    norms = block.norm[starts].astype(float)
    codes = block.code[starts]

    if norms.size > 1 and not np.all(np.diff(norms) > 0):
        clashes = int(np.sum(np.diff(norms) <= 0))
        logger.warning(f"{clashes} distinct keys share a floating-point norm on {spec.label}")

    key_base = 0
    if not spec.is_rational:
        _, n_max = _check_capacity(spec, X)
        key_base = n_max * n_max + 1

    cumulative = np.cumsum(multiplicities)
    vectors = block if keep_vectors else None
    _freeze(norms, codes, multiplicities, cumulative, starts)
    if vectors is not None:
        _freeze(vectors.m, vectors.n, vectors.norm, vectors.code)

    logger.debug(f"Norm table {spec.label} X={X}: {norms.size} norms, {len(block)} vectors")
    return NormTable(
        spec=spec,
        X=X,
        norms=norms,
        codes=codes,
        multiplicities=multiplicities,
        cumulative=cumulative,
        key_base=key_base,
        vectors=vectors,
        starts=starts if keep_vectors else None,
    )


# =============================================================================
# OPERATIONS
# =============================================================================

def build_norm_table(spec: LatticeSpec, X: float, keep_vectors: bool = True) -> NormTable:
    """
    Every distinct norm <= X with its exact multiplicity.

    Tables are cached per (spec, X); keep_vectors=False skips storing the
    representative vectors (used for tables built only to sum series).
    """
    X = float(X)
    if not math.isfinite(X) or X < 0:
        raise DomainError(f"X must be nonnegative, got {X}")
    if X > MAX_NORM_CUTOFF:
        raise CapacityError(f"X={X} exceeds the norm cutoff cap {MAX_NORM_CUTOFF:g}")
    return _cached_table(spec, X, bool(keep_vectors))


def count_upto(table: NormTable, x: float) -> Tuple[int, int]:
    """(sum of multiplicities, number of distinct norms) over norms <= x."""
    if not (0 <= x <= table.X):
        raise RangeError(f"x={x} outside table range [0, {table.X}]")
    index = int(np.searchsorted(table.norms, x, side="right"))
    if index == 0:
        return (0, 0)
    return (int(table.cumulative[index - 1]), index)


def weyl_residual(table: NormTable, x: float) -> float:
    """N(x) - pi*x, counting vectors with multiplicity."""
    if x <= 0:
        raise RangeError(f"x must be positive, got {x}")
    with_mult, _ = count_upto(table, x)
    return with_mult - math.pi * x


def annulus_block(spec: LatticeSpec, lam: float, L: float) -> VectorBlock:
    """Array form of annulus_points: lam - L < |xi|^2 < lam + L, sorted."""
    if lam <= 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    if L <= 0:
        raise DomainError(f"L must be positive, got {L}")
    return _sort_block(spec, enumerate_vectors(spec, lam - L, lam + L, include_hi=False))


def annulus_points(spec: LatticeSpec, lam: float, L: float) -> List[LatticeVector]:
    """Lattice vectors in the open annulus lam - L < |xi|^2 < lam + L."""
    block = annulus_block(spec, lam, L)
    return [spec.vector(m, n) for m, n in zip(block.m, block.n)]


def gap_stats(table: NormTable, epsilon: float = DEFAULT_EPS_GAP) -> GapReport:
    """Spacings n_{k+1} - n_k between consecutive positive norms."""
    positive = table.positive_norms
    if positive.size < 2:
        raise DomainError("gap statistics need at least two positive norms")

    gaps = np.diff(positive)
    lower = positive[:-1]
    small = gaps <= np.power(lower, epsilon)
    return GapReport(
        norms=lower,
        gaps=gaps,
        max_gap=float(gaps.max()),
        mean_gap=float((positive[-1] - positive[0]) / (positive.size - 1)),
        epsilon=float(epsilon),
        fraction_small=float(small.mean()),
        fitted_c=float(np.max(gaps / np.power(lower, 0.25))),
    )


# =============================================================================
# DIAGNOSTICS
# =============================================================================

def landau_ratio(table: NormTable, x: float) -> float:
    """Distinct norms <= x divided by B x / sqrt(log x)."""
    if x <= math.e:
        raise RangeError(f"x must exceed e for the Landau asymptotic, got {x}")
    _, distinct = count_upto(table, x)
    return distinct / (LANDAU_RAMANUJAN * x / math.sqrt(math.log(x)))


def remainder_sweep(table: NormTable, xs: Sequence[float]) -> pd.DataFrame:
    """Weyl residual N(x) - pi*x and its size relative to sqrt(x)."""
    rows = []
    for x in xs:
        residual = weyl_residual(table, x)
        rows.append({"x": float(x), "residual": residual, "scaled": abs(residual) / math.sqrt(x)})
    return pd.DataFrame(rows)


def remainder_exponent_fit(table: NormTable, xs: Sequence[float]) -> Tuple[float, float]:
    """Fit |N(x) - pi*x| ~ C x^theta; returns (theta, C)."""
    sweep = remainder_sweep(table, xs)
    return fit_power_law(sweep["x"], sweep["residual"].abs())


def remainder_constant(table: NormTable, theta: float, x_min: float = 16.0) -> float:
    """
    max |N(t) - pi t| / t^theta over t in [x_min, table.X].

    N jumps only at norms, so the supremum is attained at a norm, either just
    before or at the jump.
    """
    norms = table.norms
    select = norms >= x_min
    if not select.any():
        raise RangeError(f"table up to {table.X} has no norms above {x_min}")
    at = table.cumulative[select].astype(float)
    before = at - table.multiplicities[select]
    t = norms[select]
    excess = np.maximum(np.abs(at - math.pi * t), np.abs(before - math.pi * t))
    return float(np.max(excess / np.power(t, theta)))
