"""
Density-one subsequences of the perturbed spectrum.

- Lambda_g: eigenvalues whose bracketing gap n_{k+1} - n_k is at most n_k^eps
- S_zeta: lattice vectors eta with |<eta, zeta>| <= |eta|^(2 delta)
- Lambda_zeta: eigenvalues whose annulus A(lambda, lambda^delta) avoids S_zeta
- Lambda_J: Lambda_g intersected with Lambda_zeta for every 0 < |zeta| <= J

Every excluded eigenvalue carries a witness that can be re-verified.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from config.settings import DEFAULT_DELTA, DEFAULT_EPS_GAP, DEFAULT_THETA
from scatterer.errors import DomainError
from scatterer.lattice import LatticeSpec, LatticeVector, annulus_block, enumerate_vectors
from scatterer.spectral import PerturbedSpectrum
from scatterer.utils import dyadic_window, fit_power_law

logger = logging.getLogger(__name__)


# =============================================================================
# TYPES
# =============================================================================

class SieveParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    delta: float = DEFAULT_DELTA
    epsilon_gap: float = Field(default=DEFAULT_EPS_GAP, ge=0)
    theta: float = DEFAULT_THETA

    @model_validator(mode="after")
    def _window(self):
        if not self.theta < 1.0 / 3.0:
            raise ValueError(f"theta must be below 1/3 for a nonempty delta window, got {self.theta}")
        lo, hi = delta_window(self.theta)
        if not lo < self.delta < hi:
            raise ValueError(f"delta must lie in ({lo:.6f}, {hi:.6f}) for theta={self.theta:.6f}, got {self.delta}")
        return self


@dataclass(frozen=True)
class Witness:
    """Why an eigenvalue was excluded: an oversized gap or a vector of A(lambda, lambda^delta) in S_zeta."""

    lam: float
    kind: str
    norm: float
    gap: float = math.nan
    m: Optional[int] = None
    n: Optional[int] = None
    zeta: Optional[Tuple[int, int]] = None


@dataclass(eq=False)
class SieveReport:
    frame: pd.DataFrame
    witnesses: List[Witness]
    extras: Dict[str, float] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return int(len(self.frame))

    @property
    def kept(self) -> int:
        return int(self.frame["kept"].sum())

    @property
    def excluded(self) -> int:
        return self.total - self.kept

    @property
    def density(self) -> float:
        return self.kept / self.total if self.total else math.nan

    @property
    def kept_mask(self) -> np.ndarray:
        return self.frame["kept"].to_numpy(dtype=bool)

    @property
    def kept_lambdas(self) -> np.ndarray:
        return self.frame.loc[self.frame["kept"], "lambda"].to_numpy(dtype=float)

    def windows(self) -> pd.DataFrame:
        """Kept fraction per dyadic window [2^j, 2^(j+1)) of lambda."""
        df = self.frame[["lambda", "kept"]].copy()
        df["window"] = dyadic_window(df["lambda"])
        out = df.groupby("window").agg(total=("kept", "size"), kept=("kept", "sum")).reset_index()
        out["density"] = out["kept"] / out["total"]
        out["lo"] = np.power(2.0, out["window"])
        return out[["window", "lo", "total", "kept", "density"]]

    def summary(self) -> dict:
        return {
            "total": self.total,
            "kept": self.kept,
            "density": self.density,
            "windows": self.windows().to_dict(orient="records"),
            **self.extras,
        }


def delta_window(theta: float = DEFAULT_THETA) -> Tuple[float, float]:
    """Legal annulus exponents (theta/2, 1/2 - theta)."""
    return (0.5 * theta, 0.5 - theta)


def _report(spectrum: PerturbedSpectrum, kept: np.ndarray, witnesses: List[Witness], extras=None) -> SieveReport:
    by_lam = {w.lam: w for w in witnesses}
    rows_m, rows_n, rows_norm = [], [], []
    for lam in spectrum.lambdas:
        w = by_lam.get(float(lam))
        rows_m.append(w.m if w is not None else None)
        rows_n.append(w.n if w is not None else None)
        rows_norm.append(w.norm if w is not None else math.nan)
    frame = pd.DataFrame({
        "lambda": spectrum.lambdas,
        "kept": np.asarray(kept, dtype=bool),
        "witness_m": pd.array(rows_m, dtype="Int64"),
        "witness_n": pd.array(rows_n, dtype="Int64"),
        "witness_norm": np.asarray(rows_norm, dtype=float),
    })
    return SieveReport(frame=frame, witnesses=witnesses, extras=dict(extras or {}))


# =============================================================================
# GAP FILTER
# =============================================================================

def _gap_mask(spectrum: PerturbedSpectrum, epsilon_gap: float) -> np.ndarray:
    gaps = spectrum.uppers - spectrum.lowers
    return gaps <= np.power(spectrum.lowers, epsilon_gap)


def _gap_witness(spectrum: PerturbedSpectrum, i: int) -> Witness:
    entry = spectrum.entries[i]
    return Witness(lam=entry.lam, kind="gap", norm=entry.upper, gap=entry.upper - entry.lower)


def lambda_g_filter(spectrum: PerturbedSpectrum, epsilon_gap: float = DEFAULT_EPS_GAP) -> SieveReport:
    """Keep lambda_k iff n_{k+1} - n_k <= n_k^epsilon_gap."""
    if len(spectrum) == 0:
        raise DomainError("gap filter needs a nonempty spectrum")
    if epsilon_gap < 0:
        raise DomainError(f"epsilon_gap must be nonnegative, got {epsilon_gap}")
    kept = _gap_mask(spectrum, epsilon_gap)
    witnesses = [_gap_witness(spectrum, i) for i in np.flatnonzero(~kept)]
    report = _report(spectrum, kept, witnesses, {"epsilon_gap": float(epsilon_gap)})
    logger.info(f"Lambda_g (eps={epsilon_gap:g}): kept {report.kept}/{report.total}")
    return report


# =============================================================================
# S_zeta
# =============================================================================

def _require_nonzero(zeta: LatticeVector) -> None:
    if zeta.is_zero:
        raise DomainError("zeta must be a nonzero dual-lattice vector")


def _strip_mask(spec: LatticeSpec, m, n, norm, zeta: LatticeVector, delta: float) -> np.ndarray:
    inner = spec.inner(m, n, zeta.m, zeta.n)
    return (norm > 0) & (np.abs(inner) <= np.power(norm, delta))


def s_zeta_membership(eta: LatticeVector, zeta: LatticeVector, delta: float) -> bool:
    """|<eta, zeta>| <= |eta|^(2 delta); eta = 0 is never a member."""
    _require_nonzero(zeta)
    if eta.is_zero:
        return False
    return abs(eta.inner(zeta)) <= eta.norm_sq ** delta


def s_zeta_count(spec: LatticeSpec, zeta: LatticeVector, delta: float, X: float) -> Tuple[int, float]:
    """(#{0 < |eta|^2 <= X : eta in S_zeta}, count / (X^(1/2 + delta) / |zeta|))."""
    _require_nonzero(zeta)
    if not X > 0:
        raise DomainError(f"X must be positive, got {X}")
    block = enumerate_vectors(spec, 0.0, X)
    count = int(_strip_mask(spec, block.m, block.n, block.norm, zeta, delta).sum())
    return count, count / (X ** (0.5 + delta) / zeta.length)


# =============================================================================
# ANNULUS FILTER
# =============================================================================

def _strip_members(spec: LatticeSpec, zeta: LatticeVector, delta: float, reach: float):
    block = enumerate_vectors(spec, 0.0, reach)
    members = block.subset(_strip_mask(spec, block.m, block.n, block.norm, zeta, delta))
    order = np.argsort(members.norm, kind="stable")
    return members.subset(order)


def _zeta_hits(spectrum: PerturbedSpectrum, zeta: LatticeVector, delta: float):
    """Per lambda, index into the sorted strip members of one annulus hit (or -1)."""
    lams = spectrum.lambdas
    widths = np.power(lams, delta)
    members = _strip_members(spectrum.spec, zeta, delta, float(np.max(lams + widths)) if lams.size else 0.0)
    lo = np.searchsorted(members.norm, lams - widths, side="right")
    hi = np.searchsorted(members.norm, lams + widths, side="left")
    hits = np.where(hi > lo, lo, -1)
    return hits, members


def verify_witness(spec: LatticeSpec, witness: Witness, delta: float, epsilon_gap: float) -> bool:
    """Re-derive the exclusion from the witness alone."""
    if witness.kind == "gap":
        lower = witness.norm - witness.gap
        return witness.gap > lower ** epsilon_gap
    eta = spec.vector(witness.m, witness.n)
    zeta = spec.vector(*witness.zeta)
    width = witness.lam ** delta
    inside = witness.lam - width < eta.norm_sq < witness.lam + width
    return inside and s_zeta_membership(eta, zeta, delta)


def _recheck_kept(spec: LatticeSpec, lam: float, zeta: LatticeVector, delta: float) -> bool:
    block = annulus_block(spec, lam, lam ** delta)
    return not _strip_mask(spec, block.m, block.n, block.norm, zeta, delta).any()


def _b_zeta_fit(lams: np.ndarray, excluded: np.ndarray) -> Tuple[float, float]:
    """Fit #B_zeta(x) ~ C x^e over dyadic x up to the largest eigenvalue."""
    if not lams.size:
        return (math.nan, math.nan)
    top = int(math.floor(math.log2(lams.max())))
    xs = [2.0 ** j for j in range(3, top + 1)]
    counts = [int(np.sum(excluded & (lams <= x))) for x in xs]
    return fit_power_law(xs, counts)


def lambda_zeta_filter(
    spectrum: PerturbedSpectrum,
    zeta: LatticeVector,
    delta: float = DEFAULT_DELTA,
    theta: float = DEFAULT_THETA,
    verify: bool = False,
) -> SieveReport:
    """
    Keep lambda iff A(lambda, lambda^delta) contains no vector of S_zeta.

    With verify=True every kept eigenvalue is rechecked by enumerating its
    annulus and every witness is re-verified; the outcome is in
    extras["verified"].
    """
    _require_nonzero(zeta)
    SieveParams(delta=delta, theta=theta)
    spec = spectrum.spec
    hits, members = _zeta_hits(spectrum, zeta, delta)
    kept = hits < 0

    witnesses = []
    for i in np.flatnonzero(~kept):
        j = int(hits[i])
        witnesses.append(Witness(
            lam=float(spectrum.lambdas[i]),
            kind="strip",
            norm=float(members.norm[j]),
            m=int(members.m[j]),
            n=int(members.n[j]),
            zeta=(zeta.m, zeta.n),
        ))

    exponent, constant = _b_zeta_fit(spectrum.lambdas, ~kept)
    extras = {
        "zeta_m": zeta.m,
        "zeta_n": zeta.n,
        "delta": float(delta),
        "b_zeta_count": int((~kept).sum()),
        "b_zeta_exponent": exponent,
        "b_zeta_constant": constant,
        "b_zeta_bound_exponent": 1.0 - (0.5 - theta - delta),
    }

    if verify:
        ok = all(verify_witness(spec, w, delta, 0.0) for w in witnesses)
        ok = ok and all(_recheck_kept(spec, float(lam), zeta, delta) for lam in spectrum.lambdas[kept])
        extras["verified"] = bool(ok)
        if not ok:
            logger.error(f"Lambda_zeta recheck failed for zeta=({zeta.m},{zeta.n})")

    report = _report(spectrum, kept, witnesses, extras)
    logger.info(
        f"Lambda_zeta zeta=({zeta.m},{zeta.n}) delta={delta:g}: kept {report.kept}/{report.total}, "
        f"B_zeta exponent {exponent:.3f}"
    )
    return report


# =============================================================================
# FINITE-J INTERSECTION
# =============================================================================

def zeta_representatives(spec: LatticeSpec, J: float) -> List[LatticeVector]:
    """One vector (|m|, |n|) per reflection orbit of 0 < |zeta| <= J."""
    if not J >= 1:
        raise DomainError(f"J must be at least 1, got {J}")
    block = enumerate_vectors(spec, 0.0, float(J) * float(J))
    reps = sorted({(abs(int(m)), abs(int(n))) for m, n in zip(block.m, block.n)})
    vectors = [spec.vector(m, n) for m, n in reps]
    return sorted(vectors, key=lambda v: (v.norm_sq, v.m, v.n))


def lambda_J_intersection(
    spectrum: PerturbedSpectrum,
    J: float,
    delta: float = DEFAULT_DELTA,
    epsilon_gap: float = DEFAULT_EPS_GAP,
    theta: float = DEFAULT_THETA,
) -> SieveReport:
    """Lambda_g intersected with Lambda_zeta over the orbit representatives of |zeta| <= J."""
    SieveParams(delta=delta, epsilon_gap=epsilon_gap, theta=theta)
    if len(spectrum) == 0:
        raise DomainError("intersection needs a nonempty spectrum")
    zetas = zeta_representatives(spectrum.spec, J)

    kept = _gap_mask(spectrum, epsilon_gap)
    witnesses: Dict[int, Witness] = {int(i): _gap_witness(spectrum, int(i)) for i in np.flatnonzero(~kept)}
    for zeta in zetas:
        hits, members = _zeta_hits(spectrum, zeta, delta)
        for i in np.flatnonzero(kept & (hits >= 0)):
            j = int(hits[i])
            witnesses[int(i)] = Witness(
                lam=float(spectrum.lambdas[i]),
                kind="strip",
                norm=float(members.norm[j]),
                m=int(members.m[j]),
                n=int(members.n[j]),
                zeta=(zeta.m, zeta.n),
            )
        kept = kept & (hits < 0)

    extras = {
        "J": float(J),
        "zetas": len(zetas),
        "delta": float(delta),
        "epsilon_gap": float(epsilon_gap),
    }
    report = _report(spectrum, kept, [witnesses[i] for i in sorted(witnesses)], extras)
    logger.info(f"Lambda_J J={J:g} ({len(zetas)} zeta orbits): kept {report.kept}/{report.total}")
    return report
