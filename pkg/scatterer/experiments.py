"""
Desk-scale experiments composed from the library modules.

Each experiment returns a per-item DataFrame plus a per-dyadic-window
summary, ready for export.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np
import pandas as pd

from config.settings import DEFAULT_DELTA, DEFAULT_EPS_GAP, DEFAULT_TAIL_TOL, DEFAULT_THETA
from scatterer.greens import FULL, GreensContext, Truncation, matrix_element, truncation_error
from scatterer.lattice import LatticeSpec, LatticeVector
from scatterer.rankone import FiniteModel, eigen_residual, oracle_delta, random_model, solve_secular
from scatterer.sieves import lambda_g_filter, lambda_zeta_filter
from scatterer.spectral import PerturbedSpectrum, SpectralParams, perturbed_spectrum
from scatterer.utils import dyadic_window, parallel_map

logger = logging.getLogger(__name__)


@dataclass
class ExperimentResult:
    rows: pd.DataFrame
    windows: pd.DataFrame
    summary: Dict = field(default_factory=dict)


def _window_medians(frame: pd.DataFrame, column: str) -> pd.DataFrame:
    df = frame.copy()
    df["window"] = dyadic_window(df["lambda"])
    out = df.groupby("window").agg(count=(column, "size"), median=(column, "median")).reset_index()
    out["lo"] = np.power(2.0, out["window"])
    return out[["window", "lo", "count", "median"]]


def _flag_nondecreasing(windows: pd.DataFrame) -> pd.DataFrame:
    """Mark windows whose median does not drop below the previous window's."""
    medians = windows["median"].to_numpy()
    flags = np.zeros(medians.size, dtype=bool)
    flags[1:] = medians[1:] >= medians[:-1]
    windows = windows.copy()
    windows["nondecreasing"] = flags
    return windows


# =============================================================================
# MATRIX ELEMENTS
# =============================================================================

def matrix_element_grid(
    spec: LatticeSpec,
    lambdas: Sequence[float],
    zetas: Sequence[LatticeVector],
    L: Optional[Truncation] = None,
    x0=(0.0, 0.0),
    delta: float = DEFAULT_DELTA,
    tail_tol: float = DEFAULT_TAIL_TOL,
) -> pd.DataFrame:
    """
    Rows lambda, zeta_m, zeta_n, L, re, im, abs in (lambda, zeta) order.

    L=None truncates each eigenfunction to lambda^delta; FULL is written as L=inf.
    """
    cases = [(float(lam), zeta) for lam in lambdas for zeta in zetas]

    def width(lam: float) -> Truncation:
        return lam ** delta if L is None else L

    def run(case):
        lam, zeta = case
        return matrix_element(GreensContext(spec, lam, tuple(x0)), width(lam), zeta, tail_tol)

    values = parallel_map(run, cases)
    return pd.DataFrame({
        "lambda": [c[0] for c in cases],
        "zeta_m": [c[1].m for c in cases],
        "zeta_n": [c[1].n for c in cases],
        "L": [math.inf if width(c[0]) == FULL else float(width(c[0])) for c in cases],
        "re": [v.real for v in values],
        "im": [v.imag for v in values],
        "abs": [abs(v) for v in values],
    })


def equidistribution_experiment(
    spec: LatticeSpec,
    zeta: LatticeVector,
    X: float,
    phi: float = 0.0,
    delta: float = DEFAULT_DELTA,
    epsilon_gap: float = DEFAULT_EPS_GAP,
    theta: float = DEFAULT_THETA,
    L: Optional[Truncation] = FULL,
    spectrum: Optional[PerturbedSpectrum] = None,
    tail_tol: float = DEFAULT_TAIL_TOL,
) -> ExperimentResult:
    """
    |<e_zeta g_lambda, g_lambda>| along Lambda_g intersected with Lambda_zeta.

    The full eigenfunction is used unless L is given: a number truncates to
    that half-width, None to lambda^delta. The lambda^delta truncation of a
    kept eigenvalue has no pair xi, xi - zeta in its annulus, so its matrix
    element is 0. Medians per dyadic window should fall as lambda grows.
    """
    if spectrum is None:
        spectrum = perturbed_spectrum(spec, phi, X, SpectralParams(phi=phi, theta=theta, tail_tol=tail_tol))
    kept = lambda_g_filter(spectrum, epsilon_gap).kept_mask & lambda_zeta_filter(spectrum, zeta, delta, theta).kept_mask
    lams = spectrum.lambdas[kept]

    def run(lam: float) -> complex:
        width = lam ** delta if L is None else L
        return matrix_element(GreensContext(spec, lam), width, zeta, tail_tol, theta)

    values = parallel_map(run, lams.tolist())
    rows = pd.DataFrame({"lambda": lams, "abs": [abs(v) for v in values]})
    windows = _flag_nondecreasing(_window_medians(rows, "abs"))
    summary = {
        "lattice": spec.label,
        "zeta_m": zeta.m,
        "zeta_n": zeta.n,
        "L": FULL if L == FULL else ("lambda^delta" if L is None else float(L)),
        "X": float(X),
        "total": len(spectrum),
        "kept": int(kept.sum()),
        "windows": windows.to_dict(orient="records"),
        "windows_nondecreasing": int(windows["nondecreasing"].sum()),
    }
    logger.info(
        f"Equidistribution zeta=({zeta.m},{zeta.n}) X={X:g}: {int(kept.sum())} eigenvalues, "
        f"{summary['windows_nondecreasing']}/{len(windows)} windows nondecreasing"
    )
    return ExperimentResult(rows=rows, windows=windows, summary=summary)


# =============================================================================
# TRUNCATION DECAY
# =============================================================================

def truncation_decay(
    spectrum: PerturbedSpectrum,
    exponent: float = 0.4,
    epsilon_gap: float = DEFAULT_EPS_GAP,
    tail_tol: float = DEFAULT_TAIL_TOL,
) -> ExperimentResult:
    """Defect ||G - G_L||/||G|| with L = lambda^exponent along Lambda_g."""
    lams = spectrum.lambdas[lambda_g_filter(spectrum, epsilon_gap).kept_mask]

    def run(lam: float):
        return truncation_error(GreensContext(spectrum.spec, lam), lam ** exponent, tail_tol)

    errors = parallel_map(run, lams.tolist())
    rows = pd.DataFrame({
        "lambda": lams,
        "L": np.power(lams, exponent),
        "defect": [e.defect for e in errors],
        "bound": [e.bound for e in errors],
    })
    windows = _flag_nondecreasing(_window_medians(rows, "defect"))
    summary = {
        "lattice": spectrum.spec.label,
        "exponent": exponent,
        "count": int(lams.size),
        "windows": windows.to_dict(orient="records"),
    }
    return ExperimentResult(rows=rows, windows=windows, summary=summary)


# =============================================================================
# RANK-ONE ORACLE
# =============================================================================

def rankone_oracle_suite(
    seed: int = 0,
    count: int = 100,
    min_dim: int = 2,
    max_dim: int = 64,
) -> ExperimentResult:
    """Secular solver against the dense eigensolver on seeded random models."""
    rng = np.random.default_rng(seed)
    rows = []
    for index in range(count):
        dimension = int(rng.integers(min_dim, max_dim + 1))
        model = random_model(rng, dimension)
        solution = solve_secular(model)
        residual = max(
            (eigen_residual(model, E, u) for E, u in zip(solution.new_eigenvalues, solution.eigenvectors)),
            default=0.0,
        )
        rows.append({
            "model": index,
            "dimension": dimension,
            "alpha": model.alpha,
            "roots": len(solution.new_eigenvalues),
            "untouched": len(solution.untouched),
            "oracle_delta": oracle_delta(model),
            "max_residual": residual,
        })
    frame = pd.DataFrame(rows)
    summary = {
        "seed": seed,
        "models": count,
        "max_oracle_delta": float(frame["oracle_delta"].max()) if count else 0.0,
        "max_residual": float(frame["max_residual"].max()) if count else 0.0,
    }
    logger.info(f"Rank-one oracle: {count} models, max delta {summary['max_oracle_delta']:.2e}")
    return ExperimentResult(rows=frame, windows=pd.DataFrame(), summary=summary)


def rankone_demo() -> Dict:
    """The 2x2 model eps=[0,1], v=[1,1], alpha=1 with roots (3 +- sqrt 5)/2."""
    model = FiniteModel(eps=[0.0, 1.0], v_coeffs=[1.0, 1.0], alpha=1.0)
    solution = solve_secular(model)
    exact = [(3.0 - math.sqrt(5.0)) / 2.0, (3.0 + math.sqrt(5.0)) / 2.0]
    return {
        "eps": model.eps,
        "v_coeffs": model.v_coeffs,
        "alpha": model.alpha,
        "roots": solution.new_eigenvalues,
        "exact": exact,
        "max_error": max(abs(a - b) for a, b in zip(solution.new_eigenvalues, exact)),
        "oracle_delta": oracle_delta(model),
    }
