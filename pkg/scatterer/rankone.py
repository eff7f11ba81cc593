"""
Finite-dimensional rank-one perturbation H = H0 + alpha * v v^T.

H0 is diagonal with eigenvalues eps (ascending) and v has coefficients
<v, phi_n>. Eigenvalues E outside Spec(H0) solve the secular equation

    sum_n |<v, phi_n>|^2 / (E - eps_n) = 1 / alpha

with eigenvector coefficients u_n = <v, phi_n> / (E - eps_n). Degenerate
levels are merged into one pole carrying the summed coupling; the directions
of a level orthogonal to v keep their eigenvalue and are reported in
`untouched`.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from scatterer.errors import DomainError, PoleError
from scatterer.utils import bisect_monotone

logger = logging.getLogger(__name__)

DENSE_ORACLE_MAX_DIM = 1024
POLE_EPS = 1e-300
# bisection runs until the bracket cannot be split (well inside 1e-12*(1+|E|))
ROOT_XTOL = 0.0


# =============================================================================
# MODELS
# =============================================================================

class FiniteModel(BaseModel):
    eps: List[float] = Field(min_length=1)
    v_coeffs: List[float]
    alpha: float

    @model_validator(mode="after")
    def _check(self):
        if len(self.v_coeffs) != len(self.eps):
            raise ValueError("eps and v_coeffs must have the same length")
        if any(b < a for a, b in zip(self.eps, self.eps[1:])):
            raise ValueError("eps must be ascending")
        if not all(math.isfinite(x) for x in self.eps + self.v_coeffs):
            raise ValueError("eps and v_coeffs must be finite")
        if self.alpha == 0 or not math.isfinite(self.alpha):
            raise ValueError("alpha must be a nonzero finite number")
        if not any(c != 0 for c in self.v_coeffs):
            raise ValueError("at least one coupling <v, phi_n> must be nonzero")
        return self

    @property
    def dimension(self) -> int:
        return len(self.eps)


class SecularSolution(BaseModel):
    new_eigenvalues: List[float]
    eigenvectors: List[List[float]]
    untouched: List[int]


@dataclass
class Level:
    """A distinct eigenvalue of H0 with its member indices and total coupling."""

    value: float
    indices: List[int]
    weight: float


# =============================================================================
# SECULAR EQUATION
# =============================================================================

def secular_eval(model: FiniteModel, E: float) -> float:
    """sum_n |<v, phi_n>|^2 / (E - eps_n) - 1/alpha."""
    total = 0.0
    for index, (eps, coupling) in enumerate(zip(model.eps, model.v_coeffs)):
        if coupling == 0:
            continue
        if abs(E - eps) < POLE_EPS:
            raise PoleError(f"secular function evaluated at pole eps[{index}]={eps}", index=index)
        total += coupling * coupling / (E - eps)
    return total - 1.0 / model.alpha


def levels(model: FiniteModel) -> List[Level]:
    """Group equal eps values into levels with aggregated coupling."""
    grouped: List[Level] = []
    for index, (eps, coupling) in enumerate(zip(model.eps, model.v_coeffs)):
        if grouped and grouped[-1].value == eps:
            grouped[-1].indices.append(index)
            grouped[-1].weight += coupling * coupling
        else:
            grouped.append(Level(value=eps, indices=[index], weight=coupling * coupling))
    return grouped


def _untouched_indices(model: FiniteModel, grouped: List[Level]) -> List[int]:
    """Indices whose eps persists: d-1 per coupled level, all of an uncoupled level."""
    untouched = []
    for level in grouped:
        keep = len(level.indices) - (1 if level.weight > 0 else 0)
        if keep <= 0:
            continue
        # zero-coupling directions first, then any other member of the level
        ordered = sorted(level.indices, key=lambda i: (model.v_coeffs[i] != 0, i))
        untouched.extend(sorted(ordered[:keep]))
    return untouched


def _exterior_bracket(func, pole: float, direction: float, alpha: float) -> Tuple[float, float]:
    """Expand geometrically away from the extreme pole until func changes sign."""
    step = max(1.0, abs(pole), abs(1.0 / alpha))
    far = pole + direction * step
    while (func(far) < 0) != (direction > 0):
        step *= 2.0
        far = pole + direction * step
    return (pole, far) if direction > 0 else (far, pole)


def eigenvector(model: FiniteModel, E: float) -> List[float]:
    """Normalized coefficients u_n = <v, phi_n>/(E - eps_n); zero where uncoupled."""
    coeffs = np.array(
        [c / (E - e) if c != 0 else 0.0 for e, c in zip(model.eps, model.v_coeffs)],
        dtype=float,
    )
    norm = float(np.linalg.norm(coeffs))
    return (coeffs / norm).tolist() if norm > 0 else coeffs.tolist()


def solve_secular(model: FiniteModel) -> SecularSolution:
    """
    All eigenvalues of H0 + alpha v v^T that leave Spec(H0).

    One root lies strictly between each pair of consecutive coupled poles; the
    remaining root lies above the top pole for alpha > 0 and below the bottom
    pole for alpha < 0. Every root is found by bisection alone.
    """
    grouped = levels(model)
    poles = [(level.value, level.weight) for level in grouped if level.weight > 0]
    inv_alpha = 1.0 / model.alpha

    def secular(E: float) -> float:
        return sum(w / (E - p) for p, w in poles) - inv_alpha

    brackets = [(poles[i][0], poles[i + 1][0]) for i in range(len(poles) - 1)]
    if model.alpha > 0:
        brackets.append(_exterior_bracket(secular, poles[-1][0], +1.0, model.alpha))
    else:
        brackets.insert(0, _exterior_bracket(secular, poles[0][0], -1.0, model.alpha))

    roots = []
    for lo, hi in brackets:
        # secular is strictly decreasing between poles
        result = bisect_monotone(secular, lo, hi, increasing=False, xtol=ROOT_XTOL)
        roots.append(result.root)

    untouched = _untouched_indices(model, grouped)
    logger.debug(f"Secular solve: {len(roots)} roots, {len(untouched)} untouched levels")
    return SecularSolution(
        new_eigenvalues=roots,
        eigenvectors=[eigenvector(model, E) for E in roots],
        untouched=untouched,
    )


def full_spectrum(model: FiniteModel, solution: Optional[SecularSolution] = None) -> List[float]:
    """Secular roots together with the untouched eps values, ascending."""
    solution = solution or solve_secular(model)
    values = list(solution.new_eigenvalues) + [model.eps[i] for i in solution.untouched]
    return sorted(values)


def eigen_residual(model: FiniteModel, E: float, u: List[float]) -> float:
    """||(H0 + alpha v v^T - E) u|| / ||u||."""
    eps = np.asarray(model.eps, dtype=float)
    v = np.asarray(model.v_coeffs, dtype=float)
    u = np.asarray(u, dtype=float)
    residual = (eps - E) * u + model.alpha * v * float(v @ u)
    return float(np.linalg.norm(residual) / np.linalg.norm(u))


# =============================================================================
# DENSE ORACLE
# =============================================================================

def dense_matrix(model: FiniteModel) -> np.ndarray:
    v = np.asarray(model.v_coeffs, dtype=float)
    return np.diag(np.asarray(model.eps, dtype=float)) + model.alpha * np.outer(v, v)


def dense_oracle(model: FiniteModel) -> List[float]:
    """Full ascending spectrum of H0 + alpha v v^T from a dense symmetric solver."""
    if model.dimension > DENSE_ORACLE_MAX_DIM:
        raise DomainError(
            f"dense oracle limited to dimension {DENSE_ORACLE_MAX_DIM}, got {model.dimension}"
        )
    return np.linalg.eigvalsh(dense_matrix(model)).tolist()


def random_model(rng: np.random.Generator, dimension: int, degenerate: bool = True) -> FiniteModel:
    """
    Random model for oracle sweeps.

    Eigenvalues are drawn on a coarse grid when degenerate=True so repeated
    levels occur; about one coupling in eight is zero.
    """
    if degenerate:
        eps = np.sort(rng.integers(0, max(2, dimension), size=dimension).astype(float) * 0.5)
    else:
        eps = np.sort(rng.normal(size=dimension))
    v = rng.normal(size=dimension)
    v[rng.random(dimension) < 0.125] = 0.0
    if not np.any(v != 0):
        v[0] = 1.0
    alpha = float(rng.choice([-1.0, 1.0]) * rng.uniform(0.1, 5.0))
    return FiniteModel(eps=eps.tolist(), v_coeffs=v.tolist(), alpha=alpha)


def oracle_delta(model: FiniteModel) -> float:
    """Largest |secular - dense| / (1 + |E|) over the whole spectrum."""
    secular = np.asarray(full_spectrum(model))
    dense = np.asarray(dense_oracle(model))
    return float(np.max(np.abs(secular - dense) / (1.0 + np.abs(dense))))
