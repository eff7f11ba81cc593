"""
Unit tests for the composed experiments.
"""

import math

import numpy as np
import pytest

from scatterer.experiments import (
    equidistribution_experiment,
    matrix_element_grid,
    rankone_demo,
    rankone_oracle_suite,
    truncation_decay,
)
from scatterer.greens import FULL


class TestMatrixElementGrid:
    """Rows over (lambda, zeta)."""

    def test_default_width(self, z2):
        frame = matrix_element_grid(z2, [50.5, 99.5], [z2.vector(1, 0), z2.vector(0, 1)], delta=0.17)
        assert list(frame.columns) == ["lambda", "zeta_m", "zeta_n", "L", "re", "im", "abs"]
        assert len(frame) == 4
        assert frame["L"].tolist() == pytest.approx([50.5 ** 0.17] * 2 + [99.5 ** 0.17] * 2)
        assert (frame["abs"] <= 1 + 1e-12).all()

    def test_full_written_as_inf(self, z2):
        frame = matrix_element_grid(z2, [10.5], [z2.vector(1, 0)], L=FULL, tail_tol=1e-4)
        assert math.isinf(frame["L"].iloc[0])

    def test_fixed_width(self, z2):
        frame = matrix_element_grid(z2, [10.5], [z2.vector(1, 1)], L=3.0)
        assert frame["L"].iloc[0] == 3.0


class TestEquidistribution:
    """Decay of |<e_zeta g, g>| along the sieved spectrum."""

    def test_summary(self, z2, small_spectrum):
        result = equidistribution_experiment(z2, z2.vector(1, 0), 200.0, spectrum=small_spectrum)
        summary = result.summary
        assert summary["kept"] == len(result.rows)
        assert summary["total"] == len(small_spectrum)
        assert (result.rows["abs"] <= 1 + 1e-12).all()
        assert "nondecreasing" in result.windows.columns
        assert summary["windows_nondecreasing"] <= len(result.windows)

    def test_full_eigenfunction_by_default(self, z2, small_spectrum):
        result = equidistribution_experiment(z2, z2.vector(1, 1), 200.0, spectrum=small_spectrum, tail_tol=1e-5)
        assert result.summary["L"] == FULL
        assert (result.rows["abs"] > 0).all()

    def test_sieve_width_truncation_vanishes(self, z2, small_spectrum):
        # the annulus of a kept eigenvalue has no pair xi, xi - zeta
        result = equidistribution_experiment(z2, z2.vector(1, 0), 200.0, L=None, spectrum=small_spectrum)
        assert result.summary["L"] == "lambda^delta"
        assert (result.rows["abs"] == 0).all()


class TestTruncationDecay:
    """Relative defect of the lambda^exponent truncation."""

    def test_rows(self, small_spectrum):
        result = truncation_decay(small_spectrum, exponent=0.4, tail_tol=1e-4)
        rows = result.rows
        assert len(rows) == result.summary["count"]
        assert ((rows["defect"] >= 0) & (rows["defect"] <= 1)).all()
        assert np.allclose(rows["bound"], 2 * rows["defect"])


class TestRankOneSuite:
    """Oracle sweep and the analytic 2x2 case."""

    def test_suite(self):
        result = rankone_oracle_suite(seed=3, count=30, max_dim=32)
        assert len(result.rows) == 30
        assert result.summary["max_oracle_delta"] < 1e-9
        assert result.summary["max_residual"] < 1e-8

    def test_suite_is_reproducible(self):
        first = rankone_oracle_suite(seed=5, count=10)
        second = rankone_oracle_suite(seed=5, count=10)
        assert first.rows.equals(second.rows)

    def test_demo(self):
        demo = rankone_demo()
        assert demo["max_error"] < 1e-12
        assert demo["oracle_delta"] < 1e-12
