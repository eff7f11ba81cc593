"""
Unit tests for c0, the spectral function and the perturbed spectrum.
"""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from scatterer.errors import DomainError, PoleError, RangeError
from scatterer.lattice import LatticeSpec, build_norm_table
from scatterer.spectral import (
    SpectralFunction,
    SpectralParams,
    compute_c0,
    evaluator_for,
    perturbed_spectrum,
    solve_interval,
    specfun_scan,
    spectral_function,
    spectrum_weyl_ratio,
)

FAST_TAIL_TOL = 1e-4


def brute_force_F(spec, lam, cutoff):
    """Direct sum over norms <= cutoff plus the closed-form Weyl tail."""
    table = build_norm_table(spec, cutoff, keep_vectors=False)
    n, r = table.norms, table.multiplicities
    body = float(np.sum(r * (1.0 / (n - lam) - n / (n * n + 1.0))))
    tail = math.pi * (0.5 * math.log(cutoff * cutoff + 1.0) - math.log(cutoff - lam))
    return body + tail


class TestSpectralParams:
    """Validation of the extension phase."""

    def test_default(self):
        params = SpectralParams()
        assert params.tan_half_phi == 0.0

    def test_phi_near_pi_rejected(self):
        with pytest.raises(ValidationError):
            SpectralParams(phi=3.1415926535)

    def test_phi_close_to_pi_allowed(self):
        params = SpectralParams(phi=2 * math.atan(1e6))
        assert params.tan_half_phi == pytest.approx(1e6)

    def test_nonpositive_tail_tol(self):
        with pytest.raises(ValidationError):
            SpectralParams(tail_tol=0.0)


class TestC0:
    """c0 = sum 1/(|xi|^4 + 1)."""

    def test_positive_and_stable(self, z2):
        coarse = compute_c0(z2, tail_tol=1e-4)
        fine = compute_c0(z2, tail_tol=1e-6)
        assert coarse > 1.0
        assert abs(coarse - fine) < 1e-4

    def test_invalid_tolerance(self, z2):
        with pytest.raises(DomainError):
            compute_c0(z2, tail_tol=0.0)

    @pytest.mark.slow
    def test_against_square_sum(self, z2):
        M = 1000
        m = np.arange(-M, M + 1, dtype=float)
        norms = m[:, None] ** 2 + m[None, :] ** 2
        square_sum = float(np.sum(1.0 / (norms * norms + 1.0)))
        # the lattice outside the square carries (1 + pi/2)/(M + 1/2)^2 of the sum
        outside = (1.0 + math.pi / 2.0) / (M + 0.5) ** 2
        assert compute_c0(z2, tail_tol=1e-8) - square_sum == pytest.approx(outside, abs=1e-7)


class TestSpectralFunction:
    """F(lambda) against a direct sum."""

    @pytest.mark.parametrize("lam", [0.5, 3.3, 7.25])
    def test_against_direct_sum(self, z2, lam):
        F = SpectralFunction(z2, 8.0)
        assert F(lam) == pytest.approx(brute_force_F(z2, lam, 2.0 ** 17), abs=1e-5)

    def test_irrational_lattice(self):
        spec = LatticeSpec.irrational(math.pi / 2.0)
        F = SpectralFunction(spec, 4.0)
        assert F(1.3) == pytest.approx(brute_force_F(spec, 1.3, 2.0 ** 17), abs=1e-5)

    def test_increasing_between_norms(self, z2):
        F = SpectralFunction(z2, 4.0, tail_tol=FAST_TAIL_TOL)
        values = F.evaluate_many(np.linspace(1.01, 1.99, 50))
        assert np.all(np.diff(values) > 0)

    def test_evaluate_many_matches_scalar(self, z2):
        F = SpectralFunction(z2, 16.0, tail_tol=FAST_TAIL_TOL)
        lams = np.array([0.3, 2.7, 11.5])
        assert F.evaluate_many(lams) == pytest.approx([F(x) for x in lams], rel=1e-12)

    def test_derivative(self, z2):
        F = SpectralFunction(z2, 4.0, tail_tol=FAST_TAIL_TOL)
        h = 1e-6
        numeric = (F(3.0 + h) - F(3.0 - h)) / (2 * h)
        assert F.derivative(3.0) == pytest.approx(numeric, rel=1e-5)

    def test_localize(self, z2):
        F = SpectralFunction(z2, 128.0, tail_tol=FAST_TAIL_TOL)
        local = F.localize(80.0, 100.0)
        for lam in (80.5, 87.3, 99.9):
            assert local(lam) == pytest.approx(F(lam), rel=1e-11, abs=1e-9)


class TestSpectralFunctionChecks:
    """spectral_function argument checks."""

    def test_pole(self, z2, fast_params):
        table = build_norm_table(z2, 100)
        with pytest.raises(PoleError) as info:
            spectral_function(z2, table, 5.0, fast_params)
        assert info.value.nearest == 5.0

    def test_nonpositive_lambda(self, z2, fast_params):
        with pytest.raises(DomainError):
            spectral_function(z2, build_norm_table(z2, 100), -1.0, fast_params)

    def test_table_too_small(self, z2, fast_params):
        with pytest.raises(RangeError):
            spectral_function(z2, build_norm_table(z2, 20), 15.5, fast_params)

    def test_table_for_other_lattice(self, z2, fast_params):
        other = build_norm_table(LatticeSpec.rational(2, 1), 100)
        with pytest.raises(DomainError):
            spectral_function(z2, other, 3.0, fast_params)


class TestPerturbedSpectrum:
    """One eigenvalue per interval between consecutive positive norms."""

    def test_interval_count(self, z2, fast_params):
        spectrum = perturbed_spectrum(z2, 0.0, 100.0, fast_params)
        assert len(spectrum) == 42
        assert [e.k for e in spectrum.entries] == list(range(1, 43))

    def test_interlacing(self, small_spectrum):
        assert np.all(small_spectrum.lowers < small_spectrum.lambdas)
        assert np.all(small_spectrum.lambdas < small_spectrum.uppers)
        assert np.all(np.diff(small_spectrum.lambdas) > 0)

    def test_roots_solve_the_equation(self, z2, small_spectrum, fast_params):
        F = evaluator_for(z2, small_spectrum.X + fast_params.window, fast_params)
        for entry in small_spectrum.entries:
            assert F(entry.lam) == pytest.approx(small_spectrum.target, abs=1e-8)
            assert entry.residual <= 1e-8
            assert entry.converged
        assert small_spectrum.unconverged == []

    def test_matches_solve_interval(self, z2, small_spectrum, fast_params):
        table = build_norm_table(z2, small_spectrum.X + fast_params.window)
        for k in (1, 10, 40):
            single = solve_interval(z2, table, 0.0, k, fast_params)
            assert single.lam == pytest.approx(small_spectrum.entries[k - 1].lam, abs=1e-7)
            assert single.residual <= 1e-8

    def test_phi_shifts_upward(self, z2, small_spectrum, fast_params):
        shifted = perturbed_spectrum(z2, 1.0, 200.0, fast_params)
        assert shifted.target > 0
        assert np.all(shifted.lambdas > small_spectrum.lambdas)

    def test_count_and_frame(self, small_spectrum):
        assert small_spectrum.count_upto(2.0) == 1
        frame = small_spectrum.to_frame()
        assert list(frame.columns) == ["k", "n_k", "lambda_k", "n_k1", "residual", "converged"]
        assert len(frame) == len(small_spectrum)

    def test_weyl_ratio(self, small_spectrum):
        ratio = spectrum_weyl_ratio(small_spectrum, 200.0)
        assert 0.8 < ratio < 1.3

    def test_solve_interval_range(self, z2, fast_params):
        table = build_norm_table(z2, 100)
        with pytest.raises(RangeError):
            solve_interval(z2, table, 0.0, 0, fast_params)
        with pytest.raises(RangeError):
            solve_interval(z2, table, 0.0, 42, fast_params)

    def test_cutoff_below_first_norm(self, z2, fast_params):
        with pytest.raises(DomainError):
            perturbed_spectrum(z2, 0.0, 1.0, fast_params)


class TestSpecfunScan:
    """Sampling F on a grid."""

    def test_norms_omitted(self, z2, fast_params):
        frame = specfun_scan(z2, np.linspace(0.0, 10.0, 101), fast_params)
        # 0, 1, 2, 4, 5, 8, 9 and 10 are norms of Z^2
        assert len(frame) == 93
        assert list(frame.columns) == ["lambda", "F"]

    def test_empty_grid(self, z2, fast_params):
        assert specfun_scan(z2, [], fast_params).empty

    def test_one_root_per_interval_below_sixty(self, z2, fast_params):
        frame = specfun_scan(z2, np.linspace(0.0, 60.0, 6000), fast_params)
        norms = build_norm_table(z2, 60.0, keep_vectors=False).norms
        assert norms.tolist() == [
            0, 1, 2, 4, 5, 8, 9, 10, 13, 16, 17, 18, 20, 25, 26, 29,
            32, 34, 36, 37, 40, 41, 45, 49, 50, 52, 53, 58,
        ]
        lam, F = frame["lambda"].to_numpy(), frame["F"].to_numpy()
        for lower, upper in zip(norms, norms[1:]):
            inside = (lam > lower) & (lam < upper)
            signs = np.sign(F[inside])
            assert np.count_nonzero(np.diff(signs)) == 1
            assert signs[0] < 0 < signs[-1]
