"""
Unit tests for dual-lattice enumeration, norm tables and gap statistics.
"""

import math

import numpy as np
import pytest

from scatterer.errors import CapacityError, DomainError, RangeError
from scatterer.lattice import (
    LANDAU_RAMANUJAN,
    LatticeSpec,
    annulus_block,
    annulus_points,
    build_norm_table,
    count_upto,
    enumerate_vectors,
    gap_stats,
    landau_ratio,
    remainder_constant,
    remainder_exponent_fit,
    weyl_residual,
)

SUMS_OF_TWO_SQUARES_TO_100 = [
    1, 2, 4, 5, 8, 9, 10, 13, 16, 17, 18, 20, 25, 26, 29, 32, 34, 36, 37, 40, 41, 45,
    49, 50, 52, 53, 58, 61, 64, 65, 68, 72, 73, 74, 80, 81, 82, 85, 89, 90, 97, 98, 100,
]


class TestLatticeSpec:
    """Parsing and exact keys."""

    def test_parse_rational(self):
        spec = LatticeSpec.parse("2/3")
        assert spec.is_rational
        assert (spec.p, spec.q) == (2, 3)
        assert spec.a2 == pytest.approx(math.sqrt(2 / 3))

    def test_parse_integer(self):
        assert LatticeSpec.parse("1") == LatticeSpec.rational(1, 1)

    def test_parse_reduces_fraction(self):
        assert LatticeSpec.parse("4/2") == LatticeSpec.rational(2, 1)

    def test_parse_irrational(self):
        spec = LatticeSpec.parse("irr:1.7")
        assert not spec.is_rational
        assert spec.a2 == 1.7
        assert spec.label.startswith("irr:")

    @pytest.mark.parametrize("text", ["", "a/b", "1/2/3", "0/1", "-1/2", "irr:x", "irr:-1"])
    def test_parse_invalid(self, text):
        with pytest.raises(DomainError):
            LatticeSpec.parse(text)

    def test_rational_norm_uses_key(self):
        spec = LatticeSpec.rational(2, 1)
        assert spec.key_of(1, 1) == 3
        assert spec.norm_sq(1, 1) == pytest.approx(3 / math.sqrt(2))

    def test_irrational_key_is_square_pair(self):
        spec = LatticeSpec.irrational(1.7)
        assert spec.key_of(-2, 3) == (4, 9)

    def test_vector_inner_product(self, z2):
        u, v = z2.vector(1, 2), z2.vector(3, -1)
        assert u.inner(v) == pytest.approx(1.0)
        assert u.norm_sq == 5.0
        assert not u.is_zero
        assert z2.vector(0, 0).is_zero


class TestNormTable:
    """Distinct norms and multiplicities."""

    def test_z2_up_to_ten(self, z2):
        table = build_norm_table(z2, 10)
        assert table.norms.tolist() == [0, 1, 2, 4, 5, 8, 9, 10]
        assert table.multiplicities.tolist() == [1, 4, 4, 4, 8, 4, 4, 8]
        assert table.total_vectors == 37

    def test_z2_distinct_norms_to_100(self, z2_table_100):
        assert len(z2_table_100) == 44
        assert z2_table_100.positive_norms.tolist() == SUMS_OF_TWO_SQUARES_TO_100

    def test_rational_two(self):
        table = build_norm_table(LatticeSpec.rational(2, 1), 2.2)
        assert table.codes.tolist() == [0, 1, 2, 3]
        assert table.multiplicities.tolist() == [1, 2, 2, 4]
        assert table.norms[1] == pytest.approx(1 / math.sqrt(2))

    def test_irrational_table(self):
        spec = LatticeSpec.irrational(1.7)
        table = build_norm_table(spec, 3.0)
        # (0,0), (0,+-1), (+-1,0), (+-1,+-1), (0,+-2)
        assert table.multiplicities.tolist() == [1, 2, 2, 4, 2]
        assert np.all(np.diff(table.norms) > 0)
        assert table.key_at(3) == (1, 1)

    def test_representatives_share_the_norm(self, z2_table_100):
        index = int(np.searchsorted(z2_table_100.norms, 25.0))
        reps = z2_table_100.representatives(index)
        assert len(reps) == 12
        assert {(abs(r.m), abs(r.n)) for r in reps} == {(0, 5), (5, 0), (3, 4), (4, 3)}
        assert all(r.norm_sq == 25.0 for r in reps)

    def test_enumeration_matches_table(self, z2, z2_table_100):
        assert len(enumerate_vectors(z2, -1.0, 100.0)) == z2_table_100.total_vectors

    def test_to_frame_columns(self, z2_table_100):
        frame = z2_table_100.to_frame()
        assert list(frame.columns) == ["norm", "key", "multiplicity"]
        assert len(frame) == 44

    def test_capacity(self, z2):
        with pytest.raises(CapacityError):
            build_norm_table(z2, 1e9)

    def test_negative_cutoff(self, z2):
        with pytest.raises(DomainError):
            build_norm_table(z2, -1.0)

    def test_arrays_read_only(self, z2_table_100):
        with pytest.raises(ValueError):
            z2_table_100.norms[0] = 1.0


class TestCounting:
    """count_upto and the Weyl residual."""

    def test_count_upto(self, z2_table_100):
        assert count_upto(z2_table_100, 10) == (37, 8)
        assert count_upto(z2_table_100, 100)[1] == 44

    def test_count_between_norms(self, z2_table_100):
        assert count_upto(z2_table_100, 3.5) == count_upto(z2_table_100, 2.0)

    def test_count_out_of_range(self, z2_table_100):
        with pytest.raises(RangeError):
            count_upto(z2_table_100, 101)

    def test_weyl_residual_small(self, z2):
        table = build_norm_table(z2, 10000)
        assert abs(weyl_residual(table, 10000)) < 5 * math.sqrt(10000)

    def test_landau_ratio(self, z2):
        table = build_norm_table(z2, 10000)
        assert 0.95 < landau_ratio(table, 10000) < 1.2
        assert LANDAU_RAMANUJAN == pytest.approx(0.76422365358922)

    def test_remainder_fit(self, z2):
        table = build_norm_table(z2, 10000)
        theta, constant = remainder_exponent_fit(table, np.geomspace(16, 10000, 20))
        assert -0.5 < theta < 1.0
        assert constant > 0

    def test_remainder_constant_bounds_residual(self, z2):
        table = build_norm_table(z2, 4096)
        constant = remainder_constant(table, 131 / 416)
        for x in (100.0, 1000.0, 4000.0):
            assert abs(weyl_residual(table, x)) <= constant * x ** (131 / 416) + 1e-9


class TestAnnulus:
    """Open annuli lam - L < |xi|^2 < lam + L."""

    def test_count(self, z2):
        points = annulus_points(z2, 100.0, 5.0)
        assert len(points) == 40
        assert all(95.0 < p.norm_sq < 105.0 for p in points)

    def test_open_boundary(self, z2):
        block = annulus_block(z2, 100.0, 4.0)
        # 104 sits on the boundary and is excluded
        assert set(block.norm.tolist()) == {97.0, 98.0, 100.0, 101.0}

    def test_sorted(self, z2):
        block = annulus_block(z2, 50.0, 10.0)
        assert np.all(np.diff(block.norm) >= 0)

    def test_invalid(self, z2):
        with pytest.raises(DomainError):
            annulus_points(z2, 0.0, 1.0)
        with pytest.raises(DomainError):
            annulus_points(z2, 10.0, 0.0)


class TestGapStats:
    """Spacings of consecutive positive norms."""

    def test_z2_to_100(self, z2_table_100):
        report = gap_stats(z2_table_100, epsilon=0.25)
        assert report.gaps.size == 42
        assert report.max_gap == 7.0
        assert report.mean_gap == pytest.approx(99 / 42)
        assert 0 < report.fraction_small <= 1

    def test_frame_and_windows(self, z2_table_100):
        report = gap_stats(z2_table_100)
        assert list(report.to_frame().columns) == ["n_k", "gap"]
        windows = report.windows()
        assert windows["count"].sum() == 42
        assert windows["lo"].iloc[0] == 1.0

    def test_needs_two_norms(self, z2):
        with pytest.raises(DomainError):
            gap_stats(build_norm_table(z2, 1.5))
