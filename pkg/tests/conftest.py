"""
Pytest configuration and shared fixtures.
"""

import sys
from pathlib import Path

import pytest

# Add project root to path for imports
PROJECT_ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(PROJECT_ROOT))

from scatterer.lattice import LatticeSpec, build_norm_table  # noqa: E402
from scatterer.spectral import SpectralParams, perturbed_spectrum  # noqa: E402

# Looser tail tolerance keeps the tail tables small in unit tests
FAST_TAIL_TOL = 1e-4


@pytest.fixture(scope="session")
def z2():
    return LatticeSpec.rational(1, 1)


@pytest.fixture(scope="session")
def z2_table_100(z2):
    return build_norm_table(z2, 100)


@pytest.fixture(scope="session")
def fast_params():
    return SpectralParams(phi=0.0, tail_tol=FAST_TAIL_TOL)


@pytest.fixture(scope="session")
def small_spectrum(z2, fast_params):
    """Perturbed spectrum of Z^2 at phi = 0 up to X = 200."""
    return perturbed_spectrum(z2, 0.0, 200.0, fast_params)
