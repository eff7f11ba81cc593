"""
Centralized configuration for the point-scatterer toolkit.
All paths, numerical caps and shared defaults are defined here.

Supports .env file for environment-specific configuration.
"""

import os
from pathlib import Path

# Try to load .env file if python-dotenv is available
try:
    from dotenv import load_dotenv
    load_dotenv(Path(__file__).resolve().parents[1] / ".env")
except ImportError:
    pass  # python-dotenv not installed, use defaults

# Base directories
BASE_DIR = Path(__file__).resolve().parents[1]
CONFIG_DIR = BASE_DIR / "config"
OUTPUT_DIR = Path(os.getenv("OUTPUT_DIR", BASE_DIR / "data" / "salidas"))

# Config files
RUN_DEFAULTS_PATH = CONFIG_DIR / "run_defaults.yaml"

# Parallelism (thread pool for independent per-interval / per-lambda work)
SCATTERER_THREADS = max(1, int(os.getenv("SCATTERER_THREADS", "1")))

# Lattice enumeration
MAX_NORM_CUTOFF = float(os.getenv("MAX_NORM_CUTOFF", "1e8"))
REPRESENTATIVE_CAP = int(os.getenv("REPRESENTATIVE_CAP", "64"))

# Largest table built only to estimate series tails (2^20 keeps ~3.3M vectors)
TAIL_TABLE_CAP = float(os.getenv("TAIL_TABLE_CAP", str(2 ** 20)))

# Relative distance below which lambda counts as sitting on a norm
POLE_GUARD = float(os.getenv("POLE_GUARD", "1e-12"))

# Numerical defaults
DEFAULT_THETA = 131 / 416
DEFAULT_TAIL_TOL = float(os.getenv("DEFAULT_TAIL_TOL", "1e-6"))
DEFAULT_WINDOW = float(os.getenv("DEFAULT_WINDOW", "10.0"))
DEFAULT_EPS_GAP = 0.25
DEFAULT_DELTA = 0.17

# Logging
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
