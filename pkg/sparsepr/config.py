"""
Configuration settings for sparsepr.

This file contains default configuration values. Users can override these
by creating a config_local.py file with their own settings.
"""

import os
import importlib.util
import sys

# --- Hadamard Wirtinger flow ---
# Constant step size. Larger steps diverge: even the scalar m=inf recursion
# x <- x(1 - 6*eta*(x^3 - x)) blows up once eta is much past 0.1.
HWF_ETA = 0.1
HWF_ALPHA = 0.001  # Initialization size: off-spike factors start at alpha
HWF_MAX_ITERS = 100000  # Iteration budget per restart
HWF_RESTARTS = 50  # Spiked restarts, one per rank of the R_i statistics
HWF_KAPPA = 0.05  # Sparsity tolerance used to pick the winning restart
HWF_RISK_STOP = 1e-7  # Stop as soon as F(x) drops to this
# Record one trace point every N iterations (1 = every iteration). Only used
# when a trace is requested.
HWF_TRACE_EVERY = 1
# Threads used to run restarts of one solve concurrently. numpy releases the
# GIL inside the matrix-vector products, so threads do help here.
HWF_RESTART_WORKERS = 1

# Standard deviation of the random initialization (U, V ~ N(0, sigma^2)).
RANDOM_INIT_SIGMA = 0.01

# --- SPARTA baseline ---
SPARTA_MU = 1.0  # Step size
SPARTA_GAMMA = 0.7  # Truncation: keep j with |a_j.x| >= sqrt(y_j)/(1+gamma)
SPARTA_POWER_ITERS = 100  # Power iterations for the initial direction
SPARTA_MAX_ITERS = 1000
# Fraction of samples (largest y) used to build the initialization matrix.
SPARTA_INIT_FRACTION = 1.0 / 6.0
SPARTA_RISK_STOP = 1e-7

# --- Experiment harness ---
SUCCESS_THRESHOLD = 0.01  # Success iff relative error < this
DEFAULT_TRIALS = 100
DEFAULT_SEED = 0
WORKERS = 1  # Worker processes for sweeps
OUTPUT_DIR = "results"
# Gaussian k-sparse signals sampled to estimate the mean x*_max for the
# heatmap reference curve.
XMAX_ESTIMATE_SAMPLES = 100000

# --- Logging ---
VERBOSE = False  # Print debug_log lines (CLI: --verbose)


# Load local config overrides if present.
#
# Resolve the file by absolute path rather than by module name so it loads
# reliably regardless of the current working directory / sys.path. The
# canonical location is config_local.py next to this file; a repo-root
# config_local.py is also honored. The first one found wins.
def _load_local_config() -> None:
    here = os.path.dirname(os.path.abspath(__file__))
    candidates = [
        os.path.join(here, "config_local.py"),
        os.path.join(here, os.pardir, "config_local.py"),
    ]
    for path in candidates:
        if not os.path.exists(path):
            continue
        try:
            spec = importlib.util.spec_from_file_location("sparsepr._config_local", path)
            local = importlib.util.module_from_spec(spec)
            spec.loader.exec_module(local)

            current_module = sys.modules[__name__]
            for attr in dir(local):
                if not attr.startswith("_"):
                    setattr(current_module, attr, getattr(local, attr))

            print(f"Loaded configuration from {os.path.normpath(path)}")
        except Exception as e:
            print(f"Warning: Could not load {os.path.normpath(path)}: {e}")
            print("Using default configuration")
        return


_load_local_config()
