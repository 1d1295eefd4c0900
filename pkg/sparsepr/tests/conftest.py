"""
Shared pytest fixtures for the sparsepr tests.
"""

import numpy as np
import pytest

from sparsepr import config
from sparsepr.model import MeasurementSet, SignalModel, SparseSignal, generate_measurements, generate_signal

# Config attributes tests (and CLI overrides) may mutate.
_CONFIG_ATTRS = [name for name in dir(config) if name.isupper()]


@pytest.fixture(autouse=True)
def restore_config():
    """Undo config changes made by a test (CLI flags write to config).

    Also isolates the suite from a machine-specific config_local.py by
    resetting VERBOSE.
    """
    saved = {attr: getattr(config, attr) for attr in _CONFIG_ATTRS}
    config.VERBOSE = False
    yield
    for attr, val in saved.items():
        setattr(config, attr, val)


@pytest.fixture
def tmp_config(tmp_path, monkeypatch):
    """Point the user presets dir at a temp location."""
    monkeypatch.setenv("XDG_CONFIG_HOME", str(tmp_path / "xdg"))
    return tmp_path / "xdg"


@pytest.fixture
def rng():
    """A fixed-seed generator."""
    return np.random.default_rng(1234)


@pytest.fixture
def worked_signal():
    """x* = [1, 0]."""
    return SparseSignal.from_values([1.0, 0.0])


@pytest.fixture
def worked_meas(worked_signal):
    """One measurement a = [2, 1] of x* = [1, 0], so y = [4]."""
    return MeasurementSet.from_signal(worked_signal, [[2.0, 1.0]])


@pytest.fixture
def small_instance():
    """n=64, m=200, k=3, x*_max=0.7 instance from a fixed seed."""
    gen = np.random.default_rng(7)
    signal = generate_signal(SignalModel.fixed_max(0.7), 64, 3, gen)
    return signal, generate_measurements(signal, 200, gen)


def central_difference(fun, x, step=1e-6):
    """Central finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        grad[i] = (fun(x + e) - fun(x - e)) / (2.0 * step)
    return grad
