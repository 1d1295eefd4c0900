"""
Exception hierarchy for sparsepr.

Every error carries the exit code the CLI returns for it, so ``main`` can map
any library failure to a process status without a lookup table.
"""

from typing import Optional


class SparsePRError(Exception):
    """Base class for all sparsepr errors."""

    exit_code = 1


class ParameterError(SparsePRError, ValueError):
    """Invalid input: bad sparsity, sample count, config value, etc."""

    exit_code = 2


class DimensionMismatchError(ParameterError):
    """Vectors or matrices whose shapes don't line up."""


class ResultIOError(SparsePRError, OSError):
    """Reading or writing an instance, CSV or plot failed."""

    exit_code = 3

    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


class RestartFailure(SparsePRError):
    """A single restart could not produce a candidate."""

    # For single-start solvers this is the whole run failing.
    exit_code = 4


class DivergenceError(RestartFailure, ArithmeticError):
    """Non-finite iterate or gradient; multiplicative updates blew up."""

    def __init__(self, iteration: int, restart: Optional[int] = None):
        where = f" (restart {restart})" if restart is not None else ""
        super().__init__(f"iterates diverged at iteration {iteration}{where}")
        self.iteration = iteration
        self.restart = restart


class DegenerateInitError(RestartFailure):
    """The data restricted to an estimated support carries no signal."""


class AllRestartsFailedError(SparsePRError):
    """Every restart failed; there is no candidate to return."""

    exit_code = 4

    def __init__(self, failures):
        super().__init__(f"all {len(failures)} restarts failed: {failures[-1]}")
        self.failures = list(failures)
