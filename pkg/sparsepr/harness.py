"""
Monte Carlo experiment harness.

An ``ExperimentGrid`` declares a sweep over (m, k) for one signal model and
one solver. Every trial draws its signal and measurements from its own
counter-based stream (Philox) keyed by a hash of (master seed, cell key,
trial index), so results don't depend on execution order or worker count.
Trials run in a process pool and are re-sorted by (cell, trial) before
aggregation.
"""

import csv
import hashlib
import os
import time
from dataclasses import dataclass, field, replace
from multiprocessing import Pool
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from sparsepr.errors import (
    AllRestartsFailedError,
    ParameterError,
    RestartFailure,
    ResultIOError,
)
from sparsepr.hwf import HwfConfig, run_multi_restart, run_random_init
from sparsepr.logging_util import debug_log, status_log
from sparsepr.model import (
    SignalModel,
    check_fixed_max,
    generate_measurements,
    generate_signal,
    relative_error,
)
from sparsepr.sparta import SpartaConfig, run_sparta, run_sparta_support
from sparsepr.support import (
    recover_support_one_step,
    recover_support_topk_marginal,
    recovered_fraction,
)

HWF = "hwf"
HWF_RANDOM = "hwf-random"
SPARTA = "sparta"
SPARTA_SUPPORT = "sparta-support"
TOPK_SUPPORT_ONLY = "topk-support-only"
ONE_STEP_SUPPORT_ONLY = "one-step-support-only"

SOLVERS = (HWF, HWF_RANDOM, SPARTA, SPARTA_SUPPORT, TOPK_SUPPORT_ONLY, ONE_STEP_SUPPORT_ONLY)
SUPPORT_SOLVERS = (TOPK_SUPPORT_ONLY, ONE_STEP_SUPPORT_ONLY)

TRIAL_COLUMNS = [
    "experiment_id", "solver", "n", "m", "k", "model", "trial", "seed", "success",
    "rel_error", "recovered_fraction", "iterations", "restart_index", "wall_time_s",
]
CELL_COLUMNS = [
    "experiment_id", "solver", "n", "m", "k", "model", "trials", "success_rate",
    "mean_rel_error", "mean_recovered_fraction", "mean_wall_time_s",
]


def _default_sparta() -> SpartaConfig:
    # k is a placeholder; each cell substitutes its own sparsity.
    return SpartaConfig.from_config(k=1)


@dataclass(frozen=True)
class ExperimentGrid:
    """A declarative sweep: every (m, k) pair is a cell run ``trials`` times."""

    experiment_id: str
    n: int
    m_values: Tuple[int, ...]
    k_values: Tuple[int, ...]
    model: SignalModel
    solver: str
    trials: int = 100
    seed: int = 0
    hwf: HwfConfig = field(default_factory=HwfConfig.from_config)
    sparta: SpartaConfig = field(default_factory=_default_sparta)
    threshold: float = 0.01
    random_sigma: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "m_values", tuple(int(m) for m in self.m_values))
        object.__setattr__(self, "k_values", tuple(int(k) for k in self.k_values))
        if self.solver not in SOLVERS:
            raise ParameterError(f"unknown solver '{self.solver}' (choose from {', '.join(SOLVERS)})")
        if self.trials < 1:
            raise ParameterError(f"trials must be >= 1, got {self.trials}")
        if not 0 < self.threshold < 1:
            raise ParameterError(f"success threshold must lie in (0, 1), got {self.threshold}")
        if self.n < 1:
            raise ParameterError(f"dimension must be >= 1, got n={self.n}")
        if not self.random_sigma > 0:
            raise ParameterError("random_sigma must be positive")
        if self.solver in (HWF, SPARTA_SUPPORT) and self.hwf.restarts > self.n:
            raise ParameterError(f"restarts ({self.hwf.restarts}) cannot exceed the dimension ({self.n})")
        bad_m = [m for m in self.m_values if m < 1]
        if bad_m:
            raise ParameterError(f"sample counts must be >= 1, got {bad_m}")
        for k in self.k_values:
            if not 1 <= k <= self.n:
                raise ParameterError(f"sparsity must satisfy 1 <= k <= n, got k={k}, n={self.n}")
            check_fixed_max(self.model, k)

    def cells(self) -> List["Cell"]:
        return [
            Cell(self.experiment_id, self.solver, self.n, m, k, self.model.label)
            for m in self.m_values
            for k in self.k_values
        ]


@dataclass(frozen=True)
class Cell:
    experiment_id: str
    solver: str
    n: int
    m: int
    k: int
    model: str

    @property
    def key(self) -> str:
        return f"{self.experiment_id}|{self.solver}|n={self.n}|m={self.m}|k={self.k}|{self.model}"


@dataclass
class TrialRow:
    """One line of the per-trial CSV."""

    experiment_id: str
    solver: str
    n: int
    m: int
    k: int
    model: str
    trial: int
    seed: int
    success: bool
    rel_error: Optional[float]
    recovered_fraction: Optional[float]
    iterations: int
    restart_index: int
    wall_time_s: Optional[float]

    @property
    def cell(self) -> Cell:
        return Cell(self.experiment_id, self.solver, self.n, self.m, self.k, self.model)

    def to_csv_row(self) -> List[str]:
        return [
            self.experiment_id, self.solver, str(self.n), str(self.m), str(self.k),
            self.model, str(self.trial), str(self.seed), "1" if self.success else "0",
            _fmt(self.rel_error), _fmt(self.recovered_fraction), str(self.iterations),
            str(self.restart_index), _fmt(self.wall_time_s),
        ]

    @classmethod
    def from_csv_row(cls, row: Dict[str, str]) -> "TrialRow":
        return cls(
            experiment_id=row["experiment_id"],
            solver=row["solver"],
            n=int(row["n"]),
            m=int(row["m"]),
            k=int(row["k"]),
            model=row["model"],
            trial=int(row["trial"]),
            seed=int(row["seed"]),
            success=row["success"] == "1",
            rel_error=_parse(row["rel_error"]),
            recovered_fraction=_parse(row["recovered_fraction"]),
            iterations=int(row["iterations"]),
            restart_index=int(row["restart_index"]),
            wall_time_s=_parse(row["wall_time_s"]),
        )


@dataclass
class CellResult:
    """Aggregate over the trials of one cell."""

    cell: Cell
    success_count: int
    trials: int
    mean_rel_error: Optional[float]
    mean_recovered_fraction: Optional[float]
    mean_wall_time_s: Optional[float]
    rows: List[TrialRow] = field(default_factory=list)

    @property
    def success_rate(self) -> float:
        return self.success_count / self.trials

    @classmethod
    def from_rows(cls, cell: Cell, rows: Sequence[TrialRow]) -> "CellResult":
        rows = sorted(rows, key=lambda r: r.trial)
        return cls(
            cell=cell,
            success_count=sum(1 for r in rows if r.success),
            trials=len(rows),
            mean_rel_error=_mean(r.rel_error for r in rows),
            mean_recovered_fraction=_mean(r.recovered_fraction for r in rows),
            mean_wall_time_s=_mean(r.wall_time_s for r in rows),
            rows=list(rows),
        )

    def to_csv_row(self) -> List[str]:
        c = self.cell
        return [
            c.experiment_id, c.solver, str(c.n), str(c.m), str(c.k), c.model,
            str(self.trials), _fmt(self.success_rate), _fmt(self.mean_rel_error),
            _fmt(self.mean_recovered_fraction), _fmt(self.mean_wall_time_s),
        ]


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


def _parse(text: str) -> Optional[float]:
    return None if text == "" else float(text)


def _mean(values: Iterable[Optional[float]]) -> Optional[float]:
    """Mean of the recorded values; None when nothing was recorded."""
    values = [v for v in values if v is not None]
    if not values:
        return None
    return sum(values) / len(values)


def derive_seed(master_seed: int, cell_key: str, trial: int) -> int:
    """63-bit trial seed from (master seed, cell key, trial index)."""
    digest = hashlib.sha256(f"{master_seed}|{cell_key}|{trial}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & ((1 << 63) - 1)


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based stream for one trial."""
    return np.random.Generator(np.random.Philox(seed))


def run_trial(grid: ExperimentGrid, cell: Cell, trial: int, timing: bool = True) -> TrialRow:
    """Draw one instance for ``cell`` and run the grid's solver on it.

    Solver failures (divergence, degenerate initialization) make a failed
    row; parameter errors propagate.
    """
    seed = derive_seed(grid.seed, cell.key, trial)
    rng = make_rng(seed)
    signal = generate_signal(grid.model, cell.n, cell.k, rng)
    meas = generate_measurements(signal, cell.m, rng)

    rel_error: Optional[float] = None
    fraction: Optional[float] = None
    iterations = 0
    restart_index = 0
    success = False

    start = time.perf_counter()
    try:
        if grid.solver in SUPPORT_SOLVERS:
            if grid.solver == TOPK_SUPPORT_ONLY:
                estimate = recover_support_topk_marginal(meas, cell.k)
            else:
                estimate = recover_support_one_step(meas, cell.k, grid.hwf.eta, grid.hwf.alpha)
                iterations = 1
            fraction = recovered_fraction(estimate, signal)
            success = fraction == 1.0
        else:
            if grid.solver == HWF:
                result = run_multi_restart(meas, grid.hwf)
            elif grid.solver == HWF_RANDOM:
                result = run_random_init(meas, grid.hwf, rng, grid.random_sigma)
            elif grid.solver == SPARTA:
                result = run_sparta(meas, replace(grid.sparta, k=cell.k))
            else:
                result = run_sparta_support(meas, cell.k, grid.hwf, grid.sparta)
            rel_error = relative_error(result.x_hat, signal)
            success = rel_error < grid.threshold
            iterations = result.winner_iterations
            restart_index = result.restart_index
    except (RestartFailure, AllRestartsFailedError) as e:
        debug_log(f"{cell.key} trial {trial}: solver failed ({e})")
    elapsed = time.perf_counter() - start

    return TrialRow(
        experiment_id=cell.experiment_id,
        solver=cell.solver,
        n=cell.n,
        m=cell.m,
        k=cell.k,
        model=cell.model,
        trial=trial,
        seed=seed,
        success=success,
        rel_error=rel_error,
        recovered_fraction=fraction,
        iterations=iterations,
        restart_index=restart_index,
        wall_time_s=elapsed if timing else None,
    )


def _trial_task(task) -> Tuple[int, TrialRow]:
    grid, cell_index, cell, trial, timing = task
    return cell_index, run_trial(grid, cell, trial, timing)


def run_grid(grid: ExperimentGrid, workers: int = 1, timing: bool = True) -> List[CellResult]:
    """Run every cell x trial of ``grid`` and aggregate per cell.

    The result does not depend on ``workers``: rows are sorted by (cell,
    trial) before aggregation and each trial owns its random stream.
    """
    if workers < 1:
        raise ParameterError(f"workers must be >= 1, got {workers}")
    cells = grid.cells()
    if not cells:
        status_log(f"Warning: experiment '{grid.experiment_id}' has no cells (empty m or k list)")
        return []

    tasks = [(grid, i, cell, t, timing) for i, cell in enumerate(cells) for t in range(grid.trials)]
    status_log(
        f"Experiment '{grid.experiment_id}': {len(cells)} cells x {grid.trials} trials "
        f"({grid.solver}, model {grid.model.label}, {workers} worker(s))")

    per_cell: Dict[int, List[TrialRow]] = {i: [] for i in range(len(cells))}
    if workers > 1:
        with Pool(processes=workers) as pool:
            for cell_index, row in pool.imap_unordered(_trial_task, tasks):
                per_cell[cell_index].append(row)
    else:
        for task in tasks:
            cell_index, row = _trial_task(task)
            per_cell[cell_index].append(row)

    results = []
    for i, cell in enumerate(cells):
        result = CellResult.from_rows(cell, per_cell[i])
        debug_log(
            f"  m={cell.m} k={cell.k}: success {result.success_count}/{result.trials}")
        results.append(result)
    return results


def run_grids(grids: Sequence[ExperimentGrid], workers: int = 1, timing: bool = True) -> List[CellResult]:
    results: List[CellResult] = []
    for grid in grids:
        results.extend(run_grid(grid, workers, timing))
    return results


def expand_restart_sweep(grid: ExperimentGrid, restarts: Sequence[int]) -> List[ExperimentGrid]:
    """One grid per restart budget; experiment ids get a ``-b<value>`` suffix."""
    return [
        replace(grid, experiment_id=f"{grid.experiment_id}-b{b}", hwf=grid.hwf.with_overrides(restarts=b))
        for b in restarts
    ]


def cells_path_for(path: str) -> str:
    """Per-cell CSV path next to a per-trial CSV: ``x.csv`` -> ``x_cells.csv``."""
    stem, ext = os.path.splitext(path)
    return f"{stem}_cells{ext or '.csv'}"


def emit_csv(results: Sequence[CellResult], path: str) -> Tuple[str, str]:
    """Write the per-trial CSV to ``path`` and the per-cell CSV next to it.

    Returns:
        (per-trial path, per-cell path)
    """
    cells_path = cells_path_for(path)
    try:
        parent = os.path.dirname(os.path.abspath(path))
        os.makedirs(parent, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(TRIAL_COLUMNS)
            for result in results:
                for row in result.rows:
                    writer.writerow(row.to_csv_row())
        with open(cells_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CELL_COLUMNS)
            for result in results:
                writer.writerow(result.to_csv_row())
    except OSError as e:
        raise ResultIOError(getattr(e, "filename", None) or path, str(e)) from e
    return path, cells_path


def load_csv(path: str) -> List[CellResult]:
    """Parse a per-trial CSV back into CellResults (cells in file order)."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames
            records = list(reader)
    except OSError as e:
        raise ResultIOError(path, str(e)) from e
    if header != TRIAL_COLUMNS:
        raise ResultIOError(path, "not a per-trial results file (unexpected header)")
    try:
        rows = [TrialRow.from_csv_row(r) for r in records]
    except (KeyError, TypeError, ValueError) as e:
        raise ResultIOError(path, f"malformed row: {e}") from e

    grouped: Dict[Cell, List[TrialRow]] = {}
    for row in rows:
        grouped.setdefault(row.cell, []).append(row)
    return [CellResult.from_rows(cell, cell_rows) for cell, cell_rows in grouped.items()]


def summarize(results: Sequence[CellResult]) -> List[str]:
    """Human-readable one-line-per-cell summary for the CLI."""
    lines = []
    for r in results:
        c = r.cell
        extra = ""
        if r.mean_recovered_fraction is not None:
            extra = f", recovered {r.mean_recovered_fraction:.3f}"
        elif r.mean_rel_error is not None:
            extra = f", mean rel. error {r.mean_rel_error:.3e}"
        lines.append(
            f"{c.experiment_id} {c.solver} n={c.n} m={c.m} k={c.k} {c.model}: "
            f"success {r.success_count}/{r.trials} ({r.success_rate:.2f}){extra}")
    return lines
