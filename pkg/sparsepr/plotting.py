"""
Single-panel SVG figures: convergence traces and success-rate heatmaps.

Rendering goes through matplotlib's non-interactive Agg backend, so no
display is needed. Every trace plot also writes the raw trace as CSV next to
the SVG.
"""

import csv
import math
import os
from typing import Dict, List, Mapping, Optional, Sequence, Union

import numpy as np

from sparsepr import config
from sparsepr.errors import ParameterError, ResultIOError
from sparsepr.harness import CellResult, make_rng
from sparsepr.hwf import TracePoint
from sparsepr.logging_util import debug_log
from sparsepr.model import FIXED_MAX, FLAT, SignalModel, estimate_mean_max_coordinate

# log10 of anything at or below this is drawn at the floor.
_LOG_FLOOR = 1e-300

Traces = Union[Sequence[TracePoint], Mapping[str, Sequence[TracePoint]]]


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    # Fixed salt keeps SVG element ids stable between runs.
    matplotlib.rcParams["svg.hashsalt"] = "sparsepr"
    import matplotlib.pyplot as plt

    return plt


def _as_mapping(traces: Traces) -> Dict[str, List[TracePoint]]:
    if isinstance(traces, Mapping):
        mapping = {label: list(trace) for label, trace in traces.items()}
    else:
        mapping = {"run": list(traces)}
    if not mapping or any(len(trace) == 0 for trace in mapping.values()):
        raise ParameterError("cannot plot an empty trace")
    return mapping


def _ensure_parent(path: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)


def trace_values(trace: Sequence[TracePoint]) -> np.ndarray:
    """Relative errors when every point has one, otherwise the risk."""
    if all(p.rel_error is not None for p in trace):
        return np.array([p.rel_error for p in trace], dtype=np.float64)
    return np.array([p.risk for p in trace], dtype=np.float64)


def trace_to_csv(traces: Traces, path: str) -> str:
    """Raw trace rows: label, iteration, risk, rel_error."""
    mapping = _as_mapping(traces)
    try:
        _ensure_parent(path)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["label", "iteration", "risk", "rel_error"])
            for label, trace in mapping.items():
                for p in trace:
                    rel = "" if p.rel_error is None else repr(p.rel_error)
                    writer.writerow([label, p.iteration, repr(p.risk), rel])
    except OSError as e:
        raise ResultIOError(path, str(e)) from e
    return path


def emit_trace_plot(traces: Traces, path: str, title: str = "") -> str:
    """Iteration vs log10 relative error (or risk), one polyline per trace.

    Returns the path of the raw trace CSV written alongside the SVG.
    """
    mapping = _as_mapping(traces)
    relative = all(p.rel_error is not None for trace in mapping.values() for p in trace)
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, trace in mapping.items():
        iterations = [p.iteration for p in trace]
        logs = np.log10(np.maximum(trace_values(trace), _LOG_FLOOR))
        ax.plot(iterations, logs, label=label, linewidth=1.2)
    ax.set_xlabel("iteration")
    ax.set_ylabel("log10 relative error" if relative else "log10 F(x)")
    if title:
        ax.set_title(title)
    if len(mapping) > 1:
        ax.legend()
    ax.grid(True, alpha=0.3)
    try:
        _ensure_parent(path)
        fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as e:
        raise ResultIOError(path, str(e)) from e
    finally:
        plt.close(fig)
    csv_path = trace_to_csv(mapping, os.path.splitext(path)[0] + ".csv")
    debug_log(f"Wrote trace plot {path} and {csv_path}")
    return csv_path


def reference_x_max(model: SignalModel, k: int, samples: int, seed: int = 0) -> float:
    """x*_max used for the sample-complexity reference curve.

    Fixed families use their pinned value; Gaussian signals use the average
    maximum coordinate of ``samples`` random unit-norm k-sparse signals.
    """
    if model.kind == FLAT:
        return 1.0 / math.sqrt(k)
    if model.kind == FIXED_MAX:
        return model.resolve_x_max(k)
    return estimate_mean_max_coordinate(k, samples, make_rng(seed))


def reference_curve(n: int, k_values: Sequence[int], model: SignalModel, samples: int, seed: int = 0) -> np.ndarray:
    """m = (1/3) k (x*_max)^-2 log(n/k) for each k."""
    return np.array([
        k * math.log(n / k) / (3.0 * reference_x_max(model, k, samples, seed) ** 2)
        for k in k_values
    ])


def emit_heatmap(results: Sequence[CellResult], path: str, samples: Optional[int] = None, seed: int = 0) -> str:
    """Success rate over (k, m) with the reference curve overlaid.

    All results must come from one experiment (same n, solver and model).
    ``samples`` defaults to config.XMAX_ESTIMATE_SAMPLES.
    """
    if samples is None:
        samples = config.XMAX_ESTIMATE_SAMPLES
    if not results:
        raise ParameterError("no results to draw")
    first = results[0].cell
    if any((r.cell.n, r.cell.solver, r.cell.model) != (first.n, first.solver, first.model) for r in results):
        raise ParameterError("heatmap results must share n, solver and signal model")

    k_values = sorted({r.cell.k for r in results})
    m_values = sorted({r.cell.m for r in results})
    rates = np.full((len(m_values), len(k_values)), np.nan)
    for r in results:
        rates[m_values.index(r.cell.m), k_values.index(r.cell.k)] = r.success_rate

    model = SignalModel.parse(first.model)
    curve_k = [k for k in k_values if k < first.n]
    curve_m = reference_curve(first.n, curve_k, model, samples, seed)

    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4.5))
    mesh = ax.pcolormesh(k_values, m_values, rates, shading="nearest", cmap="gray", vmin=0.0, vmax=1.0)
    fig.colorbar(mesh, ax=ax, label="success rate")
    ax.plot(curve_k, curve_m, color="tab:red", linewidth=1.5, label="(1/3) k x*_max^-2 log(n/k)")
    if len(m_values) > 1:
        ax.set_ylim(min(m_values), max(m_values))
    ax.set_xlabel("sparsity k")
    ax.set_ylabel("measurements m")
    ax.set_title(f"{first.solver}, n={first.n}, {first.model}")
    ax.legend(loc="upper left")
    try:
        _ensure_parent(path)
        fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as e:
        raise ResultIOError(path, str(e)) from e
    finally:
        plt.close(fig)
    return path
