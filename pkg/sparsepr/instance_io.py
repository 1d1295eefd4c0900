"""
Instance files for the ``gen`` / ``run`` round trip.

An instance is one self-describing JSON document:

    {"n": ..., "m": ..., "k": ..., "seed": ...,
     "signal": [f64 x n], "support": [int x k],
     "a": [f64 x m*n, row-major], "y": [f64 x m]}

Floats go through ``json`` (shortest round-trip repr), so a saved instance
reloads bit-identically.
"""

import json
import os
from typing import Optional, Tuple

import numpy as np

from sparsepr.errors import DimensionMismatchError, ParameterError, ResultIOError
from sparsepr.logging_util import debug_log
from sparsepr.model import MeasurementSet, SparseSignal

REQUIRED_KEYS = ("n", "m", "k", "signal", "support", "a", "y")


def instance_to_dict(signal: SparseSignal, meas: MeasurementSet, seed: Optional[int]) -> dict:
    if signal.n != meas.n:
        raise DimensionMismatchError(f"signal dimension {signal.n} != measurement dimension {meas.n}")
    return {
        "n": signal.n,
        "m": meas.m,
        "k": signal.k,
        "seed": seed,
        "signal": signal.values.tolist(),
        "support": [int(i) for i in signal.support],
        "a": meas.a.ravel(order="C").tolist(),
        "y": meas.y.tolist(),
    }


def instance_from_dict(doc: dict) -> Tuple[SparseSignal, MeasurementSet, Optional[int]]:
    missing = [key for key in REQUIRED_KEYS if key not in doc]
    if missing:
        raise ParameterError(f"instance is missing fields: {', '.join(missing)}")
    n, m, k = int(doc["n"]), int(doc["m"]), int(doc["k"])
    values = np.asarray(doc["signal"], dtype=np.float64)
    a = np.asarray(doc["a"], dtype=np.float64)
    if values.size != n or a.size != m * n or len(doc["y"]) != m or len(doc["support"]) != k:
        raise DimensionMismatchError(f"instance arrays do not match n={n}, m={m}, k={k}")
    signal = SparseSignal(values, doc["support"])
    meas = MeasurementSet(a.reshape(m, n), doc["y"])
    seed = doc.get("seed")
    return signal, meas, (int(seed) if seed is not None else None)


def save_instance(path: str, signal: SparseSignal, meas: MeasurementSet, seed: Optional[int] = None) -> None:
    """Write an instance JSON file (creating the parent directory)."""
    doc = instance_to_dict(signal, meas, seed)
    try:
        parent = os.path.dirname(os.path.abspath(path))
        os.makedirs(parent, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)
    except OSError as e:
        raise ResultIOError(path, str(e)) from e
    debug_log(f"Wrote instance n={signal.n} m={meas.m} k={signal.k} to {path}")


def load_instance(path: str) -> Tuple[SparseSignal, MeasurementSet, Optional[int]]:
    """Read an instance written by ``save_instance``."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise ResultIOError(path, str(e)) from e
    if not isinstance(doc, dict):
        raise ResultIOError(path, "instance file must contain a JSON object")
    return instance_from_dict(doc)


def save_estimate(path: str, x_hat, summary: dict) -> None:
    """Write a solve's estimate plus its summary fields as JSON."""
    doc = dict(summary)
    doc["x_hat"] = np.asarray(x_hat, dtype=np.float64).tolist()
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)
    except OSError as e:
        raise ResultIOError(path, str(e)) from e
