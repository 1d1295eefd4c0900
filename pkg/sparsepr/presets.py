"""
Named experiment grids.

Built-in presets are desk-scale versions of the full-size experiments. User
presets live in a JSON file under the user's config directory
(``~/.config/sparsepr/presets.json``) and are merged over the built-ins, so a
user preset with a built-in's name replaces it.

A preset is a list of grid descriptions. Each description is a plain,
JSON-compatible dict:

    {"experiment_id": "fig2-left", "n": 1000, "m": [300, 500], "k": [20],
     "model": "gaussian", "solver": "hwf", "trials": 20, "seed": 0,
     "threshold": 0.01, "hwf": {"max_iters": 20000, "restarts": 5},
     "sparta": {}, "restarts_sweep": [1, 2, 5]}

Missing keys fall back to the config module; unknown keys are ignored.
"""

import json
import os
from dataclasses import fields
from typing import Any, Dict, List, Sequence, Union

from sparsepr import config
from sparsepr.errors import ParameterError, ResultIOError
from sparsepr.harness import (
    HWF,
    ONE_STEP_SUPPORT_ONLY,
    SPARTA,
    SPARTA_SUPPORT,
    TOPK_SUPPORT_ONLY,
    ExperimentGrid,
    expand_restart_sweep,
)
from sparsepr.hwf import HwfConfig
from sparsepr.logging_util import debug_log
from sparsepr.model import SignalModel
from sparsepr.sparta import SpartaConfig

# Solver config fields a preset may set. trace flags and k are per-run.
HWF_KEYS = ("eta", "alpha", "max_iters", "restarts", "kappa", "risk_stop", "restart_workers")
SPARTA_KEYS = ("mu", "gamma", "power_iters", "max_iters", "init_fraction", "risk_stop")

_FIG_MODELS = ["flat", "max=k^-0.25", "max=0.7"]
# Desk-scale HWF budget: 20000 iterations, 5 restarts.
_DESK_HWF = {"max_iters": 20000, "restarts": 5}


def _support_grids() -> List[Dict[str, Any]]:
    grids = []
    for model in _FIG_MODELS + ["gaussian"]:
        for solver in (ONE_STEP_SUPPORT_ONLY, TOPK_SUPPORT_ONLY):
            grids.append({
                "experiment_id": f"fig1-{model}",
                "n": 1000,
                "m": [500],
                "k": list(range(5, 55, 5)),
                "model": model,
                "solver": solver,
                "trials": 100,
            })
    return grids


def _xmax_grids() -> List[Dict[str, Any]]:
    grids = []
    for model in _FIG_MODELS:
        for solver in (HWF, SPARTA, SPARTA_SUPPORT):
            grids.append({
                "experiment_id": f"fig3-{model}",
                "n": 1000,
                "m": [500],
                "k": [10, 20, 30, 40],
                "model": model,
                "solver": solver,
                "trials": 10,
                "hwf": dict(_DESK_HWF),
            })
    return grids


BUILTIN_PRESETS: Dict[str, List[Dict[str, Any]]] = {
    "fig1-small": _support_grids(),
    "fig2-small": [{
        "experiment_id": "fig2-left",
        "n": 1000,
        "m": [300, 500, 700],
        "k": [20],
        "model": "gaussian",
        "solver": HWF,
        "trials": 20,
        "hwf": dict(_DESK_HWF),
    }],
    "fig2-right-small": [{
        "experiment_id": "fig2-right",
        "n": 1000,
        "m": [500],
        "k": [10, 20, 30, 40],
        "model": "gaussian",
        "solver": HWF,
        "trials": 20,
        "hwf": dict(_DESK_HWF),
    }],
    "fig3-small": _xmax_grids(),
    "fig4-small": [{
        "experiment_id": "fig4",
        "n": 256,
        "m": list(range(50, 450, 50)),
        "k": list(range(2, 18, 2)),
        "model": "gaussian",
        "solver": HWF,
        "trials": 10,
        "hwf": dict(_DESK_HWF),
    }],
    "fig5-small": [{
        "experiment_id": "fig5",
        "n": 1000,
        "m": [300, 500],
        "k": [20],
        "model": "gaussian",
        "solver": HWF,
        "trials": 20,
        "hwf": dict(_DESK_HWF),
        "restarts_sweep": [1, 2, 5, 10],
    }],
    "smoke": [{
        "experiment_id": "smoke",
        "n": 64,
        "m": [200],
        "k": [2],
        "model": "gaussian",
        "solver": HWF,
        "trials": 4,
        "hwf": {"max_iters": 5000, "restarts": 3},
    }],
}


def presets_dir() -> str:
    """Directory holding the user presets file (respects XDG_CONFIG_HOME)."""
    base = os.environ.get("XDG_CONFIG_HOME", os.path.expanduser("~/.config"))
    return os.path.join(base, "sparsepr")


def presets_path() -> str:
    return os.path.join(presets_dir(), "presets.json")


def _as_list(entry: Union[dict, list]) -> List[dict]:
    return [entry] if isinstance(entry, dict) else list(entry)


def _read_user_presets() -> Dict[str, List[dict]]:
    path = presets_path()
    if not os.path.exists(path):
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            stored = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        debug_log(f"Could not read presets ({e}); using built-ins only")
        return {}
    if not isinstance(stored, dict):
        debug_log(f"Ignoring {path}: expected a JSON object")
        return {}
    return {
        name: _as_list(entry)
        for name, entry in stored.items()
        if isinstance(entry, (dict, list))
    }


def load_presets() -> Dict[str, List[dict]]:
    """Built-in presets with the user's presets merged over them.

    A missing or corrupt user file yields the built-ins.
    """
    merged = {name: [dict(g) for g in grids] for name, grids in BUILTIN_PRESETS.items()}
    merged.update(_read_user_presets())
    return merged


def _int_list(value, name: str) -> List[int]:
    values = value if isinstance(value, (list, tuple)) else [value]
    try:
        return [int(v) for v in values]
    except (TypeError, ValueError) as e:
        raise ParameterError(f"'{name}' must be an integer or a list of integers") from e


def _pick(section, keys: Sequence[str], name: str) -> Dict[str, Any]:
    if section is None:
        return {}
    if not isinstance(section, dict):
        raise ParameterError(f"'{name}' must be an object")
    return {key: section[key] for key in keys if key in section}


def grid_from_dict(doc: Dict[str, Any]) -> ExperimentGrid:
    """Build an ExperimentGrid from a preset description."""
    for key in ("n", "m", "k", "solver"):
        if key not in doc:
            raise ParameterError(f"grid description is missing '{key}'")
    return ExperimentGrid(
        experiment_id=str(doc.get("experiment_id", doc["solver"])),
        n=int(doc["n"]),
        m_values=tuple(_int_list(doc["m"], "m")),
        k_values=tuple(_int_list(doc["k"], "k")),
        model=SignalModel.parse(str(doc.get("model", "gaussian"))),
        solver=str(doc["solver"]),
        trials=int(doc.get("trials", config.DEFAULT_TRIALS)),
        seed=int(doc.get("seed", config.DEFAULT_SEED)),
        hwf=HwfConfig.from_config(**_pick(doc.get("hwf"), HWF_KEYS, "hwf")),
        sparta=SpartaConfig.from_config(k=1, **_pick(doc.get("sparta"), SPARTA_KEYS, "sparta")),
        threshold=float(doc.get("threshold", config.SUCCESS_THRESHOLD)),
        random_sigma=float(doc.get("random_sigma", config.RANDOM_INIT_SIGMA)),
    )


def grid_to_dict(grid: ExperimentGrid) -> Dict[str, Any]:
    """Inverse of ``grid_from_dict``; solver configs are written in full."""
    hwf_values = {f.name: getattr(grid.hwf, f.name) for f in fields(grid.hwf) if f.name in HWF_KEYS}
    sparta_values = {f.name: getattr(grid.sparta, f.name) for f in fields(grid.sparta) if f.name in SPARTA_KEYS}
    return {
        "experiment_id": grid.experiment_id,
        "n": grid.n,
        "m": list(grid.m_values),
        "k": list(grid.k_values),
        "model": grid.model.label,
        "solver": grid.solver,
        "trials": grid.trials,
        "seed": grid.seed,
        "threshold": grid.threshold,
        "random_sigma": grid.random_sigma,
        "hwf": hwf_values,
        "sparta": sparta_values,
    }


def grids_from_entry(entry: Union[dict, list]) -> List[ExperimentGrid]:
    """All grids of one preset, with any ``restarts_sweep`` expanded."""
    grids: List[ExperimentGrid] = []
    for doc in _as_list(entry):
        grid = grid_from_dict(doc)
        sweep = doc.get("restarts_sweep")
        if sweep:
            grids.extend(expand_restart_sweep(grid, _int_list(sweep, "restarts_sweep")))
        else:
            grids.append(grid)
    return grids


def get_preset(name: str) -> List[ExperimentGrid]:
    presets = load_presets()
    if name not in presets:
        raise ParameterError(f"unknown preset '{name}' (available: {', '.join(sorted(presets))})")
    return grids_from_entry(presets[name])


def save_preset(name: str, grids: Sequence[Union[ExperimentGrid, dict]]) -> str:
    """Persist a user preset (creating the dir); returns the file path."""
    if not name:
        raise ParameterError("preset name must not be empty")
    stored = _read_user_presets()
    stored[name] = [g if isinstance(g, dict) else grid_to_dict(g) for g in grids]
    path = presets_path()
    try:
        os.makedirs(presets_dir(), exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(stored, fh, indent=2)
    except OSError as e:
        raise ResultIOError(path, str(e)) from e
    debug_log(f"Saved preset '{name}' ({len(grids)} grid(s)) to {path}")
    return path
