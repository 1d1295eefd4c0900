#!/usr/bin/env python3
"""
sparsepr - Command Line Entry Point

Subcommands:
    gen      draw a sparse signal and Gaussian measurements, write instance JSON
    run      solve one instance (HWF, random-init HWF, SPARTA, SPARTA-support)
    support  support-recovery experiment (one-step HWF vs top-k marginals)
    sweep    success-rate grid, from a preset or explicit lists
    trace    convergence trace of one run, spiked vs random initialization

Exit codes: 0 success, 2 parameter error, 3 I/O error, 4 every restart failed.
"""

import argparse
import os
import sys
from dataclasses import replace
from typing import Dict, List, Optional, Sequence

from sparsepr import __version__, config
from sparsepr.errors import ParameterError, SparsePRError
from sparsepr.harness import (
    HWF,
    HWF_RANDOM,
    ONE_STEP_SUPPORT_ONLY,
    SOLVERS,
    SPARTA,
    SPARTA_SUPPORT,
    TOPK_SUPPORT_ONLY,
    CellResult,
    ExperimentGrid,
    emit_csv,
    expand_restart_sweep,
    make_rng,
    run_grids,
    summarize,
)
from sparsepr.hwf import HwfConfig, RunResult, run_multi_restart, run_random_init
from sparsepr.instance_io import load_instance, save_estimate, save_instance
from sparsepr.logging_util import status_log
from sparsepr.model import (
    MeasurementSet,
    SignalModel,
    SparseSignal,
    generate_measurements,
    generate_signal,
    relative_error,
)
from sparsepr.sparta import SpartaConfig, run_sparta, run_sparta_support
from sparsepr.support import ONE_STEP_HWF, TOPK_MARGINAL

RUN_SOLVERS = (HWF, HWF_RANDOM, SPARTA, SPARTA_SUPPORT)
SUPPORT_METHODS = {ONE_STEP_HWF: ONE_STEP_SUPPORT_ONLY, TOPK_MARGINAL: TOPK_SUPPORT_ONLY}

# CLI flag -> config attribute, applied before any solver config is built.
FLAG_TO_CONFIG = {
    "eta": "HWF_ETA",
    "alpha": "HWF_ALPHA",
    "kappa": "HWF_KAPPA",
    "restarts": "HWF_RESTARTS",
    "max_iters": "HWF_MAX_ITERS",
    "risk_stop": "HWF_RISK_STOP",
    "restart_workers": "HWF_RESTART_WORKERS",
    "sigma": "RANDOM_INIT_SIGMA",
    "mu": "SPARTA_MU",
    "gamma": "SPARTA_GAMMA",
    "sparta_iters": "SPARTA_MAX_ITERS",
    "threshold": "SUCCESS_THRESHOLD",
}


def parse_int_list(text: str) -> List[int]:
    """'100,200,300' or 'start:stop:step' (stop inclusive) or a mix of both."""
    values: List[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if ":" in part:
                pieces = [int(p) for p in part.split(":")]
                if len(pieces) != 3 or pieces[2] < 1:
                    raise ValueError(part)
                start, stop, step = pieces
                values.extend(range(start, stop + 1, step))
            else:
                values.append(int(part))
        except ValueError as e:
            raise ParameterError(f"cannot parse integer list '{text}'") from e
    return values


def apply_overrides(args: argparse.Namespace) -> None:
    """Copy explicitly given flags onto the config module."""
    for flag, attr in FLAG_TO_CONFIG.items():
        value = getattr(args, flag, None)
        if value is not None:
            setattr(config, attr, value)
    if getattr(args, "verbose", False):
        config.VERBOSE = True


def _solver_flags() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group("solver settings")
    group.add_argument("--eta", type=float, help=f"HWF step size (default: {config.HWF_ETA})")
    group.add_argument("--alpha", type=float, help=f"HWF initialization size (default: {config.HWF_ALPHA})")
    group.add_argument("--kappa", type=float, help=f"Sparsity tolerance for picking a restart (default: {config.HWF_KAPPA})")
    group.add_argument("--restarts", type=int, help=f"Spiked restarts (default: {config.HWF_RESTARTS})")
    group.add_argument("--max-iters", type=int, help=f"HWF iterations per restart (default: {config.HWF_MAX_ITERS})")
    group.add_argument("--risk-stop", type=float, help=f"Stop once F(x) <= this (default: {config.HWF_RISK_STOP})")
    group.add_argument("--restart-workers", type=int, help="Threads running restarts of one solve")
    group.add_argument("--sigma", type=float, help=f"Random-init noise scale (default: {config.RANDOM_INIT_SIGMA})")
    group.add_argument("--mu", type=float, help=f"SPARTA step size (default: {config.SPARTA_MU})")
    group.add_argument("--gamma", type=float, help=f"SPARTA truncation threshold (default: {config.SPARTA_GAMMA})")
    group.add_argument("--sparta-iters", type=int, help=f"SPARTA iterations (default: {config.SPARTA_MAX_ITERS})")
    return parent


def _instance_flags(required: bool) -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group("instance")
    group.add_argument("--n", type=int, required=required, help="Signal dimension")
    group.add_argument("--m", type=int, required=required, help="Number of measurements")
    group.add_argument("--k", type=int, required=required, help="Sparsity")
    group.add_argument("--model", default="gaussian",
                       help="Signal model: flat, gaussian, max=<value> or max=k^-<power> (default: %(default)s)")
    group.add_argument("--seed", type=int, default=config.DEFAULT_SEED, help="Random seed (default: %(default)s)")
    return parent


def _grid_flags() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group("grid")
    group.add_argument("--n", type=int, help="Signal dimension")
    group.add_argument("--m-list", help="Measurement counts, e.g. 100,200 or 100:1000:100")
    group.add_argument("--k-list", help="Sparsity levels, e.g. 5,10 or 5:50:5")
    group.add_argument("--model", help="Signal model (default: gaussian)")
    group.add_argument("--trials", type=int, help=f"Trials per cell (default: {config.DEFAULT_TRIALS})")
    group.add_argument("--seed", type=int, help=f"Master seed (default: {config.DEFAULT_SEED})")
    group.add_argument("--threshold", type=float, help=f"Success threshold on relative error (default: {config.SUCCESS_THRESHOLD})")
    group.add_argument("--workers", type=int, default=config.WORKERS, help="Worker processes (default: %(default)s)")
    group.add_argument("--out", help="Per-trial CSV path (the per-cell CSV goes next to it)")
    group.add_argument("--no-timing", action="store_true",
                       help="Leave wall_time_s empty so CSVs are byte-identical across runs")
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparsepr",
        description="Sparse phase retrieval with Hadamard Wirtinger flow",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--verbose", "-v", action="store_true", help="Print solver debug output")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    solver = _solver_flags()

    gen = sub.add_parser("gen", parents=[_instance_flags(required=True)], help="Write an instance JSON file")
    gen.add_argument("--out", required=True, help="Instance file to write")

    run = sub.add_parser("run", parents=[_instance_flags(required=False), solver], help="Solve one instance")
    run.add_argument("--instance", help="Instance JSON (otherwise drawn from --n --m --k --model --seed)")
    run.add_argument("--solver", choices=RUN_SOLVERS, default=HWF, help="Solver (default: %(default)s)")
    run.add_argument("--trace", metavar="SVG", help="Write a convergence plot (and its CSV) here")
    run.add_argument("--out", help="Write the estimate and run summary as JSON")

    support = sub.add_parser("support", parents=[_grid_flags(), solver], help="Support-recovery experiment")
    support.add_argument("--method", choices=list(SUPPORT_METHODS) + ["both"], default="both",
                         help="Support estimator (default: %(default)s)")

    sweep = sub.add_parser("sweep", parents=[_grid_flags(), solver], help="Success-rate grid")
    sweep.add_argument("--preset", help="Named grid (see --list-presets)")
    sweep.add_argument("--list-presets", action="store_true", help="List available presets and exit")
    sweep.add_argument("--solver", choices=SOLVERS, help=f"Solver for explicit grids (default: {HWF})")
    sweep.add_argument("--restarts-list", help="Run the grid once per restart budget, e.g. 1,5,10")
    sweep.add_argument("--save-preset", metavar="NAME", help="Store the explicit grid as a user preset")
    sweep.add_argument("--heatmap", metavar="SVG", help="Render success rate over (k, m)")

    trace = sub.add_parser("trace", parents=[_instance_flags(required=True), solver], help="Convergence trace run")
    trace.add_argument("--init", choices=["spiked", "random", "both"], default="both",
                       help="Initialization(s) to trace (default: %(default)s)")
    trace.add_argument("--out", required=True, help="SVG to write (raw trace CSV goes next to it)")
    return parser


def draw_instance(n: int, m: int, k: int, model: str, seed: int):
    rng = make_rng(seed)
    signal = generate_signal(SignalModel.parse(model), n, k, rng)
    meas = generate_measurements(signal, m, rng)
    return signal, meas, rng


def cmd_gen(args: argparse.Namespace) -> int:
    signal, meas, _ = draw_instance(args.n, args.m, args.k, args.model, args.seed)
    save_instance(args.out, signal, meas, args.seed)
    status_log(f"Wrote instance n={signal.n} m={meas.m} k={signal.k} ({args.model}) to {args.out}")
    return 0


def _solve(solver: str, meas: MeasurementSet, signal: Optional[SparseSignal], k: int, trace: bool, rng) -> RunResult:
    hcfg = HwfConfig.from_config(trace=trace)
    if solver == HWF:
        return run_multi_restart(meas, hcfg, signal)
    if solver == HWF_RANDOM:
        return run_random_init(meas, hcfg, rng, signal=signal)
    scfg = SpartaConfig.from_config(k=k, trace=trace)
    if solver == SPARTA:
        return run_sparta(meas, scfg, signal=signal)
    return run_sparta_support(meas, k, hcfg, scfg, signal)


def cmd_run(args: argparse.Namespace) -> int:
    if args.instance:
        signal, meas, seed = load_instance(args.instance)
        rng = make_rng(seed if seed is not None else args.seed)
    else:
        if None in (args.n, args.m, args.k):
            raise ParameterError("run needs --instance or all of --n, --m and --k")
        signal, meas, rng = draw_instance(args.n, args.m, args.k, args.model, args.seed)
    k = args.k if args.k is not None else signal.k

    result = _solve(args.solver, meas, signal, k, bool(args.trace), rng)
    rel = relative_error(result.x_hat, signal)
    print(f"solver:           {args.solver}")
    print(f"relative error:   {rel:.6e}")
    print(f"success:          {'yes' if rel < config.SUCCESS_THRESHOLD else 'no'}")
    print(f"restart index:    {result.restart_index}")
    print(f"iterations:       {result.winner_iterations}")
    print(f"stop reason:      {result.stop_reason.value}")
    print(f"final risk:       {result.final_risk:.6e}")
    if result.failed_restarts:
        print(f"failed restarts:  {len(result.failed_restarts)}")

    if args.trace:
        from sparsepr.plotting import emit_trace_plot

        csv_path = emit_trace_plot({args.solver: result.trace}, args.trace)
        status_log(f"Trace written to {args.trace} ({csv_path})")
    if args.out:
        save_estimate(args.out, result.x_hat, {
            "solver": args.solver,
            "rel_error": rel,
            "restart_index": result.restart_index,
            "iterations": result.iterations,
            "stop_reason": result.stop_reason.value,
            "final_risk": result.final_risk,
            "failed_restarts": result.failed_restarts,
        })
        status_log(f"Estimate written to {args.out}")
    return 0


def _explicit_grid(args: argparse.Namespace, solver: str, experiment_id: str) -> ExperimentGrid:
    if args.n is None or not args.m_list or not args.k_list:
        raise ParameterError("explicit grids need --n, --m-list and --k-list")
    return ExperimentGrid(
        experiment_id=experiment_id,
        n=args.n,
        m_values=tuple(parse_int_list(args.m_list)),
        k_values=tuple(parse_int_list(args.k_list)),
        model=SignalModel.parse(args.model or "gaussian"),
        solver=solver,
        trials=args.trials if args.trials is not None else config.DEFAULT_TRIALS,
        seed=args.seed if args.seed is not None else config.DEFAULT_SEED,
        hwf=HwfConfig.from_config(),
        sparta=SpartaConfig.from_config(k=1),
        threshold=config.SUCCESS_THRESHOLD,
        random_sigma=config.RANDOM_INIT_SIGMA,
    )


def _finish_experiment(results: Sequence[CellResult], args: argparse.Namespace, name: str) -> None:
    out = args.out or os.path.join(config.OUTPUT_DIR, f"{name}.csv")
    trials_path, cells_path = emit_csv(results, out)
    for line in summarize(results):
        print(line)
    status_log(f"Per-trial results: {trials_path}")
    status_log(f"Per-cell results:  {cells_path}")


def cmd_support(args: argparse.Namespace) -> int:
    methods = list(SUPPORT_METHODS) if args.method == "both" else [args.method]
    grids = [_explicit_grid(args, SUPPORT_METHODS[method], "support") for method in methods]
    results = run_grids(grids, workers=args.workers, timing=not args.no_timing)
    _finish_experiment(results, args, "support")
    return 0


def _reject_grid_shape(args: argparse.Namespace) -> None:
    """A preset fixes its own grids; shape flags would be silently dropped."""
    given = [flag for flag, value in (
        ("--n", args.n), ("--m-list", args.m_list), ("--k-list", args.k_list),
        ("--model", args.model), ("--solver", args.solver)) if value is not None]
    if given:
        raise ParameterError(f"{', '.join(given)} cannot be combined with --preset")


def _override_grid(grid: ExperimentGrid, args: argparse.Namespace) -> ExperimentGrid:
    """Explicit CLI flags win over a preset's values."""
    hwf = grid.hwf.with_overrides(
        eta=args.eta, alpha=args.alpha, kappa=args.kappa, restarts=args.restarts,
        max_iters=args.max_iters, risk_stop=args.risk_stop, restart_workers=args.restart_workers)
    sparta = replace(grid.sparta, **{
        key: value for key, value in
        (("mu", args.mu), ("gamma", args.gamma), ("max_iters", args.sparta_iters))
        if value is not None})
    changes: Dict[str, object] = {"hwf": hwf, "sparta": sparta}
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.threshold is not None:
        changes["threshold"] = args.threshold
    if args.sigma is not None:
        changes["random_sigma"] = args.sigma
    return replace(grid, **changes)


def _emit_heatmaps(results: Sequence[CellResult], path: str) -> None:
    from sparsepr.plotting import emit_heatmap

    groups: Dict[tuple, List[CellResult]] = {}
    for r in results:
        groups.setdefault((r.cell.experiment_id, r.cell.solver, r.cell.model), []).append(r)
    stem, ext = os.path.splitext(path)
    for i, group in enumerate(groups.values()):
        target = path if len(groups) == 1 else f"{stem}_{i}{ext or '.svg'}"
        emit_heatmap(group, target)
        status_log(f"Heatmap written to {target}")


def cmd_sweep(args: argparse.Namespace) -> int:
    from sparsepr import presets

    if args.list_presets:
        for name, entry in sorted(presets.load_presets().items()):
            print(f"  - {name} ({len(entry)} grid(s))")
        return 0

    if args.preset:
        _reject_grid_shape(args)
        grids = [_override_grid(g, args) for g in presets.get_preset(args.preset)]
        name = args.preset
    else:
        grids = [_explicit_grid(args, args.solver or HWF, args.save_preset or "sweep")]
        name = args.save_preset or "sweep"
    if args.restarts_list:
        grids = [g for grid in grids for g in expand_restart_sweep(grid, parse_int_list(args.restarts_list))]
    if args.save_preset:
        path = presets.save_preset(args.save_preset, grids)
        status_log(f"Saved preset '{args.save_preset}' to {path}")

    results = run_grids(grids, workers=args.workers, timing=not args.no_timing)
    _finish_experiment(results, args, name)
    if args.heatmap and results:
        _emit_heatmaps(results, args.heatmap)
    return 0


def cmd_trace(args: argparse.Namespace) -> int:
    from sparsepr.plotting import emit_trace_plot

    signal, meas, rng = draw_instance(args.n, args.m, args.k, args.model, args.seed)
    hcfg = HwfConfig.from_config(trace=True)
    traces = {}
    if args.init in ("spiked", "both"):
        result = run_multi_restart(meas, hcfg, signal)
        traces["spiked"] = result.trace
        status_log(f"Spiked init: {result.winner_iterations} iterations, "
                   f"relative error {relative_error(result.x_hat, signal):.3e}")
    if args.init in ("random", "both"):
        result = run_random_init(meas, hcfg, rng, signal=signal)
        traces["random"] = result.trace
        status_log(f"Random init: {result.winner_iterations} iterations, "
                   f"relative error {relative_error(result.x_hat, signal):.3e}")
    csv_path = emit_trace_plot(traces, args.out, title=f"n={args.n}, m={args.m}, k={args.k}")
    status_log(f"Trace written to {args.out} ({csv_path})")
    return 0


COMMANDS = {
    "gen": cmd_gen,
    "run": cmd_run,
    "support": cmd_support,
    "sweep": cmd_sweep,
    "trace": cmd_trace,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse command line arguments and dispatch to a subcommand."""
    args = build_parser().parse_args(argv)
    try:
        apply_overrides(args)
        return COMMANDS[args.command](args)
    except SparsePRError as e:
        print(f"Error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
