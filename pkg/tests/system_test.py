#!/usr/bin/env python3
"""
System Test for sparsepr

This script runs the sparsepr command line tool through a series of
scenarios in fresh subprocesses, checks exit codes and output files, and
logs everything (with system information) for later analysis.

The default scenarios take a few minutes. ``--full`` adds the desk-scale
HWF preset, which takes much longer on a single core.

Usage:
    python system_test.py [--log-file LOG_FILE] [--workers N] [--full]
"""

import argparse
import datetime
import filecmp
import logging
import os
import platform
import subprocess
import sys
import tempfile
import time
from importlib import metadata

import psutil

# Add the parent directory to sys.path to allow running from a checkout
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from sparsepr import __version__  # noqa: E402


def setup_logging(log_file=None):
    """Configure logging to both console and file."""
    if log_file is None:
        timestamp = datetime.datetime.now().strftime("%Y%m%d_%H%M%S")
        log_file = f"system_test_{timestamp}.log"

    logger = logging.getLogger("sparsepr_system_test")
    logger.setLevel(logging.DEBUG)

    file_handler = logging.FileHandler(log_file)
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(logging.Formatter('%(asctime)s - %(levelname)s - %(message)s'))

    console_handler = logging.StreamHandler()
    console_handler.setLevel(logging.INFO)
    console_handler.setFormatter(logging.Formatter('%(message)s'))

    logger.addHandler(file_handler)
    logger.addHandler(console_handler)
    return logger, log_file


def get_system_info():
    """Gather system information relevant to numerical runs."""
    info = {
        "os": platform.system(),
        "os_release": platform.release(),
        "platform": platform.platform(),
        "processor": platform.processor(),
        "python_version": platform.python_version(),
        "sparsepr_version": __version__,
        "memory": f"{psutil.virtual_memory().total / (1024**3):.2f} GB",
        "cpu_count": psutil.cpu_count(logical=False),
        "logical_cpu_count": psutil.cpu_count(logical=True),
    }
    for package in ["numpy", "matplotlib"]:
        try:
            info[f"{package}_version"] = metadata.version(package)
        except metadata.PackageNotFoundError:
            info[f"{package}_version"] = "Not installed"
    return info


def run_cli(logger, args, expect_code=0, timeout=3600):
    """Run ``python -m sparsepr ARGS``; True if the exit code matches."""
    command = [sys.executable, "-m", "sparsepr", *args]
    logger.info(f"COMMAND: {' '.join(command)}")
    start = time.monotonic()
    try:
        proc = subprocess.run(command, capture_output=True, text=True, timeout=timeout)
    except subprocess.TimeoutExpired:
        logger.error(f"Timed out after {timeout} seconds")
        return False
    elapsed = time.monotonic() - start
    for line in (proc.stdout + proc.stderr).splitlines():
        logger.debug(f"OUTPUT: {line}")
    logger.info(f"exit code {proc.returncode} (expected {expect_code}) in {elapsed:.1f}s")
    return proc.returncode == expect_code


def scenario_round_trip(logger, workdir, workers):
    inst = os.path.join(workdir, "inst.json")
    est = os.path.join(workdir, "est.json")
    return (
        run_cli(logger, ["gen", "--n", "200", "--m", "400", "--k", "5", "--model", "max=0.7",
                         "--seed", "1", "--out", inst])
        and run_cli(logger, ["run", "--instance", inst, "--restarts", "5", "--out", est])
        and os.path.exists(est)
    )


def scenario_solvers(logger, workdir, workers):
    ok = True
    for solver in ["hwf", "hwf-random", "sparta", "sparta-support"]:
        ok &= run_cli(logger, ["run", "--n", "200", "--m", "400", "--k", "5", "--model", "max=0.7",
                               "--seed", "2", "--solver", solver, "--restarts", "5"])
    return ok


def scenario_error_codes(logger, workdir, workers):
    return (
        run_cli(logger, ["gen", "--n", "5", "--m", "10", "--k", "9",
                         "--out", os.path.join(workdir, "x.json")], expect_code=2)
        and run_cli(logger, ["run", "--instance", os.path.join(workdir, "missing.json")], expect_code=3)
    )


def scenario_determinism(logger, workdir, workers):
    """1 worker vs N workers must give byte-identical per-trial CSVs."""
    grid = ["sweep", "--n", "200", "--m-list", "200:400:100", "--k-list", "2,4", "--trials", "8",
            "--model", "gaussian", "--restarts", "5", "--max-iters", "20000", "--no-timing"]
    serial = os.path.join(workdir, "serial.csv")
    parallel = os.path.join(workdir, "parallel.csv")
    if not run_cli(logger, grid + ["--workers", "1", "--out", serial]):
        return False
    if not run_cli(logger, grid + ["--workers", str(workers), "--out", parallel]):
        return False
    same = filecmp.cmp(serial, parallel, shallow=False)
    logger.info(f"serial vs {workers} workers: {'identical' if same else 'DIFFERENT'}")
    return same


def scenario_support_and_trace(logger, workdir, workers):
    return (
        run_cli(logger, ["support", "--n", "1000", "--m-list", "500", "--k-list", "10:30:10",
                         "--model", "max=0.7", "--trials", "20", "--workers", str(workers),
                         "--out", os.path.join(workdir, "support.csv")])
        and run_cli(logger, ["trace", "--n", "500", "--m", "500", "--k", "5", "--restarts", "5",
                             "--out", os.path.join(workdir, "trace.svg")])
    )


def scenario_desk_preset(logger, workdir, workers):
    return run_cli(logger, ["sweep", "--preset", "fig2-small", "--workers", str(workers),
                            "--out", os.path.join(workdir, "fig2.csv"),
                            "--heatmap", os.path.join(workdir, "fig2.svg")])


def main():
    """Main test orchestration function."""
    parser = argparse.ArgumentParser(description="Run system tests for sparsepr")
    parser.add_argument("--log-file", help="Path to log file (default: system_test_TIMESTAMP.log)")
    parser.add_argument("--workers", type=int, default=8, help="Workers for parallel scenarios (default: 8)")
    parser.add_argument("--full", action="store_true", help="Also run the desk-scale fig2-small preset")
    args = parser.parse_args()

    logger, log_file = setup_logging(args.log_file)
    logger.info(f"System test started at {datetime.datetime.now().isoformat()}")
    logger.info(f"Log file: {os.path.abspath(log_file)}")
    logger.info("SYSTEM INFORMATION:")
    for key, value in get_system_info().items():
        logger.info(f"  {key}: {value}")

    scenarios = [
        ("Instance round trip", scenario_round_trip),
        ("All solvers", scenario_solvers),
        ("Error exit codes", scenario_error_codes),
        ("Worker-count determinism", scenario_determinism),
        ("Support experiment and trace", scenario_support_and_trace),
    ]
    if args.full:
        scenarios.append(("Desk-scale HWF preset", scenario_desk_preset))

    results = []
    with tempfile.TemporaryDirectory(prefix="sparsepr_system_") as workdir:
        for i, (name, scenario) in enumerate(scenarios, 1):
            logger.info("\n" + "=" * 80)
            logger.info(f"TEST {i} of {len(scenarios)}: {name}")
            logger.info("=" * 80)
            try:
                passed = scenario(logger, workdir, args.workers)
            except Exception as e:
                logger.error(f"Error during test execution: {e}")
                passed = False
            logger.info(f"TEST RESULT: {'PASS' if passed else 'FAIL'}")
            results.append((name, passed))

    logger.info("\n" + "=" * 80)
    logger.info("TEST SUMMARY")
    logger.info("=" * 80)
    for name, passed in results:
        logger.info(f"{name}: {'PASS' if passed else 'FAIL'}")
    passed = sum(1 for _, ok in results if ok)
    logger.info("-" * 80)
    logger.info(f"Tests passed: {passed}/{len(results)} ({passed / len(results) * 100:.1f}%)")
    logger.info(f"System test completed at {datetime.datetime.now().isoformat()}")
    return 0 if passed == len(results) else 1


if __name__ == "__main__":
    sys.exit(main())
