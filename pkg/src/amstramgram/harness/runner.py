"""Run every (problem, seed) pair of an experiment and persist the artifacts.

Layout: ``<output_dir>/<problem>/seed_<k>/`` holding ``records.csv``,
``rce_curves.csv``, ``summary.json`` and the SVG plots.  Each job owns its
directory, so jobs can run in a process pool without coordination.
"""

from __future__ import annotations

import logging
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Optional

from ..autodiff import init_params
from ..optimizer import Adaptive, FixedCutoff, PinnObjective, PrincipledAdaptive, RunResult, train
from ..problems import build_problem
from . import records as rec
from .config import ExperimentConfig
from .svg import loss_chart, rce_chart

logger = logging.getLogger(__name__)


def strategy_name(strategy) -> str:
    if isinstance(strategy, FixedCutoff):
        return f"fixed(alpha={strategy.alpha:g})"
    if isinstance(strategy, PrincipledAdaptive):
        return "principled"
    if isinstance(strategy, Adaptive):
        return "adaptive" if strategy.log_elbow else "adaptive(raw-elbow)"
    return type(strategy).__name__


def run_dir(config: ExperimentConfig, problem: str, seed: int) -> Path:
    return config.output_dir / problem / f"seed_{seed}"


def snapshot_iterations(n_records: int, selectors) -> list[int]:
    """Resolve (possibly negative) snapshot selectors to distinct valid indices."""
    picked = []
    for s in selectors:
        i = s + n_records if s < 0 else s
        if not 0 <= i < n_records:
            clamped = min(max(i, 0), n_records - 1)
            logger.warning("snapshot %d out of range [0, %d); using %d", s, n_records, clamped)
            i = clamped
        if i not in picked:
            picked.append(i)
    return picked


def write_plots(directory: Path, rows: list[dict], curves: dict, eps: Optional[float], selectors) -> list[Path]:
    directory = Path(directory)
    written = []
    if rows:
        path = directory / "loss.svg"
        path.write_text(loss_chart(rows))
        written.append(path)
    if curves:
        keys = list(curves)
        for i in snapshot_iterations(len(keys), selectors):
            t = keys[i]
            r_min = next((r["r_min"] for r in rows if r["t"] == t), None)
            path = directory / f"rce_t{t:05d}.svg"
            path.write_text(rce_chart(*curves[t], eps, t, r_min))
            written.append(path)
    return written


def run_single(config: ExperimentConfig, problem_name: str, seed: int, timestamp: Optional[str] = None) -> dict:
    """Train one seed; failures are caught and reported in the returned summary."""
    out = run_dir(config, problem_name, seed)
    out.mkdir(parents=True, exist_ok=True)
    summary = {
        "problem": problem_name,
        "seed": seed,
        "strategy": strategy_name(config.train.strategy),
        "eps": config.train.eps,
        "t_max": config.train.t_max,
        "hidden_widths": list(config.hidden_widths),
        "activation": config.activation,
    }
    start = time.perf_counter()
    try:
        problem = build_problem(problem_name, config.grid_for(problem_name))
        spec = config.model_for(problem_name, seed)
        objective = PinnObjective(problem, spec)
        train_cfg = replace(config.train, keep_curves=config.output.rce_curves)
        logger.info("%s seed %d: S=%d, P=%d, %s", problem_name, seed, problem.n_samples, spec.n_params, summary["strategy"])
        result: RunResult = train(objective, init_params(spec), train_cfg)
        rec.write_records(out / rec.RECORDS_FILE, result.records, timestamp)
        if config.output.rce_curves:
            rec.write_rce_curves(out / rec.RCE_FILE, result.records)
        summary.update(
            status="ok",
            termination=result.termination,
            iterations=result.iterations,
            final_train_loss=result.final_loss,
            final_mse=result.final_mse,
            final_rel_l2=result.final_rel_l2,
            n_samples=problem.n_samples,
            n_params=spec.n_params,
            step_events=len(result.step_events),
        )
        if config.output.plots:
            rows = rec.read_records(out / rec.RECORDS_FILE)
            curves = rec.read_rce_curves(out / rec.RCE_FILE) if config.output.rce_curves else {}
            write_plots(out, rows, curves, config.train.eps, config.output.snapshots)
        logger.info("%s seed %d: %s after %d iterations, MSE %.3e, rel L2 %s", problem_name, seed,
                    result.termination, result.iterations, result.final_mse,
                    "n/a" if result.final_rel_l2 is None else f"{result.final_rel_l2:.3e}")
    except Exception as exc:  # one bad seed must not sink the others
        logger.error("%s seed %d failed: %s", problem_name, seed, exc)
        summary.update(status="failed", error=f"{type(exc).__name__}: {exc}", traceback=traceback.format_exc())
    summary["wall_time_s"] = round(time.perf_counter() - start, 3)
    rec.write_summary(out / rec.SUMMARY_FILE, summary)
    return summary


def run_experiment(config: ExperimentConfig, timestamp: Optional[str] = None) -> list[dict]:
    jobs = [(p, s) for p in config.problems for s in config.seeds]
    config.output_dir.mkdir(parents=True, exist_ok=True)
    if config.workers <= 1 or len(jobs) == 1:
        return [run_single(config, p, s, timestamp) for p, s in jobs]
    with ProcessPoolExecutor(max_workers=config.workers) as pool:
        futures = [pool.submit(run_single, config, p, s, timestamp) for p, s in jobs]
        return [f.result() for f in futures]
