"""YAML experiment configuration.

Example::

    problems: [heat, laplace2d]
    seeds: [0, 1, 2]
    output_dir: runs
    grid: {counts: 32}
    model: {hidden_widths: [32], activation: tanh}
    train:
      strategy: adaptive        # adaptive | fixed | principled
      eps: 1.0e-10
      t_max: 2000
      line_search: {eta_max: 2.0, grid_depth: 20, golden_iters: 40}
    output: {plots: true, rce_curves: true, snapshots: [0, -1]}

Unknown keys anywhere in the tree are rejected, so a misspelled tolerance
fails loudly instead of silently falling back to a default.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from ..autodiff import ACTIVATIONS, MlpSpec
from ..optimizer import Adaptive, FixedCutoff, LineSearchConfig, PrincipledAdaptive, TrainConfig
from ..problems import PROBLEM_NAMES, GridSpec, default_grid, input_dim

ENV_OUTPUT_DIR = "AMSTRAMGRAM_OUTPUT_DIR"
ENV_THREADS = "AMSTRAMGRAM_THREADS"

STRATEGIES = ("adaptive", "fixed", "principled")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass(frozen=True)
class OutputOptions:
    plots: bool = True
    rce_curves: bool = True
    snapshots: tuple[int, ...] = (0, -1)


@dataclass(frozen=True)
class ExperimentConfig:
    problems: tuple[str, ...]
    seeds: tuple[int, ...]
    train: TrainConfig
    hidden_widths: tuple[int, ...] = (32,)
    activation: str = "tanh"
    grid_counts: Optional[int] = None
    boundary_counts: Optional[int] = None
    output_dir: Path = Path("runs")
    log_level: str = "INFO"
    workers: int = 1
    output: OutputOptions = field(default_factory=OutputOptions)

    def grid_for(self, problem: str) -> GridSpec:
        return default_grid(problem, self.grid_counts, self.boundary_counts)

    def model_for(self, problem: str, seed: int) -> MlpSpec:
        return MlpSpec(input_dim(problem), self.hidden_widths, self.activation, seed)


_SCHEMA = {
    "problems": None,
    "problem": None,
    "seeds": None,
    "output_dir": None,
    "log_level": None,
    "workers": None,
    "grid": {"counts": None, "boundary_counts": None},
    "model": {"hidden_widths": None, "activation": None},
    "train": {
        "strategy": None,
        "alpha": None,
        "eps": None,
        "t_max": None,
        "log_elbow": None,
        "flat_tol": None,
        "line_search": {"eta_max": None, "grid_depth": None, "golden_iters": None},
    },
    "output": {"plots": None, "rce_curves": None, "snapshots": None},
}


def _check_keys(tree: Any, schema: dict, path: str = "") -> None:
    if not isinstance(tree, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping, got {type(tree).__name__}")
    for key, value in tree.items():
        where = f"{path}.{key}" if path else str(key)
        if key not in schema:
            raise ConfigError(f"{where}: unknown key")
        if schema[key] is not None and value is not None:
            _check_keys(value, schema[key], where)


def _int(value, where: str, minimum: Optional[int] = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{where}: must be >= {minimum}, got {value}")
    return value


def _float(value, where: str, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(f"{where}: must be positive, got {value}")
    return float(value)


def _bool(value, where: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"{where}: expected true/false, got {value!r}")
    return value


def _train_config(t: dict) -> TrainConfig:
    strategy_name = t.get("strategy", "adaptive")
    if strategy_name not in STRATEGIES:
        raise ConfigError(f"train.strategy: expected one of {STRATEGIES}, got {strategy_name!r}")
    if strategy_name == "fixed":
        strategy = FixedCutoff(_float(t.get("alpha", 1e-3), "train.alpha", positive=True))
    else:
        if "alpha" in t:
            raise ConfigError("train.alpha: only meaningful with strategy 'fixed'")
        if strategy_name == "adaptive":
            strategy = Adaptive(_bool(t.get("log_elbow", True), "train.log_elbow"))
        else:
            strategy = PrincipledAdaptive()
    ls = t.get("line_search") or {}
    line = LineSearchConfig(
        eta_max=_float(ls.get("eta_max", 2.0), "train.line_search.eta_max", positive=True),
        grid_depth=_int(ls.get("grid_depth", 20), "train.line_search.grid_depth", 0),
        golden_iters=_int(ls.get("golden_iters", 40), "train.line_search.golden_iters", 0),
    )
    flat_tol = _float(t.get("flat_tol", 0.01), "train.flat_tol", positive=True)
    if flat_tol >= 1:
        raise ConfigError(f"train.flat_tol: must be < 1, got {flat_tol}")
    return TrainConfig(
        eps=_float(t.get("eps", 1e-10), "train.eps", positive=True),
        t_max=_int(t.get("t_max", 2000), "train.t_max", 0),
        strategy=strategy,
        line_search=line,
        flat_tol=flat_tol,
    )


def parse_config(tree: Any, base_dir: Optional[Path] = None, environ=None) -> ExperimentConfig:
    """Validate a parsed YAML tree and apply environment overrides."""
    environ = os.environ if environ is None else environ
    if tree is None:
        tree = {}
    _check_keys(tree, _SCHEMA)

    if "problem" in tree and "problems" in tree:
        raise ConfigError("problem: give either 'problem' or 'problems', not both")
    problems = tree.get("problems", tree.get("problem"))
    if problems is None:
        raise ConfigError("problems: required")
    if isinstance(problems, str):
        problems = [problems]
    if not isinstance(problems, list):
        raise ConfigError(f"problems: expected a name or a list of names, got {problems!r}")
    for name in problems:
        if name not in PROBLEM_NAMES:
            raise ConfigError(f"problems: unknown problem {name!r}; choose from {', '.join(PROBLEM_NAMES)}")
    if not problems:
        raise ConfigError("problems: must not be empty")

    seeds = tree.get("seeds", [0])
    if isinstance(seeds, int) and not isinstance(seeds, bool):
        seeds = [seeds]
    if not isinstance(seeds, list) or not seeds:
        raise ConfigError("seeds: expected a non-empty list of integers")
    seeds = [_int(s, "seeds", 0) for s in seeds]
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds: duplicate entries")

    grid = tree.get("grid") or {}
    counts = grid.get("counts")
    bcounts = grid.get("boundary_counts")
    counts = None if counts is None else _int(counts, "grid.counts", 2)
    bcounts = None if bcounts is None else _int(bcounts, "grid.boundary_counts", 2)

    model = tree.get("model") or {}
    widths = model.get("hidden_widths", [32])
    if isinstance(widths, int) and not isinstance(widths, bool):
        widths = [widths]
    if not isinstance(widths, list) or not widths:
        raise ConfigError("model.hidden_widths: expected a non-empty list of integers")
    widths = tuple(_int(w, "model.hidden_widths", 1) for w in widths)
    activation = model.get("activation", "tanh")
    if activation not in ACTIVATIONS:
        raise ConfigError(f"model.activation: expected one of {ACTIVATIONS}, got {activation!r}")

    train = _train_config(tree.get("train") or {})

    out = tree.get("output") or {}
    snapshots = out.get("snapshots", [0, -1])
    if not isinstance(snapshots, list):
        raise ConfigError("output.snapshots: expected a list of iteration indices")
    output = OutputOptions(
        plots=_bool(out.get("plots", True), "output.plots"),
        rce_curves=_bool(out.get("rce_curves", True), "output.rce_curves"),
        snapshots=tuple(_int(s, "output.snapshots") for s in snapshots),
    )

    output_dir = environ.get(ENV_OUTPUT_DIR) or tree.get("output_dir", "runs")
    if not isinstance(output_dir, str):
        raise ConfigError(f"output_dir: expected a path string, got {output_dir!r}")
    output_dir = Path(output_dir)
    if not output_dir.is_absolute() and base_dir is not None and ENV_OUTPUT_DIR not in environ:
        output_dir = base_dir / output_dir

    workers = tree.get("workers", 1)
    if environ.get(ENV_THREADS):
        try:
            workers = int(environ[ENV_THREADS])
        except ValueError:
            raise ConfigError(f"{ENV_THREADS}: expected an integer, got {environ[ENV_THREADS]!r}") from None
    workers = _int(workers, "workers", 1)

    log_level = str(tree.get("log_level", "INFO")).upper()
    if log_level not in ("DEBUG", "INFO", "WARNING", "ERROR"):
        raise ConfigError(f"log_level: unknown level {log_level!r}")

    return ExperimentConfig(
        problems=tuple(problems),
        seeds=tuple(seeds),
        train=train,
        hidden_widths=widths,
        activation=activation,
        grid_counts=counts,
        boundary_counts=bcounts,
        output_dir=output_dir,
        log_level=log_level,
        workers=workers,
        output=output,
    )


def load_config(path, environ=None) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        tree = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from None
    # relative output paths stay relative to the working directory, like any other CLI path
    return parse_config(tree, environ=environ)
