"""Empirical natural-gradient training of PINNs with adaptive spectral cutoffs."""

from .autodiff import LinearBasisModel, MlpSpec, init_params
from .diagnostics import RceCurve, find_elbow, intersection_rank, precision_rank, reconstruction_errors
from .linalg import HardCutoffByRank, HardCutoffByThreshold, Ridge, SvdFactors, apply_pseudoinverse, thin_svd
from .optimizer import (
    Adaptive,
    CutoffState,
    FixedCutoff,
    PinnObjective,
    PrincipledAdaptive,
    TrainConfig,
    anagram_step,
    cutoff_policy_update,
    line_search,
    train,
)
from .problems import PROBLEM_NAMES, build_problem, default_grid

__version__ = "0.1.0"
