"""Empirical natural-gradient (ANaGRAM) steps and the cutoff strategies driving them.

All spectral quantities are expressed in unscaled units: with ``S`` the total
number of residual rows, the factored matrix is ``sqrt(S) * feature`` and the
signal is ``g = sqrt(S) * residual``.  The step direction is unchanged by this
rescaling, while ``RCE_0 = ||g|| / sqrt(S) = sqrt(2 * loss)`` and the singular
values are those of the raw pointwise Jacobian.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np

from .autodiff import ResidualBundle, residual_bundle, residual_vector
from .diagnostics import (
    RceCurve,
    elbow_of_spectrum,
    flattening_span,
    intersection_rank,
    precision_rank,
    reconstruction_errors,
)
from .linalg import HardCutoffByRank, SvdFactors, apply_pseudoinverse, rank_from_threshold, thin_svd

logger = logging.getLogger(__name__)

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
LOSS_IDENTITY_RTOL = 1e-12


# -- objective -----------------------------------------------------------------

class PinnObjective:
    """Loss, residual bundle and error metric of a model on a PDE problem."""

    def __init__(self, problem, model):
        self.problem = problem
        self.model = model

    @property
    def n_params(self) -> int:
        return self.model.n_params

    def residual(self, params) -> np.ndarray:
        return residual_vector(self.problem, self.model, params).residual

    def loss(self, params) -> float:
        r = self.residual(params)
        return 0.5 * float(r @ r)

    def bundle(self, params) -> ResidualBundle:
        return residual_bundle(self.problem, self.model, params)

    def rel_l2(self, params) -> Optional[float]:
        from .problems import relative_l2_error

        if self.problem.reference_values is None or len(self.problem.reference_values) == 0:
            return None
        return relative_l2_error(self.problem, self.model, params)


@dataclass
class SpectralState:
    params: np.ndarray
    bundle: ResidualBundle
    factors: SvdFactors
    signal: np.ndarray
    curve: RceCurve

    @property
    def loss(self) -> float:
        return self.bundle.loss


def spectral_state(objective, params) -> SpectralState:
    bundle = objective.bundle(params)
    root_s = math.sqrt(bundle.residual.shape[0])
    factors = thin_svd(root_s * bundle.feature)
    g = root_s * bundle.residual
    curve = reconstruction_errors(factors, g)
    # RCE_0^2 is twice the loss by construction; a mismatch means corrupted factors
    two_loss = 2.0 * bundle.loss
    if abs(curve.values[0] ** 2 - two_loss) > LOSS_IDENTITY_RTOL * two_loss:
        raise RuntimeError(f"RCE_0^2 = {curve.values[0] ** 2:.17g} disagrees with 2 * loss = {two_loss:.17g}")
    return SpectralState(np.asarray(params, dtype=float), bundle, factors, g, curve)


# -- line search ------------------------------------------------------------------

@dataclass(frozen=True)
class LineSearchConfig:
    eta_max: float = 2.0
    grid_depth: int = 20
    golden_iters: int = 40

    def __post_init__(self):
        if not self.eta_max > 0:
            raise ValueError(f"eta_max must be positive, got {self.eta_max}")
        if self.grid_depth < 0 or self.golden_iters < 0:
            raise ValueError("grid_depth and golden_iters must be non-negative")


@dataclass(frozen=True)
class LineSearchResult:
    eta: float
    value: float
    stalled: bool = False
    n_evals: int = 0


def line_search(loss_fn: Callable[[float], float], eta_max: float = 2.0, grid_depth: int = 20, golden_iters: int = 40) -> LineSearchResult:
    """Step size in ``[0, eta_max]`` that never increases ``loss_fn``.

    A geometric grid ``eta_max * 2**-k`` (``k = 0..grid_depth``) locates the
    best probe; golden-section search then refines it inside the bracket
    formed by its grid neighbours.  Non-finite probes count as ``+inf``.
    """
    def f(eta):
        v = loss_fn(eta)
        return v if np.isfinite(v) else math.inf

    f0 = f(0.0)
    grid = [eta_max * 0.5**k for k in range(grid_depth + 1)]
    values = [f(eta) for eta in grid]
    n_evals = 1 + len(grid)
    if not np.isfinite(f0) and all(v == math.inf for v in values):
        logger.warning("line search: every probe is non-finite; returning eta = 0")
        return LineSearchResult(0.0, f0, stalled=True, n_evals=n_evals)

    k = int(np.argmin(values))
    best_eta, best_val = grid[k], values[k]
    lo = grid[k + 1] if k + 1 < len(grid) else 0.0
    hi = grid[k - 1] if k > 0 else grid[0]

    if golden_iters and hi > lo:
        a, b = lo, hi
        c = b - INV_PHI * (b - a)
        d = a + INV_PHI * (b - a)
        fc, fd = f(c), f(d)
        n_evals += 2
        for _ in range(golden_iters):
            for eta, val in ((c, fc), (d, fd)):
                if val < best_val:
                    best_eta, best_val = eta, val
            if fc <= fd:
                b, d, fd = d, c, fc
                c = b - INV_PHI * (b - a)
                fc = f(c)
            else:
                a, c, fc = c, d, fd
                d = a + INV_PHI * (b - a)
                fd = f(d)
            n_evals += 1
        for eta, val in ((c, fc), (d, fd)):
            if val < best_val:
                best_eta, best_val = eta, val

    if not best_val < f0:
        return LineSearchResult(0.0, f0, stalled=not np.isfinite(best_val), n_evals=n_evals)
    return LineSearchResult(best_eta, best_val, n_evals=n_evals)


# -- single step --------------------------------------------------------------------

class StepStatus(str, enum.Enum):
    OK = "ok"
    ZERO_DIRECTION = "zero_direction"
    STALL = "stall"


@dataclass(frozen=True)
class StepResult:
    params: np.ndarray
    eta: float
    loss_before: float
    loss_after: float
    direction: np.ndarray
    r_cutoff: int
    status: StepStatus


def anagram_step(objective, state: SpectralState, r_cutoff: int, ls: LineSearchConfig = LineSearchConfig()) -> StepResult:
    """One natural-gradient step keeping the leading ``r_cutoff`` components."""
    r_cutoff = int(min(max(r_cutoff, 0), state.factors.r))
    params = state.params
    loss0 = state.loss
    d = apply_pseudoinverse(state.factors, HardCutoffByRank(r_cutoff), state.signal)
    if not np.any(d):
        return StepResult(params, 0.0, loss0, loss0, d, r_cutoff, StepStatus.ZERO_DIRECTION)

    def loss_along(eta):
        return loss0 if eta == 0.0 else objective.loss(params - eta * d)

    res = line_search(loss_along, ls.eta_max, ls.grid_depth, ls.golden_iters)
    if res.eta == 0.0:
        return StepResult(params, 0.0, loss0, loss0, d, r_cutoff, StepStatus.STALL)
    return StepResult(params - res.eta * d, res.eta, loss0, res.value, d, r_cutoff, StepStatus.OK)


# -- cutoff policy ------------------------------------------------------------------

class Phase(str, enum.Enum):
    IGNITION = "ignition"
    ASCENT = "ascent"
    STAGE_SEPARATION = "stage_separation"
    FIXED = "fixed"
    PRINCIPLED = "principled"


@dataclass(frozen=True)
class CutoffState:
    r_min: int
    r_max: int
    eps: float
    liftoff: bool = False
    phase: Phase = Phase.IGNITION

    @classmethod
    def initial(cls, r_max: int, eps: float) -> "CutoffState":
        # r_min = -1: no previous value, so the first update never counts as stagnation
        return cls(r_min=-1, r_max=int(r_max), eps=eps)


def cutoff_policy_update(state: CutoffState, r1: int, r2: int, prev_r_min: Optional[int] = None, r_svd: Optional[int] = None) -> CutoffState:
    """Dual-cutoff bookkeeping for one iteration.

    ``r1`` is the intersection rank and ``r2`` the precision rank of the
    current curve.  ``prev_r_min`` defaults to ``state.r_min``.
    """
    prev = state.r_min if prev_r_min is None else prev_r_min
    r_min = min(r1, r2)
    r_max = max(r1, state.r_max)
    liftoff = state.liftoff
    if not liftoff:
        if r_min >= r_max:
            liftoff = True
        elif prev == r_min:
            r_max += 1
            if r_svd is not None:
                r_max = min(r_max, r_svd)
    if not liftoff:
        phase = Phase.IGNITION
    elif r2 <= r1:
        phase = Phase.STAGE_SEPARATION
    else:
        phase = Phase.ASCENT
    return replace(state, r_min=r_min, r_max=r_max, liftoff=liftoff, phase=phase)


# -- runs -----------------------------------------------------------------------------

@dataclass(frozen=True)
class FixedCutoff:
    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"cutoff alpha must be positive, got {self.alpha}")


@dataclass(frozen=True)
class Adaptive:
    log_elbow: bool = True


@dataclass(frozen=True)
class PrincipledAdaptive:
    pass


Strategy = Union[FixedCutoff, Adaptive, PrincipledAdaptive]


@dataclass(frozen=True)
class TrainConfig:
    eps: float = 1e-10
    t_max: int = 2000
    strategy: Strategy = field(default_factory=Adaptive)
    line_search: LineSearchConfig = field(default_factory=LineSearchConfig)
    flat_tol: float = 0.01
    keep_curves: bool = True

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.t_max < 0:
            raise ValueError(f"t_max must be non-negative, got {self.t_max}")
        if not 0 < self.flat_tol < 1:
            raise ValueError(f"flat_tol must lie in (0, 1), got {self.flat_tol}")


@dataclass
class IterationRecord:
    t: int
    train_loss: float
    rel_l2: Optional[float]
    r_min: int
    r_max: int
    r_int: int
    r_eps: int
    elbow: int
    eta: float
    eta_min: float
    phase: str
    n_flat: int
    rce: Optional[np.ndarray] = None
    singular_values: Optional[np.ndarray] = None

    @property
    def mse(self) -> float:
        return 2.0 * self.train_loss


@dataclass
class RunResult:
    params: np.ndarray
    records: list[IterationRecord]
    termination: str
    iterations: int
    final_loss: float
    final_rel_l2: Optional[float]
    final_curve: Optional[RceCurve] = None
    step_events: list[str] = field(default_factory=list)

    @property
    def final_mse(self) -> float:
        return 2.0 * self.final_loss


def _record(t, state: SpectralState, objective, config: TrainConfig, *, r_min, r_max, r_cutoff_prev, eta, eta_min, phase) -> IterationRecord:
    curve = state.curve
    return IterationRecord(
        t=t,
        train_loss=state.loss,
        rel_l2=objective.rel_l2(state.params),
        r_min=int(r_min),
        r_max=int(r_max),
        r_int=intersection_rank(curve),
        r_eps=precision_rank(curve, config.eps),
        elbow=elbow_of_spectrum(curve.singular_values),
        eta=eta,
        eta_min=eta_min,
        phase=phase.value if isinstance(phase, Phase) else str(phase),
        n_flat=flattening_span(curve, r_cutoff_prev, config.flat_tol),
        rce=curve.values.copy() if config.keep_curves else None,
        singular_values=curve.singular_values.copy() if config.keep_curves else None,
    )


def _finish(objective, state: SpectralState, records, termination, t, events) -> RunResult:
    return RunResult(
        params=state.params,
        records=records,
        termination=termination,
        iterations=t,
        final_loss=state.loss,
        final_rel_l2=objective.rel_l2(state.params),
        final_curve=state.curve,
        step_events=events,
    )


def _note(events, t, step: StepResult):
    if step.status is not StepStatus.OK:
        events.append(f"t={t} r_cutoff={step.r_cutoff}: {step.status.value}")


def fixed_cutoff_run(objective, params0, config: TrainConfig, callback=None) -> RunResult:
    """ANaGRAM with a fixed singular-value threshold."""
    if not isinstance(config.strategy, FixedCutoff):
        raise ValueError("fixed_cutoff_run needs a FixedCutoff strategy")
    alpha = config.strategy.alpha
    state = spectral_state(objective, params0)
    records, events = [], []
    termination = "max_iterations"
    t = 0
    while t < config.t_max:
        r_cut = rank_from_threshold(state.factors.singular_values, alpha)
        step = anagram_step(objective, state, r_cut, config.line_search)
        _note(events, t, step)
        rec = _record(t, state, objective, config, r_min=r_cut, r_max=r_cut, r_cutoff_prev=r_cut,
                      eta=step.eta, eta_min=math.nan, phase=Phase.FIXED)
        records.append(rec)
        if callback:
            callback(rec)
        if step.status is StepStatus.OK:
            state = spectral_state(objective, step.params)
        t += 1
        if state.curve.values[0] <= config.eps:
            termination = "converged"
            break
    return _finish(objective, state, records, termination, t, events)


def amstramgram_run(objective, params0, config: TrainConfig, callback=None) -> RunResult:
    """Adaptive dual-cutoff training: a step at ``r_max`` then one at ``r_min`` per iteration.

    Stops when ``r_min`` reaches 0 (booster return) or after ``t_max`` iterations.
    """
    strategy = config.strategy if isinstance(config.strategy, Adaptive) else Adaptive()
    state = spectral_state(objective, params0)
    r_svd = state.factors.r
    cut = CutoffState.initial(elbow_of_spectrum(state.factors.singular_values, strategy.log_elbow), config.eps)
    last_cutoff = cut.r_max
    records, events = [], []
    termination = "max_iterations"
    t = 0
    while t < config.t_max:
        r1 = intersection_rank(state.curve)
        r2 = precision_rank(state.curve, config.eps)
        cut = cutoff_policy_update(cut, r1, r2, r_svd=r_svd)
        pending = _record(t, state, objective, config, r_min=cut.r_min, r_max=cut.r_max,
                          r_cutoff_prev=last_cutoff, eta=0.0, eta_min=0.0, phase=cut.phase)
        etas = []
        for r_cut in (cut.r_max, cut.r_min):
            step = anagram_step(objective, state, r_cut, config.line_search)
            _note(events, t, step)
            etas.append(step.eta)
            if step.status is StepStatus.OK:
                state = spectral_state(objective, step.params)
        pending.eta, pending.eta_min = etas
        records.append(pending)
        if callback:
            callback(pending)
        last_cutoff = cut.r_min
        t += 1
        if cut.r_min == 0:
            termination = "booster_return"
            break
    return _finish(objective, state, records, termination, t, events)


def principled_run(objective, params0, config: TrainConfig, callback=None) -> RunResult:
    """Single adaptive cutoff: intersection rank until its error reaches eps, then precision rank."""
    state = spectral_state(objective, params0)
    records, events = [], []
    termination = "max_iterations"
    last_cutoff = 0
    t = 0
    while t < config.t_max:
        curve = state.curve
        r_int = intersection_rank(curve)
        r_eps = precision_rank(curve, config.eps)
        if r_eps == 0:
            termination = "precision_reached"
            break
        r_cut = r_int if curve.values[r_int] > config.eps else r_eps
        step = anagram_step(objective, state, r_cut, config.line_search)
        _note(events, t, step)
        rec = _record(t, state, objective, config, r_min=r_cut, r_max=r_cut, r_cutoff_prev=last_cutoff or r_cut,
                      eta=step.eta, eta_min=math.nan, phase=Phase.PRINCIPLED)
        records.append(rec)
        if callback:
            callback(rec)
        if step.status is StepStatus.OK:
            state = spectral_state(objective, step.params)
        last_cutoff = r_cut
        t += 1
    return _finish(objective, state, records, termination, t, events)


def train(objective, params0, config: TrainConfig, callback=None) -> RunResult:
    if isinstance(config.strategy, FixedCutoff):
        return fixed_cutoff_run(objective, params0, config, callback)
    if isinstance(config.strategy, PrincipledAdaptive):
        return principled_run(objective, params0, config, callback)
    return amstramgram_run(objective, params0, config, callback)
