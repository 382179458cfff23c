"""Acceptance suite: one test (or group of tests) per numbered criterion.

Criteria 8 to 11 train the desk-scale heat and Laplace benchmarks (32x32
grid, one hidden layer of 32 tanh units, eps = 1e-10, seeds 0..2, 2000
iterations).  Those runs are shared through a session cache, so each one is
trained at most once however many criteria read it.  A per-criterion
PASS/FAIL line is printed in the terminal summary.
"""

import functools
import itertools
import math
import time

import numpy as np
import pytest

from amstramgram.autodiff import (
    LinearBasisModel,
    MlpSpec,
    block_residual,
    finite_difference_jacobian,
    init_params,
    residual_bundle,
    residual_vector,
)
from amstramgram.diagnostics import reconstruction_errors
from amstramgram.linalg import Ridge, apply_pseudoinverse, thin_svd
from amstramgram.optimizer import (
    Adaptive,
    CutoffState,
    FixedCutoff,
    Phase,
    PinnObjective,
    PrincipledAdaptive,
    TrainConfig,
    anagram_step,
    cutoff_policy_update,
    spectral_state,
    train,
)
from amstramgram.problems import PROBLEM_NAMES, build_problem, default_grid

from conftest import fit_problem, monomial_model

EPS = 1e-10
T_MAX = 2000
SEEDS = (0, 1, 2)
WIDTH = 32


def _detail(request, text):
    request.node.user_properties.append(("detail", text))


def _small_problem(name):
    return build_problem(name, None if name == "allen-cahn" else default_grid(name, 6, 4))


# -- desk-scale runs, trained lazily and shared ------------------------------------

@functools.cache
def desk_run(problem_name: str, strategy: str, seed: int):
    problem = build_problem(problem_name)
    spec = MlpSpec(problem.input_dim, (WIDTH,), "tanh", seed)
    strat = Adaptive() if strategy == "adaptive" else FixedCutoff(1e-3)
    start = time.perf_counter()
    res = train(PinnObjective(problem, spec), init_params(spec), TrainConfig(eps=EPS, t_max=T_MAX, strategy=strat))
    res.wall_time = time.perf_counter() - start
    return res


def _run_line(problem, strategy, seed, res):
    return (f"{problem}/{strategy}/seed {seed}: {res.termination} at t={res.iterations}, "
            f"MSE {res.final_mse:.2e}, rel L2 {res.final_rel_l2:.2e}, {res.wall_time:.0f}s")


# -- 1 -----------------------------------------------------------------------------

@pytest.mark.criterion(1, "RCE_0^2 equals (1/S)|grad L|^2 and 2 loss")
@pytest.mark.parametrize("name", PROBLEM_NAMES)
def test_criterion_01_loss_identity(name, request):
    problem = build_problem(name)
    spec = MlpSpec(problem.input_dim, (WIDTH,), "tanh", 11)
    theta = init_params(spec) + 0.3 * np.random.default_rng(5).standard_normal(spec.n_params)
    b = residual_bundle(problem, spec, theta)
    s = b.n_samples
    g = np.sqrt(s) * b.residual
    rce0 = reconstruction_errors(thin_svd(np.sqrt(s) * b.feature), g).values[0]
    # loss assembled block by block from raw residuals: mean square per group, halved
    interior = np.concatenate([block_residual(spec, theta, blk) for blk in problem.interior_blocks])
    boundary = [block_residual(spec, theta, blk) for blk in problem.boundary_blocks]
    loss = 0.5 * np.mean(interior**2) + (0.5 * np.mean(np.concatenate(boundary) ** 2) if boundary else 0.0)
    rel_grad = abs(rce0**2 - g @ g / s) / (g @ g / s)
    rel_loss = abs(rce0**2 - 2 * loss) / (2 * loss)
    _detail(request, f"{name}: {max(rel_grad, rel_loss):.1e}")
    assert rel_grad <= 1e-12 and rel_loss <= 1e-12


# -- 2 -----------------------------------------------------------------------------

@pytest.mark.criterion(2, "RCE pairwise identity")
def test_criterion_02_pairwise_identity(request):
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(50):
        s, p = (int(v) for v in rng.integers(1, 13, size=2))
        phi = rng.standard_normal((s, p)) * rng.uniform(0.1, 10)
        g = rng.standard_normal(s)
        values = reconstruction_errors(thin_svd(phi), g).values
        u = np.linalg.svd(phi, full_matrices=False)[0]  # independent factorization
        c = u.T @ g
        for m in range(len(values)):
            for n in range(m, len(values)):
                worst = max(worst, abs(values[m] ** 2 - values[n] ** 2 - c[m:n] @ c[m:n] / s))
    _detail(request, f"max deviation {worst:.1e}")
    assert worst <= 1e-10


# -- 3 -----------------------------------------------------------------------------

def _assert_monotone(curves):
    worst = max((float(np.max(np.diff(c))) for c in curves if len(c) > 1), default=-math.inf)
    assert worst <= 1e-12, f"RCE increased by {worst:.2e}"
    return worst


@pytest.mark.criterion(3, "emitted RCE curves non-increasing")
@pytest.mark.parametrize("strategy", [Adaptive(), FixedCutoff(1e-3), PrincipledAdaptive()], ids=["adaptive", "fixed", "principled"])
def test_criterion_03_monotone_small_runs(strategy, request):
    curves = []
    for name in PROBLEM_NAMES:
        problem = _small_problem(name)
        spec = MlpSpec(problem.input_dim, (8,), "tanh", 4)
        res = train(PinnObjective(problem, spec), init_params(spec), TrainConfig(eps=EPS, t_max=6, strategy=strategy))
        curves += [r.rce for r in res.records] + [res.final_curve.values]
    worst = _assert_monotone(curves)
    _detail(request, f"{len(curves)} curves, max increment {worst:.1e}")


# -- 4 -----------------------------------------------------------------------------

@pytest.mark.criterion(4, "ridge filter equals dense regularized solve")
@pytest.mark.parametrize("alpha", [1e-2, 1e-6])
def test_criterion_04_ridge(alpha, request):
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(50):
        s, p = (int(v) for v in rng.integers(1, 11, size=2))
        phi = rng.standard_normal((s, p))
        g = rng.standard_normal(s)
        d = apply_pseudoinverse(thin_svd(phi), Ridge(alpha, s), g)
        oracle = np.linalg.solve(phi.T @ phi / s + alpha * np.eye(p), phi.T @ g / s)
        worst = max(worst, np.linalg.norm(d - oracle) / np.linalg.norm(oracle))
    _detail(request, f"alpha {alpha:g}: {worst:.1e}")
    assert worst <= 1e-8


# -- 5 -----------------------------------------------------------------------------

def _matrix_model(a):
    """Linear model whose raw Jacobian row at point k is a[k]."""

    def basis(x, pairs):
        phi = a[x[:, 0].astype(int)]
        n, p = phi.shape
        return phi, np.zeros((n, 1, p)), np.zeros((n, len(pairs), p))

    return LinearBasisModel(1, a.shape[1], basis)


@pytest.mark.criterion(5, "full-rank direction equals Gram pseudo-inverse direction")
def test_criterion_05_gram_path(request):
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(30):
        p = int(rng.integers(1, 9))
        s = p + int(rng.integers(0, 8))
        q1, _ = np.linalg.qr(rng.standard_normal((s, p)))
        q2, _ = np.linalg.qr(rng.standard_normal((p, p)))
        a = q1 @ np.diag(rng.uniform(1.0, 4.0, p)) @ q2
        y = rng.standard_normal(s)
        obj = PinnObjective(fit_problem(np.arange(s), y), _matrix_model(a))
        theta = rng.standard_normal(p)
        state = spectral_state(obj, theta)
        d = anagram_step(obj, state, state.factors.r).direction
        jac, res = state.bundle.feature, state.bundle.residual
        gram, grad = jac.T @ jac, jac.T @ res
        oracle = np.linalg.pinv(gram) @ grad
        worst = max(worst, np.linalg.norm(d - oracle) / np.linalg.norm(oracle))
    _detail(request, f"max relative error {worst:.1e}")
    assert worst <= 1e-7


# -- 6 -----------------------------------------------------------------------------

@pytest.mark.criterion(6, "feature matrix matches central differences")
@pytest.mark.parametrize("name", PROBLEM_NAMES)
def test_criterion_06_jacobian(name, request):
    problem = _small_problem(name)
    spec = MlpSpec(problem.input_dim, (10,), "tanh", 6)
    theta = init_params(spec) + 0.2 * np.random.default_rng(6).standard_normal(spec.n_params)
    jac = residual_bundle(problem, spec, theta).feature
    fd = finite_difference_jacobian(lambda q: residual_vector(problem, spec, q).residual, theta, range(spec.n_params))
    scale = np.maximum(np.max(np.abs(jac), axis=0), 1e-300)
    err = float(np.max(np.max(np.abs(fd - jac), axis=0) / scale))
    _detail(request, f"{name}: {err:.1e}")
    assert err <= 1e-5


# -- 7 -----------------------------------------------------------------------------

@pytest.mark.criterion(7, "linear model: one full-rank step reaches least squares with eta = 1")
@pytest.mark.parametrize("degree", [1, 3, 5])
def test_criterion_07_linear_one_step(degree, request):
    rng = np.random.default_rng(degree)
    x = np.sort(rng.uniform(-1, 1, 14))
    y = np.exp(x) + 0.1 * rng.standard_normal(14)
    xb, yb = np.array([-1.0, 1.0]), np.array([0.3, -0.2])
    obj = PinnObjective(fit_problem(x, y, boundary=(xb, yb)), monomial_model(degree))
    state = spectral_state(obj, rng.standard_normal(degree + 1))
    step = anagram_step(obj, state, state.factors.r)
    # weighted normal equations: interior rows 1/sqrt(S_D), boundary rows 1/sqrt(S_B)
    k = np.arange(degree + 1)
    w = np.concatenate([np.full(14, 1 / np.sqrt(14)), np.full(2, 1 / np.sqrt(2))])
    v = np.concatenate([x, xb])[:, None] ** k * w[:, None]
    t = np.concatenate([y, yb]) * w
    coef = np.linalg.solve(v.T @ v, v.T @ t)
    gap = float(np.max(np.abs(obj.residual(step.params) - (v @ coef - t))))
    _detail(request, f"degree {degree}: residual gap {gap:.1e}, eta {step.eta:.8f}")
    assert gap <= 1e-8
    assert abs(step.eta - 1.0) <= 1e-4


# -- 12 ----------------------------------------------------------------------------

def _policy_oracle(r1, r2, r_max_prev, prev_r_min, liftoff):
    r_min = min(r1, r2)
    r_max = max(r1, r_max_prev)
    if not liftoff:
        if r_min >= r_max:
            liftoff = True
        elif r_min == prev_r_min:
            r_max = r_max + 1
    return r_min, r_max, liftoff


@pytest.mark.criterion(12, "cutoff policy state machine")
def test_criterion_12_policy_exhaustive(request):
    n = 0
    for r1, r2, r_max_prev, prev, liftoff in itertools.product(range(6), range(6), range(6), range(-1, 6), (False, True)):
        state = CutoffState(r_min=prev, r_max=r_max_prev, eps=EPS, liftoff=liftoff)
        new = cutoff_policy_update(state, r1, r2)
        assert (new.r_min, new.r_max, new.liftoff) == _policy_oracle(r1, r2, r_max_prev, prev, liftoff)
        if liftoff:
            assert new.liftoff  # latch
            assert new.r_max >= r_max_prev  # monotone after liftoff
            assert new.r_max == max(r1, r_max_prev)  # no stagnation increment once lifted
        stagnant = prev == min(r1, r2)
        if not liftoff and stagnant and min(r1, r2) < max(r1, r_max_prev):
            assert new.r_max == max(r1, r_max_prev) + 1
        if not new.liftoff:
            assert new.phase is Phase.IGNITION
        else:
            assert new.phase is (Phase.STAGE_SEPARATION if r2 <= r1 else Phase.ASCENT)
        n += 1
    # worked examples: stagnation increments, r_min >= r_max lifts off, post-liftoff r_max holds
    assert cutoff_policy_update(CutoffState(3, 6, EPS), 3, 9).r_max == 7
    assert cutoff_policy_update(CutoffState(2, 6, EPS), 7, 8).liftoff
    assert cutoff_policy_update(CutoffState(5, 9, EPS, liftoff=True), 4, 9).r_max == 9
    # the increment never exceeds the number of singular values
    assert cutoff_policy_update(CutoffState(3, 6, EPS), 3, 9, r_svd=6).r_max == 6
    _detail(request, f"{n} transitions")


# -- 8 to 11: desk-scale training ---------------------------------------------------

@pytest.mark.slow
@pytest.mark.criterion(8, "heat: booster return within 2000 its, MSE <= 1e-18, rel L2 <= 1e-5")
def test_criterion_08_heat(request):
    problems = []
    for seed in SEEDS:
        res = desk_run("heat", "adaptive", seed)
        _detail(request, _run_line("heat", "adaptive", seed, res))
        if res.termination != "booster_return":
            problems.append(f"seed {seed} stopped by {res.termination}")
        if not res.final_mse <= 1e-18:
            problems.append(f"seed {seed} MSE {res.final_mse:.2e} > 1e-18")
        if not res.final_rel_l2 <= 1e-5:
            problems.append(f"seed {seed} rel L2 {res.final_rel_l2:.2e} > 1e-5")
    assert not problems, "; ".join(problems)


@pytest.mark.slow
@pytest.mark.criterion(9, "laplace2d: rel L2 <= 1e-5")
def test_criterion_09_laplace2d(request):
    problems = []
    for seed in SEEDS:
        res = desk_run("laplace2d", "adaptive", seed)
        _detail(request, _run_line("laplace2d", "adaptive", seed, res))
        if not res.final_rel_l2 <= 1e-5:
            problems.append(f"seed {seed} rel L2 {res.final_rel_l2:.2e} > 1e-5")
    assert not problems, "; ".join(problems)


@pytest.mark.slow
@pytest.mark.criterion(10, "adaptive median MSE <= fixed(1e-3) median MSE")
@pytest.mark.parametrize("name", ["heat", "laplace2d"])
def test_criterion_10_adaptive_beats_fixed(name, request):
    adaptive = [desk_run(name, "adaptive", s).final_mse for s in SEEDS]
    fixed = []
    for seed in SEEDS:
        res = desk_run(name, "fixed", seed)
        _detail(request, _run_line(name, "fixed", seed, res))
        fixed.append(res.final_mse)
    _detail(request, f"{name}: median adaptive {np.median(adaptive):.2e} vs fixed {np.median(fixed):.2e}")
    assert np.median(adaptive) <= np.median(fixed)


@pytest.mark.slow
@pytest.mark.criterion(11, "flattening reaches 0 and the final loss drop coincides")
def test_criterion_11_flattening(request):
    runs = [(seed, desk_run("heat", "adaptive", seed)) for seed in SEEDS]
    terminating = [(seed, r) for seed, r in runs if r.termination == "booster_return"]
    # the criterion quantifies over terminating runs; with none the claim is untested, not satisfied
    assert terminating, "no adaptive heat run terminated by booster return, so flattening at termination is unobserved"
    for seed, res in terminating:
        last, before = res.records[-1], res.records[-2]
        bound = 1.1 * before.rce[before.r_min] ** 2 / 2  # loss = RCE^2 / 2 in the documented scaling
        _detail(request, f"seed {seed}: N_flat {last.n_flat}, loss {res.final_loss:.2e} vs bound {bound:.2e}")
        assert last.n_flat == 0
        assert res.final_loss <= bound


@pytest.mark.slow
@pytest.mark.criterion(3, "emitted RCE curves non-increasing")
def test_criterion_03_monotone_desk_runs(request):
    curves = []
    for (name, strategy, seed) in itertools.product(("heat", "laplace2d"), ("adaptive", "fixed"), SEEDS):
        res = desk_run(name, strategy, seed)
        curves += [r.rce for r in res.records]
    worst = _assert_monotone(curves)
    _detail(request, f"{len(curves)} desk-run curves, max increment {worst:.1e}")
