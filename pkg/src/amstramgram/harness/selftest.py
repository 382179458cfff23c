"""Fast invariant checks runnable from an installed package (no test suite needed)."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..autodiff import MlpSpec, finite_difference_jacobian, init_params, residual_bundle, residual_vector
from ..diagnostics import reconstruction_errors
from ..linalg import HardCutoffByRank, Ridge, apply_pseudoinverse, thin_svd
from ..optimizer import CutoffState, cutoff_policy_update
from ..problems import PROBLEM_NAMES, build_problem, default_grid


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _rel(a, b) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def check_rce_pairwise(rng) -> str:
    worst = 0.0
    for _ in range(50):
        s, p = rng.integers(1, 13, size=2)
        f = thin_svd(rng.standard_normal((s, p)))
        g = rng.standard_normal(s)
        v = reconstruction_errors(f, g).values
        c = f.sample_side.T @ g
        for m in range(f.r + 1):
            for n in range(m, f.r + 1):
                worst = max(worst, abs(v[m] ** 2 - v[n] ** 2 - c[m:n] @ c[m:n] / s))
    assert worst <= 1e-10, worst
    return f"max deviation {worst:.1e}"


def check_rce_monotone(rng) -> str:
    for _ in range(50):
        s, p = rng.integers(1, 13, size=2)
        f = thin_svd(rng.standard_normal((s, p)))
        v = reconstruction_errors(f, rng.standard_normal(s)).values
        assert np.all(np.diff(v) <= 1e-12)
    return "50 instances"


def check_ridge(rng) -> str:
    worst = 0.0
    for _ in range(20):
        s, p = rng.integers(1, 11, size=2)
        phi = rng.standard_normal((s, p))
        g = rng.standard_normal(s)
        f = thin_svd(phi)
        for alpha in (1e-2, 1e-6):
            d = apply_pseudoinverse(f, Ridge(alpha, s), g)
            gram = phi.T @ phi / s
            oracle = np.linalg.solve(gram + alpha * np.eye(p), phi.T @ g / s)
            worst = max(worst, _rel(d, oracle))
    assert worst <= 1e-8, worst
    return f"max relative error {worst:.1e}"


def check_gram_path(rng) -> str:
    worst = 0.0
    for _ in range(20):
        p = int(rng.integers(1, 8))
        s = p + int(rng.integers(0, 6))
        q, _ = np.linalg.qr(rng.standard_normal((s, p)))
        phi = q @ np.diag(np.linspace(1.0, 3.0, p))
        g = rng.standard_normal(s)
        f = thin_svd(phi)
        d = apply_pseudoinverse(f, HardCutoffByRank(f.r), g)
        oracle = np.linalg.pinv(phi.T @ phi) @ (phi.T @ g)
        worst = max(worst, _rel(d, oracle))
    assert worst <= 1e-7, worst
    return f"max relative error {worst:.1e}"


def check_loss_identity(rng) -> str:
    worst = 0.0
    for name in PROBLEM_NAMES:
        grid = default_grid(name, 6, 4) if name != "allen-cahn" else None
        problem = build_problem(name, grid)
        spec = MlpSpec(problem.input_dim, (8,), "tanh", int(rng.integers(1 << 30)))
        b = residual_bundle(problem, spec, init_params(spec))
        s = b.n_samples
        curve = reconstruction_errors(thin_svd(np.sqrt(s) * b.feature), np.sqrt(s) * b.residual)
        worst = max(worst, abs(curve.values[0] ** 2 - 2 * b.loss) / (2 * b.loss))
    assert worst <= 1e-12, worst
    return f"max relative error {worst:.1e}"


def check_jacobian(rng) -> str:
    worst = 0.0
    for name in PROBLEM_NAMES:
        grid = default_grid(name, 5, 3) if name != "allen-cahn" else None
        problem = build_problem(name, grid)
        spec = MlpSpec(problem.input_dim, (6,), "tanh", int(rng.integers(1 << 30)))
        theta = init_params(spec)
        b = residual_bundle(problem, spec, theta)
        cols = rng.choice(spec.n_params, size=min(8, spec.n_params), replace=False)
        fd = finite_difference_jacobian(lambda q: residual_vector(problem, spec, q).residual, theta, cols)
        worst = max(worst, np.max(np.abs(fd - b.feature[:, cols])) / np.max(np.abs(b.feature[:, cols])))
    assert worst <= 1e-5, worst
    return f"max relative error {worst:.1e}"


def check_policy(rng) -> str:
    n = 0
    for liftoff, r1, r2, r_max, prev in itertools.product((False, True), range(5), range(5), range(1, 5), range(-1, 5)):
        st = CutoffState(r_min=prev, r_max=r_max, eps=1e-10, liftoff=liftoff)
        new = cutoff_policy_update(st, r1, r2)
        assert new.r_min == min(r1, r2)
        assert new.r_max >= max(r1, r_max)
        assert not liftoff or new.liftoff
        n += 1
    return f"{n} transitions"


CHECKS: dict[str, Callable] = {
    "rce pairwise identity": check_rce_pairwise,
    "rce monotone": check_rce_monotone,
    "ridge equals dense solve": check_ridge,
    "svd path equals gram path": check_gram_path,
    "rce_0 squared equals 2 loss": check_loss_identity,
    "jacobian matches finite differences": check_jacobian,
    "cutoff policy latch and monotonicity": check_policy,
}


def run_selftest(seed: int = 0) -> list[CheckResult]:
    results = []
    for name, fn in CHECKS.items():
        rng = np.random.default_rng(seed)
        try:
            results.append(CheckResult(name, True, fn(rng)))
        except AssertionError as exc:
            results.append(CheckResult(name, False, f"violated: {exc}"))
        except Exception as exc:
            results.append(CheckResult(name, False, f"{type(exc).__name__}: {exc}"))
    return results
