"""Benchmark PDE problems on uniform collocation grids.

Canonical forms (inputs are ordered space first, time last):

========================  =============================================  ==========================
name                      interior operator                              domain
========================  =============================================  ==========================
heat                      u_t - u_xx / 4 = 0                             (x, t) in [0, 1]^2
laplace2d                 u_xx + u_yy = 0                                [0, 1]^2
laplace5d                 sum_k u_kk = 0                                 [0, 1]^5
burgers1d                 u_t + u u_x - (0.01 / pi) u_xx = 0             [-1, 1] x [0, 1]
nonlinear-poisson-k1      -(u_xx + u_yy) + u^3 = f                       [0, 1]^2
allen-cahn                u_t - 1e-4 u_xx + 5 u^3 - 5 u = 0              [-1, 1] x [0, 1]
========================  =============================================  ==========================
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Optional

import numpy as np

from ..autodiff import Block, JetOperator, MlpSpec
from . import reference

PROBLEM_NAMES = (
    "heat",
    "laplace2d",
    "laplace5d",
    "burgers1d",
    "nonlinear-poisson-k1",
    "allen-cahn",
)

DEFAULT_COUNTS = {"laplace5d": 8}
DEFAULT_BOUNDARY_COUNTS = {"laplace5d": 4}


@dataclass(frozen=True)
class GridSpec:
    """Per-axis interior counts, the domain box, and per-axis boundary counts.

    Interior nodes are the strictly interior points of a uniform grid
    (``linspace(lo, hi, n + 2)[1:-1]``); boundary faces use inclusive
    uniform grids with ``boundary_counts`` points along every other axis.
    """

    counts: tuple[int, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    boundary_counts: tuple[int, ...]

    def __post_init__(self):
        for name in ("counts", "lower", "upper", "boundary_counts"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        d = len(self.counts)
        if not (len(self.lower) == len(self.upper) == len(self.boundary_counts) == d):
            raise ValueError("GridSpec fields must all have one entry per axis")
        if min(self.counts) < 2 or min(self.boundary_counts) < 2:
            raise ValueError(f"grid counts must be >= 2 per axis, got {self.counts}, {self.boundary_counts}")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("every axis needs lower < upper")

    @property
    def dim(self) -> int:
        return len(self.counts)

    def interior(self) -> np.ndarray:
        axes = [np.linspace(lo, hi, n + 2)[1:-1] for lo, hi, n in zip(self.lower, self.upper, self.counts)]
        return _tensor(axes)

    def face(self, axis: int, side: str) -> np.ndarray:
        """Inclusive grid on the face ``x[axis] = lower`` or ``upper``."""
        axes = [np.linspace(lo, hi, m) for lo, hi, m in zip(self.lower, self.upper, self.boundary_counts)]
        axes[axis] = np.array([self.lower[axis] if side == "lower" else self.upper[axis]])
        return _tensor(axes)


def _tensor(axes) -> np.ndarray:
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def default_grid(name: str, counts: Optional[int] = None, boundary_counts: Optional[int] = None) -> GridSpec:
    """Default grid for a benchmark (32 per axis, 8 per axis for laplace5d)."""
    _check_name(name)
    d, lower, upper = _DOMAINS[name]
    n = counts if counts is not None else DEFAULT_COUNTS.get(name, 32)
    m = boundary_counts if boundary_counts is not None else DEFAULT_BOUNDARY_COUNTS.get(name, n)
    return GridSpec((n,) * d, lower, upper, (m,) * d)


@dataclass
class PdeProblem:
    name: str
    input_dim: int
    grid: GridSpec
    interior_blocks: list[Block]
    boundary_blocks: list[Block]
    exact: Optional[Callable[[np.ndarray], np.ndarray]]
    reference_points: np.ndarray
    reference_values: np.ndarray
    description: str = ""
    extras: dict = field(default_factory=dict)

    @property
    def blocks(self) -> list[Block]:
        return [*self.interior_blocks, *self.boundary_blocks]

    @property
    def interior_points(self) -> np.ndarray:
        return np.concatenate([b.points for b in self.interior_blocks])

    @property
    def boundary_points(self) -> np.ndarray:
        if not self.boundary_blocks:
            return np.zeros((0, self.input_dim))
        return np.concatenate([b.points for b in self.boundary_blocks])

    @property
    def n_interior(self) -> int:
        return sum(b.size for b in self.interior_blocks)

    @property
    def n_boundary(self) -> int:
        return sum(b.size for b in self.boundary_blocks)

    @property
    def n_samples(self) -> int:
        return self.n_interior + self.n_boundary


# -- operators ---------------------------------------------------------------

def _zeros(x):
    return np.zeros(len(x))


def value_op() -> JetOperator:
    def fn(x, j):
        n = len(x)
        return j.value, np.ones(n), np.zeros((n, x.shape[1])), np.zeros((n, 0))

    return JetOperator(fn, (), "value")


def _derivative_op(axis: int) -> JetOperator:
    def fn(x, j):
        n, d = x.shape
        cg = np.zeros((n, d))
        cg[:, axis] = 1.0
        return j.grad[:, axis], np.zeros(n), cg, np.zeros((n, 0))

    return JetOperator(fn, (), f"d/dx{axis}")


def _laplacian_op(d: int, sign: float = 1.0) -> JetOperator:
    pairs = tuple((k, k) for k in range(d))

    def fn(x, j):
        n = len(x)
        r = sign * j.second.sum(axis=1)
        return r, np.zeros(n), np.zeros((n, d)), np.full((n, d), sign)

    return JetOperator(fn, pairs, "laplacian")


def _heat_op(kappa: float) -> JetOperator:
    def fn(x, j):
        n = len(x)
        r = j.grad[:, 1] - kappa * j.second[:, 0]
        cg = np.zeros((n, 2))
        cg[:, 1] = 1.0
        return r, np.zeros(n), cg, np.full((n, 1), -kappa)

    return JetOperator(fn, ((0, 0),), "heat")


def _burgers_op(nu: float) -> JetOperator:
    def fn(x, j):
        u, ux, ut, uxx = j.value, j.grad[:, 0], j.grad[:, 1], j.second[:, 0]
        r = ut + u * ux - nu * uxx
        cg = np.stack([u, np.ones_like(u)], axis=1)
        return r, ux, cg, np.full((len(x), 1), -nu)

    return JetOperator(fn, ((0, 0),), "burgers")


def _nonlinear_poisson_op() -> JetOperator:
    def fn(x, j):
        u = j.value
        r = -j.second.sum(axis=1) + u**3
        return r, 3.0 * u**2, np.zeros((len(x), 2)), np.full((len(x), 2), -1.0)

    return JetOperator(fn, ((0, 0), (1, 1)), "nonlinear-poisson")


def _allen_cahn_op(diffusion: float, reaction: float) -> JetOperator:
    def fn(x, j):
        u, ut, uxx = j.value, j.grad[:, 1], j.second[:, 0]
        r = ut - diffusion * uxx + reaction * u**3 - reaction * u
        cg = np.zeros((len(x), 2))
        cg[:, 1] = 1.0
        cu = 3.0 * reaction * u**2 - reaction
        return r, cu, cg, np.full((len(x), 1), -diffusion)

    return JetOperator(fn, ((0, 0),), "allen-cahn")


# -- exact solutions -----------------------------------------------------------

def heat_exact(p):
    return np.sin(np.pi * p[:, 0]) * np.exp(-np.pi**2 * p[:, 1] / 4.0)


def laplace2d_exact(p):
    return np.sin(np.pi * p[:, 0]) * np.sinh(np.pi * p[:, 1]) / np.sinh(np.pi)


def laplace5d_exact(p):
    return sum(p[:, i] * p[:, j] for i, j in combinations(range(p.shape[1]), 2))


def nonlinear_poisson_exact(p):
    return np.sin(np.pi * p[:, 0]) * np.sin(np.pi * p[:, 1])


def nonlinear_poisson_source(p):
    u = nonlinear_poisson_exact(p)
    return 2.0 * np.pi**2 * u + u**3


def burgers_reference(p):
    return reference.burgers_cole_hopf(p[:, 0], p[:, 1])


_DOMAINS = {
    "heat": (2, (0.0, 0.0), (1.0, 1.0)),
    "laplace2d": (2, (0.0, 0.0), (1.0, 1.0)),
    "laplace5d": (5, (0.0,) * 5, (1.0,) * 5),
    "burgers1d": (2, (-1.0, 0.0), (1.0, 1.0)),
    "nonlinear-poisson-k1": (2, (0.0, 0.0), (1.0, 1.0)),
    "allen-cahn": (2, (-1.0, 0.0), (1.0, 1.0)),
}


def _check_name(name: str) -> None:
    if name not in PROBLEM_NAMES:
        raise ValueError(f"unknown problem {name!r}; valid names: {', '.join(PROBLEM_NAMES)}")


def input_dim(name: str) -> int:
    _check_name(name)
    return _DOMAINS[name][0]


def _dirichlet_faces(grid: GridSpec, exact, axes_sides) -> list[Block]:
    op = value_op()
    blocks = []
    for axis, side in axes_sides:
        pts = grid.face(axis, side)
        blocks.append(Block(f"x{axis}={side}", pts, op, exact(pts)))
    return blocks


def _all_faces(d: int):
    return [(a, s) for a in range(d) for s in ("lower", "upper")]


def _dense_reference(grid: GridSpec, per_axis: int) -> np.ndarray:
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(grid.lower, grid.upper)]
    return _tensor(axes)


def build_problem(name: str, grid: Optional[GridSpec] = None) -> PdeProblem:
    """Assemble a benchmark problem on ``grid`` (default grid when omitted)."""
    _check_name(name)
    if grid is None:
        grid = default_grid(name)
    d, lower, upper = _DOMAINS[name]
    if grid.dim != d:
        raise ValueError(f"{name} is {d}-dimensional, grid has {grid.dim} axes")
    if tuple(grid.lower) != lower or tuple(grid.upper) != upper:
        raise ValueError(f"{name} lives on {lower}..{upper}, grid box is {grid.lower}..{grid.upper}")

    interior = grid.interior()

    if name == "heat":
        blocks_d = [Block("interior", interior, _heat_op(0.25), _zeros(interior))]
        blocks_b = _dirichlet_faces(grid, heat_exact, [(0, "lower"), (0, "upper"), (1, "lower")])
        exact = heat_exact
        ref_pts = _dense_reference(grid, 64)
        ref_vals = exact(ref_pts)
    elif name == "laplace2d":
        blocks_d = [Block("interior", interior, _laplacian_op(2), _zeros(interior))]
        blocks_b = _dirichlet_faces(grid, laplace2d_exact, _all_faces(2))
        exact = laplace2d_exact
        ref_pts = _dense_reference(grid, 64)
        ref_vals = exact(ref_pts)
    elif name == "laplace5d":
        blocks_d = [Block("interior", interior, _laplacian_op(5), _zeros(interior))]
        blocks_b = _dirichlet_faces(grid, laplace5d_exact, _all_faces(5))
        exact = laplace5d_exact
        ref_pts = _dense_reference(grid, 6)
        ref_vals = exact(ref_pts)
    elif name == "nonlinear-poisson-k1":
        blocks_d = [Block("interior", interior, _nonlinear_poisson_op(), nonlinear_poisson_source(interior))]
        blocks_b = _dirichlet_faces(grid, nonlinear_poisson_exact, _all_faces(2))
        exact = nonlinear_poisson_exact
        ref_pts = _dense_reference(grid, 64)
        ref_vals = exact(ref_pts)
    elif name == "burgers1d":
        blocks_d = [Block("interior", interior, _burgers_op(reference.BURGERS_NU), _zeros(interior))]
        zero = lambda p: np.zeros(len(p))
        blocks_b = _dirichlet_faces(grid, zero, [(0, "lower"), (0, "upper")])
        init = grid.face(1, "lower")
        blocks_b.append(Block("t=0", init, value_op(), -np.sin(np.pi * init[:, 0])))
        exact = None
        ref_pts = _dense_reference(grid, 64)
        ref_vals = burgers_reference(ref_pts)
    else:  # allen-cahn
        op = _allen_cahn_op(reference.ALLEN_CAHN_DIFFUSION, reference.ALLEN_CAHN_REACTION)
        blocks_d = [Block("interior", interior, op, _zeros(interior))]
        left = grid.face(0, "lower")
        right = grid.face(0, "upper")
        init = grid.face(1, "lower")
        blocks_b = [
            Block("periodic u", left, value_op(), _zeros(left), partner=right),
            Block("periodic u_x", left, _derivative_op(0), _zeros(left), partner=right),
            Block("t=0", init, value_op(), init[:, 0] ** 2 * np.cos(np.pi * init[:, 0])),
        ]
        exact = None
        table = reference.allen_cahn_reference()
        ref_pts = table[:, :2].copy()
        ref_vals = table[:, 2].copy()

    return PdeProblem(
        name=name,
        input_dim=d,
        grid=grid,
        interior_blocks=blocks_d,
        boundary_blocks=blocks_b,
        exact=exact,
        reference_points=ref_pts,
        reference_values=ref_vals,
    )


def relative_error_of_values(problem: PdeProblem, values) -> float:
    """``||values - u*|| / ||u*||`` over the reference grid (uniform weights)."""
    if problem.reference_values is None or len(problem.reference_values) == 0:
        raise ValueError(f"problem {problem.name!r} has no reference solution")
    ref = problem.reference_values
    values = np.asarray(values, dtype=float)
    return float(np.linalg.norm(values - ref) / np.linalg.norm(ref))


def relative_l2_error(problem: PdeProblem, spec: MlpSpec, params) -> float:
    """Relative L2 error of the network against the reference solution."""
    if problem.reference_values is None or len(problem.reference_values) == 0:
        raise ValueError(f"problem {problem.name!r} has no reference solution")
    return relative_error_of_values(problem, spec.evaluate(params, problem.reference_points))
