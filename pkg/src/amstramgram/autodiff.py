"""Fully connected scalar network with exact input jets and residual Jacobians.

The forward pass carries, for every collocation point, the network value,
its input gradient and a chosen set of second input-derivatives.  Parameter
Jacobians of operator residuals are obtained with one reverse sweep through
that jet-valued pass, seeded with the operator's linearization.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Callable, Sequence

import numpy as np

ACTIVATIONS = ("tanh", "sine")
CHUNK_ROWS = 2048


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    hidden_widths: tuple[int, ...]
    activation: str = "tanh"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if self.input_dim < 1:
            raise ValueError(f"input_dim must be >= 1, got {self.input_dim}")
        if not self.hidden_widths:
            raise ValueError("at least one hidden layer is required")
        if min(self.hidden_widths) < 1:
            raise ValueError(f"hidden widths must be >= 1, got {self.hidden_widths}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(
                f"unknown activation {self.activation!r}; expected one of {ACTIVATIONS}"
            )

    @property
    def output_dim(self) -> int:
        return 1

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_widths, 1)

    @property
    def n_params(self) -> int:
        sizes = self.layer_sizes
        return sum(n_out * n_in + n_out for n_in, n_out in zip(sizes[:-1], sizes[1:]))

    def evaluate(self, params, points) -> np.ndarray:
        return evaluate(self, params, points)

    def operator_values(self, params, op: "JetOperator", points) -> np.ndarray:
        return operator_values(self, params, op, points)

    def operator_jacobian(self, params, op: "JetOperator", points):
        return operator_jacobian(self, params, op, points)


def init_params(spec: MlpSpec) -> np.ndarray:
    """Scaled-uniform weights ``U(-a, a)``, ``a = sqrt(6 / (fan_in + fan_out))``; zero biases."""
    rng = np.random.default_rng(spec.seed)
    chunks = []
    sizes = spec.layer_sizes
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        a = np.sqrt(6.0 / (n_in + n_out))
        chunks.append(rng.uniform(-a, a, size=n_out * n_in))
        chunks.append(np.zeros(n_out))
    return np.concatenate(chunks)


def unflatten(spec: MlpSpec, params) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split a flat parameter vector into ``(W, b)`` per layer (W then b, layers in order)."""
    params = np.asarray(params, dtype=float)
    if params.shape != (spec.n_params,):
        raise ValueError(f"expected {spec.n_params} parameters, got shape {params.shape}")
    layers = []
    pos = 0
    sizes = spec.layer_sizes
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        w = params[pos : pos + n_out * n_in].reshape(n_out, n_in)
        pos += n_out * n_in
        b = params[pos : pos + n_out]
        pos += n_out
        layers.append((w, b))
    return layers


def _activation(name: str, z: np.ndarray, third: bool = True):
    """Activation and its first three derivatives (the third is None unless requested)."""
    if name == "tanh":
        t = np.tanh(z)
        s1 = 1.0 - t * t
        s2 = -2.0 * t * s1
        s3 = s1 * (4.0 * t * t - 2.0 * s1) if third else None
        return t, s1, s2, s3
    s, c = np.sin(z), np.cos(z)
    return s, c, -s, (-c if third else None)


@dataclass(frozen=True)
class Jet2:
    value: float
    grad: np.ndarray
    hess: np.ndarray


@dataclass
class JetBatch:
    """Value, gradient and selected second derivatives at a batch of points.

    ``second[:, q]`` holds ``d^2 u / dx_k dx_l`` for ``(k, l) = pairs[q]``.
    """

    value: np.ndarray
    grad: np.ndarray
    second: np.ndarray
    pairs: tuple[tuple[int, int], ...]

    def d2(self, k: int, l: int) -> np.ndarray:
        key = (min(k, l), max(k, l))
        return self.second[:, self.pairs.index(key)]


def _normalize_pairs(pairs) -> tuple[tuple[int, int], ...]:
    out = []
    for p in pairs:
        if len(p) != 2:
            raise ValueError(f"derivative index {tuple(p)} has order {len(p)}; at most 2 is supported")
        k, l = int(p[0]), int(p[1])
        out.append((min(k, l), max(k, l)))
    return tuple(out)


def _forward(spec: MlpSpec, layers, x: np.ndarray, pairs, keep: bool = False):
    n, d = x.shape
    ks = np.array([p[0] for p in pairs], dtype=int)
    ls = np.array([p[1] for p in pairs], dtype=int)
    q = len(pairs)

    v = x
    g = np.broadcast_to(np.eye(d), (n, d, d))
    h = np.zeros((n, q, d))
    cache = []
    for w, b in layers[:-1]:
        z = v @ w.T + b
        zg = g @ w.T
        zh = h @ w.T
        s0, s1, s2, s3 = _activation(spec.activation, z, third=keep)
        if keep:
            cache.append((v, g, h, zg, zh, s1, s2, s3))
        v = s0
        g = s1[:, None, :] * zg
        h = s2[:, None, :] * zg[:, ks, :] * zg[:, ls, :] + s1[:, None, :] * zh
    w, b = layers[-1]
    jets = JetBatch(
        value=(v @ w.T + b)[:, 0],
        grad=(g @ w.T)[:, :, 0],
        second=(h @ w.T)[:, :, 0],
        pairs=tuple(pairs),
    )
    return jets, (v, g, h, cache, ks, ls)


def _backward(layers, state, cu, cg, ch) -> np.ndarray:
    """Per-point parameter gradient of ``cu*u + cg.grad + ch.second``."""
    v_last, g_last, h_last, cache, ks, ls = state
    n = cu.shape[0]
    w_row = layers[-1][0][0]

    acts_last = np.concatenate([v_last[:, None, :], g_last, h_last], axis=1)
    seeds = np.concatenate([cu[:, None], cg, ch], axis=1)
    per_layer = [(np.einsum("bc,bci->bi", seeds, acts_last), cu[:, None])]

    vbar = cu[:, None] * w_row
    gbar = cg[:, :, None] * w_row
    hbar = ch[:, :, None] * w_row
    for (w, _), (v, g, h, zg, zh, s1, s2, s3) in zip(reversed(layers[:-1]), reversed(cache)):
        zbar = vbar * s1 + np.einsum("bkn,bkn->bn", gbar, zg) * s2
        zgbar = gbar * s1[:, None, :]
        zhbar = hbar * s1[:, None, :]
        for q, (k, l) in enumerate(zip(ks, ls)):
            hq = hbar[:, q, :]
            zbar += hq * (s3 * zg[:, k, :] * zg[:, l, :] + s2 * zh[:, q, :])
            zgbar[:, k, :] += hq * s2 * zg[:, l, :]
            zgbar[:, l, :] += hq * s2 * zg[:, k, :]
        adj = np.concatenate([zbar[:, None, :], zgbar, zhbar], axis=1)
        acts = np.concatenate([v[:, None, :], g, h], axis=1)
        per_layer.append((np.einsum("bco,bci->boi", adj, acts).reshape(n, -1), zbar))
        vbar = zbar @ w
        gbar = zgbar @ w
        hbar = zhbar @ w
    return np.concatenate([a for gw, gb in reversed(per_layer) for a in (gw, gb)], axis=1)


def forward_jets(spec: MlpSpec, params, points, pairs=()) -> JetBatch:
    """Batched forward pass returning value, gradient and the requested second derivatives."""
    x = np.atleast_2d(np.asarray(points, dtype=float))
    if x.shape[1] != spec.input_dim:
        raise ValueError(f"points have dimension {x.shape[1]}, network expects {spec.input_dim}")
    pairs = _normalize_pairs(pairs)
    layers = unflatten(spec, params)
    if x.shape[0] <= CHUNK_ROWS:
        return _forward(spec, layers, x, pairs)[0]
    parts = [_forward(spec, layers, x[i : i + CHUNK_ROWS], pairs)[0] for i in range(0, len(x), CHUNK_ROWS)]
    return JetBatch(
        value=np.concatenate([p.value for p in parts]),
        grad=np.concatenate([p.grad for p in parts]),
        second=np.concatenate([p.second for p in parts]),
        pairs=pairs,
    )


def forward_jet(spec: MlpSpec, params, x) -> Jet2:
    """Value, gradient and full Hessian of the network at a single point."""
    x = np.asarray(x, dtype=float).reshape(1, spec.input_dim)
    d = spec.input_dim
    pairs = tuple(combinations_with_replacement(range(d), 2))
    jets = forward_jets(spec, params, x, pairs)
    hess = np.zeros((d, d))
    for q, (k, l) in enumerate(pairs):
        hess[k, l] = hess[l, k] = jets.second[0, q]
    return Jet2(value=float(jets.value[0]), grad=jets.grad[0].copy(), hess=hess)


def evaluate(spec: MlpSpec, params, points) -> np.ndarray:
    """Network values only."""
    return forward_jets(spec, params, points).value


@dataclass(frozen=True)
class JetOperator:
    """A pointwise differential operator built from jet entries.

    ``fn(x, jets)`` returns the residual ``r`` and its partial derivatives
    with respect to the value, the gradient entries and each entry of
    ``pairs`` (shapes ``(n,)``, ``(n,)``, ``(n, d)``, ``(n, len(pairs))``).
    """

    fn: Callable
    pairs: tuple[tuple[int, int], ...] = ()
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "pairs", _normalize_pairs(self.pairs))


def operator_values(spec: MlpSpec, params, op: JetOperator, points) -> np.ndarray:
    x = np.atleast_2d(np.asarray(points, dtype=float))
    layers = unflatten(spec, params)
    out = []
    for i in range(0, len(x), CHUNK_ROWS):
        xc = x[i : i + CHUNK_ROWS]
        jets, _ = _forward(spec, layers, xc, op.pairs)
        out.append(op.fn(xc, jets)[0])
    return np.concatenate(out) if out else np.zeros(0)


def operator_jacobian(spec: MlpSpec, params, op: JetOperator, points):
    """Residual values and their exact parameter Jacobian, shape ``(n, P)``."""
    x = np.atleast_2d(np.asarray(points, dtype=float))
    layers = unflatten(spec, params)
    vals, jacs = [], []
    for i in range(0, len(x), CHUNK_ROWS):
        xc = x[i : i + CHUNK_ROWS]
        jets, state = _forward(spec, layers, xc, op.pairs, keep=True)
        r, cu, cg, ch = op.fn(xc, jets)
        n = len(xc)
        cu = np.broadcast_to(np.asarray(cu, dtype=float), (n,))
        cg = np.broadcast_to(np.asarray(cg, dtype=float), (n, spec.input_dim))
        ch = np.broadcast_to(np.asarray(ch, dtype=float), (n, len(op.pairs)))
        vals.append(np.asarray(r, dtype=float))
        jacs.append(_backward(layers, state, cu, cg, ch))
    if not vals:
        return np.zeros(0), np.zeros((0, spec.n_params))
    return np.concatenate(vals), np.concatenate(jacs)


@dataclass(frozen=True)
class Block:
    """Rows ``op(u)(x) - op(u)(partner) - target`` (partner term only for paired rows)."""

    name: str
    points: np.ndarray
    op: JetOperator
    target: np.ndarray
    partner: np.ndarray | None = None

    @property
    def size(self) -> int:
        return len(self.points)


class LinearBasisModel:
    """``u(x) = sum_p params[p] * phi_p(x)`` for a fixed basis.

    ``basis(points, pairs)`` returns the basis values ``(n, P)``, gradients
    ``(n, d, P)`` and the requested second derivatives ``(n, len(pairs), P)``.
    """

    def __init__(self, input_dim: int, n_params: int, basis: Callable):
        self.input_dim = input_dim
        self.n_params = n_params
        self.basis = basis

    def _jets(self, params, points, pairs):
        x = np.atleast_2d(np.asarray(points, dtype=float))
        phi, dphi, d2phi = self.basis(x, pairs)
        params = np.asarray(params, dtype=float)
        jets = JetBatch(phi @ params, dphi @ params, d2phi @ params, tuple(pairs))
        return x, jets, (phi, dphi, d2phi)

    def evaluate(self, params, points) -> np.ndarray:
        return self._jets(params, points, ())[1].value

    def operator_values(self, params, op: JetOperator, points) -> np.ndarray:
        x, jets, _ = self._jets(params, points, op.pairs)
        return np.asarray(op.fn(x, jets)[0], dtype=float)

    def operator_jacobian(self, params, op: JetOperator, points):
        x, jets, (phi, dphi, d2phi) = self._jets(params, points, op.pairs)
        r, cu, cg, ch = op.fn(x, jets)
        n = len(x)
        cu = np.broadcast_to(np.asarray(cu, dtype=float), (n,))
        cg = np.broadcast_to(np.asarray(cg, dtype=float), (n, self.input_dim))
        ch = np.broadcast_to(np.asarray(ch, dtype=float), (n, len(op.pairs)))
        jac = cu[:, None] * phi + np.einsum("nk,nkp->np", cg, dphi) + np.einsum("nq,nqp->np", ch, d2phi)
        return np.asarray(r, dtype=float), jac


def block_residual(model, params, block: Block) -> np.ndarray:
    r = model.operator_values(params, block.op, block.points)
    if block.partner is not None:
        r = r - model.operator_values(params, block.op, block.partner)
    return r - block.target


def block_jacobian(model, params, block: Block):
    r, jac = model.operator_jacobian(params, block.op, block.points)
    if block.partner is not None:
        r2, jac2 = model.operator_jacobian(params, block.op, block.partner)
        r, jac = r - r2, jac - jac2
    return r - block.target, jac


@dataclass
class ResidualBundle:
    """Stacked scaled residual and its parameter Jacobian.

    The interior rows are scaled by ``1/sqrt(S_D)`` and the boundary rows by
    ``1/sqrt(S_B)`` so that ``0.5 * ||residual||**2`` is the PINN loss.
    """

    residual: np.ndarray
    feature: np.ndarray | None
    n_interior: int
    n_boundary: int
    row_scale: np.ndarray = field(repr=False, default=None)

    @property
    def n_samples(self) -> int:
        return self.n_interior + self.n_boundary

    @property
    def loss(self) -> float:
        return 0.5 * float(self.residual @ self.residual)


def _row_scales(problem) -> tuple[np.ndarray, int, int]:
    n_d = sum(b.size for b in problem.interior_blocks)
    n_b = sum(b.size for b in problem.boundary_blocks)
    scale = np.concatenate(
        [np.full(n_d, 1.0 / np.sqrt(n_d)) if n_d else np.zeros(0),
         np.full(n_b, 1.0 / np.sqrt(n_b)) if n_b else np.zeros(0)]
    )
    return scale, n_d, n_b


def residual_vector(problem, spec, params) -> ResidualBundle:
    """Scaled residual without the Jacobian (cheap; used by the line search)."""
    scale, n_d, n_b = _row_scales(problem)
    parts = [block_residual(spec, params, blk) for blk in problem.blocks]
    r = np.concatenate(parts) * scale
    return ResidualBundle(r, None, n_d, n_b, scale)


def residual_bundle(problem, spec, params) -> ResidualBundle:
    """Scaled residual and its exact parameter Jacobian (the feature matrix)."""
    if not problem.blocks or sum(b.size for b in problem.blocks) == 0:
        raise ValueError(f"problem {problem.name!r} has no collocation points")
    scale, n_d, n_b = _row_scales(problem)
    rs, js = zip(*(block_jacobian(spec, params, blk) for blk in problem.blocks))
    r = np.concatenate(rs) * scale
    jac = np.concatenate(js) * scale[:, None]
    return ResidualBundle(r, jac, n_d, n_b, scale)


def finite_difference_jacobian(fn: Callable[[np.ndarray], np.ndarray], params, indices: Sequence[int], step: float = 1e-6):
    """Central differences of ``fn`` along selected parameter coordinates (test oracle)."""
    params = np.asarray(params, dtype=float)
    cols = []
    for p in indices:
        e = np.zeros_like(params)
        e[p] = step
        cols.append((fn(params + e) - fn(params - e)) / (2 * step))
    return np.stack(cols, axis=1)
