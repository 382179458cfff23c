"""Reconstruction-error curves and the rank selectors built on them.

``values[N]`` of a curve is the part of the residual signal ``g`` that the
leading ``N`` sample-side singular directions fail to reconstruct, scaled by
``1/sqrt(S)``.  With ``c = V.T @ g`` this equals
``sqrt((||g||^2 - sum_{p <= N} c_p^2) / S)``; it is evaluated as the tail sum
``||g - V c||^2 + sum_{p > N} c_p^2`` instead, which keeps full relative
accuracy when ``values[N]`` is many orders of magnitude below ``values[0]``.
The extra work beyond the SVD is O(S r).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import SvdFactors


@dataclass(frozen=True)
class RceCurve:
    values: np.ndarray
    singular_values: np.ndarray
    sample_count: int

    @property
    def r(self) -> int:
        return len(self.singular_values)


@dataclass(frozen=True)
class RankReport:
    r_int: int
    r_eps: int
    elbow: int
    n_flat: int
    is_flattened_to_zero: bool


def reconstruction_errors(factors: SvdFactors, g) -> RceCurve:
    g = np.asarray(g, dtype=float)
    s = factors.n_samples
    if g.shape != (s,):
        raise ValueError(f"residual of shape {g.shape} does not match {s} samples")
    coeffs = factors.sample_side.T @ g
    outside = g - factors.sample_side @ coeffs
    tail = np.cumsum((coeffs**2)[::-1])[::-1]
    remaining = float(outside @ outside) + np.append(tail, 0.0)
    values = np.sqrt(remaining / s)
    return RceCurve(values, factors.singular_values.copy(), s)


def intersection_rank(curve: RceCurve) -> int:
    """Number of ``j >= 1`` with ``values[j] <= sigma_j``."""
    return int(np.count_nonzero(curve.values[1:] <= curve.singular_values))


def precision_rank(curve: RceCurve, eps: float) -> int:
    """Number of ``j >= 1`` with ``values[j] >= eps``."""
    if not eps > 0:
        raise ValueError(f"precision must be positive, got {eps}")
    return int(np.count_nonzero(curve.values[1:] >= eps))


def find_elbow(xs, fs) -> int:
    """1-based index of the point furthest below the chord of a decreasing curve.

    Scores are the scalar products with the clockwise normal of the chord from
    the first to the last point; ties resolve to the smallest index.
    """
    xs = np.asarray(xs, dtype=float)
    fs = np.asarray(fs, dtype=float)
    m = len(xs)
    if m < 2 or len(fs) != m:
        raise ValueError(f"need at least two matching points, got {len(xs)} and {len(fs)}")
    normal = np.array([fs[-1] - fs[0], xs[0] - xs[-1]])
    scores = normal[0] * (xs - xs[0]) + normal[1] * (fs - fs[0])
    return int(np.argmax(scores)) + 1


def elbow_of_spectrum(singular_values, log_scale: bool = True) -> int:
    """Elbow of ``(index, sigma)``; on ``log10(sigma)`` when ``log_scale``."""
    s = np.asarray(singular_values, dtype=float)
    if len(s) < 2:
        return len(s)
    if log_scale:
        floor = np.finfo(float).tiny
        s = np.log10(np.maximum(s, floor))
    return find_elbow(np.arange(1, len(s) + 1), s)


def flattening_span(curve: RceCurve, r_cutoff: int, tol_rel: float = 0.01) -> int:
    """Smallest ``N`` with ``values[N] - values[r_cutoff] <= tol_rel * values[0]``."""
    r_cutoff = int(np.clip(r_cutoff, 0, curve.r))
    v = curve.values
    gap = v[: r_cutoff + 1] - v[r_cutoff]
    hits = np.flatnonzero(gap <= tol_rel * v[0])
    return int(hits[0]) if hits.size else r_cutoff


def rank_report(curve: RceCurve, eps: float, r_cutoff: int, tol_rel: float = 0.01, log_elbow: bool = True) -> RankReport:
    n_flat = flattening_span(curve, r_cutoff, tol_rel)
    return RankReport(
        r_int=intersection_rank(curve),
        r_eps=precision_rank(curve, eps),
        elbow=elbow_of_spectrum(curve.singular_values, log_scale=log_elbow),
        n_flat=n_flat,
        is_flattened_to_zero=n_flat == 0,
    )
