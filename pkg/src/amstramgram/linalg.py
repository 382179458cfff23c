"""Thin SVD and spectral filters used by the natural-gradient step.

Orientation convention: a feature matrix ``phi`` of shape ``(S, P)`` is
factored as ``phi = V @ diag(sigma) @ U.T`` with ``V`` on the sample side
(``S x r``) and ``U`` on the parameter side (``P x r``).  This is the
transpose of the ``A = U S V^T`` naming used by numpy, so nothing here
should be fed straight into code that assumes numpy's names.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.linalg

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD ``phi = sample_side @ diag(singular_values) @ parameter_side.T``."""

    sample_side: np.ndarray
    parameter_side: np.ndarray
    singular_values: np.ndarray

    @property
    def r(self) -> int:
        return self.singular_values.shape[0]

    @property
    def n_samples(self) -> int:
        return self.sample_side.shape[0]

    @property
    def n_params(self) -> int:
        return self.parameter_side.shape[0]

    def reconstruct(self) -> np.ndarray:
        return (self.sample_side * self.singular_values) @ self.parameter_side.T


@dataclass(frozen=True)
class HardCutoffByThreshold:
    """Keep components whose singular value is at least ``alpha``."""

    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"threshold alpha must be positive, got {self.alpha}")


@dataclass(frozen=True)
class HardCutoffByRank:
    """Keep the leading ``rank`` components."""

    rank: int

    def __post_init__(self):
        if self.rank < 0:
            raise ValueError(f"rank must be non-negative, got {self.rank}")


@dataclass(frozen=True)
class Ridge:
    """Tikhonov filter ``sigma / (sigma**2 + n_samples * alpha)``."""

    alpha: float
    n_samples: int

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"ridge alpha must be positive, got {self.alpha}")
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")


SpectralFilter = Union[HardCutoffByThreshold, HardCutoffByRank, Ridge]


def thin_svd(matrix) -> SvdFactors:
    """Thin SVD in sample-side/parameter-side orientation.

    Singular values come back sorted non-increasing.  Signs are fixed so that
    the first nonzero entry of every parameter-side column is non-negative,
    which makes the factors reproducible across runs.

    Raises
    ------
    ValueError
        If the matrix is not 2-D, is empty, or has a non-finite entry.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {a.shape}")
    bad = ~np.isfinite(a)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise ValueError(f"non-finite entry {a[i, j]!r} at index ({i}, {j})")

    try:
        left, sigma, right_t = scipy.linalg.svd(
            a, full_matrices=False, lapack_driver="gesdd", check_finite=False
        )
    except np.linalg.LinAlgError:
        # gesdd occasionally fails on badly scaled inputs; gesvd is slower but sturdier
        left, sigma, right_t = scipy.linalg.svd(
            a, full_matrices=False, lapack_driver="gesvd", check_finite=False
        )

    sample_side = np.array(left)
    parameter_side = np.array(right_t.T)

    # LAPACK already sorts descending; the stable sort keeps column order for ties
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    sample_side = sample_side[:, order]
    parameter_side = parameter_side[:, order]

    tol = np.finfo(float).eps * max(a.shape)
    for k in range(parameter_side.shape[1]):
        col = parameter_side[:, k]
        nz = np.flatnonzero(np.abs(col) > tol * max(1.0, np.abs(col).max()))
        if nz.size and col[nz[0]] < 0:
            parameter_side[:, k] = -col
            sample_side[:, k] = -sample_side[:, k]

    sigma = np.maximum(sigma, 0.0)
    return SvdFactors(sample_side, parameter_side, sigma)


_SMALLEST_INVERTIBLE = 1.0 / np.finfo(float).max


def rank_from_threshold(singular_values, alpha: float) -> int:
    """Number of singular values that are ``>= alpha``."""
    return int(np.count_nonzero(np.asarray(singular_values) >= alpha))


def filtered_inverse_spectrum(singular_values, filt: SpectralFilter) -> np.ndarray:
    """Filtered inverse of a non-increasing spectrum.

    Zero singular values always map to zero, whatever the filter.  So do
    values too small to invert without overflow (below ``1 / float max``).
    """
    s = np.asarray(singular_values, dtype=float)
    out = np.zeros_like(s)
    positive = s > _SMALLEST_INVERTIBLE

    if isinstance(filt, HardCutoffByThreshold):
        keep = positive & (s >= filt.alpha)
        out[keep] = 1.0 / s[keep]
    elif isinstance(filt, HardCutoffByRank):
        k = filt.rank
        if k > s.size:
            logger.warning("cutoff rank %d exceeds spectrum length %d; clamped", k, s.size)
            k = s.size
        keep = positive.copy()
        keep[k:] = False
        out[keep] = 1.0 / s[keep]
    elif isinstance(filt, Ridge):
        out[positive] = s[positive] / (s[positive] ** 2 + filt.n_samples * filt.alpha)
    else:
        raise TypeError(f"unknown spectral filter {filt!r}")
    return out


def apply_pseudoinverse(factors: SvdFactors, filt: SpectralFilter, g) -> np.ndarray:
    """Return ``U @ diag(filtered(sigma)) @ V.T @ g`` (length ``P``)."""
    g = np.asarray(g, dtype=float)
    if g.shape != (factors.n_samples,):
        raise ValueError(
            f"vector of shape {g.shape} does not match {factors.n_samples} samples"
        )
    inv = filtered_inverse_spectrum(factors.singular_values, filt)
    coeffs = factors.sample_side.T @ g
    return factors.parameter_side @ (inv * coeffs)


def projection_kernel(factors: SvdFactors, retained: int) -> np.ndarray:
    """Empirical projection kernel onto the leading ``retained`` sample-side directions."""
    k = int(np.clip(retained, 0, factors.r))
    v = factors.sample_side[:, :k]
    return v @ v.T
