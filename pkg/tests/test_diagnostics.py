import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from amstramgram.diagnostics import (
    RceCurve,
    elbow_of_spectrum,
    find_elbow,
    flattening_span,
    intersection_rank,
    precision_rank,
    rank_report,
    reconstruction_errors,
)
from amstramgram.linalg import SvdFactors, thin_svd

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def curve(values, sigma=None):
    values = np.asarray(values, dtype=float)
    if sigma is None:
        sigma = np.ones(len(values) - 1)
    return RceCurve(values, np.asarray(sigma, dtype=float), 1)


@st.composite
def instances(draw, max_side=12):
    s = draw(st.integers(1, max_side))
    p = draw(st.integers(1, max_side))
    a = draw(arrays(float, (s, p), elements=finite))
    g = draw(arrays(float, s, elements=finite))
    return thin_svd(a), g


def test_orthonormal_coefficients_example():
    f = SvdFactors(np.eye(2), np.eye(2), np.array([1.0, 1.0]))
    np.testing.assert_allclose(reconstruction_errors(f, [3.0, 4.0]).values, [5 / np.sqrt(2), 4 / np.sqrt(2), 0], atol=1e-15)


def test_signal_orthogonal_to_span_is_never_captured():
    v = np.array([[1.0], [0.0], [0.0]])
    f = SvdFactors(v, np.eye(1), np.array([2.0]))
    g = np.array([0.0, 3.0, 4.0])
    np.testing.assert_allclose(reconstruction_errors(f, g).values, [5 / np.sqrt(3)] * 2)


def test_matches_explicit_projection(rng):
    f = thin_svd(rng.standard_normal((6, 4)))
    g = rng.standard_normal(6)
    vals = reconstruction_errors(f, g).values
    for n in range(f.r + 1):
        vn = f.sample_side[:, :n]
        direct = np.linalg.norm(vn @ vn.T @ g - g) / np.sqrt(6)
        assert vals[n] == pytest.approx(direct, abs=1e-10)


def test_length_mismatch_rejected(rng):
    with pytest.raises(ValueError):
        reconstruction_errors(thin_svd(rng.standard_normal((4, 3))), np.ones(5))


def test_small_tail_keeps_relative_accuracy():
    # a residual whose tail sits 12 decades below its head
    q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((50, 3)))
    f = SvdFactors(q, np.eye(3), np.array([3.0, 2.0, 1.0]))
    g = q @ np.array([1.0, 1e-12, 0.0])
    vals = reconstruction_errors(f, g).values
    assert vals[1] == pytest.approx(1e-12 / np.sqrt(50), rel=1e-6)


@settings(max_examples=80, deadline=None)
@given(instances())
def test_curve_non_increasing(inst):
    f, g = inst
    assert np.all(np.diff(reconstruction_errors(f, g).values) <= 1e-12)


@settings(max_examples=80, deadline=None)
@given(instances())
def test_pairwise_identity(inst):
    f, g = inst
    v = reconstruction_errors(f, g).values
    c = f.sample_side.T @ g
    s = len(g)
    scale = max(1.0, g @ g / s)
    for m in range(f.r + 1):
        for n in range(m, f.r + 1):
            assert v[m] ** 2 - v[n] ** 2 == pytest.approx(c[m:n] @ c[m:n] / s, abs=1e-10 * scale)


@settings(max_examples=80, deadline=None)
@given(instances())
def test_head_is_signal_norm(inst):
    f, g = inst
    v = reconstruction_errors(f, g).values
    assert v[0] ** 2 * len(g) == pytest.approx(g @ g, rel=1e-12, abs=1e-300)


def test_intersection_rank_examples():
    c = curve([9, 5, 0.5, 0.05, 0.005], [10, 1, 0.1, 0.01])
    assert intersection_rank(c) == 4
    assert intersection_rank(curve([9, 5, 5, 5], [1, 1, 1])) == 0
    assert intersection_rank(curve([0.1, 0.1, 0.1], [1, 1])) == 2


def test_precision_rank_examples():
    c = curve([9, 5, 0.5, 0.05, 0.005])
    assert precision_rank(c, 0.02) == 3
    assert precision_rank(c, 6) == 0
    assert precision_rank(c, 1e-300) == 4
    with pytest.raises(ValueError):
        precision_rank(c, 0.0)


def test_elbow_examples():
    assert find_elbow([0, 1, 2], [10, 1, 0.5]) == 2
    assert find_elbow([0, 1, 2, 3], [3, 2, 1, 0]) == 1
    xs, fs = np.array([0, 1, 2, 3.0]), np.array([8, 4, 2, 1.0])
    n = np.array([fs[-1] - fs[0], xs[0] - xs[-1]])
    scores = [n @ np.array([x - xs[0], f - fs[0]]) for x, f in zip(xs, fs)]
    assert find_elbow(xs, fs) == int(np.argmax(scores)) + 1
    with pytest.raises(ValueError):
        find_elbow([0], [1])


def test_elbow_of_spectrum_log_and_raw():
    sigma = np.array([1e2, 1e1, 1e0, 1e-1, 1e-8, 1e-9, 1e-10])
    # chord normal on the log values is (-12, -6); index 5 scores 12, the best
    assert elbow_of_spectrum(sigma, log_scale=True) == 5
    assert elbow_of_spectrum(sigma, log_scale=False) == 2


def test_flattening_examples():
    assert flattening_span(curve([0.3] * 5), 4, 0.01) == 0
    assert flattening_span(curve([5, 4, 3, 2, 1]), 4, 0.0) == 4
    assert flattening_span(curve([1.0, 0.5, 0.101, 0.1001, 0.1]), 4, 0.01) == 2


@settings(max_examples=60, deadline=None)
@given(instances(), st.floats(0.001, 0.5), st.data())
def test_retained_components_exhausted_at_flattening(inst, tol, data):
    f, g = inst
    c = reconstruction_errors(f, g)
    r_cut = data.draw(st.integers(0, f.r))
    n_flat = flattening_span(c, r_cut, tol)
    v = c.values
    coeff = f.sample_side.T @ g
    prefix = coeff[n_flat:r_cut] @ coeff[n_flat:r_cut] / len(g)
    assert prefix <= (v[n_flat] + v[r_cut]) * tol * v[0] + 1e-12 * max(1.0, v[0] ** 2)


def test_rank_report_bounds(rng):
    f = thin_svd(rng.standard_normal((20, 6)))
    c = reconstruction_errors(f, rng.standard_normal(20))
    rep = rank_report(c, 1e-3, 4)
    for k in (rep.r_int, rep.r_eps, rep.elbow, rep.n_flat):
        assert 0 <= k <= f.r
    assert rep.is_flattened_to_zero == (rep.n_flat == 0)
