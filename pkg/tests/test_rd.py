import itertools

import cvxpy as cp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from builders import BITS, bernoulli_prior, h2
from rdprivacy import (Alphabet, DistortionMatrix, InfeasibleDistortionError, JointPmf,
                       ValidationError, distortion_bounds, entropy, rate_distortion, rd_curve)
from rdprivacy.oracle import compositions
from rdprivacy.rd import mutual_information_bits

HAM = DistortionMatrix.hamming(2)


def prior_of(p) -> JointPmf:
    return JointPmf([Alphabet("x", [str(i) for i in range(len(p))])], p)


# -- distortion_bounds ----------------------------------------------------

def test_distortion_bounds_examples():
    assert distortion_bounds(bernoulli_prior(), HAM) == (0.0, 0.5)
    assert distortion_bounds(bernoulli_prior(0.0), HAM) == (0.0, 0.0)
    flat = DistortionMatrix(np.full((2, 3), 0.3))
    lo, hi = distortion_bounds(bernoulli_prior(0.4), flat)
    assert lo == pytest.approx(0.3) and hi == pytest.approx(0.3)


def test_distortion_matrix_validation():
    with pytest.raises(ValidationError):
        DistortionMatrix([[0, -1], [1, 0]])
    with pytest.raises(ValidationError):
        rate_distortion(bernoulli_prior(), DistortionMatrix(np.eye(3)), 0.1)


# -- rate_distortion ------------------------------------------------------

def test_lossless_point():
    pt = rate_distortion(bernoulli_prior(), HAM, 0.0)
    assert pt.R == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(pt.channel.matrix(), np.eye(2), atol=1e-9)


def test_zero_rate_point():
    pt = rate_distortion(bernoulli_prior(), HAM, 0.5)
    assert pt.R == 0.0
    np.testing.assert_array_equal(pt.channel.matrix(), [[1, 0], [1, 0]])


def test_binary_closed_form_point():
    pt = rate_distortion(bernoulli_prior(), HAM, 0.11)
    assert pt.R == pytest.approx(1 - h2(0.11), abs=1e-6)
    assert pt.R == pytest.approx(0.5000, abs=1e-4)
    np.testing.assert_allclose(pt.channel.matrix(), [[0.89, 0.11], [0.11, 0.89]], atol=1e-6)


def test_below_minimum_distortion_raises():
    d = DistortionMatrix([[0.2, 1.0], [1.0, 0.2]])
    with pytest.raises(InfeasibleDistortionError):
        rate_distortion(bernoulli_prior(), d, 0.1)


def test_zero_probability_symbols_are_harmless():
    p = [0.5, 0.0, 0.5]
    pt = rate_distortion(prior_of(p), DistortionMatrix.hamming(3), 0.1)
    ref = rate_distortion(bernoulli_prior(), HAM, 0.1)
    assert pt.R == pytest.approx(ref.R, abs=1e-8)


def test_rd_curve_examples():
    ends = rd_curve(bernoulli_prior(), HAM, [0.0, 0.5])
    assert [round(p.R, 9) for p in ends] == [1.0, 0.0]
    mid = rd_curve(bernoulli_prior(), HAM, [0.11, 0.25])
    np.testing.assert_allclose([p.R for p in mid], [0.5000, 0.1887], atol=1e-4)
    single = rd_curve(bernoulli_prior(), HAM, [0.2])[0]
    assert single.R == rate_distortion(bernoulli_prior(), HAM, 0.2).R


def test_rd_curve_flags_infeasible_points():
    d = DistortionMatrix([[0.2, 1.0], [1.0, 0.2]])
    pts = rd_curve(bernoulli_prior(), d, [0.1, 0.3])
    assert not pts[0].ok and np.isnan(pts[0].R)
    assert pts[1].ok


# -- properties -------------------------------------------------------------

@st.composite
def rd_problems(draw, max_n=4):
    n = draw(st.integers(2, max_n))
    m = draw(st.integers(2, max_n))
    w = np.array(draw(st.lists(st.floats(0.01, 1), min_size=n, max_size=n)))
    d = np.array(draw(st.lists(st.floats(0, 1), min_size=n * m, max_size=n * m))).reshape(n, m)
    return prior_of(w / w.sum()), DistortionMatrix(d)


@settings(max_examples=40, deadline=None)
@given(rd_problems(), st.floats(0, 1))
def test_reported_channel_is_consistent(problem, t):
    prior, d = problem
    lo, hi = distortion_bounds(prior, d)
    D = lo + t * (hi - lo)
    pt = rate_distortion(prior, d, D)
    p, Q = prior.mass.ravel(), pt.channel.matrix()
    assert float(p @ (Q * d.values).sum(axis=1)) <= D + 1e-6
    assert mutual_information_bits(p, Q) == pytest.approx(pt.R, abs=1e-8)
    assert pt.R >= 0


@settings(max_examples=25, deadline=None)
@given(rd_problems())
def test_curve_convex_non_increasing(problem):
    prior, d = problem
    lo, hi = distortion_bounds(prior, d)
    R = np.array([p.R for p in rd_curve(prior, d, np.linspace(lo, hi, 9))])
    assert np.all(np.diff(R) <= 1e-6)
    assert np.all(np.diff(R, 2) >= -1e-6)


@settings(max_examples=25, deadline=None)
@given(rd_problems())
def test_endpoints(problem):
    prior, d = problem
    lo, hi = distortion_bounds(prior, d)
    assert rate_distortion(prior, d, hi).R == 0.0
    assert rate_distortion(prior, d, lo).R <= entropy(prior) + 1e-9


# -- quantized exhaustive oracle ----------------------------------------------

def _lower_envelope(dist, rate):
    """Lower convex hull of (distortion, rate) points, as sorted vertices."""
    order = np.lexsort((rate, dist))
    dist, rate = dist[order], rate[order]
    keep = rate < np.minimum.accumulate(np.r_[np.inf, rate[:-1]]) - 1e-15
    pts = list(zip(dist[keep], rate[keep]))
    hull = []
    for pnt in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (x2 - x1) * (pnt[1] - y1) - (y2 - y1) * (pnt[0] - x1) <= 0:
                hull.pop()
            else:
                break
        hull.append(pnt)
    return np.array(hull)


def quantized_rd(p, d, step=64):
    """(distortion, rate) of every channel whose entries are multiples of 1/step."""
    rows = compositions(step, d.shape[1]) / step
    n, k = p.size, rows.shape[0]
    dist_rows = rows @ d.T                           # (k, n): distortion of row choice per x
    out_d, out_r = [], []
    for head in itertools.product(range(k), repeat=n - 1):
        Q = np.empty((k, n, d.shape[1]))
        Q[:, :n - 1] = rows[list(head)][None]
        Q[:, n - 1] = rows
        joint = p[None, :, None] * Q
        py = joint.sum(axis=1, keepdims=True)
        ratio = np.where(joint > 0, Q / np.where(py > 0, py, 1), 1.0)
        out_r.append((joint * np.log2(ratio)).sum(axis=(1, 2)))
        out_d.append(sum(p[i] * dist_rows[h, i] for i, h in enumerate(head))
                     + p[n - 1] * dist_rows[:, n - 1])
    return np.concatenate(out_d), np.concatenate(out_r)


def marginal_grid_rd(p, d, D, step=64):
    """min over reproduction marginals r on the 1/step simplex grid of the exact inner bound.

    For fixed r, min_Q sum p Q log(Q / r) under the distortion bound is attained
    by Q(y|x) proportional to r(y) exp(s d(x, y)); ``s`` is bisected per r. Each
    value upper-bounds R(D) and the minimum over all r equals R(D).
    """
    r = compositions(step, d.shape[1]) / step
    support = r > 0
    dmin = np.where(support[:, None, :], d[None], np.inf).min(axis=2)
    feasible = dmin @ p <= D + 1e-12
    shift = d[None] - dmin[:, :, None]
    logr = np.where(support, np.log(np.where(support, r, 1.0)), -np.inf)[:, None, :]

    def channel(s):
        a = logr - s[:, None, None] * shift
        a -= a.max(axis=2, keepdims=True)
        Q = np.exp(a)
        return Q / Q.sum(axis=2, keepdims=True)

    def dist(Q):
        return np.einsum("x,kxy,xy->k", p, Q, d)

    lo, hi = np.zeros(r.shape[0]), np.ones(r.shape[0])
    for _ in range(60):
        need = (dist(channel(hi)) > D) & feasible
        if not need.any():
            break
        hi = np.where(need, 2 * hi, hi)
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        ok = dist(channel(mid)) <= D
        hi, lo = np.where(ok, mid, hi), np.where(ok, lo, mid)
    Q = channel(hi)
    rr = np.where(support, r, 1.0)[:, None, :]
    terms = np.where(Q > 0, Q * np.log2(np.where(Q > 0, Q, 1.0) / rr), 0.0)
    val = np.einsum("x,kxy->k", p, terms)
    return np.where(feasible & (dist(Q) <= D + 1e-9), val, np.inf).min()


ORACLE_SHAPES = [(2, 2), (3, 2), (2, 3), (3, 3)]


@pytest.mark.parametrize("case", range(20))
def test_matches_quantized_marginal_search(case):
    rng = np.random.default_rng(100 + case)
    n, m = ORACLE_SHAPES[case % 4]
    p = rng.dirichlet(np.ones(n))
    d = rng.uniform(0, 1, size=(n, m))
    prior, dm = prior_of(p), DistortionMatrix(d)
    lo, hi = distortion_bounds(prior, dm)
    for D in np.linspace(lo, hi, 6)[1:]:
        oracle = marginal_grid_rd(p, d, D)
        R = rate_distortion(prior, dm, D).R
        assert R <= oracle + 1e-9
        assert oracle - R <= 1e-3


@pytest.mark.parametrize("case", range(6))
def test_channel_grid_search_upper_bounds(case):
    rng = np.random.default_rng(200 + case)
    n, m = ORACLE_SHAPES[case % 3]
    p = rng.dirichlet(np.ones(n))
    d = rng.uniform(0, 1, size=(n, m))
    prior, dm = prior_of(p), DistortionMatrix(d)
    fine = _lower_envelope(*quantized_rd(p, d, 64))
    coarse = _lower_envelope(*quantized_rd(p, d, 32))
    lo, hi = distortion_bounds(prior, dm)
    for D in np.linspace(lo, hi, 6)[1:]:
        R = rate_distortion(prior, dm, D).R
        at64 = np.interp(D, fine[:, 0], fine[:, 1])
        assert R <= at64 + 1e-9
        assert at64 <= np.interp(D, coarse[:, 0], coarse[:, 1]) + 1e-12


def _conic_rd(p, d, D):
    Q = cp.Variable(d.shape, nonneg=True)
    joint = cp.multiply(p[:, None], Q)
    py = cp.sum(joint, axis=0)
    outer = np.ones((p.size, 1)) @ cp.reshape(py, (1, d.shape[1]), order="C")
    obj = cp.sum(cp.rel_entr(joint, cp.multiply(p[:, None], outer))) / np.log(2)
    cp.Problem(cp.Minimize(obj), [cp.sum(Q, axis=1) == 1,
                                  cp.sum(cp.multiply(joint, d)) <= D]).solve(solver=cp.CLARABEL)
    return float(obj.value)


@pytest.mark.parametrize("seed", range(5))
def test_three_by_three_against_conic_solver(seed):
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(3))
    d = rng.uniform(0, 1, size=(3, 3))
    prior, dm = prior_of(p), DistortionMatrix(d)
    lo, hi = distortion_bounds(prior, dm)
    for D in np.linspace(lo, hi, 5)[1:-1]:
        assert rate_distortion(prior, dm, D).R == pytest.approx(_conic_rd(p, d, D), abs=1e-5)


def test_slope_is_negative_inside_curve():
    pt = rate_distortion(JointPmf([Alphabet("x", BITS)], [0.3, 0.7]), HAM, 0.1)
    assert pt.slope < 0
