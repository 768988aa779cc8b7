import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from builders import BITS, bernoulli_prior, h2
from rdprivacy import (Alphabet, DistortionMatrix, InfeasiblePrivacyError, JointPmf,
                       OrderingError, PlanStateError, UnsupportedModelError, ValidationError,
                       check_successive, disclosure_rates, distortion_bounds,
                       rate_distortion)
from rdprivacy.rd import mutual_information_bits

HAM = DistortionMatrix.hamming(2)


def test_binary_two_stage_example():
    prior = bernoulli_prior()
    plan = check_successive(prior, HAM, (0.25, 0.8113), (0.11, 0.5000))
    assert plan.feasible
    R0, R1 = disclosure_rates(plan, prior)
    assert R1 == pytest.approx(1 - h2(0.25), abs=1e-4)
    assert R0 + R1 == pytest.approx(1 - h2(0.11), abs=1e-4)
    # 0.11 * (1 - c) + 0.89 * c = 0.25
    assert plan.crossover == pytest.approx(0.14 / 0.78, abs=1e-3)
    np.testing.assert_allclose(plan.coarse_channel().matrix(),
                               [[0.75, 0.25], [0.25, 0.75]], atol=1e-4)
    assert plan.rates == pytest.approx((R0, R1), abs=1e-12)


def test_plan_serializes():
    plan = check_successive(bernoulli_prior(), HAM, (0.25, 0.0), (0.11, 0.0))
    doc = plan.to_dict()
    assert doc["coarse"] == [0.25, 0.0] and doc["feasible"] is True
    assert doc["R0"] + doc["R1"] == pytest.approx(0.5, abs=1e-3)


def test_lossless_fine_stage_gives_identity_cascade():
    prior = bernoulli_prior(0.3)
    plan = check_successive(prior, HAM, (0.1, 0.0), (0.0, 0.0))
    np.testing.assert_allclose(plan.fine_channel.matrix(), np.eye(2), atol=1e-9)
    np.testing.assert_allclose(plan.refinement_channel.matrix(),
                               rate_distortion(prior, HAM, 0.1).channel.matrix(), atol=1e-4)
    assert plan.feasible


def test_zero_rate_coarse_stage():
    prior = bernoulli_prior(0.3)
    plan = check_successive(prior, HAM, (0.3, 0.0), (0.1, 0.0))
    R0, R1 = disclosure_rates(plan, prior)
    assert R1 == pytest.approx(0.0, abs=1e-9)
    assert R0 == pytest.approx(rate_distortion(prior, HAM, 0.1).R, abs=1e-6)
    # the coarse answer carries no information about X
    Q1 = plan.coarse_channel().matrix()
    np.testing.assert_allclose(Q1[0], Q1[1], atol=1e-6)


def test_ordering_and_validation_errors():
    prior = bernoulli_prior()
    with pytest.raises(OrderingError):
        check_successive(prior, HAM, (0.11, 0.0), (0.25, 0.0))
    with pytest.raises(OrderingError):
        check_successive(prior, HAM, (0.11, 0.0), (0.11, 0.0))
    with pytest.raises(ValidationError):
        check_successive(prior, HAM, (0.25, -0.1), (0.11, 0.0))


def test_privacy_target_beyond_gamma():
    prior = bernoulli_prior()
    with pytest.raises(InfeasiblePrivacyError):
        check_successive(prior, HAM, (0.25, 0.9), (0.11, 0.0))
    with pytest.raises(InfeasiblePrivacyError):
        check_successive(prior, HAM, (0.25, 0.0), (0.11, 0.6))
    # targets quoted to four decimals stay admissible
    check_successive(prior, HAM, (0.25, h2(0.25) + 5e-5), (0.11, h2(0.11) + 5e-5))


def test_multi_attribute_prior_unsupported():
    pair = JointPmf.uniform([Alphabet("a", BITS), Alphabet("b", BITS)])
    with pytest.raises(UnsupportedModelError):
        check_successive(pair, HAM, (0.25, 0.0), (0.11, 0.0))


def test_rates_of_infeasible_plan_raise():
    plan = check_successive(bernoulli_prior(), HAM, (0.25, 0.0), (0.11, 0.0))
    with pytest.raises(PlanStateError):
        disclosure_rates(dataclasses.replace(plan, feasible=False), bernoulli_prior())


def test_negative_tolerance_marks_plan_infeasible():
    plan = check_successive(bernoulli_prior(), HAM, (0.25, 0.0), (0.11, 0.0), tol=-1.0)
    assert not plan.feasible


def test_uniform_ternary_hamming_is_refinable():
    prior = JointPmf([Alphabet("x", ["a", "b", "c"])], np.full(3, 1 / 3))
    d = DistortionMatrix.hamming(3)
    plan = check_successive(prior, d, (0.4, 0.0), (0.15, 0.0))
    assert plan.feasible
    R0, R1 = disclosure_rates(plan, prior)
    assert R0 + R1 == pytest.approx(rate_distortion(prior, d, 0.15).R, abs=1e-6)


@st.composite
def binary_stages(draw):
    p = draw(st.floats(0.05, 0.5))
    D1 = draw(st.floats(0.02, 0.98)) * p
    D2 = draw(st.floats(0.0, 0.95)) * D1
    return p, D1, D2


@settings(max_examples=40, deadline=None)
@given(binary_stages())
def test_binary_hamming_is_successively_refinable(stages):
    p, D1, D2 = stages
    prior = bernoulli_prior(p)
    plan = check_successive(prior, HAM, (D1, 0.0), (D2, 0.0))
    assert plan.feasible
    R0, R1 = disclosure_rates(plan, prior)
    assert R1 == pytest.approx(h2(p) - h2(D1), abs=1e-4)
    assert R0 + R1 == pytest.approx(h2(p) - h2(D2), abs=1e-4)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.05, 1), min_size=3, max_size=3),
       st.lists(st.floats(0, 1), min_size=9, max_size=9), st.floats(0.1, 0.9), st.floats(0, 0.9))
def test_cascade_invariants(weights, dvals, t1, t2):
    w = np.array(weights) / sum(weights)
    prior = JointPmf([Alphabet("x", ["a", "b", "c"])], w)
    d = DistortionMatrix(np.array(dvals).reshape(3, 3))
    lo, hi = distortion_bounds(prior, d)
    D1 = lo + t1 * (hi - lo)
    D2 = lo + t2 * (D1 - lo)
    if not D2 < D1:
        return
    plan = check_successive(prior, d, (D1, 0.0), (D2, 0.0))
    R0, R1 = plan.rates
    # data processing along X - X2 - X1
    assert R0 >= -1e-9
    E1, E2 = plan.equivocations
    assert E2 <= E1 + 1e-9
    assert plan.distortions[1] <= D2 + 1e-6
    if plan.distortions[0] <= D1 + 1e-6:
        assert R1 >= plan.meta["R_D1"] - 1e-6
    if plan.feasible:
        assert R1 == pytest.approx(plan.meta["R_D1"], abs=plan.meta["tolerance"])
    Q1 = plan.coarse_channel().matrix()
    assert mutual_information_bits(w, Q1) == pytest.approx(R1, abs=1e-9)
