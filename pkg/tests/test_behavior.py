import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from hetbid import behavior, market
from hetbid.errors import InvalidParameterError
from hetbid.market import Bid
from hetbid.radio import UserNode

ALPHAS = [0.1 * k for k in range(1, 10)]


def test_prelec_reference_value():
    mpmath.mp.dps = 30
    oracle = float(mpmath.exp(-mpmath.sqrt(-mpmath.log(mpmath.mpf("0.9")))))
    assert oracle == pytest.approx(0.7228216, abs=1e-7)
    assert oracle == pytest.approx(0.72283, abs=1e-5)  # the rounded figure quoted for this case
    assert behavior.prelec(0.9, 0.5) == pytest.approx(oracle, abs=1e-14)


@pytest.mark.parametrize("alpha", ALPHAS)
def test_prelec_fixed_point_and_ends(alpha):
    assert behavior.prelec(1 / math.e, alpha) == pytest.approx(1 / math.e, abs=1e-12)
    assert behavior.prelec(0.0, alpha) == 0.0
    assert behavior.prelec(1.0, alpha) == 1.0


@given(alpha=st.floats(0.01, 0.99), p=st.floats(1e-6, 1 - 1e-6))
def test_prelec_over_and_under_weighting(alpha, p):
    w = behavior.prelec(p, alpha)
    if p < 1 / math.e - 1e-9:
        assert w > p
    elif p > 1 / math.e + 1e-9:
        assert w < p


@given(alpha=st.floats(0.05, 0.95))
def test_prelec_increasing(alpha):
    p = np.linspace(0, 1, 501)
    assert np.all(np.diff(behavior.prelec(p, alpha)) > 0)


def test_prelec_validation():
    with pytest.raises(InvalidParameterError):
        behavior.prelec(0.5, 1.0)
    with pytest.raises(InvalidParameterError):
        behavior.prelec(1.5, 0.5)
    with pytest.raises(InvalidParameterError):
        behavior.WeightingFn("cubic")


def test_weighting_for():
    assert behavior.weighting_for(None).is_identity
    assert behavior.weighting_for(1).is_identity
    assert behavior.weighting_for(0.6) == behavior.prelec_weighting(0.6)


def test_perceive():
    bid = Bid(0, 10.0, 1.0, 1.0, 0.9)
    assert behavior.perceive(bid, behavior.EUT) is bid
    assert behavior.perceive(bid, behavior.prelec_weighting(0.5)).guarantee == pytest.approx(0.72283, abs=1e-5)
    fixed = Bid(0, 10.0, 1.0, 1.0, 1 / math.e)
    assert behavior.perceive(fixed, behavior.prelec_weighting(0.3)).guarantee == pytest.approx(1 / math.e, abs=1e-12)
    assert behavior.perceive(None, behavior.prelec_weighting(0.3)) is None


bids = st.builds(Bid, sp_id=st.just(0), rate=st.floats(0, 10), price=st.floats(0, 10), bandwidth=st.floats(0, 5), guarantee=st.floats(0, 1))
users = st.builds(UserNode, id=st.just(0), x=st.just(0.0), y=st.just(0.0), b_min=st.floats(0.1, 5), delta=st.floats(0.5, 10), theta=st.floats(1.1, 4))


@given(c=bids, w=bids, u=users)
def test_identity_decide_matches_max1(c, w, u):
    assert behavior.decide(u, c, w, behavior.EUT) == market.solve_max1(c, w, u)


def _feasible(u, c, w, weighting):
    out = set()
    for s in market.STRATEGIES[1:]:
        pc, pw = behavior.perceive(c, weighting), behavior.perceive(w, weighting)
        rate = market.joint_rate(pc, pw, s)
        if rate >= u.b_min * (1 - market.RATE_RTOL) and market.user_utility(pc, pw, s, u) >= 0:
            out.add(s)
    return out


def _bids_with_guarantees(lo, hi):
    return st.builds(Bid, sp_id=st.just(0), rate=st.floats(0.1, 10), price=st.floats(0, 10), bandwidth=st.floats(0.1, 5), guarantee=st.floats(lo, hi))


@given(c=_bids_with_guarantees(0.37, 1.0), w=_bids_with_guarantees(0.37, 1.0), u=users, alpha=st.floats(0.05, 0.95))
def test_underweighting_shrinks_acceptance(c, w, u, alpha):
    pt = behavior.prelec_weighting(alpha)
    assert _feasible(u, c, w, pt) <= _feasible(u, c, w, behavior.EUT)


@given(c=_bids_with_guarantees(0.0, 0.36), w=_bids_with_guarantees(0.0, 0.36), u=users, alpha=st.floats(0.05, 0.95))
def test_overweighting_grows_acceptance(c, w, u, alpha):
    pt = behavior.prelec_weighting(alpha)
    assert _feasible(u, c, w, pt) >= _feasible(u, c, w, behavior.EUT)


@given(b=bids, u=users, alpha=st.sampled_from([None, 0.3, 0.8]))
def test_standalone_accepts_matches_decide(b, u, alpha):
    weighting = behavior.weighting_for(alpha)
    vec = behavior.standalone_accepts(u, [b.rate], [b.price], [b.guarantee], weighting)[0]
    assert bool(vec) == (behavior.decide(u, b, None, weighting).p_c == 1)
