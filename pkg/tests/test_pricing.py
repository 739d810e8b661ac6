from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import assume, given, strategies as st

from barterd.domain import InstanceClass, ResourceBundle, SharingDuration
from barterd.pricing import (
    ClockPair,
    barter_credits,
    budget_fraction,
    estimated_bid,
    instance_value,
    suggested_price,
    transactional_price,
)

fractions = st.fractions(min_value=0, max_value=10_000, max_denominator=1000)


def test_instance_value_examples():
    assert instance_value(ResourceBundle.single(InstanceClass.MEDIUM, 10)) == 30
    assert instance_value(ResourceBundle.single(InstanceClass.MICRO, 1)) == 1
    assert instance_value(ResourceBundle.of({"Small": 5, "XLarge": 2})) == 20


def test_barter_credit_examples():
    assert barter_credits(30, SharingDuration.THREE_WEEKS) == 90
    assert barter_credits(Fraction(17, 3), SharingDuration.ONE_WEEK) == Fraction(17, 3)
    assert barter_credits(20, SharingDuration.TWO_MONTHS) == 160
    assert suggested_price(ResourceBundle.single(InstanceClass.MEDIUM, 10), SharingDuration.THREE_WEEKS) == 90


def test_barter_credits_rejects_negative_and_float():
    with pytest.raises(ValueError):
        barter_credits(-1, SharingDuration.ONE_WEEK)
    with pytest.raises(TypeError):
        barter_credits(1.5, SharingDuration.ONE_WEEK)


def test_budget_fraction_examples():
    assert budget_fraction(ClockPair(6, 6)) == Fraction(1, 5)
    assert budget_fraction(ClockPair(6, 0)) == 1
    assert budget_fraction(ClockPair(6, 3)) == Fraction(3, 5)


def test_estimated_bid_examples():
    assert estimated_bid(100, ClockPair(6, 3)) == 60
    assert estimated_bid(77, ClockPair(24, 0)) == 77
    assert estimated_bid(0, ClockPair(24, 9)) == 0


def test_clock_validation():
    with pytest.raises(ValueError):
        ClockPair(0, 0)
    with pytest.raises(ValueError):
        ClockPair(6, 7)
    assert ClockPair.at(6, 10) == ClockPair(6, 0)


def test_transactional_examples():
    assert transactional_price(24, 100, 40, 12, 12) == 70
    assert transactional_price(24, 100, 40, 24, 0) == 100
    assert transactional_price(24, 100, 40, 0, 24) == 40
    assert transactional_price(24, 100, 40, 6, 18) == 55


def test_transactional_rejects_bad_inputs():
    with pytest.raises(ValueError):
        transactional_price(24, 10, 40, 6, 18)
    with pytest.raises(ValueError):
        transactional_price(24, 100, 40, 25, 18)
    with pytest.raises(ValueError):
        transactional_price(0, 100, 40, 0, 0)


def oracle_price(t_p, p_max, p_min, r_tp, r_tr, t_r):
    # each side's view of the price, then their mean
    provider_view = p_min + (p_max - p_min) * Fraction(r_tp) / t_p
    requestor_view = p_max - (p_max - p_min) * Fraction(r_tr) / t_r
    return (provider_view + requestor_view) / 2


@st.composite
def price_inputs(draw):
    t_p = draw(st.integers(1, 1440))
    t_r = draw(st.integers(1, 1440))
    p_min = draw(fractions)
    p_max = p_min + draw(fractions)
    r_tp = draw(st.integers(0, t_p))
    r_tr = draw(st.integers(0, t_r))
    return t_p, p_max, p_min, r_tp, r_tr, t_r


@given(price_inputs())
def test_transactional_matches_oracle_and_stays_in_range(args):
    t_p, p_max, p_min, r_tp, r_tr, t_r = args
    p = transactional_price(t_p, p_max, p_min, r_tp, r_tr, requestor_total=t_r)
    assert p == oracle_price(t_p, p_max, p_min, r_tp, r_tr, t_r)
    assert p_min <= p <= p_max


@given(price_inputs(), st.integers(0, 1440))
def test_transactional_moves_with_urgency(args, bump):
    t_p, p_max, p_min, r_tp, r_tr, t_r = args
    base = transactional_price(t_p, p_max, p_min, r_tp, r_tr, requestor_total=t_r)
    # a more relaxed provider never lowers the price
    r2 = min(t_p, r_tp + bump)
    assert transactional_price(t_p, p_max, p_min, r2, r_tr, requestor_total=t_r) >= base
    # a more relaxed requestor never raises it
    r3 = min(t_r, r_tr + bump)
    assert transactional_price(t_p, p_max, p_min, r_tp, r3, requestor_total=t_r) <= base


@given(st.integers(1, 10_000), st.data())
def test_budget_fraction_closed_form_and_monotone(total, data):
    r = data.draw(st.integers(0, total))
    f = budget_fraction(ClockPair(total, r))
    assert f == Fraction(1) - Fraction(4, 5) * Fraction(r, total)
    assert Fraction(1, 5) <= f <= 1
    if r > 0:
        assert budget_fraction(ClockPair(total, r - 1)) > f


@given(fractions, st.integers(1, 1440), st.data())
def test_bid_never_exceeds_budget(budget, total, data):
    r = data.draw(st.integers(0, total))
    bid = estimated_bid(budget, ClockPair(total, r))
    assert budget / 5 <= bid <= budget
