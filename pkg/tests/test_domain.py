from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from barterd.domain import (
    REFERENCE_MODEL,
    Advertisement,
    InstanceClass,
    ResourceBundle,
    ResourceRequest,
    SharingDuration,
    Urgency,
    credit,
    duration_weight_of,
    split_by_class,
    weight_of,
)

from conftest import make_ad, make_request


@pytest.mark.parametrize(
    "cls, w",
    [("Micro", 1), ("Small", 2), ("Medium", 3), ("Large", 4), ("XLarge", 5)],
)
def test_instance_weights(cls, w):
    assert weight_of(InstanceClass(cls)) == w
    assert InstanceClass(cls).weight == w


@pytest.mark.parametrize(
    "d, w",
    [("OneWeek", 1), ("TwoWeeks", 2), ("ThreeWeeks", 3), ("OneMonth", 4), ("TwoMonths", 8)],
)
def test_duration_weights(d, w):
    assert duration_weight_of(SharingDuration(d)) == w


def test_reference_model_covers_every_class():
    assert set(REFERENCE_MODEL) == set(InstanceClass)
    assert REFERENCE_MODEL[InstanceClass.XLARGE]["cpus"] == (16, 16)


def test_urgency_levels():
    assert [u.deadline_hours for u in Urgency] == [1, 3, 6, 12, 18, 24]
    assert Urgency.from_hours(6) is Urgency.H6
    assert Urgency.H3.deadline_minutes == 180
    with pytest.raises(ValueError):
        Urgency.from_hours(5)


def test_credit_rejects_floats():
    assert credit("121/2") == Fraction(121, 2)
    with pytest.raises(TypeError):
        credit(0.5)


def test_bundle_normalizes():
    b = ResourceBundle(((InstanceClass.XLARGE, 2), (InstanceClass.SMALL, 5), (InstanceClass.SMALL, 0)))
    assert b.items == ((InstanceClass.SMALL, 5), (InstanceClass.XLARGE, 2))
    assert b.total == 7
    assert ResourceBundle.of({"Small": 5, "XLarge": 2}) == b
    assert ResourceBundle.from_dict(b.to_dict()) == b


def test_bundle_rejects_negative_counts():
    with pytest.raises(ValueError):
        ResourceBundle.single(InstanceClass.MICRO, -1)


def test_advertisement_validation():
    with pytest.raises(ValueError):
        make_ad(lo=30, hi=20)
    with pytest.raises(ValueError):
        Advertisement("p", ResourceBundle(), 0, 1, "eu", SharingDuration.ONE_WEEK)


def test_advertisement_round_trip():
    ad = make_ad(lo=Fraction(7, 3), hi=5)
    assert Advertisement.from_dict(ad.to_dict()) == ad


def test_split_by_class_preserves_prices():
    ad = Advertisement(
        "p", ResourceBundle.of({"Small": 5, "XLarge": 2}), 40, 60, "eu", SharingDuration.ONE_WEEK
    )
    parts = split_by_class(ad)
    assert [p.instance_class for p in parts] == [InstanceClass.SMALL, InstanceClass.XLARGE]
    assert sum(p.min_price for p in parts) == 40
    assert sum(p.max_price for p in parts) == 60
    # value shares 10/20 and 10/20
    assert parts[0].min_price == 20
    with pytest.raises(ValueError):
        _ = ad.instance_class


def test_request_clock():
    r = make_request(urgency=Urgency.H1, issued_at=30)
    assert r.deadline == 90
    assert r.remaining(30) == 60
    assert r.remaining(200) == 0
    assert ResourceRequest.from_dict(r.to_dict()) == r


@given(
    st.dictionaries(st.sampled_from(list(InstanceClass)), st.integers(0, 50)),
    st.dictionaries(st.sampled_from(list(InstanceClass)), st.integers(0, 50)),
)
def test_bundle_addition_is_countwise(a, b):
    x, y = ResourceBundle.of(a), ResourceBundle.of(b)
    s = x + y
    for c in InstanceClass:
        assert s.count(c) == a.get(c, 0) + b.get(c, 0)
    assert s == y + x
