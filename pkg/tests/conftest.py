from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import settings

from barterd.domain import (
    Advertisement,
    InstanceClass,
    ResourceBundle,
    ResourceRequest,
    SharingDuration,
    Urgency,
)

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


def make_ad(
    provider: str = "p1",
    cls: InstanceClass = InstanceClass.MEDIUM,
    count: int = 1,
    lo: int | Fraction = 10,
    hi: int | Fraction = 20,
    *,
    region: str = "eu",
    duration: SharingDuration = SharingDuration.ONE_MONTH,
    posted_at: int = 0,
    deadline: Urgency = Urgency.H24,
) -> Advertisement:
    return Advertisement(
        provider=provider,
        bundle=ResourceBundle.single(cls, count),
        min_price=Fraction(lo),
        max_price=Fraction(hi),
        region=region,
        duration=duration,
        posted_at=posted_at,
        provider_deadline=deadline,
    )


def make_request(
    requestor: str = "r1",
    cls: InstanceClass = InstanceClass.MEDIUM,
    count: int = 1,
    budget: int | Fraction = 30,
    *,
    urgency: Urgency = Urgency.H24,
    duration: SharingDuration = SharingDuration.ONE_WEEK,
    region: str | None = None,
    issued_at: int = 0,
) -> ResourceRequest:
    return ResourceRequest(
        requestor=requestor,
        instance_class=cls,
        count=count,
        duration=duration,
        budget=Fraction(budget),
        urgency=urgency,
        preferred_region=region,
        issued_at=issued_at,
    )


@pytest.fixture
def ad_factory():
    return make_ad


@pytest.fixture
def request_factory():
    return make_request
