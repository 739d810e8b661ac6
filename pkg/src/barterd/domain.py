"""Market vocabulary shared by every other module.

Instance classes, sharing durations and urgency levels carry the fixed
weights used for barter-credit valuation. Advertisements and requests are
the two sides of the market; both are immutable and JSON-serializable.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Any, Mapping

ParticipantId = str
Region = str


class InstanceClass(str, Enum):
    MICRO = "Micro"
    SMALL = "Small"
    MEDIUM = "Medium"
    LARGE = "Large"
    XLARGE = "XLarge"

    @property
    def weight(self) -> int:
        return _INSTANCE_WEIGHTS[self]


class SharingDuration(str, Enum):
    ONE_WEEK = "OneWeek"
    TWO_WEEKS = "TwoWeeks"
    THREE_WEEKS = "ThreeWeeks"
    ONE_MONTH = "OneMonth"
    TWO_MONTHS = "TwoMonths"

    @property
    def weight(self) -> int:
        return _DURATION_WEIGHTS[self]


class Urgency(str, Enum):
    H1 = "H1"
    H3 = "H3"
    H6 = "H6"
    H12 = "H12"
    H18 = "H18"
    H24 = "H24"

    @property
    def deadline_hours(self) -> int:
        return int(self.value[1:])

    @property
    def deadline_minutes(self) -> int:
        return self.deadline_hours * 60

    @classmethod
    def from_hours(cls, hours: int) -> Urgency:
        try:
            return cls(f"H{int(hours)}")
        except ValueError:
            raise ValueError(f"no urgency level for {hours} hours") from None


_INSTANCE_WEIGHTS = {
    InstanceClass.MICRO: 1,
    InstanceClass.SMALL: 2,
    InstanceClass.MEDIUM: 3,
    InstanceClass.LARGE: 4,
    InstanceClass.XLARGE: 5,
}

_DURATION_WEIGHTS = {
    SharingDuration.ONE_WEEK: 1,
    SharingDuration.TWO_WEEKS: 2,
    SharingDuration.THREE_WEEKS: 3,
    SharingDuration.ONE_MONTH: 4,
    SharingDuration.TWO_MONTHS: 8,
}

MAX_DEADLINE_HOURS = 24

# Hardware ranges per class: (RAM GB, disk GB, CPUs). Documentation and
# dataset validation only; exchange happens on the class label.
REFERENCE_MODEL: dict[InstanceClass, dict[str, tuple[int, int]]] = {
    InstanceClass.MICRO: {"ram_gb": (1, 2), "disk_gb": (20, 60), "cpus": (1, 1)},
    InstanceClass.SMALL: {"ram_gb": (4, 8), "disk_gb": (80, 240), "cpus": (1, 2)},
    InstanceClass.MEDIUM: {"ram_gb": (16, 32), "disk_gb": (320, 800), "cpus": (3, 4)},
    InstanceClass.LARGE: {"ram_gb": (48, 64), "disk_gb": (1000, 1500), "cpus": (8, 12)},
    InstanceClass.XLARGE: {"ram_gb": (80, 80), "disk_gb": (2000, 2000), "cpus": (16, 16)},
}


def weight_of(cls: InstanceClass) -> int:
    return _INSTANCE_WEIGHTS[InstanceClass(cls)]


def duration_weight_of(d: SharingDuration) -> int:
    return _DURATION_WEIGHTS[SharingDuration(d)]


def credit(value: Any) -> Fraction:
    """Parse a credit amount from an int, Fraction or ``"p/q"`` string."""
    if isinstance(value, float):
        raise TypeError("credit amounts must be exact; got float")
    return Fraction(value)


def credit_str(value: Fraction) -> str:
    return str(Fraction(value))


@dataclass(frozen=True)
class ResourceBundle:
    """Typed VM quantities, stored as sorted (class, count) pairs."""

    items: tuple[tuple[InstanceClass, int], ...] = ()

    def __post_init__(self) -> None:
        merged: dict[InstanceClass, int] = {}
        for cls, n in self.items:
            cls = InstanceClass(cls)
            if isinstance(n, bool) or not isinstance(n, int) or n < 0:
                raise ValueError(f"instance count must be a non-negative int, got {n!r}")
            merged[cls] = merged.get(cls, 0) + n
        order = list(InstanceClass)
        norm = tuple(
            (c, merged[c]) for c in sorted(merged, key=order.index) if merged[c] > 0
        )
        object.__setattr__(self, "items", norm)

    @classmethod
    def of(cls, counts: Mapping[InstanceClass | str, int]) -> ResourceBundle:
        return cls(tuple((InstanceClass(k), v) for k, v in counts.items()))

    @classmethod
    def single(cls, instance_class: InstanceClass, count: int) -> ResourceBundle:
        return cls(((InstanceClass(instance_class), count),))

    def count(self, instance_class: InstanceClass) -> int:
        return dict(self.items).get(InstanceClass(instance_class), 0)

    @property
    def classes(self) -> tuple[InstanceClass, ...]:
        return tuple(c for c, _ in self.items)

    @property
    def total(self) -> int:
        return sum(n for _, n in self.items)

    def is_empty(self) -> bool:
        return not self.items

    def __add__(self, other: ResourceBundle) -> ResourceBundle:
        return ResourceBundle(self.items + other.items)

    def to_dict(self) -> dict[str, int]:
        return {c.value: n for c, n in self.items}

    @classmethod
    def from_dict(cls, data: Mapping[str, int]) -> ResourceBundle:
        return cls.of(data)


@dataclass(frozen=True)
class Advertisement:
    provider: ParticipantId
    bundle: ResourceBundle
    min_price: Fraction
    max_price: Fraction
    region: Region
    duration: SharingDuration
    posted_at: int = 0
    provider_deadline: Urgency = Urgency.H24

    def __post_init__(self) -> None:
        object.__setattr__(self, "min_price", credit(self.min_price))
        object.__setattr__(self, "max_price", credit(self.max_price))
        object.__setattr__(self, "duration", SharingDuration(self.duration))
        object.__setattr__(self, "provider_deadline", Urgency(self.provider_deadline))
        if self.bundle.is_empty():
            raise ValueError("advertisement bundle is empty")
        if not 0 <= self.min_price <= self.max_price:
            raise ValueError(
                f"need 0 <= min_price <= max_price, got {self.min_price}, {self.max_price}"
            )
        if self.posted_at < 0:
            raise ValueError("posted_at must be >= 0")

    @property
    def instance_class(self) -> InstanceClass:
        if len(self.bundle.classes) != 1:
            raise ValueError("advertisement spans several instance classes")
        return self.bundle.classes[0]

    def to_dict(self) -> dict[str, Any]:
        return {
            "provider": self.provider,
            "bundle": self.bundle.to_dict(),
            "min_price": credit_str(self.min_price),
            "max_price": credit_str(self.max_price),
            "region": self.region,
            "duration": self.duration.value,
            "posted_at": self.posted_at,
            "provider_deadline": self.provider_deadline.value,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> Advertisement:
        return cls(
            provider=d["provider"],
            bundle=ResourceBundle.from_dict(d["bundle"]),
            min_price=credit(d["min_price"]),
            max_price=credit(d["max_price"]),
            region=d["region"],
            duration=SharingDuration(d["duration"]),
            posted_at=int(d.get("posted_at", 0)),
            provider_deadline=Urgency(d.get("provider_deadline", "H24")),
        )


def split_by_class(ad: Advertisement) -> list[Advertisement]:
    """Split a multi-class advertisement into single-class ones.

    Prices are apportioned by each class's share of the instance value, so the
    parts sum exactly to the original prices.
    """
    if len(ad.bundle.classes) <= 1:
        return [ad]
    total = sum(n * c.weight for c, n in ad.bundle.items)
    parts = []
    for c, n in ad.bundle.items:
        share = Fraction(n * c.weight, total)
        parts.append(
            Advertisement(
                provider=ad.provider,
                bundle=ResourceBundle.single(c, n),
                min_price=ad.min_price * share,
                max_price=ad.max_price * share,
                region=ad.region,
                duration=ad.duration,
                posted_at=ad.posted_at,
                provider_deadline=ad.provider_deadline,
            )
        )
    return parts


@dataclass(frozen=True)
class ResourceRequest:
    requestor: ParticipantId
    instance_class: InstanceClass
    count: int
    duration: SharingDuration
    budget: Fraction
    urgency: Urgency
    preferred_region: Region | None = None
    issued_at: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "instance_class", InstanceClass(self.instance_class))
        object.__setattr__(self, "duration", SharingDuration(self.duration))
        object.__setattr__(self, "urgency", Urgency(self.urgency))
        object.__setattr__(self, "budget", credit(self.budget))
        if self.count < 1:
            raise ValueError("request count must be >= 1")
        if self.budget < 0:
            raise ValueError("budget must be >= 0")
        if self.issued_at < 0:
            raise ValueError("issued_at must be >= 0")

    @property
    def deadline(self) -> int:
        """Absolute sim minute at which the request's urgency runs out."""
        return self.issued_at + self.urgency.deadline_minutes

    def remaining(self, now: int) -> int:
        return max(0, self.deadline - now)

    def to_dict(self) -> dict[str, Any]:
        return {
            "requestor": self.requestor,
            "instance_class": self.instance_class.value,
            "count": self.count,
            "duration": self.duration.value,
            "budget": credit_str(self.budget),
            "urgency": self.urgency.value,
            "preferred_region": self.preferred_region,
            "issued_at": self.issued_at,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> ResourceRequest:
        return cls(
            requestor=d["requestor"],
            instance_class=InstanceClass(d["instance_class"]),
            count=int(d["count"]),
            duration=SharingDuration(d["duration"]),
            budget=credit(d["budget"]),
            urgency=Urgency(d["urgency"]),
            preferred_region=d.get("preferred_region"),
            issued_at=int(d.get("issued_at", 0)),
        )

