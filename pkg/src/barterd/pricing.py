"""Barter-credit valuation, urgency-driven bid sizing and the transactional price.

All amounts are exact ``Fraction`` values so ledger balances never drift.
Durations may be given in any consistent unit (the simulator uses minutes).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

from .domain import ResourceBundle, SharingDuration, credit, duration_weight_of

Number = int | Fraction

MIN_BUDGET_FRACTION = Fraction(1, 5)


def _exact(x: Number, name: str) -> Fraction:
    if not isinstance(x, Rational):
        raise TypeError(f"{name} must be an exact rational, got {type(x).__name__}")
    return Fraction(x)


@dataclass(frozen=True)
class ClockPair:
    """Total urgency window and the time still left in it."""

    total: Fraction
    remaining: Fraction

    def __post_init__(self) -> None:
        total = _exact(self.total, "total")
        remaining = _exact(self.remaining, "remaining")
        if total <= 0:
            raise ValueError("total time must be > 0")
        if not 0 <= remaining <= total:
            raise ValueError(f"remaining time {remaining} outside [0, {total}]")
        object.__setattr__(self, "total", total)
        object.__setattr__(self, "remaining", remaining)

    @classmethod
    def at(cls, total: Number, elapsed: Number) -> ClockPair:
        """Clock after ``elapsed`` time units; remaining is clamped at zero."""
        total = Fraction(total)
        return cls(total, max(Fraction(0), total - Fraction(elapsed)))


def instance_value(bundle: ResourceBundle) -> Fraction:
    return Fraction(sum(n * cls.weight for cls, n in bundle.items))


def barter_credits(value: Number, d: SharingDuration) -> Fraction:
    value = credit(value)
    if value < 0:
        raise ValueError("instance value must be >= 0")
    return value * duration_weight_of(d)


def suggested_price(bundle: ResourceBundle, d: SharingDuration) -> Fraction:
    """Credits the platform suggests for advertising ``bundle`` for ``d``."""
    return barter_credits(instance_value(bundle), d)


def budget_fraction(clock: ClockPair) -> Fraction:
    """Share of the budget a requestor is willing to bid at this point.

    Grows linearly from 0.2 with the full window left to 1.0 at the deadline.
    """
    ratio = clock.remaining / clock.total
    return (20 + (80 - 80 * ratio)) / Fraction(100)


def estimated_bid(budget: Number, clock: ClockPair) -> Fraction:
    budget = credit(budget)
    if budget < 0:
        raise ValueError("budget must be >= 0")
    return budget * budget_fraction(clock)


def transactional_price(
    total: Number,
    p_max: Number,
    p_min: Number,
    provider_remaining: Number,
    requestor_remaining: Number,
    *,
    requestor_total: Number | None = None,
) -> Fraction:
    """Fair price between a provider's floor and ceiling given both urgencies.

    ``total`` is the provider's window. When the requestor's window differs,
    pass it as ``requestor_total`` so each side's ratio uses its own total.
    """
    t_p = _exact(total, "total")
    t_r = t_p if requestor_total is None else _exact(requestor_total, "requestor_total")
    if t_p <= 0 or t_r <= 0:
        raise ValueError("total time must be > 0")
    p_max = credit(p_max)
    p_min = credit(p_min)
    if p_min > p_max:
        raise ValueError(f"p_min {p_min} exceeds p_max {p_max}")
    if p_min < 0:
        raise ValueError("prices must be >= 0")
    r_tp = _exact(provider_remaining, "provider_remaining")
    r_tr = _exact(requestor_remaining, "requestor_remaining")
    if not 0 <= r_tp <= t_p:
        raise ValueError(f"provider remaining {r_tp} outside [0, {t_p}]")
    if not 0 <= r_tr <= t_r:
        raise ValueError(f"requestor remaining {r_tr} outside [0, {t_r}]")

    fp = r_tp / t_p
    fr = r_tr / t_r
    by_provider = fp * p_max + p_min * (1 - fp)
    by_requestor = fr * p_min + p_max * (1 - fr)
    return (by_provider + by_requestor) / 2
