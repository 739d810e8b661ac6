"""Shared listing registry, offer selection and allocation conflicts."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Any, Callable, Iterable, Sequence

from .domain import (
    Advertisement,
    InstanceClass,
    ParticipantId,
    Region,
    ResourceBundle,
    ResourceRequest,
    SharingDuration,
    credit,
    credit_str,
)

SHORTLIST_SIZE = 3


class BlackboardError(Exception):
    pass


class DuplicateListing(BlackboardError):
    pass


class UnknownEntry(BlackboardError, KeyError):
    """Raised when a transaction id is not live; signals a protocol desync."""


@dataclass(frozen=True)
class BlackboardEntry:
    transaction_id: str
    provider: ParticipantId
    resource_type: InstanceClass
    available_count: int
    region: Region
    price: Fraction
    duration: SharingDuration
    provider_rank: Fraction
    negotiator_ref: str

    def price_for(self, count: int) -> Fraction:
        """Listed price pro-rated to ``count`` of the available instances."""
        if count == self.available_count:
            return self.price
        return self.price * count / self.available_count

    def to_dict(self) -> dict[str, Any]:
        return {
            "transaction_id": self.transaction_id,
            "provider": self.provider,
            "resource_type": self.resource_type.value,
            "available_count": self.available_count,
            "region": self.region,
            "price": credit_str(self.price),
            "duration": self.duration.value,
            "provider_rank": credit_str(self.provider_rank),
            "negotiator_ref": self.negotiator_ref,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> BlackboardEntry:
        return cls(
            transaction_id=d["transaction_id"],
            provider=d["provider"],
            resource_type=InstanceClass(d["resource_type"]),
            available_count=int(d["available_count"]),
            region=d["region"],
            price=credit(d["price"]),
            duration=SharingDuration(d["duration"]),
            provider_rank=credit(d["provider_rank"]),
            negotiator_ref=d["negotiator_ref"],
        )


@dataclass(frozen=True)
class Listing:
    """A live entry plus the provider terms its bartering session quotes from."""

    entry: BlackboardEntry
    ad: Advertisement


@dataclass(frozen=True)
class ScoredOffer:
    entry: BlackboardEntry
    price: Fraction
    price_benefit: Fraction
    rank_component: Fraction
    utility: Fraction


@dataclass(frozen=True)
class Bid:
    requestor: ParticipantId
    price: Fraction
    rank: Fraction


def passes_filter(
    request: ResourceRequest, entry: BlackboardEntry
) -> bool:
    if entry.resource_type is not request.instance_class:
        return False
    if entry.available_count < request.count:
        return False
    if entry.duration.weight < request.duration.weight:
        return False
    if request.preferred_region is not None and entry.region != request.preferred_region:
        return False
    return entry.price_for(request.count) <= request.budget


def score(request: ResourceRequest, entry: BlackboardEntry) -> ScoredOffer:
    price = entry.price_for(request.count)
    x1 = request.budget - price
    x2 = entry.provider_rank
    return ScoredOffer(entry, price, x1, x2, x1 + x2)


def _order_key(offer: ScoredOffer) -> tuple:
    e = offer.entry
    return (-offer.utility, -e.provider_rank, offer.price, e.provider, e.transaction_id)


def select(
    request: ResourceRequest,
    entries: Iterable[BlackboardEntry],
    *,
    remaining: int | None = None,
    limit: int = SHORTLIST_SIZE,
) -> list[ScoredOffer]:
    """Shortlist of up to ``limit`` offers for ``request``, best utility first.

    ``remaining`` is the requestor's urgency time left; zero means the
    request has expired and nothing is selected.
    """
    if remaining is not None and remaining <= 0:
        return []
    scored = [score(request, e) for e in entries if passes_filter(request, e)]
    scored.sort(key=_order_key)
    return scored[:limit]


def resolve_conflict(bids: Sequence[Bid], rng: random.Random) -> ParticipantId:
    """Pick the requestor that wins a contested entry.

    Highest offered price wins; a price tie goes to the highest rank; a tie on
    both is broken uniformly at random.
    """
    if not bids:
        raise ValueError("no bids to resolve")
    if len(bids) == 1:
        return bids[0].requestor
    top_price = max(b.price for b in bids)
    finalists = [b for b in bids if b.price == top_price]
    if len(finalists) > 1:
        top_rank = max(b.rank for b in finalists)
        finalists = [b for b in finalists if b.rank == top_rank]
    if len(finalists) == 1:
        return finalists[0].requestor
    ids = sorted(b.requestor for b in finalists)
    return ids[rng.randrange(len(ids))]


class Blackboard:
    """Registry of live listings keyed by transaction id.

    Mutations are expected to come from a single event loop.
    """

    def __init__(self, id_prefix: str = "tx") -> None:
        self._prefix = id_prefix
        self._seq = itertools.count(1)
        self._live: dict[str, Listing] = {}
        self._by_class: dict[InstanceClass, dict[str, Listing]] = {
            c: {} for c in InstanceClass
        }
        self._retired: set[str] = set()
        self._subscribers: list[Callable[[BlackboardEntry], None]] = []
        self.version = 0
        self._class_version = {c: 0 for c in InstanceClass}

    def _touch(self, cls: InstanceClass) -> None:
        self.version += 1
        self._class_version[cls] += 1

    def class_version(self, cls: InstanceClass) -> int:
        """Counter bumped whenever listings of ``cls`` change."""
        return self._class_version[cls]

    def __len__(self) -> int:
        return len(self._live)

    def __contains__(self, transaction_id: str) -> bool:
        return transaction_id in self._live

    def subscribe(self, callback: Callable[[BlackboardEntry], None]) -> None:
        self._subscribers.append(callback)

    def publish(
        self, ad: Advertisement, rank: Fraction | int = 0, *, notify: bool = True
    ) -> BlackboardEntry:
        cls = ad.instance_class
        for other in self._by_class[cls].values():
            o = other.ad
            if (
                o.provider == ad.provider
                and o.bundle == ad.bundle
                and o.duration == ad.duration
            ):
                raise DuplicateListing(
                    f"{ad.provider} already lists {ad.bundle.to_dict()} for "
                    f"{ad.duration.value} as {other.entry.transaction_id}"
                )
        tid = f"{self._prefix}-{next(self._seq):06d}"
        entry = BlackboardEntry(
            transaction_id=tid,
            provider=ad.provider,
            resource_type=cls,
            available_count=ad.bundle.count(cls),
            region=ad.region,
            price=ad.min_price,
            duration=ad.duration,
            provider_rank=Fraction(rank),
            negotiator_ref=f"ba:{tid}",
        )
        listing = Listing(entry, ad)
        self._live[tid] = listing
        self._by_class[cls][tid] = listing
        self._touch(cls)
        if notify:
            for cb in self._subscribers:
                cb(entry)
        return entry

    def listing(self, transaction_id: str) -> Listing:
        try:
            return self._live[transaction_id]
        except KeyError:
            raise UnknownEntry(transaction_id) from None

    def get(self, transaction_id: str) -> BlackboardEntry:
        return self.listing(transaction_id).entry

    def retire(self, transaction_id: str) -> Listing:
        listing = self._live.pop(transaction_id, None)
        if listing is None:
            state = "already retired" if transaction_id in self._retired else "unknown"
            raise UnknownEntry(f"{transaction_id} is {state}")
        del self._by_class[listing.entry.resource_type][transaction_id]
        self._retired.add(transaction_id)
        self._touch(listing.entry.resource_type)
        return listing

    def take(
        self, transaction_id: str, count: int
    ) -> tuple[Listing, BlackboardEntry | None]:
        """Retire an entry after ``count`` instances were granted from it.

        Leftover instances are re-listed under a fresh id at the same
        per-instance prices.
        """
        listing = self.listing(transaction_id)
        available = listing.entry.available_count
        if not 1 <= count <= available:
            raise ValueError(f"cannot take {count} of {available} instances")
        self.retire(transaction_id)
        left = available - count
        if left == 0:
            return listing, None
        ad = listing.ad
        share = Fraction(left, available)
        rest = replace(
            ad,
            bundle=ResourceBundle.single(listing.entry.resource_type, left),
            min_price=ad.min_price * share,
            max_price=ad.max_price * share,
        )
        return listing, self.publish(rest, listing.entry.provider_rank)

    def update_rank(self, provider: ParticipantId, rank: Fraction) -> None:
        for tid, listing in list(self._live.items()):
            if listing.entry.provider == provider:
                updated = Listing(replace(listing.entry, provider_rank=Fraction(rank)), listing.ad)
                self._live[tid] = updated
                self._by_class[updated.entry.resource_type][tid] = updated
                self._touch(updated.entry.resource_type)

    def entries(self, instance_class: InstanceClass | None = None) -> list[BlackboardEntry]:
        source = self._live if instance_class is None else self._by_class[instance_class]
        return [l.entry for l in source.values()]

    def supply(self, instance_class: InstanceClass) -> int:
        return sum(l.entry.available_count for l in self._by_class[instance_class].values())

    def select(
        self, request: ResourceRequest, *, remaining: int | None = None
    ) -> list[ScoredOffer]:
        return select(
            request, self.entries(request.instance_class), remaining=remaining
        )

    def dump(self) -> list[dict[str, Any]]:
        return [l.entry.to_dict() for l in self._live.values()]
