"""Call-for-proposal negotiation between a requestor's agent and listings.

A session walks its top-3 shortlist: each offer is quoted by the listing's
bartering session, then accepted or rejected against the requestor's current
bid. Exhausting the shortlist parks the session until the revisit timer fires
or a new listing is published.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Callable, Mapping

from .blackboard import Blackboard, Listing, ScoredOffer, UnknownEntry
from .domain import (
    InstanceClass,
    ParticipantId,
    ResourceRequest,
    SharingDuration,
    credit,
    credit_str,
)
from .ledger import GuardResult, Ledger

REVISIT_MINUTES = 5


class DebtBlocked(Exception):
    """The requestor is in debt beyond the ceiling and may not consume."""


class SessionState(str, Enum):
    SELECTING = "Selecting"
    AWAITING_QUOTE = "AwaitingQuote"
    CONFIRMING = "Confirming"
    SETTLED = "Settled"
    FAILED = "Failed"
    WAITING = "Waiting"


class Decision(str, Enum):
    ACCEPT = "accept"
    REJECT = "reject"


class WakeReason(str, Enum):
    TIMER = "timer"
    NEW_PUBLICATION = "new_publication"


@dataclass(frozen=True)
class SlaRecord:
    transaction_id: str
    provider: ParticipantId
    requestor: ParticipantId
    resource_type: InstanceClass
    count: int
    duration: SharingDuration
    agreed_price: Fraction
    concluded_at: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "transaction_id": self.transaction_id,
            "provider": self.provider,
            "requestor": self.requestor,
            "resource_type": self.resource_type.value,
            "count": self.count,
            "duration": self.duration.value,
            "agreed_price": credit_str(self.agreed_price),
            "concluded_at": self.concluded_at,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> SlaRecord:
        return cls(
            transaction_id=d["transaction_id"],
            provider=d["provider"],
            requestor=d["requestor"],
            resource_type=InstanceClass(d["resource_type"]),
            count=int(d["count"]),
            duration=SharingDuration(d["duration"]),
            agreed_price=credit(d["agreed_price"]),
            concluded_at=int(d["concluded_at"]),
        )


@dataclass
class NegotiationSession:
    session_id: str
    request: ResourceRequest
    shortlist: list[ScoredOffer] = field(default_factory=list)
    cursor: int = 0
    state: SessionState = SessionState.SELECTING
    next_wakeup: int | None = None
    quoted: Fraction | None = None
    bid: Fraction | None = None
    sla: SlaRecord | None = None
    board_version: int = -1

    @property
    def current(self) -> ScoredOffer | None:
        if self.cursor < len(self.shortlist):
            return self.shortlist[self.cursor]
        return None

    @property
    def done(self) -> bool:
        return self.state in (SessionState.SETTLED, SessionState.FAILED)


def quote_listing(listing: Listing, request: ResourceRequest, now: int) -> Fraction:
    """Transactional price for ``request.count`` instances of ``listing`` at ``now``.

    Uses the closed form mid + half_spread * (provider_ratio - requestor_ratio),
    algebraically identical to :func:`pricing.transactional_price` but cheaper
    on the simulator's hot path.
    """
    ad = listing.ad
    t_p = ad.provider_deadline.deadline_minutes
    r_tp = min(t_p, max(0, t_p - (now - ad.posted_at)))
    t_r = request.urgency.deadline_minutes
    r_tr = request.remaining(now)
    lo, hi = ad.min_price, ad.max_price
    if request.count != listing.entry.available_count:
        share = Fraction(request.count, listing.entry.available_count)
        lo, hi = lo * share, hi * share
    skew = Fraction(r_tp * t_r - r_tr * t_p, t_p * t_r)
    return (hi + lo) / 2 + (hi - lo) / 2 * skew


def current_bid(request: ResourceRequest, now: int) -> Fraction:
    """Requestor's bid at ``now``; equals ``estimated_bid`` on the request's clock."""
    t_r = request.urgency.deadline_minutes
    return request.budget * Fraction(5 * t_r - 4 * request.remaining(now), 5 * t_r)


class Negotiator:
    """Drives sessions against one blackboard and ledger.

    ``emit`` receives one dict per protocol step, forming the event log.
    """

    def __init__(
        self,
        board: Blackboard,
        ledger: Ledger,
        *,
        revisit_interval: int = REVISIT_MINUTES,
        guard_enabled: bool = True,
        emit: Callable[[dict[str, Any]], None] | None = None,
    ) -> None:
        self.board = board
        self.ledger = ledger
        self.revisit_interval = revisit_interval
        self.guard_enabled = guard_enabled
        self._emit = emit or (lambda rec: None)
        self._ids = itertools.count(1)

    def _log(self, now: int, kind: str, session: NegotiationSession, **data: Any) -> None:
        rec = {"time": now, "kind": kind, "session": session.session_id,
               "requestor": session.request.requestor}
        rec.update(data)
        self._emit(rec)

    def _reselect(self, session: NegotiationSession, now: int) -> None:
        session.state = SessionState.SELECTING
        remaining = session.request.remaining(now)
        version = self.board.class_version(session.request.instance_class)
        if session.board_version != version or not session.shortlist:
            session.shortlist = self.board.select(session.request, remaining=remaining)
            session.board_version = version
        elif remaining <= 0:
            session.shortlist = []
        session.cursor = 0
        session.quoted = None
        if session.shortlist:
            session.state = SessionState.AWAITING_QUOTE
            session.next_wakeup = None
        else:
            self._park(session, now)

    def _park(self, session: NegotiationSession, now: int) -> None:
        session.state = SessionState.WAITING
        session.next_wakeup = now + self.revisit_interval

    def open_session(self, request: ResourceRequest, now: int) -> NegotiationSession:
        if self.guard_enabled and self.ledger.guard(request.requestor) is GuardResult.BLOCKED:
            self._emit({"time": now, "kind": "Refused", "requestor": request.requestor,
                        "reason": "debt"})
            raise DebtBlocked(f"{request.requestor} must clear its debt first")
        session = NegotiationSession(f"s-{next(self._ids):06d}", request)
        self._reselect(session, now)
        self._log(now, "Select", session,
                  shortlist=[o.entry.transaction_id for o in session.shortlist])
        return session

    def quote(self, session: NegotiationSession, now: int) -> Fraction | None:
        """Ask the current offer's bartering session for a price.

        Returns ``None`` when the entry was retired meanwhile; the cursor then
        moves on to the next offer.
        """
        if session.state is not SessionState.AWAITING_QUOTE:
            raise RuntimeError(f"cannot quote in state {session.state.value}")
        offer = session.current
        assert offer is not None
        try:
            listing = self.board.listing(offer.entry.transaction_id)
        except UnknownEntry:
            self._log(now, "Quote", session, transaction_id=offer.entry.transaction_id,
                      price=None)
            self._advance(session, now)
            return None
        price = quote_listing(listing, session.request, now)
        session.quoted = price
        session.state = SessionState.CONFIRMING
        self._log(now, "Quote", session, transaction_id=offer.entry.transaction_id,
                  price=credit_str(price))
        return price

    def would_accept(self, session: NegotiationSession, quoted: Fraction, now: int) -> bool:
        session.bid = current_bid(session.request, now)
        return quoted <= session.bid

    def decide(self, session: NegotiationSession, quoted: Fraction, now: int) -> Decision:
        if session.state is not SessionState.CONFIRMING:
            raise RuntimeError(f"cannot decide in state {session.state.value}")
        if self.would_accept(session, quoted, now):
            self.conclude(session, now)
            return Decision.ACCEPT
        self.reject(session, now)
        return Decision.REJECT

    def reject(self, session: NegotiationSession, now: int) -> None:
        offer = session.current
        bid = session.bid if session.bid is not None else current_bid(session.request, now)
        self._log(now, "Decide", session, transaction_id=offer.entry.transaction_id,
                  decision=Decision.REJECT.value, bid=credit_str(bid))
        self._advance(session, now)

    def _advance(self, session: NegotiationSession, now: int) -> None:
        session.cursor += 1
        session.quoted = None
        session.bid = None
        if session.cursor < len(session.shortlist):
            session.state = SessionState.AWAITING_QUOTE
        else:
            self._park(session, now)

    def lose(self, session: NegotiationSession, now: int) -> None:
        """The session's accepted offer went to a competing requestor."""
        self._log(now, "Outbid", session, transaction_id=session.current.entry.transaction_id)
        self._advance(session, now)

    def conclude(self, session: NegotiationSession, now: int) -> SlaRecord:
        offer = session.current
        price = session.quoted
        assert offer is not None and price is not None
        req = session.request
        tid = offer.entry.transaction_id
        self._log(now, "Decide", session, transaction_id=tid,
                  decision=Decision.ACCEPT.value,
                  bid=credit_str(current_bid(req, now)))
        listing, rest = self.board.take(tid, req.count)
        self._emit({"time": now, "kind": "Retire", "transaction_id": tid})
        if rest is not None:
            self._emit({"time": now, "kind": "Publish", "provider": rest.provider,
                        "entry": rest.to_dict(), "relist_of": tid})
        sla = SlaRecord(
            transaction_id=tid,
            provider=listing.entry.provider,
            requestor=req.requestor,
            resource_type=listing.entry.resource_type,
            count=req.count,
            duration=listing.entry.duration,
            agreed_price=price,
            concluded_at=now,
        )
        self.ledger.settle(sla)
        self._emit({"time": now, "kind": "Settle", "sla": sla.to_dict()})
        session.sla = sla
        session.state = SessionState.SETTLED
        session.next_wakeup = None
        return sla

    def wake(self, session: NegotiationSession, now: int,
             reason: WakeReason = WakeReason.TIMER) -> NegotiationSession:
        if session.state is not SessionState.WAITING:
            return session
        if session.request.remaining(now) <= 0:
            session.state = SessionState.FAILED
            session.next_wakeup = None
            self._log(now, "Expire", session)
            return session
        self._reselect(session, now)
        self._log(now, "Wake", session, reason=WakeReason(reason).value,
                  shortlist=[o.entry.transaction_id for o in session.shortlist])
        return session

    def expire(self, session: NegotiationSession, now: int) -> None:
        if session.done:
            return
        session.state = SessionState.FAILED
        session.next_wakeup = None
        self._log(now, "Expire", session)
