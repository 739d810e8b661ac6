from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from barterd.blackboard import Blackboard
from barterd.domain import InstanceClass, Urgency
from barterd.ledger import Ledger
from barterd.negotiation import (
    Decision,
    DebtBlocked,
    Negotiator,
    SessionState,
    SlaRecord,
    WakeReason,
    current_bid,
    quote_listing,
)
from barterd.pricing import ClockPair, estimated_bid, transactional_price

from conftest import make_ad, make_request

H24 = 24 * 60


def market(*providers: str, requestors=("r1",), ceiling=0):
    board = Blackboard()
    ledger = Ledger(ceiling)
    for p in providers:
        ledger.open_account(p)
    for r in requestors:
        ledger.open_account(r)
    log: list[dict] = []
    return board, ledger, Negotiator(board, ledger, emit=log.append), log


def test_session_starts_on_highest_utility_offer():
    board, ledger, neg, _ = market("p1", "p2")
    board.publish(make_ad("p1", lo=20, hi=25))
    best = board.publish(make_ad("p2", lo=10, hi=25))
    s = neg.open_session(make_request(budget=30), 0)
    assert s.state is SessionState.AWAITING_QUOTE
    assert s.current.entry.transaction_id == best.transaction_id
    assert [o.utility for o in s.shortlist] == [20, 10]


def test_empty_board_parks_for_revisit():
    _, _, neg, _ = market()
    s = neg.open_session(make_request(), 7)
    assert s.state is SessionState.WAITING
    assert s.next_wakeup == 12


def test_indebted_requestor_is_refused():
    board, ledger, neg, log = market("p1", requestors=())
    ledger.open_account("r1", opening_debt={InstanceClass.LARGE: Fraction(90)})
    board.publish(make_ad("p1"))
    with pytest.raises(DebtBlocked):
        neg.open_session(make_request(), 0)
    assert log[-1]["kind"] == "Refused"


def test_guard_off_lets_debtors_negotiate():
    board, ledger, _, _ = market("p1", requestors=())
    ledger.open_account("r1", opening_debt={InstanceClass.LARGE: Fraction(90)})
    neg = Negotiator(board, ledger, guard_enabled=False)
    assert neg.open_session(make_request(), 0).state is SessionState.WAITING


def test_symmetric_clocks_quote_the_midpoint():
    board, _, neg, _ = market("p1")
    board.publish(make_ad("p1", lo=40, hi=100, deadline=Urgency.H24))
    s = neg.open_session(make_request(budget=200, urgency=Urgency.H24), 0)
    assert neg.quote(s, 12 * 60) == 70


def test_relaxed_provider_and_desperate_requestor_quote_the_ceiling():
    board, _, neg, _ = market("p1")
    board.publish(make_ad("p1", lo=40, hi=100, deadline=Urgency.H24, posted_at=60))
    s = neg.open_session(make_request(budget=200, urgency=Urgency.H1), 59)
    assert neg.quote(s, 60) == 100


def test_quote_on_retired_entry_moves_on():
    board, _, neg, log = market("p1", "p2")
    first = board.publish(make_ad("p1", lo=10))
    board.publish(make_ad("p2", lo=15))
    s = neg.open_session(make_request(budget=30), 0)
    board.retire(first.transaction_id)
    assert neg.quote(s, 1) is None
    assert s.cursor == 1
    assert s.state is SessionState.AWAITING_QUOTE
    assert log[-1]["price"] is None


def _confirming(budget, now=12 * 60):
    board, ledger, neg, log = market("p1")
    board.publish(make_ad("p1", lo=40, hi=100))
    s = neg.open_session(make_request(budget=budget), 0)
    s.state = SessionState.CONFIRMING
    s.quoted = Fraction(55)
    return board, ledger, neg, s, now


def test_accept_when_quote_within_bid():
    board, ledger, neg, s, now = _confirming(100)
    assert current_bid(s.request, now) == 60
    assert neg.decide(s, Fraction(55), now) is Decision.ACCEPT
    assert s.state is SessionState.SETTLED
    assert s.sla.agreed_price == 55
    assert ledger.balance("r1") == -55
    assert ledger.balance("p1") == 55
    assert len(board) == 0


def test_reject_when_bid_too_small():
    _, _, neg, s, now = _confirming(Fraction(250, 3))
    assert current_bid(s.request, now) == 50
    assert neg.decide(s, Fraction(55), now) is Decision.REJECT
    assert s.state is SessionState.WAITING
    assert s.next_wakeup == now + 5


def test_all_three_rejected_parks_for_five_minutes():
    board, _, neg, _ = market("a", "b", "c")
    for p in "abc":
        board.publish(make_ad(p, lo=25, hi=29))
    s = neg.open_session(make_request(budget=30), 0)
    for _ in range(3):
        q = neg.quote(s, 0)
        assert neg.decide(s, q, 0) is Decision.REJECT
    assert s.state is SessionState.WAITING
    assert s.next_wakeup == 5


def test_new_publication_wakes_before_timer():
    board, _, neg, log = market("p1")
    s = neg.open_session(make_request(), 0)
    board.publish(make_ad("p1"))
    neg.wake(s, 2, WakeReason.NEW_PUBLICATION)
    assert s.state is SessionState.AWAITING_QUOTE
    assert log[-1]["reason"] == "new_publication"


def test_timer_on_empty_board_parks_again():
    _, _, neg, _ = market()
    s = neg.open_session(make_request(), 0)
    neg.wake(s, 5)
    assert s.state is SessionState.WAITING
    assert s.next_wakeup == 10


def test_deadline_while_waiting_fails():
    _, _, neg, _ = market()
    s = neg.open_session(make_request(urgency=Urgency.H1), 0)
    neg.wake(s, 60)
    assert s.state is SessionState.FAILED


def test_competing_sessions_fail_over():
    board, _, neg, _ = market("p1", "p2", requestors=("r1", "r2"))
    board.publish(make_ad("p1", lo=10, hi=10))
    board.publish(make_ad("p2", lo=15, hi=15))
    a = neg.open_session(make_request("r1", budget=30, urgency=Urgency.H1), 0)
    b = neg.open_session(make_request("r2", budget=30, urgency=Urgency.H1), 0)
    qa = neg.quote(a, 59)
    neg.decide(a, qa, 59)
    assert a.state is SessionState.SETTLED
    assert neg.quote(b, 59) is None
    assert b.current.entry.provider == "p2"


def test_sla_round_trip():
    sla = SlaRecord("tx-1", "p", "r", InstanceClass.SMALL, 2, make_ad().duration, Fraction(9, 2), 3)
    assert SlaRecord.from_dict(sla.to_dict()) == sla


@given(
    st.sampled_from(list(Urgency)),
    st.sampled_from(list(Urgency)),
    st.integers(0, 600),
    st.integers(0, 600),
    st.integers(0, 2000),
    st.fractions(min_value=0, max_value=500, max_denominator=100),
    st.fractions(min_value=0, max_value=500, max_denominator=100),
)
def test_session_quote_equals_pricing_formula(pu, ru, posted, issued, dt, lo, spread):
    board = Blackboard()
    ad = make_ad(lo=lo, hi=lo + spread, posted_at=posted, deadline=pu)
    board.publish(ad)
    listing = board.listing(board.entries()[0].transaction_id)
    req = make_request(urgency=ru, issued_at=issued)
    now = max(posted, issued) + dt
    t_p = pu.deadline_minutes
    r_tp = max(0, t_p - (now - posted))
    expected = transactional_price(
        t_p, ad.max_price, ad.min_price, r_tp, req.remaining(now),
        requestor_total=ru.deadline_minutes,
    )
    assert quote_listing(listing, req, now) == expected


@given(
    st.sampled_from(list(Urgency)),
    st.integers(0, 2000),
    st.fractions(min_value=0, max_value=1000, max_denominator=100),
)
def test_current_bid_equals_estimated_bid(u, now, budget):
    req = make_request(urgency=u, budget=budget)
    clock = ClockPair(u.deadline_minutes, req.remaining(now))
    assert current_bid(req, now) == estimated_bid(budget, clock)
