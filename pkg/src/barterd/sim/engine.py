"""Discrete-event runs of one dataset under CRBS or the FCFS baseline.

Time is in integer minutes. Both mechanisms emit a list of JSON-ready log
records (the event log) that includes the ledger journal records, so a log
alone is enough to replay balances and ranks.

CRBS: each request gets a negotiation session. At every instant, sessions
with a fresh shortlist quote and decide; sessions accepting the same entry
at the same instant are resolved by price, then rank, then a seeded draw.
Losers fall through to their next offer within the same instant.

FCFS: a single exchange serves requests in arrival order. Serving a request
takes ``fcfs_base_minutes`` plus ``fcfs_minutes_per_listing`` for every live
listing scanned. The request takes the first listing (in posting order) it
can afford with its full budget, at the listed price. Unmatched requests wait
for new listings until their deadline.
"""

from __future__ import annotations

import json
import math
import random
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable

from ..blackboard import Bid, Blackboard, passes_filter, resolve_conflict
from ..domain import InstanceClass, Urgency, credit_str
from ..ledger import Feedback, FeedbackParameter, InvariantViolation, Ledger
from ..negotiation import (
    DebtBlocked,
    NegotiationSession,
    Negotiator,
    SessionState,
    SlaRecord,
    WakeReason,
)
from .dataset import POINTS, Dataset
from .kernel import EventKind, EventQueue
from .metrics import Mechanism, MetricsReport


@dataclass(frozen=True)
class RunConfig:
    guard_enabled: bool = True
    debt_ceiling: Fraction = Fraction(0)
    revisit_minutes: int = 5
    feedback_delay: int = 60
    fcfs_base_minutes: int = 1
    fcfs_minutes_per_listing: Fraction = Fraction(3, 5)
    until: int | None = None


@dataclass
class RunResult:
    mechanism: Mechanism
    log: list[dict[str, Any]]
    metrics: MetricsReport
    ledger: Ledger
    slas: list[SlaRecord]
    board: Blackboard
    sessions: dict[str, NegotiationSession] = field(default_factory=dict)

    def log_lines(self) -> str:
        return "".join(json.dumps(r, sort_keys=True, ensure_ascii=False) + "\n" for r in self.log)


def price_category(requestor: Urgency, provider: Urgency) -> str:
    """1: requestor more urgent than provider, 2: less urgent, 3: equal."""
    if requestor.deadline_hours < provider.deadline_hours:
        return "category1"
    if requestor.deadline_hours > provider.deadline_hours:
        return "category2"
    return "category3"


class _Run:
    mechanism: Mechanism

    def __init__(self, dataset: Dataset, seed: int | None, config: RunConfig) -> None:
        self.dataset = dataset
        self.seed = dataset.seed if seed is None else seed
        self.config = config
        self.rng = random.Random(self.seed)
        self.queue = EventQueue()
        self.log: list[dict[str, Any]] = []
        self.ledger = Ledger(config.debt_ceiling)
        self.board = Blackboard()
        self.slas: list[SlaRecord] = []
        self.refused = 0
        self.providers = {p.id: p for p in dataset.providers}
        self.requestors = {r.id: r for r in dataset.requestors}
        self._journal_mark = 0

    def emit(self, rec: dict[str, Any]) -> None:
        self._flush_journal(rec.get("time", self.queue.now))
        self.log.append(rec)

    def _flush_journal(self, now: int) -> None:
        # interleave ledger journal records into the event log in order
        journal = self.ledger.journal
        while self._journal_mark < len(journal):
            rec = {"time": now, "kind": "Ledger"}
            rec.update(journal[self._journal_mark])
            self.log.append(rec)
            self._journal_mark += 1

    def _open_accounts(self, with_history: bool) -> None:
        for p in self.dataset.providers:
            self.ledger.open_account(
                p.id, 0, prior_feedback=p.prior_feedback if with_history else ()
            )
        for r in self.dataset.requestors:
            self.ledger.open_account(
                r.id,
                0,
                opening_debt=r.opening_debt,
                prior_feedback=r.prior_feedback if with_history else (),
            )
        self._flush_journal(0)

    def _schedule_arrivals(self) -> None:
        for p in self.dataset.providers:
            self.queue.push(p.advertisement.posted_at, EventKind.PUBLISH, p.id)
        for r in self.dataset.requestors:
            self.queue.push(r.request.issued_at, EventKind.REQUEST, r.id)
            self.queue.push(r.request.deadline, EventKind.EXPIRE, r.id)

    def _record_sla(self, sla: SlaRecord) -> None:
        self.slas.append(sla)

    def execute(self) -> RunResult:
        raise NotImplementedError

    def _metrics(self) -> MetricsReport:
        settled = {s.requestor for s in self.slas}
        available = sum(p.advertisement.bundle.total for p in self.dataset.providers)
        consumed = sum(s.count for s in self.slas)
        by_urgency: dict[Urgency, int] = {}
        requests_by_urgency: dict[Urgency, int] = {}
        for r in self.dataset.requestors:
            u = r.request.urgency
            requests_by_urgency[u] = requests_by_urgency.get(u, 0) + 1
        cats: dict[str, tuple[int, Fraction, Fraction]] = {}
        for s in self.slas:
            req = self.requestors[s.requestor].request
            ad = self.providers[s.provider].advertisement
            by_urgency[req.urgency] = by_urgency.get(req.urgency, 0) + 1
            share = Fraction(s.count, ad.bundle.total)
            mid = (ad.min_price + ad.max_price) * share / 2
            cat = price_category(req.urgency, ad.provider_deadline)
            n, a, m = cats.get(cat, (0, Fraction(0), Fraction(0)))
            cats[cat] = (n + 1, a + s.agreed_price, m + mid)
        return MetricsReport(
            mechanism=self.mechanism,
            seed=self.seed,
            experiment=self.dataset.profile.name,
            providers=len(self.dataset.providers),
            requestors=len(self.dataset.requestors),
            available_resources=available,
            consumed_resources=consumed,
            settled_transactions=len(self.slas),
            satisfied_requests=len(settled),
            refused_requests=self.refused,
            transactions_by_urgency=by_urgency,
            requests_by_urgency=requests_by_urgency,
            price_by_category=cats,
        )

    def _finish(self, sessions: dict[str, NegotiationSession] | None = None) -> RunResult:
        self._flush_journal(self.queue.now)
        self.ledger.check_invariants()
        metrics = self._metrics()
        bound = min(metrics.available_resources, metrics.requestors)
        if metrics.settled_transactions > bound:
            raise InvariantViolation(
                f"{metrics.settled_transactions} settlements exceed possible {bound}"
            )
        self.log.append(
            {
                "time": self.queue.now,
                "kind": "End",
                "mechanism": self.mechanism.value,
                "balances": self.ledger.snapshot(),
            }
        )
        return RunResult(self.mechanism, self.log, metrics, self.ledger, self.slas,
                         self.board, sessions or {})

    def _past_horizon(self) -> bool:
        nxt = self.queue.peek_time()
        return self.config.until is not None and nxt is not None and nxt > self.config.until


class CrbsRun(_Run):
    mechanism = Mechanism.CRBS

    def __init__(self, dataset: Dataset, seed: int | None, config: RunConfig) -> None:
        super().__init__(dataset, seed, config)
        self.negotiator = Negotiator(
            self.board,
            self.ledger,
            revisit_interval=config.revisit_minutes,
            guard_enabled=config.guard_enabled,
            emit=self.emit,
        )
        self.sessions: dict[str, NegotiationSession] = {}
        self.waiting: dict[InstanceClass, dict[str, NegotiationSession]] = {
            c: {} for c in InstanceClass
        }
        self._woken: list[NegotiationSession] = []

    # session bookkeeping

    def _track(self, s: NegotiationSession, now: int) -> None:
        cls = s.request.instance_class
        if s.state is SessionState.WAITING:
            self.waiting[cls][s.request.requestor] = s
            self.queue.push(s.next_wakeup, EventKind.WAKE, (s.request.requestor, s.next_wakeup))
        else:
            self.waiting[cls].pop(s.request.requestor, None)

    def _on_publish(self, entry) -> None:
        # new listings wake every parked session that could use them
        for s in list(self.waiting[entry.resource_type].values()):
            self.waiting[entry.resource_type].pop(s.request.requestor, None)
            self._woken.append(s)

    def _publish(self, pid: str, now: int) -> None:
        ad = self.providers[pid].advertisement
        entry = self.board.publish(ad, self.ledger.rank(pid))
        self.emit({"time": now, "kind": "Publish", "provider": pid, "entry": entry.to_dict()})

    def _request(self, rid: str, now: int) -> None:
        req = self.requestors[rid].request
        self.emit({"time": now, "kind": "Request", "request": req.to_dict()})
        try:
            s = self.negotiator.open_session(req, now)
        except DebtBlocked:
            self.refused += 1
            return
        self.sessions[rid] = s
        self._track(s, now)

    def _wake_parked(self, now: int) -> list[NegotiationSession]:
        active = []
        woken, self._woken = self._woken, []
        for s in woken:
            if s.state is not SessionState.WAITING:
                continue
            self.negotiator.wake(s, now, WakeReason.NEW_PUBLICATION)
            self._track(s, now)
            if s.state is SessionState.AWAITING_QUOTE:
                active.append(s)
        return active

    def _feedback(self, sla: SlaRecord, now: int) -> None:
        for rater, ratee in ((sla.requestor, sla.provider), (sla.provider, sla.requestor)):
            spec = self.providers.get(ratee) or self.requestors[ratee]
            scores = {
                p: spec.quality if self.rng.randrange(4) else self.rng.choice(POINTS)
                for p in FeedbackParameter
            }
            rank = self.ledger.record_feedback(Feedback(sla.transaction_id, rater, ratee, scores))
            if ratee in self.providers:
                self.board.update_rank(ratee, rank)
        self.emit({"time": now, "kind": "Feedback", "transaction_id": sla.transaction_id})

    def _negotiate(self, now: int, active: list[NegotiationSession]) -> None:
        neg = self.negotiator
        while active:
            active.sort(key=lambda s: (s.request.remaining(now), s.request.requestor))
            claims: dict[str, list[NegotiationSession]] = {}
            for s in active:
                while s.state is SessionState.AWAITING_QUOTE:
                    price = neg.quote(s, now)
                    if price is None:
                        continue
                    if neg.would_accept(s, price, now):
                        claims.setdefault(s.current.entry.transaction_id, []).append(s)
                        break
                    neg.reject(s, now)
                if s.state is SessionState.WAITING:
                    self._track(s, now)
            active = []
            for tid, claimants in claims.items():
                if len(claimants) == 1:
                    winner = claimants[0]
                else:
                    bids = [Bid(s.request.requestor, s.quoted, self.ledger.rank(s.request.requestor))
                            for s in claimants]
                    wid = resolve_conflict(bids, self.rng)
                    self.emit({
                        "time": now,
                        "kind": "Conflict",
                        "transaction_id": tid,
                        "bids": [{"requestor": b.requestor, "price": credit_str(b.price),
                                  "rank": credit_str(b.rank)} for b in bids],
                        "winner": wid,
                    })
                    winner = next(s for s in claimants if s.request.requestor == wid)
                sla = neg.conclude(winner, now)
                self._track(winner, now)
                self.slas.append(sla)
                self.queue.push(now + self.config.feedback_delay, EventKind.FEEDBACK, sla)
                for s in claimants:
                    if s is winner:
                        continue
                    neg.lose(s, now)
                    if s.state is SessionState.AWAITING_QUOTE:
                        active.append(s)
                    else:
                        self._track(s, now)
            active.extend(self._wake_parked(now))

    def execute(self) -> RunResult:
        self.board.subscribe(self._on_publish)
        self._open_accounts(with_history=True)
        self._schedule_arrivals()
        while self.queue.peek_time() is not None and not self._past_horizon():
            batch = self.queue.pop_batch()
            now = self.queue.now
            active: list[NegotiationSession] = []
            for ev in batch:
                if ev.kind is EventKind.PUBLISH:
                    self._publish(ev.payload, now)
                elif ev.kind is EventKind.REQUEST:
                    self._request(ev.payload, now)
                    s = self.sessions.get(ev.payload)
                    if s is not None and s.state is SessionState.AWAITING_QUOTE:
                        active.append(s)
                elif ev.kind is EventKind.WAKE:
                    rid, due = ev.payload
                    s = self.sessions[rid]
                    if s.state is SessionState.WAITING and s.next_wakeup == due:
                        self.negotiator.wake(s, now, WakeReason.TIMER)
                        self._track(s, now)
                        if s.state is SessionState.AWAITING_QUOTE:
                            active.append(s)
                elif ev.kind is EventKind.EXPIRE:
                    s = self.sessions.get(ev.payload)
                    if s is not None and not s.done:
                        self.negotiator.expire(s, now)
                        self._track(s, now)
                elif ev.kind is EventKind.FEEDBACK:
                    self._feedback(ev.payload, now)
            active = [s for s in active if s.state is SessionState.AWAITING_QUOTE]
            active.extend(self._wake_parked(now))
            self._negotiate(now, _unique(active))
        return self._finish(self.sessions)


def _unique(sessions: Iterable[NegotiationSession]) -> list[NegotiationSession]:
    seen: set[str] = set()
    out = []
    for s in sessions:
        if s.session_id not in seen:
            seen.add(s.session_id)
            out.append(s)
    return out


class FcfsRun(_Run):
    mechanism = Mechanism.FCFS

    def __init__(self, dataset: Dataset, seed: int | None, config: RunConfig) -> None:
        super().__init__(dataset, seed, config)
        self.fifo: deque[str] = deque()
        self.pending: list[str] = []
        self.busy = False
        self.done: set[str] = set()

    def _service_minutes(self) -> int:
        c = self.config
        return c.fcfs_base_minutes + math.ceil(c.fcfs_minutes_per_listing * len(self.board))

    def _start_next(self, now: int) -> None:
        while self.fifo and not self.busy:
            rid = self.fifo.popleft()
            if rid in self.done:
                continue
            self.busy = True
            self.queue.push(now + self._service_minutes(), EventKind.SERVICE, rid)

    def _try_match(self, rid: str, now: int, entries=None) -> bool:
        req = self.requestors[rid].request
        pool = self.board.entries(req.instance_class) if entries is None else entries
        for entry in pool:
            if passes_filter(req, entry):
                price = entry.price_for(req.count)
                listing, rest = self.board.take(entry.transaction_id, req.count)
                self.emit({"time": now, "kind": "Retire", "transaction_id": entry.transaction_id})
                if rest is not None:
                    self.emit({"time": now, "kind": "Publish", "provider": rest.provider,
                               "entry": _fcfs_entry(rest), "relist_of": entry.transaction_id})
                sla = SlaRecord(entry.transaction_id, entry.provider, rid, entry.resource_type,
                                req.count, entry.duration, price, now)
                self.ledger.settle(sla)
                self.emit({"time": now, "kind": "Settle", "sla": sla.to_dict()})
                self.slas.append(sla)
                self.done.add(rid)
                return True
        return False

    def execute(self) -> RunResult:
        self._open_accounts(with_history=False)
        self._schedule_arrivals()
        while self.queue.peek_time() is not None and not self._past_horizon():
            batch = self.queue.pop_batch()
            now = self.queue.now
            for ev in batch:
                if ev.kind is EventKind.PUBLISH:
                    ad = self.providers[ev.payload].advertisement
                    entry = self.board.publish(ad, 0)
                    self.emit({"time": now, "kind": "Publish", "provider": ev.payload,
                               "entry": _fcfs_entry(entry)})
                    for rid in list(self.pending):
                        if self._try_match(rid, now, [entry]):
                            self.pending.remove(rid)
                            break
                elif ev.kind is EventKind.REQUEST:
                    req = self.requestors[ev.payload].request
                    self.emit({"time": now, "kind": "Request", "request": req.to_dict()})
                    self.fifo.append(ev.payload)
                elif ev.kind is EventKind.SERVICE:
                    rid = ev.payload
                    self.busy = False
                    if rid not in self.done:
                        if self.requestors[rid].request.remaining(now) <= 0:
                            self.done.add(rid)
                            self.emit({"time": now, "kind": "Expire", "requestor": rid})
                        elif not self._try_match(rid, now):
                            self.pending.append(rid)
                            self.emit({"time": now, "kind": "Queued", "requestor": rid})
                elif ev.kind is EventKind.EXPIRE:
                    rid = ev.payload
                    if rid not in self.done:
                        self.done.add(rid)
                        if rid in self.pending:
                            self.pending.remove(rid)
                        self.emit({"time": now, "kind": "Expire", "requestor": rid})
            self._start_next(now)
        return self._finish()


def _fcfs_entry(entry) -> dict[str, Any]:
    d = entry.to_dict()
    del d["provider_rank"]
    return d


def run(
    dataset: Dataset,
    mechanism: Mechanism | str,
    *,
    seed: int | None = None,
    config: RunConfig | None = None,
) -> RunResult:
    if not isinstance(mechanism, Mechanism):
        mechanism = Mechanism(mechanism.upper())
    cls = CrbsRun if mechanism is Mechanism.CRBS else FcfsRun
    return cls(dataset, seed, config or RunConfig()).execute()
