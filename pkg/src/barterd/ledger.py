"""Barter-credit accounts, reputation and the debt guard.

Every mutation appends a JSON-ready record to ``Ledger.journal``; feeding
those records to :meth:`Ledger.replay` rebuilds identical state. Balances sum
to zero at all times: opening balances and accepted debt repayments are
booked against the platform reserve account.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import TYPE_CHECKING, Any, Iterable, Mapping

from .domain import (
    Advertisement,
    InstanceClass,
    ParticipantId,
    credit,
    credit_str,
)
from .pricing import instance_value, barter_credits

if TYPE_CHECKING:
    from .negotiation import SlaRecord

RESERVE = "__reserve__"
FEEDBACK_POINTS = frozenset({10, 9, 8, 5, 0})


class LedgerError(Exception):
    pass


class UnknownParticipant(LedgerError, KeyError):
    """The participant has to register before trading."""


class InvalidFeedback(LedgerError, ValueError):
    pass


class InvariantViolation(LedgerError, AssertionError):
    pass


class FeedbackParameter(str, Enum):
    AVAILABILITY = "Availability"
    PERFORMANCE = "Performance"
    RESPONSE_TIME = "ResponseTime"
    SLA_FULFILLMENT = "SlaFulfillment"
    ELASTICITY = "Elasticity"


class Rating(int, Enum):
    EXCELLENT = 10
    VERY_GOOD = 9
    GOOD = 8
    AVERAGE = 5
    POOR = 0


class EntryKind(str, Enum):
    EARN = "Earn"
    SPEND = "Spend"
    DEBT_INCUR = "DebtIncur"
    DEBT_REPAY = "DebtRepay"


class GuardResult(str, Enum):
    ALLOWED = "allowed"
    BLOCKED = "blocked"


@dataclass(frozen=True)
class Feedback:
    transaction_id: str | None
    rater: ParticipantId | None
    ratee: ParticipantId
    scores: Mapping[FeedbackParameter, int]

    def __post_init__(self) -> None:
        scores = {FeedbackParameter(k): v for k, v in dict(self.scores).items()}
        if set(scores) != set(FeedbackParameter):
            raise InvalidFeedback(
                f"feedback must rate exactly {[p.value for p in FeedbackParameter]}"
            )
        bad = {k.value: v for k, v in scores.items() if v not in FEEDBACK_POINTS}
        if bad:
            raise InvalidFeedback(f"illegal point values {bad}")
        object.__setattr__(self, "scores", scores)

    @property
    def mean(self) -> Fraction:
        return Fraction(sum(self.scores.values()), len(self.scores))

    @classmethod
    def uniform(
        cls, transaction_id: str | None, rater: str | None, ratee: str, points: int
    ) -> Feedback:
        return cls(transaction_id, rater, ratee, {p: points for p in FeedbackParameter})

    def to_dict(self) -> dict[str, Any]:
        return {
            "transaction_id": self.transaction_id,
            "rater": self.rater,
            "ratee": self.ratee,
            "scores": {k.value: v for k, v in self.scores.items()},
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> Feedback:
        return cls(d["transaction_id"], d["rater"], d["ratee"], d["scores"])


@dataclass(frozen=True)
class LedgerEntry:
    entry_id: str
    kind: EntryKind
    amount: Fraction
    participant: ParticipantId
    counterparty: ParticipantId
    instance_class: InstanceClass | None
    timestamp: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "entry_id": self.entry_id,
            "kind": self.kind.value,
            "amount": credit_str(self.amount),
            "participant": self.participant,
            "counterparty": self.counterparty,
            "instance_class": self.instance_class.value if self.instance_class else None,
            "timestamp": self.timestamp,
        }


@dataclass
class Account:
    participant: ParticipantId
    joined_at: int = 0
    balance: Fraction = Fraction(0)
    debts: dict[InstanceClass, Fraction] = field(default_factory=dict)
    transactions: list[str] = field(default_factory=list)
    feedback_means: list[Fraction] = field(default_factory=list)

    @property
    def rank(self) -> Fraction:
        if not self.feedback_means:
            return Fraction(0)
        return sum(self.feedback_means, Fraction(0)) / len(self.feedback_means)

    @property
    def total_debt(self) -> Fraction:
        return sum(self.debts.values(), Fraction(0))


@dataclass(frozen=True)
class DemandSnapshot:
    """Live supply and waiting demand per instance class, in instances."""

    supply: Mapping[InstanceClass, int]
    pending: Mapping[InstanceClass, int]

    def is_scarce(self, cls: InstanceClass) -> bool:
        return self.supply.get(cls, 0) < self.pending.get(cls, 0)


@dataclass(frozen=True)
class RepaymentOutcome:
    accepted: bool
    credited: Fraction = Fraction(0)
    required_class: InstanceClass | None = None
    entry: LedgerEntry | None = None


class Ledger:
    def __init__(self, debt_ceiling: Fraction | int = 0) -> None:
        self.debt_ceiling = credit(debt_ceiling)
        self.accounts: dict[ParticipantId, Account] = {RESERVE: Account(RESERVE)}
        self.journal: list[dict[str, Any]] = []
        self._ids = itertools.count(1)
        self._settled: dict[str, tuple[ParticipantId, ParticipantId]] = {}
        self._rated: set[tuple[str, ParticipantId]] = set()
        self._feedback: list[Feedback] = []

    # accounts

    def account(self, participant: ParticipantId) -> Account:
        try:
            return self.accounts[participant]
        except KeyError:
            raise UnknownParticipant(f"{participant} is not registered") from None

    def open_account(
        self,
        participant: ParticipantId,
        joined_at: int = 0,
        *,
        opening_debt: Mapping[InstanceClass, Fraction] | None = None,
        prior_feedback: Iterable[Feedback] = (),
    ) -> Account:
        """Register a participant with zero balance and zero rank.

        ``opening_debt`` and ``prior_feedback`` carry history from before the
        ledger started (used by datasets); opening debt is owed to the reserve.
        """
        if participant in self.accounts:
            raise LedgerError(f"{participant} already registered")
        acct = Account(participant, joined_at)
        self.accounts[participant] = acct
        debts = {InstanceClass(k): credit(v) for k, v in (opening_debt or {}).items() if v}
        prior = list(prior_feedback)
        self.journal.append(
            {
                "record": "open",
                "participant": participant,
                "joined_at": joined_at,
                "opening_debt": {k.value: credit_str(v) for k, v in debts.items()},
                "prior_feedback": [f.to_dict() for f in prior],
            }
        )
        for cls, amount in debts.items():
            if amount < 0:
                raise ValueError("opening debt must be positive")
            acct.balance -= amount
            acct.debts[cls] = acct.debts.get(cls, Fraction(0)) + amount
            self.accounts[RESERVE].balance += amount
        for f in prior:
            if f.ratee != participant:
                raise InvalidFeedback("prior feedback must rate the new participant")
            self._feedback.append(f)
            acct.feedback_means.append(f.mean)
        return acct

    def balance(self, participant: ParticipantId) -> Fraction:
        return self.account(participant).balance

    def rank(self, participant: ParticipantId) -> Fraction:
        return self.account(participant).rank

    # guard

    def guard(self, participant: ParticipantId) -> GuardResult:
        acct = self.account(participant)
        if acct.balance < -self.debt_ceiling:
            return GuardResult.BLOCKED
        return GuardResult.ALLOWED

    # settlement

    def _entry(
        self,
        kind: EntryKind,
        amount: Fraction,
        participant: ParticipantId,
        counterparty: ParticipantId,
        cls: InstanceClass | None,
        timestamp: int,
    ) -> LedgerEntry:
        e = LedgerEntry(f"le-{next(self._ids):06d}", kind, amount, participant, counterparty, cls, timestamp)
        self.account(participant).transactions.append(e.entry_id)
        return e

    def _pay_down(
        self, acct: Account, amount: Fraction, prefer: InstanceClass | None
    ) -> Fraction:
        """Reduce ``acct`` debts by up to ``amount``; same class first, then heaviest."""
        order = sorted(acct.debts, key=lambda c: -c.weight)
        if prefer in acct.debts:
            order.remove(prefer)
            order.insert(0, prefer)
        left = amount
        for cls in order:
            if left <= 0:
                break
            cut = min(left, acct.debts[cls])
            acct.debts[cls] -= cut
            left -= cut
            if acct.debts[cls] == 0:
                del acct.debts[cls]
        return amount - left

    def settle(self, sla: SlaRecord) -> tuple[LedgerEntry, LedgerEntry]:
        provider = self.account(sla.provider)
        requestor = self.account(sla.requestor)
        if sla.transaction_id in self._settled:
            raise LedgerError(f"{sla.transaction_id} already settled")
        price = credit(sla.agreed_price)
        if price < 0:
            raise ValueError("agreed price must be >= 0")
        cls = sla.resource_type
        t = sla.concluded_at
        self.journal.append({"record": "settle", "sla": sla.to_dict()})

        earn = self._entry(EntryKind.EARN, price, provider.participant, requestor.participant, cls, t)
        provider.balance += price
        repaid = self._pay_down(provider, price, cls)
        if repaid:
            self._entry(EntryKind.DEBT_REPAY, repaid, provider.participant, requestor.participant, cls, t)

        spend = self._entry(EntryKind.SPEND, price, requestor.participant, provider.participant, cls, t)
        before = requestor.balance
        requestor.balance -= price
        shortfall = max(Fraction(0), -requestor.balance) - max(Fraction(0), -before)
        if shortfall > 0:
            self._entry(EntryKind.DEBT_INCUR, shortfall, requestor.participant, provider.participant, cls, t)
            requestor.debts[cls] = requestor.debts.get(cls, Fraction(0)) + shortfall

        self._settled[sla.transaction_id] = (provider.participant, requestor.participant)
        return earn, spend

    def accept_repayment(
        self,
        debtor: ParticipantId,
        offered: Advertisement,
        demand: DemandSnapshot,
        *,
        timestamp: int = 0,
    ) -> RepaymentOutcome:
        """Credit a debtor's contributed resources against its debt.

        Contributions must be of a class the debtor owes, unless that class is
        currently scarce. Accepted offers are valued at their barter credits.
        """
        acct = self.account(debtor)
        if not acct.debts:
            raise LedgerError(f"{debtor} has no outstanding debt")
        for cls in offered.bundle.classes:
            if cls not in acct.debts and not demand.is_scarce(cls):
                required = max(acct.debts, key=lambda c: (acct.debts[c], c.weight))
                self.journal.append(
                    {
                        "record": "repay_rejected",
                        "participant": debtor,
                        "offered": offered.to_dict(),
                        "required_class": required.value,
                        "timestamp": timestamp,
                    }
                )
                return RepaymentOutcome(False, required_class=required)
        amount = barter_credits(instance_value(offered.bundle), offered.duration)
        prefer = next((c for c in offered.bundle.classes if c in acct.debts), None)
        self.journal.append(
            {
                "record": "repay",
                "participant": debtor,
                "offered": offered.to_dict(),
                "amount": credit_str(amount),
                "timestamp": timestamp,
            }
        )
        return RepaymentOutcome(True, amount, entry=self._repay(acct, amount, prefer, timestamp))

    def _repay(
        self, acct: Account, amount: Fraction, prefer: InstanceClass | None, timestamp: int
    ) -> LedgerEntry:
        acct.balance += amount
        self.accounts[RESERVE].balance -= amount
        self._pay_down(acct, amount, prefer)
        return self._entry(EntryKind.DEBT_REPAY, amount, acct.participant, RESERVE, prefer, timestamp)

    # reputation

    def record_feedback(self, f: Feedback) -> Fraction:
        if f.transaction_id not in self._settled:
            raise InvalidFeedback(f"transaction {f.transaction_id} is not settled")
        parties = self._settled[f.transaction_id]
        if f.rater not in parties or f.ratee not in parties or f.rater == f.ratee:
            raise InvalidFeedback("feedback must come from the counterparty of the transaction")
        key = (f.transaction_id, f.rater)
        if key in self._rated:
            raise InvalidFeedback(f"{f.rater} already rated {f.transaction_id}")
        self._rated.add(key)
        self._feedback.append(f)
        acct = self.account(f.ratee)
        acct.feedback_means.append(f.mean)
        self.journal.append({"record": "feedback", "feedback": f.to_dict()})
        return acct.rank

    def recomputed_rank(self, participant: ParticipantId) -> Fraction:
        means = [f.mean for f in self._feedback if f.ratee == participant]
        return sum(means, Fraction(0)) / len(means) if means else Fraction(0)

    # checks and persistence

    @property
    def outstanding_debt(self) -> Fraction:
        return sum((a.total_debt for a in self.accounts.values()), Fraction(0))

    def check_invariants(self) -> None:
        total = sum((a.balance for a in self.accounts.values()), Fraction(0))
        if total != 0:
            raise InvariantViolation(f"balances sum to {total}, expected 0")
        for a in self.accounts.values():
            if a.participant == RESERVE:
                continue
            if a.total_debt != max(Fraction(0), -a.balance):
                raise InvariantViolation(
                    f"{a.participant}: debt {a.total_debt} does not match balance {a.balance}"
                )
            if a.rank != self.recomputed_rank(a.participant):
                raise InvariantViolation(f"{a.participant}: stored rank differs from history")
        holdings = sum((max(Fraction(0), a.balance) for a in self.accounts.values()
                        if a.participant != RESERVE), Fraction(0))
        reserve = self.accounts[RESERVE].balance
        if holdings + reserve - self.outstanding_debt != 0:
            raise InvariantViolation("credit holdings do not cover outstanding debt")

    def snapshot(self) -> dict[str, dict[str, Any]]:
        return {
            pid: {
                "balance": credit_str(a.balance),
                "rank": credit_str(a.rank),
                "debts": {c.value: credit_str(v) for c, v in sorted(a.debts.items(), key=lambda kv: kv[0].weight)},
            }
            for pid, a in sorted(self.accounts.items())
        }

    @classmethod
    def replay(cls, records: Iterable[Mapping[str, Any]], debt_ceiling: Fraction | int = 0) -> Ledger:
        """Rebuild a ledger from journal records; other record kinds are skipped."""
        from .negotiation import SlaRecord

        ledger = cls(debt_ceiling)
        for rec in records:
            kind = rec.get("record")
            if kind == "open":
                ledger.open_account(
                    rec["participant"],
                    rec.get("joined_at", 0),
                    opening_debt={InstanceClass(k): credit(v) for k, v in rec["opening_debt"].items()},
                    prior_feedback=[Feedback.from_dict(f) for f in rec["prior_feedback"]],
                )
            elif kind == "settle":
                ledger.settle(SlaRecord.from_dict(rec["sla"]))
            elif kind == "feedback":
                ledger.record_feedback(Feedback.from_dict(rec["feedback"]))
            elif kind == "repay":
                acct = ledger.account(rec["participant"])
                offered = Advertisement.from_dict(rec["offered"])
                prefer = next((c for c in offered.bundle.classes if c in acct.debts), None)
                ledger.journal.append(dict(rec))
                ledger._repay(acct, credit(rec["amount"]), prefer, rec.get("timestamp", 0))
            elif kind == "repay_rejected":
                ledger.journal.append(dict(rec))
        return ledger
