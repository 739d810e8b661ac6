"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

from __future__ import annotations

import random
import time
from collections import Counter
from fractions import Fraction

import pytest

from barterd.blackboard import Bid, BlackboardEntry, resolve_conflict, select
from barterd.domain import InstanceClass, ResourceBundle, SharingDuration
from barterd.ledger import RESERVE, Ledger
from barterd.pricing import ClockPair, barter_credits, budget_fraction, instance_value, transactional_price
from barterd.sim import Mechanism, RunConfig, generate, inject_free_riders, run
from barterd.sim.metrics import percentage_difference

from conftest import make_request
from oracles import brute_force_select

TABLE6 = {"exp1": (0.45, 0.90), "exp2": (0.84, 0.42), "exp3": (0.89, 0.89)}
SEEDS = range(1, 31)


@pytest.fixture
def verdict(capsys):
    def say(n: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
    return say


def test_criterion_01_barter_credits(verdict):
    value = instance_value(ResourceBundle.single(InstanceClass.MEDIUM, 10))
    credits = barter_credits(value, SharingDuration.THREE_WEEKS)
    ok = value == 30 and credits == 90 and isinstance(credits, Fraction)
    verdict(1, ok, f"instance value {value}, credits {credits}")
    assert ok


def test_criterion_02_budget_fraction(verdict):
    ok = budget_fraction(ClockPair(24, 24)) == Fraction(1, 5)
    ok &= budget_fraction(ClockPair(24, 0)) == 1
    points = 0
    for total in range(1, 41):
        prev = None
        for k in range(24, -1, -1):
            r = Fraction(total * k, 24)
            f = budget_fraction(ClockPair(total, r))
            ok &= f == Fraction(20 + (80 - 80 * r / total), 100)
            if prev is not None:
                ok &= f > prev
            prev = f
            points += 1
    ok &= points >= 1000
    verdict(2, ok, f"boundaries exact, {points} grid points closed-form and monotone")
    assert ok


def test_criterion_03_transactional_price(verdict):
    start = time.perf_counter()
    t, hi, lo = 99, Fraction(100), Fraction(40)
    ok = transactional_price(t, hi, lo, Fraction(t, 2), Fraction(t, 2)) == (hi + lo) / 2
    ok &= transactional_price(t, hi, lo, t, 0) == hi
    ok &= transactional_price(t, hi, lo, 0, t) == lo
    for r_tp in range(100):
        for r_tr in range(100):
            p = transactional_price(t, hi, lo, r_tp, r_tr)
            ok &= lo <= p <= hi
    elapsed = time.perf_counter() - start
    ok &= elapsed < 1
    verdict(3, ok, f"midpoint and bounds exact, 100x100 grid contained, {elapsed:.2f}s")
    assert ok


def test_criterion_04_conflict_resolution(verdict):
    rng = random.Random(0)
    F = Fraction
    cases = [
        ([Bid("a", F(50), F(5)), Bid("b", F(60), F(5))], "b"),  # same rank, different price
        ([Bid("a", F(60), F(3)), Bid("b", F(60), F(7))], "b"),  # different rank, same price
        ([Bid("a", F(70), F(2)), Bid("b", F(60), F(9))], "a"),  # both differ
        ([Bid("a", F(60), F(3)), Bid("b", F(60), F(7)), Bid("c", F(50), F(9))], "b"),  # max-price tie
    ]
    ok = all(resolve_conflict(bids, rng) == want for bids, want in cases)
    tie = [Bid("a", F(50), F(5)), Bid("b", F(50), F(5))]
    ok &= len({resolve_conflict(tie, random.Random(s)) for s in [42] * 5}) == 1
    draws = random.Random(2024)
    wins = Counter(resolve_conflict(tie, draws) for _ in range(10_000))
    share = wins["a"] / 10_000
    ok &= abs(share - 0.5) <= 0.02 and abs(wins["b"] / 10_000 - 0.5) <= 0.02
    verdict(4, ok, f"scripted winners correct, tie split a={share:.3f} over 10000 trials")
    assert ok


def test_criterion_05_free_riders(verdict):
    ds = inject_free_riders(generate("Large", 7, "freerider"), 10, 7)
    riders = {r.id for r in ds.requestors if r.free_rider}
    on = run(ds, Mechanism.CRBS, config=RunConfig(guard_enabled=True))
    off = run(ds, Mechanism.CRBS, config=RunConfig(guard_enabled=False))
    on_riders = sum(s.requestor in riders for s in on.slas)
    off_riders = sum(s.requestor in riders for s in off.slas)
    ok = on_riders == 0 and off_riders > 0 and len(on.slas) <= len(off.slas)
    verdict(5, ok, f"free-rider settlements guard on {on_riders}, off {off_riders}; "
                   f"totals {len(on.slas)} <= {len(off.slas)}")
    assert ok


@pytest.fixture(scope="module")
def table6_runs():
    start = time.perf_counter()
    results = {}
    for exp in TABLE6:
        for seed in SEEDS:
            ds = generate("Large", seed, exp)
            for mech in Mechanism:
                results[exp, seed, mech] = run(ds, mech)
    return results, time.perf_counter() - start


def test_criterion_06_table6_direction(verdict, table6_runs):
    results, elapsed = table6_runs
    ok = elapsed < 120
    parts = []
    diffs = []
    for exp, (util_ref, sat_ref) in TABLE6.items():
        def mean(mech, attr):
            vals = [getattr(results[exp, s, mech].metrics, attr) for s in SEEDS]
            return sum(vals) / len(vals)

        cu, cs = mean(Mechanism.CRBS, "resource_utilization_rate"), mean(Mechanism.CRBS, "request_satisfaction_rate")
        fs = mean(Mechanism.FCFS, "request_satisfaction_rate")
        ok &= cs > fs
        ok &= abs(cu - util_ref) <= 0.15 and abs(cs - sat_ref) <= 0.15
        diffs.append(percentage_difference(cs, fs))
        parts.append(f"{exp} CRBS {cu:.2f}/{cs:.2f} FCFS sat {fs:.2f}")
    avg = sum(diffs) / len(diffs)
    ok &= 35 <= avg <= 65
    verdict(6, ok, "; ".join(parts) + f"; avg diff {avg:.1f}%; {elapsed:.0f}s")
    assert ok


def test_criterion_07_price_dynamics(verdict):
    sums = {}
    for profile, cat in (("pricecat1", "category1"), ("pricecat2", "category2"), ("pricecat3", "category3")):
        n, agreed, mid = 0, Fraction(0), Fraction(0)
        for seed in (1, 2):
            m = run(generate("Large", seed, profile), Mechanism.CRBS).metrics
            c, a, md = m.price_by_category.get(cat, (0, Fraction(0), Fraction(0)))
            n, agreed, mid = n + c, agreed + a, mid + md
        sums[cat] = (n, agreed / n, mid / n)
    (n1, a1, m1), (n2, a2, m2), (n3, a3, m3) = sums["category1"], sums["category2"], sums["category3"]
    ok = min(n1, n2, n3) >= 100 and a1 > m1 and a2 < m2 and abs(a3 - m3) <= m3 / 100
    verdict(7, ok, f"agreed/midpoint cat1 {float(a1 / m1):.3f} (n={n1}), "
                   f"cat2 {float(a2 / m2):.3f} (n={n2}), cat3 {float(a3 / m3):.3f} (n={n3})")
    assert ok


def _random_board(rng: random.Random) -> tuple:
    entries = [
        BlackboardEntry(
            transaction_id=f"tx-{i:06d}",
            provider=f"p{rng.randrange(10)}",
            resource_type=rng.choice(list(InstanceClass)),
            available_count=rng.randint(1, 4),
            region=rng.choice(["eu", "us"]),
            price=Fraction(rng.randint(0, 240), 4),
            duration=rng.choice(list(SharingDuration)),
            provider_rank=rng.choice([Fraction(0), Fraction(5), Fraction(43, 5), Fraction(10)]),
            negotiator_ref=f"ba:tx-{i:06d}",
        )
        for i in range(rng.randint(0, 50))
    ]
    req = make_request(
        cls=rng.choice(list(InstanceClass)),
        count=rng.randint(1, 3),
        budget=Fraction(rng.randint(0, 240), 4),
        duration=rng.choice(list(SharingDuration)),
        region=rng.choice([None, "eu", "us"]),
    )
    return req, entries


def test_criterion_08_select_oracle(verdict):
    rng = random.Random(8)
    mismatches = nonempty = 0
    for _ in range(1000):
        req, entries = _random_board(rng)
        got = [(o.entry.transaction_id, o.utility) for o in select(req, entries)]
        want = brute_force_select(req, entries)
        mismatches += got != want
        nonempty += bool(want)
    ok = mismatches == 0
    verdict(8, ok, f"1000 boards, {mismatches} mismatches, {nonempty} with non-empty shortlists")
    assert ok


def test_criterion_09_conservation_and_replay(verdict, table6_runs):
    results, _ = table6_runs
    bad = []
    for key, res in results.items():
        accounts = res.ledger.accounts.values()
        total = sum((a.balance for a in accounts), Fraction(0))
        holdings = sum((max(Fraction(0), a.balance) for a in accounts), Fraction(0))
        debt = res.ledger.outstanding_debt
        replayed = Ledger.replay(r for r in res.log if r["kind"] == "Ledger")
        same = (
            replayed.snapshot() == res.ledger.snapshot() == res.log[-1]["balances"]
            and all(replayed.rank(p) == res.ledger.rank(p) for p in res.ledger.accounts)
        )
        per_account = all(a.total_debt == max(0, -a.balance) for a in accounts if a.participant != RESERVE)
        if total != 0 or holdings - debt != 0 or not same or not per_account:
            bad.append(key)
    ok = not bad
    verdict(9, ok, f"{len(results)} runs: balances sum to 0, holdings minus debt is 0, "
                   f"replay identical; failures {len(bad)}")
    assert ok


def test_criterion_10_determinism(verdict):
    ok = True
    checked = 0
    for exp in ("exp1", "exp2", "freerider"):
        ds = generate("Large", 5, exp)
        if exp == "freerider":
            ds = inject_free_riders(ds, 10, 5)
        for mech in Mechanism:
            a = run(ds, mech, seed=9).log_lines().encode()
            b = run(ds, mech, seed=9).log_lines().encode()
            ok &= a == b
            checked += 1
    verdict(10, ok, f"{checked} (dataset, seed, mechanism) triples byte-identical on rerun")
    assert ok
