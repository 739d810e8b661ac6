"""Run statistics and CRBS-vs-FCFS comparison."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Sequence

from ..domain import Urgency


class Mechanism(str, Enum):
    CRBS = "CRBS"
    FCFS = "FCFS"


CSV_COLUMNS = (
    "experiment",
    "mechanism",
    "seed",
    "providers",
    "requestors",
    "available_resources",
    "consumed_resources",
    "settled_transactions",
    "satisfied_requests",
    "refused_requests",
    "resource_utilization_rate",
    "request_satisfaction_rate",
    "mean_agreed_price",
    "mean_price_midpoint",
) + tuple(f"tx_{u.value}" for u in Urgency) + tuple(
    f"requests_{u.value}" for u in Urgency
)


@dataclass
class MetricsReport:
    mechanism: Mechanism
    seed: int
    experiment: str
    providers: int
    requestors: int
    available_resources: int
    consumed_resources: int
    settled_transactions: int
    satisfied_requests: int
    refused_requests: int = 0
    transactions_by_urgency: dict[Urgency, int] = field(default_factory=dict)
    requests_by_urgency: dict[Urgency, int] = field(default_factory=dict)
    # category -> (settled count, sum agreed, sum midpoint)
    price_by_category: dict[str, tuple[int, Fraction, Fraction]] = field(default_factory=dict)

    @property
    def resource_utilization_rate(self) -> float:
        if self.available_resources == 0:
            return 0.0
        return self.consumed_resources / self.available_resources

    @property
    def request_satisfaction_rate(self) -> float:
        # no demand at all counts as fully satisfied
        if self.requestors == 0:
            return 1.0
        return self.satisfied_requests / self.requestors

    @property
    def possible_transactions(self) -> int:
        return min(self.available_resources, self.requestors)

    @property
    def mean_price_by_category(self) -> dict[str, dict[str, Any]]:
        out = {}
        for cat, (n, agreed, mid) in sorted(self.price_by_category.items()):
            out[cat] = {
                "transactions": n,
                "mean_agreed_price": float(agreed / n) if n else None,
                "mean_midpoint": float(mid / n) if n else None,
            }
        return out

    def _totals(self) -> tuple[int, Fraction, Fraction]:
        n = sum(v[0] for v in self.price_by_category.values())
        agreed = sum((v[1] for v in self.price_by_category.values()), Fraction(0))
        mid = sum((v[2] for v in self.price_by_category.values()), Fraction(0))
        return n, agreed, mid

    def to_row(self) -> dict[str, Any]:
        n, agreed, mid = self._totals()
        row = {
            "experiment": self.experiment,
            "mechanism": self.mechanism.value,
            "seed": self.seed,
            "providers": self.providers,
            "requestors": self.requestors,
            "available_resources": self.available_resources,
            "consumed_resources": self.consumed_resources,
            "settled_transactions": self.settled_transactions,
            "satisfied_requests": self.satisfied_requests,
            "refused_requests": self.refused_requests,
            "resource_utilization_rate": f"{self.resource_utilization_rate:.6f}",
            "request_satisfaction_rate": f"{self.request_satisfaction_rate:.6f}",
            "mean_agreed_price": f"{float(agreed / n):.6f}" if n else "",
            "mean_price_midpoint": f"{float(mid / n):.6f}" if n else "",
        }
        for u in Urgency:
            row[f"tx_{u.value}"] = self.transactions_by_urgency.get(u, 0)
            row[f"requests_{u.value}"] = self.requests_by_urgency.get(u, 0)
        return row

    def to_dict(self) -> dict[str, Any]:
        d = self.to_row()
        d["resource_utilization_rate"] = self.resource_utilization_rate
        d["request_satisfaction_rate"] = self.request_satisfaction_rate
        d["mean_price_by_category"] = self.mean_price_by_category
        return d


def percentage_difference(a: float, b: float) -> float:
    """Symmetric percentage difference |a - b| / mean(a, b), in percent."""
    if a == b:
        return 0.0
    return abs(a - b) / ((a + b) / 2) * 100


_COMPARED = (
    "available_resources",
    "consumed_resources",
    "resource_utilization_rate",
    "request_satisfaction_rate",
)


def compare(crbs: MetricsReport, fcfs: MetricsReport) -> dict[str, Any]:
    """Absolute and symmetric percentage differences, CRBS minus FCFS."""
    if crbs.seed != fcfs.seed or crbs.experiment != fcfs.experiment:
        raise ValueError(
            f"reports come from different runs: {crbs.experiment}/{crbs.seed} "
            f"vs {fcfs.experiment}/{fcfs.seed}"
        )
    if (crbs.providers, crbs.requestors) != (fcfs.providers, fcfs.requestors):
        raise ValueError("reports come from different datasets")
    out: dict[str, Any] = {"experiment": crbs.experiment, "seed": crbs.seed}
    for name in _COMPARED:
        a = float(getattr(crbs, name))
        b = float(getattr(fcfs, name))
        out[name] = {
            "crbs": a,
            "fcfs": b,
            "difference": a - b,
            "percentage_difference": percentage_difference(a, b),
        }
    return out


def summarize(rows: Iterable[dict[str, Any]]) -> dict[str, dict[str, dict[str, float]]]:
    """Mean utilization and satisfaction per (experiment, mechanism)."""
    acc: dict[tuple[str, str], list[tuple[float, float]]] = {}
    for r in rows:
        acc.setdefault((r["experiment"], r["mechanism"]), []).append(
            (float(r["resource_utilization_rate"]), float(r["request_satisfaction_rate"]))
        )
    out: dict[str, dict[str, dict[str, float]]] = {}
    for (exp, mech), vals in sorted(acc.items()):
        out.setdefault(exp, {})[mech] = {
            "runs": len(vals),
            "resource_utilization_rate": sum(v[0] for v in vals) / len(vals),
            "request_satisfaction_rate": sum(v[1] for v in vals) / len(vals),
        }
    return out


def table(summary: dict[str, dict[str, dict[str, float]]]) -> dict[str, Any]:
    """Per-experiment satisfaction differences and their average.

    ``average_percentage_difference`` is the mean of the per-experiment
    figures; ``difference_of_means`` compares the mean satisfaction rates
    over all experiments instead.
    """
    per_exp = {}
    crbs_rates, fcfs_rates = [], []
    for exp, mechs in summary.items():
        if "CRBS" not in mechs or "FCFS" not in mechs:
            continue
        a = mechs["CRBS"]["request_satisfaction_rate"]
        b = mechs["FCFS"]["request_satisfaction_rate"]
        crbs_rates.append(a)
        fcfs_rates.append(b)
        per_exp[exp] = percentage_difference(a, b)
    average = of_means = None
    if per_exp:
        average = sum(per_exp.values()) / len(per_exp)
        of_means = percentage_difference(
            sum(crbs_rates) / len(crbs_rates), sum(fcfs_rates) / len(fcfs_rates)
        )
    return {
        "percentage_difference": per_exp,
        "average_percentage_difference": average,
        "difference_of_means": of_means,
    }


def write_csv(path: str | Path, reports: Sequence[MetricsReport]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in reports:
            w.writerow(r.to_row())


def read_csv(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
