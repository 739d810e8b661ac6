"""Seeded workload generation.

Every draw comes from one ``random.Random(seed)`` in a fixed order, so a
(class, seed, profile) triple always yields the same dataset. Distributions:

* instance class, sharing duration: weighted choice per the profile
* provider floor price: suggested barter credits x uniform integer percent in
  ``min_price_pct``; ceiling: floor x uniform percent in ``max_markup_pct``
* pairing: when ``paired`` is set, the first min(providers, requestors)
  requestors each want the class and duration one provider offers, so every
  request has at least one compatible listing; the rest are drawn freely
* requestor budget: barter credits of the requested bundle x uniform integer
  percent in ``budget_pct`` (default 100..200)
* urgency levels: uniform over the profile's levels
* post and request times: uniform integer minutes within their windows
* reputation history: 0..``max_prior_feedback`` uniform feedback records
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping

from ..domain import (
    Advertisement,
    InstanceClass,
    ResourceBundle,
    ResourceRequest,
    SharingDuration,
    Urgency,
    credit,
    credit_str,
)
from ..ledger import FEEDBACK_POINTS, Feedback, FeedbackParameter
from ..pricing import suggested_price

POINTS = tuple(sorted(FEEDBACK_POINTS, reverse=True))


class DatasetClass(str, Enum):
    SMALL = "Small"
    MEDIUM = "Medium"
    LARGE = "Large"

    @property
    def cap(self) -> int:
        return {"Small": 25, "Medium": 50, "Large": 100}[self.value]


@dataclass(frozen=True)
class Profile:
    name: str
    providers: int
    requestors: int
    class_weights: tuple[int, ...] = (1, 1, 1, 1, 1)
    ad_duration_weights: tuple[int, ...] = (4, 3, 2, 1, 1)
    request_duration_weights: tuple[int, ...] = (4, 3, 2, 1, 1)
    min_price_pct: tuple[int, int] = (70, 100)
    max_markup_pct: tuple[int, int] = (110, 150)
    budget_pct: tuple[int, int] = (100, 200)
    requestor_urgencies: tuple[Urgency, ...] = tuple(Urgency)
    provider_urgencies: tuple[Urgency, ...] = tuple(Urgency)
    post_window: int = 240
    request_window: int = 240
    regions: tuple[str, ...] = ("eu-west", "us-east", "ap-south")
    region_preference_pct: int = 10
    max_prior_feedback: int = 3
    newcomer_pct: int = 20
    paired: bool = True

    def to_dict(self) -> dict[str, Any]:
        d = self.__dict__.copy()
        d["requestor_urgencies"] = [u.value for u in self.requestor_urgencies]
        d["provider_urgencies"] = [u.value for u in self.provider_urgencies]
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> Profile:
        kw = dict(d)
        for k in ("requestor_urgencies", "provider_urgencies"):
            if k in kw:
                kw[k] = tuple(Urgency(u) for u in kw[k])
        for k, v in kw.items():
            if isinstance(v, list):
                kw[k] = tuple(v)
        return cls(**kw)


def _price_category(name: str, requestor: Urgency, provider: Urgency) -> Profile:
    return Profile(
        name=name,
        providers=100,
        requestors=100,
        requestor_urgencies=(requestor,),
        provider_urgencies=(provider,),
        post_window=0,
        request_window=0,
        region_preference_pct=0,
        budget_pct=(200, 300),
    )


PROFILES: dict[str, Profile] = {
    "exp1": Profile("exp1", providers=100, requestors=50),
    "exp2": Profile("exp2", providers=50, requestors=100),
    "exp3": Profile("exp3", providers=100, requestors=100),
    "freerider": Profile("freerider", providers=100, requestors=100),
    "pricecat1": _price_category("pricecat1", Urgency.H3, Urgency.H24),
    "pricecat2": _price_category("pricecat2", Urgency.H24, Urgency.H3),
    "pricecat3": _price_category("pricecat3", Urgency.H12, Urgency.H12),
}


@dataclass(frozen=True)
class ProviderSpec:
    id: str
    advertisement: Advertisement
    prior_feedback: tuple[Feedback, ...] = ()
    quality: int = 10

    @property
    def rank(self) -> Fraction:
        if not self.prior_feedback:
            return Fraction(0)
        return sum((f.mean for f in self.prior_feedback), Fraction(0)) / len(self.prior_feedback)

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "advertisement": self.advertisement.to_dict(),
            "prior_feedback": [f.to_dict() for f in self.prior_feedback],
            "quality": self.quality,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> ProviderSpec:
        return cls(
            d["id"],
            Advertisement.from_dict(d["advertisement"]),
            tuple(Feedback.from_dict(f) for f in d.get("prior_feedback", ())),
            int(d.get("quality", 10)),
        )


@dataclass(frozen=True)
class RequestorSpec:
    id: str
    request: ResourceRequest
    prior_feedback: tuple[Feedback, ...] = ()
    quality: int = 10
    opening_debt: Mapping[InstanceClass, Fraction] = field(default_factory=dict)
    free_rider: bool = False

    @property
    def rank(self) -> Fraction:
        if not self.prior_feedback:
            return Fraction(0)
        return sum((f.mean for f in self.prior_feedback), Fraction(0)) / len(self.prior_feedback)

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "request": self.request.to_dict(),
            "prior_feedback": [f.to_dict() for f in self.prior_feedback],
            "quality": self.quality,
            "opening_debt": {c.value: credit_str(v) for c, v in self.opening_debt.items()},
            "free_rider": self.free_rider,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> RequestorSpec:
        return cls(
            d["id"],
            ResourceRequest.from_dict(d["request"]),
            tuple(Feedback.from_dict(f) for f in d.get("prior_feedback", ())),
            int(d.get("quality", 10)),
            {InstanceClass(k): credit(v) for k, v in d.get("opening_debt", {}).items()},
            bool(d.get("free_rider", False)),
        )


@dataclass(frozen=True)
class Dataset:
    size_class: DatasetClass
    profile: Profile
    seed: int
    providers: tuple[ProviderSpec, ...]
    requestors: tuple[RequestorSpec, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "size_class": self.size_class.value,
            "profile": self.profile.to_dict(),
            "seed": self.seed,
            "providers": [p.to_dict() for p in self.providers],
            "requestors": [r.to_dict() for r in self.requestors],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> Dataset:
        ds = cls(
            DatasetClass(d["size_class"]),
            Profile.from_dict(d["profile"]),
            int(d["seed"]),
            tuple(ProviderSpec.from_dict(p) for p in d["providers"]),
            tuple(RequestorSpec.from_dict(r) for r in d["requestors"]),
        )
        _check_caps(ds.size_class, len(ds.providers), len(ds.requestors))
        return ds

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True, ensure_ascii=False) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> Dataset:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _check_caps(size_class: DatasetClass, providers: int, requestors: int) -> None:
    if max(providers, requestors) > size_class.cap:
        raise ValueError(
            f"{size_class.value} datasets allow at most {size_class.cap} providers "
            f"and {size_class.cap} requestors; got {providers} and {requestors}"
        )
    if providers < 0 or requestors < 0:
        raise ValueError("participant counts must be non-negative")


def _pct(rng: random.Random, bounds: tuple[int, int]) -> Fraction:
    lo, hi = bounds
    return Fraction(rng.randint(lo, hi), 100)


def _history(rng: random.Random, ratee: str, profile: Profile) -> tuple[Feedback, ...]:
    if rng.randrange(100) < profile.newcomer_pct:
        return ()
    n = rng.randint(1, profile.max_prior_feedback)
    return tuple(
        Feedback(None, None, ratee, {p: rng.choice(POINTS) for p in FeedbackParameter})
        for _ in range(n)
    )


def generate(
    size_class: DatasetClass | str, seed: int, profile: Profile | str
) -> Dataset:
    size_class = DatasetClass(size_class)
    if isinstance(profile, str):
        try:
            profile = PROFILES[profile.lower()]
        except KeyError:
            raise ValueError(f"unknown profile {profile!r}; known: {sorted(PROFILES)}") from None
    _check_caps(size_class, profile.providers, profile.requestors)
    rng = random.Random(seed)
    classes = list(InstanceClass)
    durations = list(SharingDuration)

    def kind(weights: tuple[int, ...]) -> tuple[InstanceClass, SharingDuration]:
        cls = rng.choices(classes, weights=profile.class_weights)[0]
        return cls, rng.choices(durations, weights=weights)[0]

    ad_kinds = [kind(profile.ad_duration_weights) for _ in range(profile.providers)]
    req_kinds = [kind(profile.request_duration_weights) for _ in range(profile.requestors)]
    if profile.paired:
        n = min(profile.providers, profile.requestors)
        matches = rng.sample(range(profile.providers), n)
        for i, j in enumerate(matches):
            req_kinds[i] = ad_kinds[j]
        rng.shuffle(req_kinds)

    providers = []
    for i, (cls, dur) in enumerate(ad_kinds):
        pid = f"p{i:03d}"
        bundle = ResourceBundle.single(cls, 1)
        floor = suggested_price(bundle, dur) * _pct(rng, profile.min_price_pct)
        ceiling = floor * _pct(rng, profile.max_markup_pct)
        ad = Advertisement(
            provider=pid,
            bundle=bundle,
            min_price=floor,
            max_price=ceiling,
            region=rng.choice(profile.regions),
            duration=dur,
            posted_at=rng.randint(0, profile.post_window),
            provider_deadline=rng.choice(profile.provider_urgencies),
        )
        providers.append(
            ProviderSpec(pid, ad, _history(rng, pid, profile), rng.choice(POINTS[:3]))
        )

    requestors = []
    for i, (cls, dur) in enumerate(req_kinds):
        rid = f"r{i:03d}"
        value = suggested_price(ResourceBundle.single(cls, 1), dur)
        region = None
        if rng.randrange(100) < profile.region_preference_pct:
            region = rng.choice(profile.regions)
        req = ResourceRequest(
            requestor=rid,
            instance_class=cls,
            count=1,
            duration=dur,
            budget=value * _pct(rng, profile.budget_pct),
            urgency=rng.choice(profile.requestor_urgencies),
            preferred_region=region,
            issued_at=rng.randint(0, profile.request_window),
        )
        requestors.append(
            RequestorSpec(rid, req, _history(rng, rid, profile), rng.choice(POINTS[:3]))
        )
    return Dataset(size_class, profile, seed, tuple(providers), tuple(requestors))


def inject_free_riders(
    dataset: Dataset, count: int, seed: int, *, debt_multiple: int = 10
) -> Dataset:
    """Mark ``count`` random requestors as never-repaying debtors.

    Each carries opening debt of ``debt_multiple`` times its request's budget,
    in the class it requests, which puts it beyond any modest debt ceiling.
    """
    if not 0 <= count <= len(dataset.requestors):
        raise ValueError(f"cannot inject {count} free-riders into {len(dataset.requestors)} requestors")
    if count == 0:
        return dataset
    rng = random.Random(seed)
    chosen = set(rng.sample(range(len(dataset.requestors)), count))
    out = []
    for i, r in enumerate(dataset.requestors):
        if i in chosen:
            debt = max(r.request.budget, Fraction(1)) * debt_multiple
            r = replace(r, opening_debt={r.request.instance_class: debt}, free_rider=True)
        out.append(r)
    return replace(dataset, requestors=tuple(out))


def permute_ranks(dataset: Dataset, seed: int) -> Dataset:
    """Shuffle reputation histories among providers and among requestors."""
    rng = random.Random(seed)
    p_hist = [p.prior_feedback for p in dataset.providers]
    r_hist = [r.prior_feedback for r in dataset.requestors]
    rng.shuffle(p_hist)
    rng.shuffle(r_hist)

    def rehome(hist: tuple[Feedback, ...], owner: str) -> tuple[Feedback, ...]:
        return tuple(Feedback(None, None, owner, f.scores) for f in hist)

    providers = tuple(replace(p, prior_feedback=rehome(h, p.id)) for p, h in zip(dataset.providers, p_hist))
    requestors = tuple(replace(r, prior_feedback=rehome(h, r.id)) for r, h in zip(dataset.requestors, r_hist))
    return replace(dataset, providers=providers, requestors=requestors)
