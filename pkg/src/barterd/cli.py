"""barterd command line: datasets, experiment runs, reports and spot checks."""

from __future__ import annotations

import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

import click

from . import __version__
from .domain import InstanceClass, ResourceBundle, SharingDuration, credit, credit_str
from .ledger import InvariantViolation, Ledger
from .pricing import (
    ClockPair,
    barter_credits,
    budget_fraction,
    estimated_bid,
    instance_value,
    transactional_price,
)
from .sim import (
    PROFILES,
    Dataset,
    DatasetClass,
    Mechanism,
    Profile,
    RunConfig,
    generate,
    inject_free_riders,
    run,
)
from .sim.metrics import MetricsReport, compare, read_csv, summarize, table, write_csv

SEED_ENV = "BARTERD_SEED"


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 1
    try:
        return int(raw)
    except ValueError:
        raise click.UsageError(f"{SEED_ENV}={raw!r} is not an integer") from None


def parse_seeds(text: str) -> list[int]:
    """Parse ``"1..30"``, ``"1,4,9"`` or mixtures like ``"1..3,10"``."""
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = (int(x) for x in part.split("..", 1))
            if hi < lo:
                raise ValueError(f"empty seed range {part!r}")
            seeds.extend(range(lo, hi + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise ValueError("at least one seed is required")
    return seeds


def parse_mechanisms(text: str) -> list[Mechanism]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if part:
            try:
                m = Mechanism(part.upper())
            except ValueError:
                raise ValueError(f"unknown mechanism {part!r}; use crbs and/or fcfs") from None
            if m not in out:
                out.append(m)
    if not out:
        raise ValueError("at least one mechanism is required")
    return out


@dataclass
class ExperimentConfig:
    profile: str
    seeds: list[int]
    output_dir: Path
    mechanisms: list[Mechanism]
    guard_enabled: bool = True
    debt_ceiling: Fraction = Fraction(0)
    size: DatasetClass = DatasetClass.LARGE
    free_riders: int = 0
    jobs: int = 1
    custom_profile: dict[str, Any] | None = None
    run_options: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if not self.mechanisms:
            raise ValueError("at least one mechanism is required")
        if self.profile == "custom" and not self.custom_profile:
            raise ValueError("profile 'custom' needs a 'custom_profile' table in the config file")
        if self.profile != "custom" and self.profile not in PROFILES:
            raise ValueError(f"unknown profile {self.profile!r}")

    def resolve_profile(self) -> Profile:
        if self.profile == "custom":
            d = {"name": "custom", **self.custom_profile}
            return Profile.from_dict(d)
        return PROFILES[self.profile]

    def run_config(self) -> RunConfig:
        opts = dict(self.run_options)
        if "fcfs_minutes_per_listing" in opts:
            opts["fcfs_minutes_per_listing"] = credit(opts["fcfs_minutes_per_listing"])
        return RunConfig(guard_enabled=self.guard_enabled, debt_ceiling=self.debt_ceiling, **opts)

    def to_dict(self) -> dict[str, Any]:
        return {
            "profile": self.profile,
            "seeds": self.seeds,
            "output_dir": str(self.output_dir),
            "mechanisms": [m.value for m in self.mechanisms],
            "guard_enabled": self.guard_enabled,
            "debt_ceiling": credit_str(self.debt_ceiling),
            "size": self.size.value,
            "free_riders": self.free_riders,
            "custom_profile": self.custom_profile,
            "run_options": self.run_options,
        }


def _build_dataset(profile: Profile, size: DatasetClass, seed: int, free_riders: int) -> Dataset:
    ds = generate(size, seed, profile)
    if free_riders:
        ds = inject_free_riders(ds, free_riders, seed)
    return ds


def _run_seed(cfg: ExperimentConfig, seed: int) -> list[MetricsReport]:
    """Run every mechanism for one seed and write its artifacts."""
    profile = cfg.resolve_profile()
    ds = _build_dataset(profile, cfg.size, seed, cfg.free_riders)
    stem = f"{cfg.profile}-{seed:04d}"
    ds.save(cfg.output_dir / "datasets" / f"{stem}.json")
    rows = []
    for mech in cfg.mechanisms:
        result = run(ds, mech, seed=seed, config=cfg.run_config())
        log_path = cfg.output_dir / "logs" / f"{stem}-{mech.value.lower()}.ndjson"
        log_path.write_text(result.log_lines(), encoding="utf-8")
        result.metrics.experiment = cfg.profile
        rows.append(result.metrics)
    return rows


def render_summary(rows: Sequence[dict[str, Any]]) -> str:
    """Plain-text table of mean rates per experiment and mechanism."""
    summary = summarize(rows)
    diffs = table(summary)
    lines = ["experiment  mechanism  runs  utilization  satisfaction"]
    for exp, mechs in summary.items():
        for mech, s in sorted(mechs.items()):
            lines.append(
                f"{exp:<11} {mech:<10} {s['runs']:>4}  "
                f"{s['resource_utilization_rate']:>10.1%}  {s['request_satisfaction_rate']:>11.1%}"
            )
    if diffs["percentage_difference"]:
        lines.append("")
        lines.append("satisfaction percentage difference (CRBS vs FCFS)")
        for exp, pd in diffs["percentage_difference"].items():
            lines.append(f"  {exp:<11} {pd:6.1f}%")
        lines.append(f"  {'average':<11} {diffs['average_percentage_difference']:6.1f}%")
        lines.append(f"  {'of means':<11} {diffs['difference_of_means']:6.1f}%")
    return "\n".join(lines) + "\n"


def _load_config_file(path: Path | None) -> dict[str, Any]:
    if path is None:
        return {}
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise click.UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise click.UsageError(f"config {path} must hold a JSON object")
    return data


def _pick(flag: Any, file_cfg: dict[str, Any], key: str, default: Any) -> Any:
    # flags win over the config file, which wins over defaults
    if flag is not None:
        return flag
    return file_cfg.get(key, default)


@click.group()
@click.version_option(__version__, prog_name="barterd")
def main() -> None:
    """Cloud resource bartering: simulate CRBS against an FCFS exchange."""


@main.command()
@click.option("--profile", "profile_name", default="exp3", show_default=True,
              type=click.Choice(sorted(PROFILES), case_sensitive=False))
@click.option("--size", type=click.Choice([c.value for c in DatasetClass], case_sensitive=False),
              default="Large", show_default=True)
@click.option("--seed", type=int, default=None, help=f"Defaults to ${SEED_ENV} or 1.")
@click.option("--free-riders", type=int, default=0, show_default=True)
@click.option("--out", "out", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Write here instead of stdout.")
def gen(profile_name: str, size: str, seed: int | None, free_riders: int, out: Path | None) -> None:
    """Generate one seeded dataset as JSON."""
    seed = default_seed() if seed is None else seed
    try:
        ds = _build_dataset(PROFILES[profile_name.lower()], DatasetClass(size.capitalize()),
                            seed, free_riders)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from None
    if out is None:
        click.echo(ds.dumps(), nl=False)
    else:
        ds.save(out)
        click.echo(f"wrote {out}", err=True)


@main.command("run")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              default=None, help="JSON file with any of the options below; flags win.")
@click.option("--profile", "profile_name", default=None,
              type=click.Choice(sorted(PROFILES) + ["custom"], case_sensitive=False))
@click.option("--seeds", default=None, help="e.g. 1..30 or 1,2,7")
@click.option("--mechanisms", default=None, help="crbs, fcfs or crbs,fcfs")
@click.option("--guard/--no-guard", default=None, help="Refuse consumption to debtors.")
@click.option("--debt-ceiling", default=None, help="Credits of debt tolerated before refusal.")
@click.option("--size", default=None, type=click.Choice([c.value for c in DatasetClass]))
@click.option("--free-riders", type=int, default=None)
@click.option("--jobs", type=int, default=None, help="Worker processes for the seed sweep.")
@click.option("--output-dir", type=click.Path(file_okay=False, path_type=Path), default=None)
def run_cmd(config_path, profile_name, seeds, mechanisms, guard, debt_ceiling, size,
            free_riders, jobs, output_dir) -> None:
    """Run an experiment over a seed sweep and write its artifacts."""
    file_cfg = _load_config_file(config_path)
    try:
        seeds_val = _pick(seeds, file_cfg, "seeds", None)
        if seeds_val is None:
            seed_list = [default_seed()]
        elif isinstance(seeds_val, list):
            seed_list = [int(s) for s in seeds_val]
        else:
            seed_list = parse_seeds(str(seeds_val))
        mech_val = _pick(mechanisms, file_cfg, "mechanisms", "crbs,fcfs")
        if isinstance(mech_val, list):
            mech_val = ",".join(mech_val)
        cfg = ExperimentConfig(
            profile=str(_pick(profile_name, file_cfg, "profile", "exp3")).lower(),
            seeds=seed_list,
            output_dir=Path(_pick(output_dir, file_cfg, "output_dir", "barterd-out")),
            mechanisms=parse_mechanisms(mech_val),
            guard_enabled=bool(_pick(guard, file_cfg, "guard_enabled", True)),
            debt_ceiling=credit(str(_pick(debt_ceiling, file_cfg, "debt_ceiling", "0"))),
            size=DatasetClass(_pick(size, file_cfg, "size", "Large")),
            free_riders=int(_pick(free_riders, file_cfg, "free_riders", 0)),
            jobs=max(1, int(_pick(jobs, file_cfg, "jobs", 1))),
            custom_profile=file_cfg.get("custom_profile"),
            run_options=dict(file_cfg.get("run_options", {})),
        )
        cfg.run_config()
        cfg.resolve_profile()
    except (ValueError, TypeError) as exc:
        raise click.UsageError(f"invalid configuration: {exc}") from None

    try:
        for sub in ("datasets", "logs"):
            (cfg.output_dir / sub).mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise click.ClickException(f"cannot write to {cfg.output_dir}: {exc}") from None

    started = time.time()
    try:
        if cfg.jobs > 1 and len(cfg.seeds) > 1:
            with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
                per_seed = list(pool.map(_run_seed, [cfg] * len(cfg.seeds), cfg.seeds))
        else:
            per_seed = [_run_seed(cfg, s) for s in cfg.seeds]
    except InvariantViolation as exc:
        click.echo(f"invariant violated: {exc}", err=True)
        sys.exit(3)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from None
    reports = [r for seed_rows in per_seed for r in seed_rows]
    rows = [r.to_row() for r in reports]
    write_csv(cfg.output_dir / "metrics.csv", reports)

    comparisons = []
    by_key = {(r.seed, r.mechanism): r for r in reports}
    for s in cfg.seeds:
        a, b = by_key.get((s, Mechanism.CRBS)), by_key.get((s, Mechanism.FCFS))
        if a is not None and b is not None:
            comparisons.append(compare(a, b))
    summary_text = render_summary(rows)
    (cfg.output_dir / "summary.txt").write_text(summary_text, encoding="utf-8")
    (cfg.output_dir / "summary.json").write_text(
        json.dumps({"summary": summarize(rows), "table": table(summarize(rows)),
                    "comparisons": comparisons}, indent=1, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    manifest = {
        "barterd_version": __version__,
        "config": cfg.to_dict(),
        "started_at": started,
        "finished_at": time.time(),
        "runs": len(rows),
    }
    (cfg.output_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8"
    )
    click.echo(summary_text, nl=False)
    click.echo(f"{len(rows)} runs written to {cfg.output_dir}", err=True)


@main.command("compare")
@click.argument("metrics_csv", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--json", "as_json", is_flag=True, help="Emit JSON instead of a table.")
def compare_cmd(metrics_csv: Path, as_json: bool) -> None:
    """Summarize a metrics CSV as CRBS vs FCFS rates and differences."""
    rows = read_csv(metrics_csv)
    if not rows:
        raise click.ClickException(f"{metrics_csv} has no rows")
    if as_json:
        s = summarize(rows)
        click.echo(json.dumps({"summary": s, "table": table(s)}, indent=1, sort_keys=True))
    else:
        click.echo(render_summary(rows), nl=False)


@main.group()
def price() -> None:
    """Pricing formula spot checks (exact arithmetic)."""


def _num(text: str) -> Fraction:
    try:
        return credit(text)
    except (ValueError, TypeError, ZeroDivisionError):
        raise click.BadParameter(f"{text!r} is not an exact number (use 12, 2.5 or 7/3)") from None


@price.command("credits")
@click.option("--class", "cls", required=True,
              type=click.Choice([c.value for c in InstanceClass], case_sensitive=False))
@click.option("--count", type=int, required=True)
@click.option("--duration", required=True,
              type=click.Choice([d.value for d in SharingDuration], case_sensitive=False))
def price_credits(cls: str, count: int, duration: str) -> None:
    """Instance value and barter credits for COUNT instances shared for DURATION."""
    ic = next(c for c in InstanceClass if c.value.lower() == cls.lower())
    dur = next(d for d in SharingDuration if d.value.lower() == duration.lower())
    try:
        bundle = ResourceBundle.single(ic, count)
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from None
    value = instance_value(bundle)
    click.echo(f"instance_value {credit_str(value)}")
    click.echo(f"barter_credits {credit_str(barter_credits(value, dur))}")


@price.command("bid")
@click.option("--budget", required=True)
@click.option("--tt", required=True, help="Total urgency window.")
@click.option("--rt", required=True, help="Time remaining in the window.")
def price_bid(budget: str, tt: str, rt: str) -> None:
    """Budget fraction and bid at the given point of the urgency window."""
    try:
        clock = ClockPair(_num(tt), _num(rt))
        bid = estimated_bid(_num(budget), clock)
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from None
    click.echo(f"budget_fraction {credit_str(budget_fraction(clock))}")
    click.echo(f"bid {credit_str(bid)}")


@price.command("transactional")
@click.option("--tt", required=True, help="Total urgency window (both parties).")
@click.option("--pmax", required=True)
@click.option("--pmin", required=True)
@click.option("--rtp", required=True, help="Provider time remaining.")
@click.option("--rtr", required=True, help="Requestor time remaining.")
@click.option("--ttr", default=None, help="Requestor window when it differs from --tt.")
def price_transactional(tt: str, pmax: str, pmin: str, rtp: str, rtr: str, ttr: str | None) -> None:
    """Transactional price between the provider's floor and ceiling."""
    try:
        p = transactional_price(
            _num(tt), _num(pmax), _num(pmin), _num(rtp), _num(rtr),
            requestor_total=None if ttr is None else _num(ttr),
        )
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from None
    click.echo(credit_str(p))


@main.group()
def board() -> None:
    """Blackboard inspection."""


@board.command("dump")
@click.argument("dataset_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--until", type=int, required=True, help="Simulated minute to stop at.")
@click.option("--seed", type=int, default=None, help="Run seed; defaults to the dataset's.")
@click.option("--no-guard", is_flag=True)
def board_dump(dataset_path: Path, until: int, seed: int | None, no_guard: bool) -> None:
    """Live CRBS listings after simulating DATASET_PATH up to --until."""
    ds = Dataset.load(dataset_path)
    result = run(ds, Mechanism.CRBS, seed=seed,
                 config=RunConfig(guard_enabled=not no_guard, until=until))
    click.echo(json.dumps(result.board.dump(), indent=1, sort_keys=True))


@main.group()
def ledger() -> None:
    """Ledger tools."""


@ledger.command("replay")
@click.argument("log_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
def ledger_replay(log_path: Path) -> None:
    """Rebuild balances and ranks from an NDJSON event log.

    Exits 1 when the rebuilt state differs from the log's final report.
    """
    records = []
    end = None
    with open(log_path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise click.ClickException(f"{log_path}:{n}: {exc}") from None
            if rec.get("kind") == "Ledger":
                records.append(rec)
            elif rec.get("kind") == "End":
                end = rec
    try:
        rebuilt = Ledger.replay(records)
        rebuilt.check_invariants()
    except InvariantViolation as exc:
        click.echo(f"invariant violated: {exc}", err=True)
        sys.exit(3)
    snap = rebuilt.snapshot()
    click.echo(json.dumps(snap, indent=1, sort_keys=True))
    if end is not None and end.get("balances") != snap:
        click.echo("replayed state differs from the log's final report", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
