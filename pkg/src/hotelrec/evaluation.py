"""Recall@N evaluation over leave-last-out splits, plus report rendering."""

from __future__ import annotations

import csv
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .errors import DataError, HotelRecError, UnknownUserError
from .ranking import RankedList
from .scenario import SplitDataset

logger = logging.getLogger(__name__)

ENGINES = ("content-full", "content-cluster", "cf", "hybrid-full", "hybrid-cluster")
DEFAULT_NS = (5, 10, 100)

REPEAT_VISIT = "repeat-visit-excluded"
NO_LIST = "no-list"

# (user_id, training hotels to exclude, n) -> ranked list; raises DataError when it cannot serve the user
Recommender = Callable[[str, frozenset, int], RankedList]


@dataclass(frozen=True)
class RecallTally:
    hits: int
    misses: int
    skipped: Mapping[str, int]

    @property
    def total(self) -> int:
        return self.hits + self.misses + sum(self.skipped.values())

    @property
    def recall_pct(self) -> float:
        return 100.0 * self.hits / self.total


@dataclass
class EvalReport:
    scenario: int
    engine: str
    recall_at: dict[int, float]
    users: int
    skipped: dict[str, int] = field(default_factory=dict)

    @property
    def skipped_total(self) -> int:
        return sum(self.skipped.values())


def _hotels(entry: RankedList | Sequence[str]) -> Sequence[str]:
    return entry.hotels if isinstance(entry, RankedList) else entry


def recall_tally(
    lists: Mapping[str, RankedList | Sequence[str]],
    test: Mapping[str, str],
    n: int,
    skipped: Mapping[str, str] | None = None,
) -> RecallTally:
    """Count held-out hotels found in each user's top ``n``.

    Test users without a list are skipped (reason from ``skipped`` or
    ``"no-list"``); they stay in the denominator as misses.
    """
    if not test:
        raise DataError("empty test set")
    skipped = skipped or {}
    hits = misses = 0
    reasons: Counter[str] = Counter()
    for user, held_out in test.items():
        entry = lists.get(user)
        if entry is None:
            reasons[skipped.get(user, NO_LIST)] += 1
        elif held_out in _hotels(entry)[:n]:
            hits += 1
        else:
            misses += 1
    return RecallTally(hits, misses, dict(sorted(reasons.items())))


def recall_at_n(
    lists: Mapping[str, RankedList | Sequence[str]], test: Mapping[str, str], n: int
) -> float:
    """Percentage of test users whose held-out hotel is in their top ``n``."""
    return recall_tally(lists, test, n).recall_pct


def held_out(split: SplitDataset) -> dict[str, str]:
    test: dict[str, str] = {}
    for r in split.test:
        if r.user_id in test:
            raise DataError(f"user {r.user_id!r} has more than one held-out record")
        test[r.user_id] = r.hotel_code
    return test


def training_hotels(split: SplitDataset) -> dict[str, frozenset]:
    seen: dict[str, set] = {}
    for r in split.train:
        seen.setdefault(r.user_id, set()).add(r.hotel_code)
    return {u: frozenset(h) for u, h in seen.items()}


def evaluate_scenario(
    split: SplitDataset,
    engines: Mapping[str, Recommender],
    ns: Iterable[int] = DEFAULT_NS,
) -> list[EvalReport]:
    """Recall of every engine at every list length in ``ns``.

    A user whose held-out hotel is one of their training hotels cannot be
    recommended it under the exclusion rule; such users are skipped with
    reason ``repeat-visit-excluded``.
    """
    ns = sorted(set(ns))
    if not ns or ns[0] < 1:
        raise ValueError("list lengths must be positive")
    test = held_out(split)
    if not test:
        raise DataError("empty test set")
    seen = training_hotels(split)
    empty: frozenset = frozenset()
    repeat = {u for u, h in test.items() if h in seen.get(u, empty)}
    reports = []
    for name, engine in engines.items():
        lists: dict[str, RankedList] = {}
        skipped = {u: REPEAT_VISIT for u in repeat}
        for user in test:
            if user in repeat:
                continue
            try:
                lists[user] = engine(user, seen.get(user, empty), ns[-1])
            except UnknownUserError:
                skipped[user] = "unknown-user"
            except HotelRecError as exc:
                logger.debug("%s skipped %s: %s", name, user, exc)
                skipped[user] = "no-recommendation"
        tallies = {n: recall_tally(lists, test, n, skipped) for n in ns}
        last = tallies[ns[-1]]
        reports.append(
            EvalReport(
                scenario=split.scenario_id or 0,
                engine=name,
                recall_at={n: t.recall_pct for n, t in tallies.items()},
                users=len(test),
                skipped=dict(last.skipped),
            )
        )
    return reports


# --------------------------------------------------------------------------
# reports

REPORT_HEADER = ("scenario", "engine", "n", "recall_pct", "users", "skipped")


def _engine_key(name: str) -> tuple[int, str]:
    return (ENGINES.index(name) if name in ENGINES else len(ENGINES), name)


def _sorted(reports: Iterable[EvalReport]) -> list[EvalReport]:
    return sorted(reports, key=lambda r: (r.scenario, _engine_key(r.engine)))


def write_report_csv(path: Path, reports: Sequence[EvalReport]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for rep in _sorted(reports):
            for n in sorted(rep.recall_at):
                w.writerow((rep.scenario, rep.engine, n, f"{rep.recall_at[n]:.2f}", rep.users, rep.skipped_total))


_TABLES = (
    ("Content-based filtering", (("Clustered", "content-cluster"), ("Full scan", "content-full"))),
    ("Collaborative filtering", (("", "cf"),)),
    ("Hybrid", (("Clustered", "hybrid-cluster"), ("Full scan", "hybrid-full"))),
)


def render_markdown(reports: Sequence[EvalReport]) -> str:
    """Recall tables, one per engine family, scenarios as rows."""
    by_key = {(r.scenario, r.engine): r for r in reports}
    scenarios = sorted({r.scenario for r in reports})
    ns = sorted({n for r in reports for n in r.recall_at})
    present = {r.engine for r in reports}
    groups = [(title, [(lbl, e) for lbl, e in cols if e in present]) for title, cols in _TABLES]
    extra = sorted(present - {e for _, cols in _TABLES for _, e in cols})
    groups += [(e, [("", e)]) for e in extra]

    out = ["# Recall (%)", ""]
    for title, cols in groups:
        if not cols:
            continue
        head = ["Scenario"]
        for label, _ in cols:
            head += [f"{label} Top{n}".strip() for n in ns]
        out += [f"## {title}", "", "| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
        for s in scenarios:
            row = [str(s)]
            for _, engine in cols:
                rep = by_key.get((s, engine))
                row += [f"{rep.recall_at[n]:.2f}" if rep and n in rep.recall_at else "" for n in ns]
            out.append("| " + " | ".join(row) + " |")
        out.append("")
    skipped = [r for r in _sorted(reports) if r.skipped]
    if skipped:
        out += ["## Skipped users", "", "| Scenario | Engine | Users | Skipped (reason: count) |", "|---|---|---|---|"]
        for r in skipped:
            detail = ", ".join(f"{k}: {v}" for k, v in sorted(r.skipped.items()))
            out.append(f"| {r.scenario} | {r.engine} | {r.users} | {detail} |")
        out.append("")
    return "\n".join(out)


def plot_recall(path: Path, reports: Sequence[EvalReport]) -> None:
    """Grouped bar chart of recall per scenario and engine, one panel per N."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import numpy as np

    reports = _sorted(reports)
    scenarios = sorted({r.scenario for r in reports})
    engines = sorted({r.engine for r in reports}, key=_engine_key)
    ns = sorted({n for r in reports for n in r.recall_at})
    by_key = {(r.scenario, r.engine): r for r in reports}

    fig, axes = plt.subplots(1, len(ns), figsize=(4.5 * len(ns), 3.6), sharey=False, squeeze=False)
    width = 0.8 / max(len(engines), 1)
    x = np.arange(len(scenarios))
    for ax, n in zip(axes[0], ns):
        for i, engine in enumerate(engines):
            vals = [by_key[(s, engine)].recall_at.get(n, 0.0) if (s, engine) in by_key else 0.0 for s in scenarios]
            ax.bar(x + (i - (len(engines) - 1) / 2) * width, vals, width, label=engine)
        ax.set_title(f"Top{n}")
        ax.set_xticks(x, [str(s) for s in scenarios])
        ax.set_xlabel("scenario")
        ax.set_ylabel("recall (%)")
    axes[0][-1].legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)


def emit_report(reports: Sequence[EvalReport], out_dir: Path, figure: bool = True) -> list[Path]:
    """Write report.csv, report.md and (optionally) recall.png under ``out_dir``."""
    if not reports:
        raise DataError("no reports to emit")
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = [out_dir / "report.csv", out_dir / "report.md"]
        write_report_csv(paths[0], reports)
        paths[1].write_text(render_markdown(reports), encoding="utf-8")
        if figure:
            paths.append(out_dir / "recall.png")
            plot_recall(paths[2], reports)
    except OSError as exc:
        raise DataError(f"cannot write report under {out_dir}: {exc}") from exc
    return paths
