"""Train/test scenario construction.

Five scenarios filter users by their total reservation count and hold out
each user's chronologically last stay; scenario 3 instead reuses scenario 1's
test set while training on the wider 2-10 population.
"""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

from .catalog import ReservationRecord, read_reservations, write_reservations
from .errors import DataError


class TestRule(Enum):
    __test__ = False  # not a pytest class
    LAST_PER_USER = "last_per_user"
    BORROW = "borrow"


@dataclass(frozen=True)
class ScenarioSpec:
    id: int
    min_res: int
    max_res: int
    test_rule: TestRule = TestRule.LAST_PER_USER
    borrow_from: int | None = None

    def __post_init__(self) -> None:
        if not 2 <= self.min_res <= self.max_res:
            raise ValueError(f"need 2 <= min_res <= max_res, got {self.min_res}..{self.max_res}")
        if (self.test_rule is TestRule.BORROW) != (self.borrow_from is not None):
            raise ValueError("borrow_from is required exactly when test_rule is BORROW")
        if self.borrow_from is not None and self.borrow_from >= self.id:
            raise ValueError("a scenario can only borrow from an earlier scenario")


SCENARIOS: dict[int, ScenarioSpec] = {
    1: ScenarioSpec(1, 3, 10),
    2: ScenarioSpec(2, 2, 10),
    3: ScenarioSpec(3, 2, 10, TestRule.BORROW, borrow_from=1),
    4: ScenarioSpec(4, 3, 5),
    5: ScenarioSpec(5, 8, 10),
}


@dataclass(frozen=True)
class SplitStats:
    hotels: int
    train_records: int
    train_users: int
    test_records: int


@dataclass
class SplitDataset:
    train: list[ReservationRecord]
    test: list[ReservationRecord]
    scenario_id: int | None = None

    @property
    def stats(self) -> SplitStats:
        hotels = {r.hotel_code for r in self.train} | {r.hotel_code for r in self.test}
        return SplitStats(
            hotels=len(hotels),
            train_records=len(self.train),
            train_users=len({r.user_id for r in self.train}),
            test_records=len(self.test),
        )


def _group(records: Sequence[ReservationRecord]) -> dict[str, list[int]]:
    by_user: dict[str, list[int]] = defaultdict(list)
    for i, r in enumerate(records):
        by_user[r.user_id].append(i)
    return by_user


def filter_by_count(
    records: Sequence[ReservationRecord], min_res: int, max_res: int
) -> list[ReservationRecord]:
    """Keep the records of users whose total reservation count lies in ``[min_res, max_res]``."""
    if min_res < 2:
        raise ValueError("min_res must be at least 2")
    counts = Counter(r.user_id for r in records)
    kept = [r for r in records if min_res <= counts[r.user_id] <= max_res]
    if not kept:
        raise DataError(f"no users with {min_res}-{max_res} reservations")
    return kept


def leave_last_out(records: Sequence[ReservationRecord]) -> SplitDataset:
    """Move each user's latest stay to the test set.

    Date ties go to the record appearing later in the input.
    """
    last: dict[str, int] = {}
    n: Counter[str] = Counter()
    for i, r in enumerate(records):
        n[r.user_id] += 1
        j = last.get(r.user_id)
        if j is None or r.date >= records[j].date:
            last[r.user_id] = i
    single = [u for u, c in n.items() if c < 2]
    if single:
        raise DataError(f"{len(single)} users have a single record (e.g. {single[0]!r})")
    held = set(last.values())
    train = [r for i, r in enumerate(records) if i not in held]
    test = [records[i] for i in sorted(held)]
    return SplitDataset(train, test)


def _multiset_minus(
    records: Sequence[ReservationRecord], remove: Sequence[ReservationRecord]
) -> list[ReservationRecord]:
    pending = Counter(remove)
    out = []
    for r in records:
        if pending[r] > 0:
            pending[r] -= 1
        else:
            out.append(r)
    missing = +pending
    if missing:
        raise DataError(f"{sum(missing.values())} borrowed test records are absent from the corpus")
    return out


def materialize_scenario(
    spec: ScenarioSpec,
    records: Sequence[ReservationRecord],
    prior: SplitDataset | None = None,
) -> SplitDataset:
    filtered = filter_by_count(records, spec.min_res, spec.max_res)
    if spec.test_rule is TestRule.LAST_PER_USER:
        split = leave_last_out(filtered)
    else:
        if prior is None:
            raise DataError(
                f"scenario {spec.id} needs scenario {spec.borrow_from}'s split materialized first"
            )
        if prior.scenario_id not in (None, spec.borrow_from):
            raise DataError(
                f"scenario {spec.id} borrows from {spec.borrow_from}, got split of {prior.scenario_id}"
            )
        split = SplitDataset(_multiset_minus(filtered, prior.test), list(prior.test))
    split.scenario_id = spec.id
    return split


# --------------------------------------------------------------------------
# persistence


def save_split(split: SplitDataset, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    write_reservations(directory / "train.csv", split.train)
    write_reservations(directory / "test.csv", split.test)
    stats = split.stats
    payload = {
        "scenario": split.scenario_id,
        "hotels": stats.hotels,
        "train_records": stats.train_records,
        "train_users": stats.train_users,
        "test_records": stats.test_records,
    }
    (directory / "stats.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_split(directory: Path, scenario_id: int | None = None) -> SplitDataset:
    parts = {}
    for name in ("train", "test"):
        path = directory / f"{name}.csv"
        if not path.exists():
            raise DataError(f"missing split file {path}")
        records, rejects = read_reservations(path)
        if rejects:
            raise DataError(f"{path}: line {rejects[0].line}: {rejects[0].reason}")
        parts[name] = records
    return SplitDataset(parts["train"], parts["test"], scenario_id)
