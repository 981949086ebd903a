import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hotelrec.errors import DataError, UnknownUserError
from hotelrec.evaluation import (
    ENGINES,
    REPEAT_VISIT,
    EvalReport,
    emit_report,
    evaluate_scenario,
    held_out,
    recall_at_n,
    recall_tally,
    render_markdown,
    training_hotels,
)
from hotelrec.ranking import RankedList
from hotelrec.scenario import SplitDataset

from conftest import rec


def test_single_hit_at_rank_three():
    assert recall_at_n({"u1": ["x", "y", "h1"]}, {"u1": "h1"}, 3) == 100.0
    assert recall_at_n({"u1": ["x", "y", "h1"]}, {"u1": "h1"}, 2) == 0.0


def test_half_the_users_hit():
    lists = {"u1": ["h1"], "u2": ["h9"]}
    assert recall_at_n(lists, {"u1": "h1", "u2": "h2"}, 10) == 50.0


def test_missing_list_counts_as_miss():
    t = recall_tally({"u1": ["h1"]}, {"u1": "h1", "u2": "h2"}, 5, {"u2": "why"})
    assert t.hits == 1 and t.skipped == {"why": 1} and t.recall_pct == 50.0


def test_empty_test_set_is_an_error():
    with pytest.raises(DataError):
        recall_at_n({}, {}, 5)


def test_ranked_lists_accepted():
    lst = RankedList("u", [("a", 1.0), ("b", 0.5)])
    assert recall_at_n({"u": lst}, {"u": "b"}, 2) == 100.0


lists_st = st.dictionaries(
    st.sampled_from([f"u{i}" for i in range(8)]),
    st.lists(st.sampled_from([f"h{i}" for i in range(15)]), unique=True, max_size=12),
)
test_st = st.dictionaries(st.sampled_from([f"u{i}" for i in range(8)]), st.sampled_from([f"h{i}" for i in range(15)]), min_size=1)


@settings(max_examples=100, deadline=None)
@given(lists_st, test_st, st.integers(1, 15))
def test_recall_matches_membership_scan_and_is_monotone(lists, test, n):
    t = recall_tally(lists, test, n)
    brute = sum(1 for u, h in test.items() if u in lists and h in lists[u][:n])
    assert t.hits == brute and t.total == len(test)
    assert t.hits + t.misses + sum(t.skipped.values()) == len(test)
    assert recall_at_n(lists, test, n) <= recall_at_n(lists, test, n + 1)


@settings(max_examples=50, deadline=None)
@given(lists_st, test_st, st.integers(1, 12))
def test_recall_invariant_under_hotel_relabeling(lists, test, n):
    codes = [f"h{i}" for i in range(15)]
    perm = dict(zip(codes, random.Random(n).sample(codes, len(codes))))
    lists2 = {u: [perm[h] for h in hs] for u, hs in lists.items()}
    test2 = {u: perm[h] for u, h in test.items()}
    assert recall_at_n(lists, test, n) == recall_at_n(lists2, test2, n)


# --------------------------------------------------------------------------
# evaluate_scenario


def _split():
    train = [rec("u1", "h1", "2020-01-01"), rec("u2", "h2", "2020-01-01"), rec("u3", "h3", "2020-01-01")]
    test = [rec("u1", "h5", "2020-02-01"), rec("u2", "h2", "2020-02-01"), rec("u3", "h6", "2020-02-01")]
    return SplitDataset(train, test, 1)


def test_repeat_visits_are_skipped_and_stay_in_denominator():
    calls = []

    def engine(user, exclude, n):
        calls.append((user, exclude))
        return RankedList(user, [("h5", 1.0), ("h6", 0.5)])

    (rep,) = evaluate_scenario(_split(), {"stub": engine}, ns=(1, 2))
    assert rep.skipped == {REPEAT_VISIT: 1}
    assert rep.recall_at == {1: pytest.approx(100 / 3), 2: pytest.approx(200 / 3)}
    assert ("u1", frozenset({"h1"})) in calls and all(u != "u2" for u, _ in calls)


def test_engine_failures_become_skips():
    def engine(user, exclude, n):
        if user == "u1":
            raise UnknownUserError("nope")
        raise DataError("no features")

    (rep,) = evaluate_scenario(_split(), {"stub": engine}, ns=(5,))
    assert rep.skipped == {"unknown-user": 1, "no-recommendation": 1, REPEAT_VISIT: 1}
    assert rep.recall_at[5] == 0.0 and rep.users == 3


def test_helpers():
    s = _split()
    assert held_out(s) == {"u1": "h5", "u2": "h2", "u3": "h6"}
    assert training_hotels(s)["u1"] == frozenset({"h1"})


def test_random_engine_recall_near_chance():
    rng = np.random.default_rng(0)
    hotels = [f"h{i}" for i in range(200)]
    users = [f"u{i}" for i in range(4000)]
    train = [rec(u, "h0", "2020-01-01") for u in users]
    test = [rec(u, hotels[rng.integers(1, 200)], "2020-02-01") for u in users]

    def engine(user, exclude, n):
        pool = [h for h in hotels if h not in exclude]
        pick = rng.choice(len(pool), size=n, replace=False)
        return RankedList(user, [(pool[i], 0.0) for i in pick])

    (rep,) = evaluate_scenario(SplitDataset(train, test, 1), {"random": engine}, ns=(10,))
    expect = 100 * 10 / 199
    assert abs(rep.recall_at[10] - expect) < 1.5


def test_real_engines_on_small_run(small_run):
    _, splits, engines = small_run
    for sid, split in splits.items():
        reps = evaluate_scenario(split, {e: engines[sid].get(e) for e in ENGINES})
        assert [r.engine for r in reps] == list(ENGINES)
        for r in reps:
            assert r.recall_at[5] <= r.recall_at[10] <= r.recall_at[100]
            assert r.users == len(split.test)


# --------------------------------------------------------------------------
# reporting


def _reports():
    return [
        EvalReport(1, "cf", {5: 7.4166, 10: 12.0}, 120, {REPEAT_VISIT: 2}),
        EvalReport(1, "content-full", {5: 1.0, 10: 2.0}, 120, {}),
    ]


def test_report_csv_format(tmp_path):
    emit_report(_reports(), tmp_path, figure=False)
    lines = (tmp_path / "report.csv").read_text().splitlines()
    assert lines[0] == "scenario,engine,n,recall_pct,users,skipped"
    assert lines[1] == "1,content-full,5,1.00,120,0"
    assert "1,cf,5,7.42,120,2" in lines


def test_emit_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    pa = emit_report(_reports(), a)
    pb = emit_report(list(reversed(_reports())), b)
    for x, y in zip(pa, pb):
        assert x.read_bytes() == y.read_bytes()
    assert (a / "recall.png").stat().st_size > 0


def test_markdown_mentions_every_engine_family():
    md = render_markdown(_reports())
    assert "Collaborative filtering" in md and "7.42" in md
