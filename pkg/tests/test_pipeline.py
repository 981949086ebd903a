import pytest

from hotelrec.errors import DataError, UnknownUserError
from hotelrec.pipeline import Engines

from conftest import rec


def test_engines_serve_every_training_user(small_run):
    _, splits, engines = small_run
    user = splits[1].train[0].user_id
    for name in ("content-full", "content-cluster", "cf", "hybrid"):
        got = engines[1].get(name)(user, frozenset(), 10)
        assert len(got) == 10 and len(set(got.hotels)) == 10


def test_hybrid_falls_back_to_cf_without_a_profile(small_run):
    _, splits, engines = small_run
    base = engines[1]
    # the only stay is at a hotel with no feature vector (e.g. dropped by a bound)
    user = splits[1].train[0].user_id
    train = [r for r in splits[1].train if r.user_id != user] + [rec(user, "not-a-hotel", "2020-01-01")]
    eng = Engines(base.models, train, base.config)
    with pytest.raises(DataError):
        eng.get("content-full")(user, frozenset(), 10)
    hybrid = eng.get("hybrid")(user, frozenset(), 10)
    assert hybrid.hotels == eng.get("cf")(user, frozenset(), 10).hotels
    assert set(hybrid.sources) == {"cf"}


def test_unknown_user_is_reported_by_every_engine(small_run):
    _, _, engines = small_run
    for name in ("content-full", "cf", "hybrid-cluster"):
        with pytest.raises(UnknownUserError):
            engines[1].get(name)("nobody", frozenset(), 5)


def test_unknown_engine_name(small_run):
    with pytest.raises(KeyError):
        small_run[2][1].get("magic")
