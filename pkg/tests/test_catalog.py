import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hotelrec.catalog import (
    Bound,
    HotelFeatureVector,
    ReservationRecord,
    build_interactions,
    clean_hotels,
    fit_scaling,
    make_catalog,
    parse_hotels,
    parse_reservations,
)
from hotelrec.errors import DataError

from conftest import csv_bytes, rec


def test_parse_single_row():
    records, rejects = parse_reservations(csv_bytes("user_id,hotel_code,date\nu1,hA,2018-05-01\n"))
    assert records == [rec("u1", "hA", "2018-05-01")]
    assert rejects == []


def test_parse_empty_hotel_is_rejected_and_parsing_continues():
    text = "user_id,hotel_code,date\nu1,,2018-05-01\nu2,hB,2018-06-01\n"
    records, rejects = parse_reservations(csv_bytes(text))
    assert [r.user_id for r in records] == ["u2"]
    assert len(rejects) == 1 and rejects[0].line == 2 and "hotel_code" in rejects[0].reason


def test_parse_bad_date_among_three_rows():
    text = "user_id,hotel_code,date\nu1,hA,2018-05-01\nu1,hB,2018-13-40\nu2,hA,2019-01-02\n"
    records, rejects = parse_reservations(csv_bytes(text))
    assert len(records) == 2
    assert [r.line for r in rejects] == [3]
    assert [r.user_id for r in records] == ["u1", "u2"]


def test_parse_wrong_field_count_rejected():
    records, rejects = parse_reservations(csv_bytes("user_id,hotel_code,date\nu1,hA\n"))
    assert records == [] and rejects[0].line == 2


@pytest.mark.parametrize(
    "payload",
    [b"", b"a,b,c\nu1,hA,2018-01-01\n", b"user_id,hotel_code,date\n\xff\xfe,hA,2018-01-01\n"],
)
def test_parse_stream_level_failures(payload):
    import io

    with pytest.raises(DataError):
        parse_reservations(io.BytesIO(payload))


def test_record_rejects_empty_ids():
    with pytest.raises(ValueError):
        ReservationRecord("", "h", None)


def test_parse_hotels_missing_cells_are_nan():
    names, hotels, rejects = parse_hotels(csv_bytes("hotel_code,capacity,rooms\nA,500,10\nB,,20\nC,x,1\n"))
    assert names == ["capacity", "rooms"]
    assert [h.hotel_code for h in hotels] == ["A", "B"]
    assert math.isnan(hotels[1].features[0])
    assert rejects[0].line == 4


# --------------------------------------------------------------------------
# cleaning


def _hotels(rows):
    return [HotelFeatureVector(code, np.array(vals, dtype=float)) for code, vals in rows]


def test_missing_capacity_imputed_with_mean():
    raw = _hotels([("A", [500, 1]), ("B", [700, 1]), ("C", [math.nan, 0])])
    cat = make_catalog(["capacity", "breakfast"], raw)
    out = clean_hotels(raw, cat)
    assert out[2].features[0] == 600.0
    assert not any(np.isnan(h.features).any() for h in out)


def test_bound_violation_drops_row():
    raw = _hotels([("A", [-3, 100]), ("B", [12, 200])])
    cat = make_catalog(["rooms", "capacity"], raw, {"rooms": Bound.parse(">0")})
    out = clean_hotels(raw, cat)
    assert [h.hotel_code for h in out] == ["B"]


def test_clean_input_returned_unchanged():
    raw = _hotels([("A", [1, 2]), ("B", [3, 4])])
    cat = make_catalog(["x", "y"], raw)
    assert clean_hotels(raw, cat) == raw


def test_all_rows_dropped_is_fatal():
    raw = _hotels([("A", [-1.0])])
    cat = make_catalog(["rooms"], raw, {"rooms": Bound.parse(">0")})
    with pytest.raises(DataError):
        clean_hotels(raw, cat)


def test_clean_is_idempotent(rng):
    X = rng.normal(10, 5, size=(40, 4))
    X[rng.uniform(size=X.shape) < 0.2] = np.nan
    raw = [HotelFeatureVector(f"h{i}", row) for i, row in enumerate(X)]
    cat = make_catalog(["a", "b", "c", "d"], raw, {"a": Bound.parse(">=5,<=15")})
    once = clean_hotels(raw, cat)
    assert clean_hotels(once, cat) == once


@pytest.mark.parametrize(
    "expr,value,ok",
    [(">0", 0.0, False), (">0", 0.1, True), (">=1,<=5", 5.0, True), (">=1,<=5", 5.1, False), ("<3", float("nan"), True)],
)
def test_bound_parse_and_admit(expr, value, ok):
    assert Bound.parse(expr).admits(value) is ok


def test_bound_parse_rejects_garbage():
    with pytest.raises(ValueError):
        Bound.parse("rooms>0")


def test_fit_scaling_drops_constant_columns():
    raw = _hotels([("A", [1, 7, 0]), ("B", [3, 7, 1])])
    cat = fit_scaling(raw, make_catalog(["q", "const", "flag"], raw))
    assert cat.names == ("q", "flag")
    assert cat.kinds == ("quantity", "binary")
    np.testing.assert_allclose(cat.scale_params, [[2.0, 1.0], [0.5, 0.5]])
    assert (cat.scale_params[:, 1] > 0).all()


def test_duplicate_feature_names_rejected():
    raw = _hotels([("A", [1, 2])])
    with pytest.raises(DataError):
        make_catalog(["x", "x"], raw)


# --------------------------------------------------------------------------
# interactions


def test_counts_accumulate():
    records = [rec("u1", "hA", "2018-01-01"), rec("u1", "hA", "2018-02-01"), rec("u1", "hB", "2018-03-01")]
    r = build_interactions(records)
    assert r.entries == {("u1", "hA"): 2, ("u1", "hB"): 1}
    assert (r.m, r.u) == (1, 2)


def test_single_record():
    r = build_interactions([rec("u", "h", "2020-01-01")])
    assert r.entries == {("u", "h"): 1}


def test_empty_is_fatal():
    with pytest.raises(DataError):
        build_interactions([])


def test_extra_hotels_get_empty_columns():
    r = build_interactions([rec("u", "h2", "2020-01-01")], hotels=["h1", "h2"])
    assert r.hotel_codes == ("h1", "h2")
    assert r.counts[0, 0] == 0 and r.counts[0, 1] == 1


def test_synthetic_counts_match_brute_force_tally(small_corpus):
    records = small_corpus.reservations
    r = build_interactions(records)
    tally = Counter((x.user_id, x.hotel_code) for x in records)
    assert r.entries == dict(tally)
    assert r.counts.sum() == len(records)
    assert set(r.user_index) == {x.user_id for x in records}
    assert all(r.user_ids[i] == u for u, i in r.user_index.items())


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("abcd"), st.sampled_from("wxyz")), min_size=1, max_size=40), st.randoms())
def test_build_is_permutation_invariant_and_conserves(pairs, rnd):
    records = [rec(u, h, "2020-01-01") for u, h in pairs]
    shuffled = list(records)
    rnd.shuffle(shuffled)
    a, b = build_interactions(records), build_interactions(shuffled)
    assert a.entries == b.entries
    assert (a.counts != b.counts).nnz == 0
    assert a.counts.sum() == len(records)
    assert all(v >= 1 for v in a.entries.values())
