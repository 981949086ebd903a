from collections import Counter, defaultdict

import numpy as np
import pytest
from scipy.stats import spearmanr

from hotelrec.catalog import make_catalog, fit_scaling, stack
from hotelrec.content import normalize_features
from hotelrec.errors import DataError
from hotelrec.synth import SynthSpec, generate, planted_matrix, write_corpus


def test_single_user_single_hotel():
    c = generate(SynthSpec(users=1, hotels=1, feature_dim=1, latent_rank=1, cluster_count=1, reservations_per_user=(2, 2)))
    assert len(c.reservations) == 2
    assert {r.hotel_code for r in c.reservations} == {c.hotel_codes[0]}


def test_same_seed_same_corpus():
    spec = SynthSpec(users=50, hotels=20, feature_dim=6, cluster_count=3, seed=4)
    a, b = generate(spec), generate(spec)
    assert a.reservations == b.reservations and a.hotels == b.hotels


def test_different_seed_different_corpus():
    a = generate(SynthSpec(users=50, hotels=20, feature_dim=6, cluster_count=3, seed=4))
    b = generate(SynthSpec(users=50, hotels=20, feature_dim=6, cluster_count=3, seed=5))
    assert a.reservations != b.reservations


@pytest.mark.parametrize(
    "kw",
    [dict(users=0), dict(latent_rank=0), dict(reservations_per_user=(1, 3)), dict(cluster_count=400), dict(missing_rate=1.0)],
)
def test_infeasible_spec(kw):
    with pytest.raises(DataError):
        generate(SynthSpec(**kw))


def test_stay_counts_and_dates(small_corpus):
    per_user = Counter(r.user_id for r in small_corpus.reservations)
    lo, hi = small_corpus.spec.reservations_per_user
    assert set(per_user) == set(small_corpus.user_ids)
    assert all(lo <= n <= hi for n in per_user.values())
    dates = defaultdict(list)
    for r in small_corpus.reservations:
        dates[r.user_id].append(r.date)
    assert all(len(set(d)) == len(d) for d in dates.values())


def test_visits_follow_planted_affinity(corpus_5k):
    visits = corpus_5k.visit_matrix().toarray()
    rho, _ = spearmanr(corpus_5k.truth.affinity().ravel(), visits.ravel())
    assert rho > 0


def test_planted_clusters_have_positive_silhouette():
    c = generate(SynthSpec(users=20, hotels=200, feature_dim=10, cluster_count=4, seed=8))
    cat = fit_scaling(c.hotels, make_catalog(c.feature_names, c.hotels))
    X = stack(normalize_features(c.hotels, cat))
    labels = c.truth.assignment
    D = np.linalg.norm(X[:, None] - X[None], axis=-1)
    sil = []
    for i in range(len(X)):
        same = labels == labels[i]
        a = D[i, same].sum() / (same.sum() - 1)
        b = min(D[i, labels == k].mean() for k in set(labels.tolist()) - {labels[i]})
        sil.append((b - a) / max(a, b))
    assert np.mean(sil) > 0


def test_missing_rate_leaves_holes():
    c = generate(SynthSpec(users=5, hotels=100, feature_dim=8, cluster_count=2, missing_rate=0.2))
    frac = np.isnan(stack(c.hotels)).mean()
    assert 0.1 < frac < 0.3


def test_write_corpus(tmp_path, small_corpus):
    write_corpus(small_corpus, tmp_path)
    assert {p.name for p in tmp_path.iterdir()} == {"reservations.csv", "hotels.csv", "truth.json"}


def test_planted_matrix_coverage_and_values():
    R, U, V = planted_matrix(40, 30, 3, 0.05, seed=1)
    dense = R.toarray()
    assert (dense != 0).any(axis=1).all() and (dense != 0).any(axis=0).all()
    rows, cols = R.nonzero()
    np.testing.assert_allclose(R.data, (U @ V)[rows, cols])


@pytest.mark.parametrize("args", [(5, 5, 0, 0.5), (5, 5, 6, 0.5), (5, 5, 2, 0.0)])
def test_planted_matrix_rejects_bad_args(args):
    with pytest.raises(DataError):
        planted_matrix(*args)
