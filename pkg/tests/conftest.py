import io
from datetime import date

import numpy as np
import pytest

from hotelrec.catalog import ReservationRecord
from hotelrec.synth import SynthSpec, generate


def rec(user, hotel, day):
    if isinstance(day, str):
        day = date.fromisoformat(day)
    return ReservationRecord(user, hotel, day)


def csv_bytes(text: str) -> io.BytesIO:
    return io.BytesIO(text.encode("utf-8"))


@pytest.fixture(scope="session")
def small_corpus():
    return generate(SynthSpec(users=300, hotels=60, feature_dim=12, latent_rank=3, cluster_count=4, seed=11))


@pytest.fixture(scope="session")
def corpus_5k():
    return generate(SynthSpec(users=5000, hotels=500, feature_dim=16, latent_rank=5, cluster_count=8, seed=3))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def build_run(users=100, seed=0, **config_overrides):
    """Synthesise, split and train all five scenarios in memory."""
    from hotelrec import config as cfg
    from hotelrec.pipeline import Engines, train
    from hotelrec.scenario import SCENARIOS, materialize_scenario

    corpus = generate(SynthSpec(users=users, hotels=120, feature_dim=12, cluster_count=4, seed=seed))
    config = cfg.load(None, {"content.kmeans_k": "8", "cf.latent_dim": "5", **config_overrides})
    splits, engines = {}, {}
    for sid, spec in SCENARIOS.items():
        splits[sid] = materialize_scenario(spec, corpus.reservations, splits.get(spec.borrow_from))
        models = train(splits[sid].train, corpus.feature_names, corpus.hotels, config)
        engines[sid] = Engines(models, splits[sid].train, config)
    return corpus, splits, engines


@pytest.fixture(scope="session")
def small_run():
    return build_run()


# acceptance criteria record one line each here; printed in the terminal summary
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[key])
