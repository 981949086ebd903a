"""Training and serving glue shared by the CLI commands."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from . import persist
from .catalog import (
    FeatureCatalog,
    HotelFeatureVector,
    ReservationRecord,
    build_interactions,
    clean_hotels,
    fit_scaling,
    make_catalog,
    stack,
)
from .cf import AlsConfig, FactorModel, LossPoint, fit, recommend_cf
from .config import RunConfig
from .content import (
    ClusterModel,
    HotelSpace,
    PcaModel,
    UserProfile,
    build_profile,
    fit_kmeans,
    fit_pca,
    normalize_features,
    project,
    recommend_content,
)
from .errors import DataError, UnknownUserError
from .evaluation import Recommender
from .hybrid import HybridSpec, interleave
from .ranking import RankedList

logger = logging.getLogger(__name__)

RECOMMEND_ENGINES = ("content-full", "content-cluster", "cf", "hybrid")


@dataclass
class TrainedModels:
    catalog: FeatureCatalog
    pca: PcaModel
    space: HotelSpace
    clusters: ClusterModel
    factors: FactorModel
    loss_trace: list[LossPoint] = field(default_factory=list)


def fit_content(
    names: Sequence[str], raw_hotels: Sequence[HotelFeatureVector], config: RunConfig
) -> tuple[FeatureCatalog, PcaModel, HotelSpace, ClusterModel]:
    bounds = config.parsed_bounds
    absent = sorted(set(bounds) - set(names))
    if absent:
        logger.warning("ignoring bounds for features not in hotels.csv: %s", ", ".join(absent))
        bounds = {k: v for k, v in bounds.items() if k in names}
    catalog = make_catalog(names, raw_hotels, bounds)
    cleaned = clean_hotels(raw_hotels, catalog)
    catalog = fit_scaling(cleaned, catalog)
    X = stack(normalize_features(cleaned, catalog))
    dims = min(config.pca_dims, X.shape[1], X.shape[0] - 1)
    if dims < config.pca_dims:
        logger.warning("reducing to %d components (requested %d)", dims, config.pca_dims)
    pca = fit_pca(X, dims)
    space = HotelSpace(tuple(h.hotel_code for h in cleaned), project(pca, X))
    k = min(config.kmeans_k, len(cleaned))
    clusters = fit_kmeans(space.vectors, k, config.kmeans_max_iter, config.content_rng_seed)
    return catalog, pca, space, clusters


def train(
    train: Sequence[ReservationRecord],
    names: Sequence[str],
    raw_hotels: Sequence[HotelFeatureVector],
    config: RunConfig,
) -> TrainedModels:
    catalog, pca, space, clusters = fit_content(names, raw_hotels, config)
    r = build_interactions(train, hotels=space.codes)
    als = AlsConfig(config.latent_dim, config.reg, config.sweeps, config.cf_rng_seed, config.tol)
    factors, trace = fit(r, als)
    return TrainedModels(catalog, pca, space, clusters, factors, trace)


def save_models(models: TrainedModels, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    persist.save_catalog(directory / "catalog.csv", models.catalog)
    persist.save_pca(directory / "pca.csv", models.pca)
    persist.save_space(directory / "hotel_space.csv", models.space)
    persist.save_kmeans(directory / "kmeans.csv", models.clusters)
    persist.save_factors(directory, models.factors)
    persist.write_loss_trace(directory / "loss_trace.csv", models.loss_trace)


def load_models(directory: Path) -> TrainedModels:
    if not (directory / "als.bin").exists():
        raise DataError(f"no trained models under {directory}; run `train` first")
    return TrainedModels(
        catalog=persist.load_catalog(directory / "catalog.csv"),
        pca=persist.load_pca(directory / "pca.csv"),
        space=persist.load_space(directory / "hotel_space.csv"),
        clusters=persist.load_kmeans(directory / "kmeans.csv"),
        factors=persist.load_factors(directory),
    )


class Engines:
    """Per-user recommenders over one scenario's trained models.

    Every call takes the hotels to exclude as hotel codes (the user's
    training stays) and returns a :class:`RankedList`.
    """

    def __init__(self, models: TrainedModels, train: Iterable[ReservationRecord], config: RunConfig):
        self.models = models
        self.config = config
        self._hotel_col = {c: j for j, c in enumerate(models.factors.hotel_codes)}
        stays: dict[str, list[int]] = {}
        for r in train:
            idx = models.space.index.get(r.hotel_code)
            if idx is not None:
                stays.setdefault(r.user_id, []).append(idx)
            else:
                stays.setdefault(r.user_id, [])
        self._stays = stays
        self._profiles: dict[str, UserProfile] = {}

    def profile(self, user: str) -> UserProfile:
        if user not in self._profiles:
            if user not in self._stays:
                raise UnknownUserError(f"user {user!r} has no training stays")
            idx = self._stays[user]
            self._profiles[user] = build_profile(self.models.space.vectors[idx], user)
        return self._profiles[user]

    def content(self, user: str, exclude: Iterable[str], n: int, clustered: bool) -> RankedList:
        index = self.models.space.index
        ex = [index[c] for c in exclude if c in index]
        clusters = self.models.clusters if clustered else None
        return recommend_content(self.profile(user), self.models.space, clusters, ex, n)

    def cf(self, user: str, exclude: Iterable[str], n: int) -> RankedList:
        ex = [self._hotel_col[c] for c in exclude if c in self._hotel_col]
        return recommend_cf(self.models.factors, user, ex, n)

    def hybrid(self, user: str, exclude: Iterable[str], n: int, clustered: bool) -> RankedList:
        exclude = list(exclude)
        spec = HybridSpec(n, self.config.hybrid_first, self.config.hybrid_odd_slot)
        cf = self.cf(user, exclude, n)
        try:
            content = self.content(user, exclude, n, clustered)
        except UnknownUserError:
            raise
        except DataError as exc:
            # no profile (every stay was at a dropped hotel): CF fills every slot
            logger.debug("hybrid for %s without content: %s", user, exc)
            content = RankedList(user, truncated=True)
        return interleave(content, cf, spec)

    def get(self, name: str) -> Recommender:
        if name == "hybrid":
            name = "hybrid-cluster" if self.config.content_mode == "cluster" else "hybrid-full"
        table = {
            "content-full": lambda u, ex, n: self.content(u, ex, n, False),
            "content-cluster": lambda u, ex, n: self.content(u, ex, n, True),
            "cf": self.cf,
            "hybrid-full": lambda u, ex, n: self.hybrid(u, ex, n, False),
            "hybrid-cluster": lambda u, ex, n: self.hybrid(u, ex, n, True),
        }
        if name not in table:
            raise KeyError(name)
        return table[name]


def user_training_hotels(train: Iterable[ReservationRecord]) -> dict[str, list[str]]:
    seen: dict[str, dict[str, None]] = {}
    for r in train:
        seen.setdefault(r.user_id, {})[r.hotel_code] = None
    return {u: list(h) for u, h in seen.items()}
