"""Seeded synthetic reservation corpora with planted structure.

Hotels are drawn around ``cluster_count`` planted centroids in a latent
feature space and mapped to native units (capacity, distance in metres,
0/1 amenities). Each cluster also carries a nonnegative taste vector; a
hotel's latent factor is its cluster's taste times per-hotel noise, and a
user visits hotels with probability proportional to the user-hotel latent
dot product. The content engine therefore has clusters to find and the CF
engine a low-rank affinity to recover.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from datetime import date, timedelta
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .catalog import HotelFeatureVector, ReservationRecord, write_hotels, write_reservations
from .errors import DataError

EPOCH = date(2012, 1, 1)
_NAMED = ("capacity", "sea_distance_m", "breakfast", "rooms", "price")
# (offset, unit scale, binary)
_UNITS = {
    "capacity": (400.0, 30.0, False),
    "sea_distance_m": (800.0, 60.0, False),
    "breakfast": (0.0, 1.0, True),
    "rooms": (150.0, 12.0, False),
    "price": (1500.0, 120.0, False),
}


@dataclass(frozen=True)
class SynthSpec:
    users: int = 2000
    hotels: int = 300
    feature_dim: int = 24
    latent_rank: int = 5
    reservations_per_user: tuple[int, int] = (2, 12)
    cluster_count: int = 8
    seed: int = 0
    separation: float = 4.0  # centroid spread in units of within-cluster noise
    missing_rate: float = 0.0

    def validate(self) -> None:
        lo, hi = self.reservations_per_user
        problems = []
        if self.users < 1 or self.hotels < 1:
            problems.append("users and hotels must be >= 1")
        if self.feature_dim < 1:
            problems.append("feature_dim must be >= 1")
        if not 1 <= self.latent_rank <= min(self.users, self.hotels):
            problems.append("latent_rank must be in 1..min(users, hotels)")
        if not 2 <= lo <= hi:
            problems.append("reservations_per_user needs 2 <= min <= max")
        if not 1 <= self.cluster_count <= self.hotels:
            problems.append("cluster_count must be in 1..hotels")
        if not 0.0 <= self.missing_rate < 1.0:
            problems.append("missing_rate must be in [0, 1)")
        if problems:
            raise DataError("infeasible synth spec: " + "; ".join(problems))


@dataclass
class PlantedTruth:
    centroids: np.ndarray  # cluster_count x feature_dim, latent (unit-free) space
    raw_centroids: np.ndarray  # same centroids in native feature units
    assignment: np.ndarray  # hotel -> cluster
    user_factors: np.ndarray  # users x rank
    hotel_factors: np.ndarray  # hotels x rank

    def affinity(self) -> np.ndarray:
        return self.user_factors @ self.hotel_factors.T

    def affinity_ranking(self, user: int) -> np.ndarray:
        """Hotel indices by descending planted affinity (index tie-break)."""
        a = self.user_factors[user] @ self.hotel_factors.T
        return np.lexsort((np.arange(a.size), -a))


@dataclass
class SynthCorpus:
    spec: SynthSpec
    reservations: list[ReservationRecord]
    feature_names: list[str]
    hotels: list[HotelFeatureVector]
    truth: PlantedTruth
    user_ids: list[str] = field(default_factory=list)
    hotel_codes: list[str] = field(default_factory=list)

    def visit_matrix(self) -> sp.csr_matrix:
        uidx = {u: i for i, u in enumerate(self.user_ids)}
        hidx = {h: i for i, h in enumerate(self.hotel_codes)}
        rows = [uidx[r.user_id] for r in self.reservations]
        cols = [hidx[r.hotel_code] for r in self.reservations]
        return sp.csr_matrix(
            (np.ones(len(rows)), (rows, cols)), shape=(len(self.user_ids), len(self.hotel_codes))
        )


def feature_names(dim: int) -> list[str]:
    names = list(_NAMED[:dim])
    names += [f"f{j:03d}" for j in range(len(names), dim)]
    return names


def _units(names: list[str], rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    offset, scale, binary = [], [], []
    for name in names:
        if name in _UNITS:
            o, s, b = _UNITS[name]
        else:
            # every third generic column is a 0/1 amenity
            b = int(name[1:]) % 3 == 0
            o, s = (0.0, 1.0) if b else (float(rng.uniform(0, 100)), float(rng.uniform(1, 20)))
        offset.append(o)
        scale.append(s)
        binary.append(b)
    return np.array(offset), np.array(scale), np.array(binary)


def _count_weights(lo: int, hi: int) -> np.ndarray:
    # decaying weights: most users have few stays
    w = 1.0 / np.arange(1, hi - lo + 2)
    return w / w.sum()


def generate(spec: SynthSpec) -> SynthCorpus:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    names = feature_names(spec.feature_dim)
    offset, scale, binary = _units(names, rng)

    centroids = rng.normal(0.0, spec.separation, size=(spec.cluster_count, spec.feature_dim))
    assignment = np.arange(spec.hotels) % spec.cluster_count
    rng.shuffle(assignment)
    latent = centroids[assignment] + rng.normal(size=(spec.hotels, spec.feature_dim))
    # binary amenities: Bernoulli with a per-cluster rate, so the planted rate is the exact mean
    rate = 1.0 / (1.0 + np.exp(-centroids * 2.0 / spec.separation))
    amen = (rng.uniform(size=latent.shape) < rate[assignment]).astype(float)
    raw = np.where(binary, amen, offset + scale * latent)
    raw_centroids = np.where(binary, rate, offset + scale * centroids)
    if spec.missing_rate > 0:
        holes = rng.uniform(size=raw.shape) < spec.missing_rate
        raw = np.where(holes, np.nan, raw)

    taste = rng.gamma(0.2, 1.0, size=(spec.cluster_count, spec.latent_rank))
    hotel_factors = taste[assignment] * rng.gamma(4.0, 0.25, size=(spec.hotels, spec.latent_rank))
    user_factors = rng.gamma(0.2, 1.0, size=(spec.users, spec.latent_rank))

    width = len(str(spec.users - 1))
    hwidth = len(str(spec.hotels - 1))
    user_ids = [f"u{i:0{width}d}" for i in range(spec.users)]
    hotel_codes = [f"h{j:0{hwidth}d}" for j in range(spec.hotels)]

    lo, hi = spec.reservations_per_user
    n_stays = lo + rng.choice(hi - lo + 1, size=spec.users, p=_count_weights(lo, hi))
    records: list[ReservationRecord] = []
    for i in range(spec.users):
        aff = user_factors[i] @ hotel_factors.T + 1e-12
        visits = rng.choice(spec.hotels, size=n_stays[i], p=aff / aff.sum())
        start = int(rng.integers(0, 365 * 5))
        gaps = rng.integers(1, 120, size=n_stays[i])
        days = start + np.cumsum(gaps)
        for h, d in zip(visits, days):
            records.append(ReservationRecord(user_ids[i], hotel_codes[h], EPOCH + timedelta(days=int(d))))
    # interleave users the way an export sorted by date would
    records.sort(key=lambda r: (r.date, r.user_id))

    hotels = [HotelFeatureVector(c, row) for c, row in zip(hotel_codes, raw)]
    truth = PlantedTruth(centroids, raw_centroids, assignment, user_factors, hotel_factors)
    return SynthCorpus(spec, records, names, hotels, truth, user_ids, hotel_codes)


def write_corpus(corpus: SynthCorpus, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    write_reservations(directory / "reservations.csv", corpus.reservations)
    write_hotels(directory / "hotels.csv", corpus.feature_names, corpus.hotels)
    t = corpus.truth
    spec = asdict(corpus.spec)
    spec["reservations_per_user"] = list(spec["reservations_per_user"])
    payload = {
        "spec": spec,
        "feature_names": corpus.feature_names,
        "cluster_assignment": {c: int(a) for c, a in zip(corpus.hotel_codes, t.assignment)},
        "centroids_latent": t.centroids.tolist(),
        "centroids_raw": [[None if math.isnan(v) else v for v in row] for row in t.raw_centroids.tolist()],
        "user_factors": t.user_factors.tolist(),
        "hotel_factors": t.hotel_factors.tolist(),
    }
    (directory / "truth.json").write_text(json.dumps(payload) + "\n", encoding="utf-8")


def planted_matrix(
    m: int, u: int, rank: int, density: float, seed: int = 0
) -> tuple[sp.csr_matrix, np.ndarray, np.ndarray]:
    """Partially observed exact low-rank matrix ``U @ V`` with uniform [0, 1) factors.

    Returns the observed entries as CSR plus the planted ``U`` (m x rank) and
    ``V`` (rank x u). Every row and column keeps at least one observation.
    """
    if not 1 <= rank <= min(m, u):
        raise DataError("rank must be in 1..min(m, u)")
    if not 0.0 < density <= 1.0:
        raise DataError("density must be in (0, 1]")
    rng = np.random.default_rng(seed)
    U = rng.uniform(0.0, 1.0, size=(m, rank))
    V = rng.uniform(0.0, 1.0, size=(rank, u))
    mask = rng.uniform(size=(m, u)) < density
    mask[np.arange(m), rng.integers(0, u, size=m)] = True
    mask[rng.integers(0, m, size=u), np.arange(u)] = True
    rows, cols = np.nonzero(mask)
    values = np.einsum("nk,kn->n", U[rows], V[:, cols])
    return sp.csr_matrix((values, (rows, cols)), shape=(m, u)), U, V
