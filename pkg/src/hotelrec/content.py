"""Content-based engine.

Hotels live in a normalised, PCA-reduced feature space. A user is the mean
of the hotels they stayed at; recommendations are the nearest hotels by
Euclidean distance, scanned exhaustively or only inside the k-means cluster
whose centroid is closest to the profile.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .catalog import BINARY, FeatureCatalog, HotelFeatureVector, stack
from .errors import DataError
from .ranking import RankedList, make_list, top_n

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class UserProfile:
    user_id: str
    profile: np.ndarray


@dataclass(frozen=True, eq=False)
class PcaModel:
    components: np.ndarray  # input_dim x out_dim, orthonormal columns
    explained_variance: np.ndarray
    input_mean: np.ndarray

    @property
    def out_dim(self) -> int:
        return self.components.shape[1]

    @property
    def input_dim(self) -> int:
        return self.components.shape[0]


@dataclass(frozen=True, eq=False)
class ClusterModel:
    centroids: np.ndarray  # k x d
    assignment: np.ndarray  # hotel index -> cluster id
    objective_trace: tuple[float, ...] = ()
    members: tuple[np.ndarray, ...] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        order = np.argsort(self.assignment, kind="stable")
        bounds = np.searchsorted(self.assignment[order], np.arange(self.k + 1))
        members = tuple(order[bounds[c] : bounds[c + 1]] for c in range(self.k))
        object.__setattr__(self, "members", members)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    def nearest(self, vector: np.ndarray) -> int:
        d = ((self.centroids - vector) ** 2).sum(axis=1)
        return int(np.argmin(d))


@dataclass(frozen=True, eq=False)
class HotelSpace:
    """Hotel codes with their vectors in the retrieval space (row i <-> codes[i])."""

    codes: tuple[str, ...]
    vectors: np.ndarray

    def __post_init__(self) -> None:
        if len(self.codes) != self.vectors.shape[0]:
            raise ValueError("codes and vectors must align")
        object.__setattr__(self, "index", {c: i for i, c in enumerate(self.codes)})


# --------------------------------------------------------------------------
# feature preparation


def normalize_features(
    hotels: Sequence[HotelFeatureVector], catalog: FeatureCatalog
) -> list[HotelFeatureVector]:
    """Z-score quantity columns with the fitted params; binary columns pass through."""
    if not catalog.fitted:
        raise DataError("catalog scale parameters have not been fitted")
    X = stack(hotels)[:, catalog.columns]
    mean, std = catalog.scale_params[:, 0], catalog.scale_params[:, 1]
    binary = np.array([k == BINARY for k in catalog.kinds])
    Z = np.where(binary, X, (X - mean) / std)
    return [HotelFeatureVector(h.hotel_code, z) for h, z in zip(hotels, Z)]


def fit_pca(X: np.ndarray, out_dim: int = 11) -> PcaModel:
    """Principal axes of ``X`` (rows are samples) from the SVD of the centred data.

    Each component's sign is fixed so its largest-magnitude loading is
    positive, which makes the model deterministic.
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if out_dim < 1 or out_dim > d:
        raise DataError(f"out_dim must be in 1..{d}, got {out_dim}")
    if n < out_dim + 1:
        raise DataError(f"need at least {out_dim + 1} samples for {out_dim} components, got {n}")
    mean = X.mean(axis=0)
    _, s, vt = np.linalg.svd(X - mean, full_matrices=False)
    comps = vt[:out_dim].T.copy()
    var = s[:out_dim] ** 2 / (n - 1)
    pivot = np.abs(comps).argmax(axis=0)
    signs = np.sign(comps[pivot, np.arange(out_dim)])
    comps *= np.where(signs == 0, 1.0, signs)
    return PcaModel(comps, var, mean)


def project(model: PcaModel, vector: np.ndarray) -> np.ndarray:
    """Coordinates of ``vector`` (or each row of a matrix) on the principal axes."""
    v = np.asarray(vector, dtype=float)
    if v.shape[-1] != model.input_dim:
        raise DataError(f"expected vectors of length {model.input_dim}, got {v.shape[-1]}")
    return (v - model.input_mean) @ model.components


def reconstruct(model: PcaModel, reduced: np.ndarray) -> np.ndarray:
    return np.asarray(reduced) @ model.components.T + model.input_mean


def build_profile(user_hotels: Sequence[np.ndarray] | np.ndarray, user_id: str = "") -> UserProfile:
    vectors = np.asarray(user_hotels, dtype=float)
    if vectors.size == 0 or vectors.shape[0] == 0:
        raise DataError(f"user {user_id!r} has no visited hotels with features")
    return UserProfile(user_id, vectors.mean(axis=0))


# --------------------------------------------------------------------------
# k-means


def _sq_dists(X: np.ndarray, C: np.ndarray, chunk: int = 4096) -> np.ndarray:
    out = np.empty((X.shape[0], C.shape[0]))
    for lo in range(0, X.shape[0], chunk):
        diff = X[lo : lo + chunk, None, :] - C[None, :, :]
        out[lo : lo + chunk] = np.einsum("nkd,nkd->nk", diff, diff)
    return out


def _objective(X: np.ndarray, C: np.ndarray, labels: np.ndarray) -> float:
    diff = X - C[labels]
    return float(np.einsum("nd,nd->", diff, diff))


def _centroids(X: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    sums = np.zeros((k, X.shape[1]))
    np.add.at(sums, labels, X)
    counts = np.bincount(labels, minlength=k)
    return sums / counts[:, None]


def _fill_empty(X: np.ndarray, C: np.ndarray, labels: np.ndarray, k: int) -> None:
    for c in np.flatnonzero(np.bincount(labels, minlength=k) == 0):
        resid = ((X - C[labels]) ** 2).sum(axis=1)
        # never strip a cluster of its last member
        resid[np.bincount(labels, minlength=k)[labels] <= 1] = -1.0
        labels[int(np.argmax(resid))] = c


def fit_kmeans(X: np.ndarray, k: int, max_iter: int = 100, seed: int = 0) -> ClusterModel:
    """Lloyd's algorithm seeded with ``k`` distinct points drawn uniformly.

    An emptied cluster is re-seeded with the point farthest from its current
    centroid, which can only lower the objective. ``objective_trace`` records
    the objective after every assignment and every update step.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise DataError(f"k must be in 1..{n}, got {k}")
    rng = np.random.default_rng(seed)
    C = X[np.sort(rng.choice(n, size=k, replace=False))].copy()
    labels = np.argmin(_sq_dists(X, C), axis=1)
    trace = [_objective(X, C, labels)]
    rows = np.arange(n)
    for _ in range(max_iter):
        _fill_empty(X, C, labels, k)
        C = _centroids(X, labels, k)
        trace.append(_objective(X, C, labels))
        d = _sq_dists(X, C)
        new = np.argmin(d, axis=1)
        # keep the current label on exact ties so the fixpoint is reachable
        new = np.where(d[rows, labels] <= d[rows, new], labels, new)
        if np.array_equal(new, labels):
            break
        labels = new
        trace.append(_objective(X, C, labels))
    else:
        _fill_empty(X, C, labels, k)
        C = _centroids(X, labels, k)
        trace.append(_objective(X, C, labels))
        logger.warning("k-means stopped at max_iter=%d before reaching a fixpoint", max_iter)
    return ClusterModel(C, labels, tuple(trace))


# --------------------------------------------------------------------------
# retrieval


def recommend_content(
    profile: UserProfile,
    hotels: HotelSpace,
    clusters: ClusterModel | None = None,
    exclude: Iterable[int] = (),
    n: int = 10,
) -> RankedList:
    """Nearest hotels to the profile, score = -distance.

    With ``clusters`` only members of the centroid nearest to the profile are
    ranked; if that cluster has fewer than ``n`` eligible hotels the shorter
    list comes back with ``truncated`` set.
    """
    p = np.asarray(profile.profile, dtype=float)
    if p.shape != (hotels.vectors.shape[1],):
        raise DataError("profile and hotel vectors live in different spaces")
    if clusters is None:
        diff = hotels.vectors - p
        scores = -np.sqrt(np.einsum("nd,nd->n", diff, diff))
        picked = top_n(scores, n, exclude)
        truncated = picked.size < n
        return make_list(profile.user_id, hotels.codes, scores, picked, "content", truncated)

    members = clusters.members[clusters.nearest(p)]
    diff = hotels.vectors[members] - p
    local = -np.sqrt(np.einsum("nd,nd->n", diff, diff))
    excluded = set(exclude)
    local_ex = [i for i, h in enumerate(members) if int(h) in excluded] if excluded else ()
    # members are sorted ascending, so local index order matches hotel index order
    picked = members[top_n(local, n, local_ex)]
    scores = np.empty(len(hotels.codes))
    scores[members] = local
    return make_list(profile.user_id, hotels.codes, scores, picked, "content", picked.size < n)
