"""Collaborative filtering by regularised alternating least squares.

The visit-count matrix R (users x hotels) is approximated as P @ Q with
P: m x k and Q: k x u. The objective counts observed entries only::

    sum_{(i,j) observed} (R_ij - P_i . Q_:j)^2 + reg * (|P|^2 + |Q|^2)

Each half-sweep fixes one side and solves every row of the other side
exactly, so the objective never increases.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, NamedTuple, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .catalog import InteractionMatrix
from .errors import DataError, NumericalError, UnknownUserError
from .ranking import RankedList, make_list, top_n

logger = logging.getLogger(__name__)

USERS = "users"
HOTELS = "hotels"

# monotonicity slack relative to the loss magnitude, for float round-off only
_MONOTONE_RTOL = 1e-9


@dataclass(frozen=True)
class AlsConfig:
    latent_dim: int = 20
    reg: float = 0.1
    sweeps: int = 15
    seed: int = 0
    tol: float = 1e-4

    def __post_init__(self) -> None:
        if self.latent_dim < 1:
            raise ValueError("latent_dim must be >= 1")
        if not self.reg >= 0:
            raise ValueError("reg must be >= 0")
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")


@dataclass(frozen=True, eq=False)
class FactorModel:
    P: np.ndarray  # m x k user factors
    Q: np.ndarray  # k x u hotel factors
    config: AlsConfig
    user_ids: tuple[str, ...] = ()
    hotel_codes: tuple[str, ...] = ()
    pinv_rows: int = 0  # rows solved by pseudo-inverse (singular normal equations)
    user_index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.P.shape[1] != self.Q.shape[0]:
            raise ValueError("P and Q disagree on the latent dimension")
        object.__setattr__(self, "user_index", {u: i for i, u in enumerate(self.user_ids)})

    @property
    def m(self) -> int:
        return self.P.shape[0]

    @property
    def u(self) -> int:
        return self.Q.shape[1]

    @property
    def k(self) -> int:
        return self.P.shape[1]


class LossPoint(NamedTuple):
    sweep: int
    side: str
    loss: float


def _csr(r: InteractionMatrix | sp.spmatrix | np.ndarray) -> sp.csr_matrix:
    if isinstance(r, InteractionMatrix):
        r = r.counts
    m = sp.csr_matrix(r, dtype=float)
    m.sum_duplicates()
    m.sort_indices()
    return m


def init_factors(
    m: int,
    u: int,
    config: AlsConfig,
    user_ids: Sequence[str] = (),
    hotel_codes: Sequence[str] = (),
) -> FactorModel:
    """Uniform draws in [0, 1/sqrt(k)); P is drawn before Q from one seeded stream."""
    if m < 1 or u < 1:
        raise DataError("factor matrices need at least one row and column")
    rng = np.random.default_rng(config.seed)
    hi = 1.0 / math.sqrt(config.latent_dim)
    P = rng.uniform(0.0, hi, size=(m, config.latent_dim))
    Q = rng.uniform(0.0, hi, size=(config.latent_dim, u))
    return FactorModel(P, Q, config, tuple(user_ids), tuple(hotel_codes))


def loss(model: FactorModel, r) -> float:
    R = _csr(r).tocoo()
    pred = np.einsum("nk,kn->n", model.P[R.row], model.Q[:, R.col])
    resid = R.data - pred
    reg = model.config.reg
    return float(resid @ resid + reg * (np.sum(model.P**2) + np.sum(model.Q**2)))


def _solve_rows(
    R: sp.csr_matrix, fixed: np.ndarray, current: np.ndarray, reg: float, chunk_nnz: int = 1 << 16
) -> tuple[np.ndarray, int]:
    """Ridge-solve every non-empty row of ``R`` against the fixed factors.

    ``fixed`` is (n_cols x k); returns the updated (n_rows x k) matrix and the
    number of rows that needed a pseudo-inverse.
    """
    k = fixed.shape[1]
    out = current.copy()
    nnz_per_row = np.diff(R.indptr)
    rows = np.flatnonzero(nnz_per_row)
    eye = reg * np.eye(k)
    pinv = 0
    lo = 0
    while lo < rows.size:
        # grow the chunk until its nonzeros hit the budget (at least one row)
        hi = lo + 1
        budget = nnz_per_row[rows[lo]]
        while hi < rows.size and budget + nnz_per_row[rows[hi]] <= chunk_nnz:
            budget += nnz_per_row[rows[hi]]
            hi += 1
        block = rows[lo:hi]
        start, stop = R.indptr[block[0]], R.indptr[block[-1] + 1]
        G = fixed[R.indices[start:stop]]
        vals = R.data[start:stop]
        offsets = R.indptr[block] - start
        grams = np.add.reduceat(G[:, :, None] * G[:, None, :], offsets, axis=0)
        rhs = np.add.reduceat(G * vals[:, None], offsets, axis=0)
        for row, A, b in zip(block, grams, rhs):
            A = A + eye
            try:
                out[row] = sla.cho_solve(sla.cho_factor(A, check_finite=False), b, check_finite=False)
            except np.linalg.LinAlgError:
                out[row] = np.linalg.pinv(A, hermitian=True) @ b
                pinv += 1
        lo = hi
    return out, pinv


def als_sweep(model: FactorModel, r, side: str) -> FactorModel:
    """One half-sweep: re-solve ``side`` (``"users"`` or ``"hotels"``) with the other fixed.

    Rows without observations keep their current factors.
    """
    R = _csr(r)
    if R.shape != (model.m, model.u):
        raise DataError(f"matrix shape {R.shape} does not match model ({model.m}, {model.u})")
    reg = model.config.reg
    if side == USERS:
        P, n = _solve_rows(R, model.Q.T, model.P, reg)
        new = replace(model, P=P, pinv_rows=model.pinv_rows + n)
    elif side == HOTELS:
        Qt, n = _solve_rows(R.T.tocsr(), model.P, model.Q.T, reg)
        new = replace(model, Q=np.ascontiguousarray(Qt.T), pinv_rows=model.pinv_rows + n)
    else:
        raise ValueError(f"side must be {USERS!r} or {HOTELS!r}")
    if n:
        logger.warning("%d %s rows had singular normal equations; used pseudo-inverse", n, side)
    return new


def fit(
    r, config: AlsConfig | None = None, model: FactorModel | None = None
) -> tuple[FactorModel, list[LossPoint]]:
    """Alternate user/hotel half-sweeps for ``config.sweeps`` rounds.

    Stops early once a full sweep improves the loss by less than
    ``config.tol`` (relative). Raises :class:`NumericalError` on a non-finite
    loss or a loss increase beyond round-off.
    """
    config = config or AlsConfig()
    R = _csr(r)
    if R.nnz == 0:
        raise DataError("cannot factorise an empty interaction matrix")
    if model is None:
        ids = (r.user_ids, r.hotel_codes) if isinstance(r, InteractionMatrix) else ((), ())
        model = init_factors(R.shape[0], R.shape[1], config, *ids)
    trace = [LossPoint(0, "init", loss(model, R))]
    for sweep in range(1, config.sweeps + 1):
        before = trace[-1].loss
        for side in (USERS, HOTELS):
            model = als_sweep(model, R, side)
            value = loss(model, R)
            prev = trace[-1].loss
            trace.append(LossPoint(sweep, side, value))
            if not math.isfinite(value):
                raise NumericalError(f"non-finite loss at sweep {sweep} ({side}): {value}")
            if value > prev + _MONOTONE_RTOL * max(1.0, abs(prev)):
                raise NumericalError(
                    f"loss increased at sweep {sweep} ({side}): {prev!r} -> {value!r}"
                )
        if config.tol > 0 and before - trace[-1].loss < config.tol * abs(before):
            logger.debug("ALS converged after %d sweeps", sweep)
            break
    return model, trace


def predict_row(model: FactorModel, user_id: str) -> np.ndarray:
    i = model.user_index.get(user_id)
    if i is None:
        raise UnknownUserError(f"user {user_id!r} is not in the factor model")
    return model.P[i] @ model.Q


def recommend_cf(
    model: FactorModel, user_id: str, exclude: Iterable[int] = (), n: int = 10
) -> RankedList:
    """Top-n hotels by the user's predicted row, min-max scaled to [0, 1]."""
    row = predict_row(model, user_id)
    lo, hi = row.min(), row.max()
    scores = (row - lo) / (hi - lo) if hi > lo else np.zeros_like(row)
    picked = top_n(scores, n, exclude)
    codes = model.hotel_codes or tuple(str(j) for j in range(model.u))
    return make_list(user_id, codes, scores, picked, "cf", picked.size < n)
