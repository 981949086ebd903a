"""Reservation and hotel-feature ingestion.

Reads the two input tables, applies the cleaning rules (mean imputation,
plausibility bounds) and builds the sparse user x hotel visit-count matrix.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import re
from dataclasses import dataclass, field, replace
from datetime import date
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DataError

logger = logging.getLogger(__name__)

RESERVATION_HEADER = ("user_id", "hotel_code", "date")
BINARY = "binary"
QUANTITY = "quantity"


@dataclass(frozen=True)
class ReservationRecord:
    user_id: str
    hotel_code: str
    date: date

    def __post_init__(self) -> None:
        if not self.user_id or not self.hotel_code:
            raise ValueError("user_id and hotel_code must be non-empty")


@dataclass(frozen=True)
class Reject:
    line: int
    reason: str


@dataclass(eq=False)
class HotelFeatureVector:
    hotel_code: str
    features: np.ndarray

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, HotelFeatureVector):
            return NotImplemented
        return self.hotel_code == other.hotel_code and np.array_equal(
            self.features, other.features, equal_nan=True
        )


@dataclass(frozen=True)
class Bound:
    """Plausibility interval for one quantity feature; ``None`` means open."""

    low: float | None = None
    high: float | None = None
    low_inclusive: bool = False
    high_inclusive: bool = False

    _TERM = re.compile(r"^\s*(>=|<=|>|<)\s*([-+0-9.eE]+)\s*$")

    @classmethod
    def parse(cls, text: str) -> "Bound":
        """Parse ``">0"``, ``">=1,<=5000"`` and similar."""
        kw: dict = {}
        for term in text.split(","):
            m = cls._TERM.match(term)
            if not m:
                raise ValueError(f"bad bound expression: {text!r}")
            op, value = m.group(1), float(m.group(2))
            if op.startswith(">"):
                kw.update(low=value, low_inclusive=op == ">=")
            else:
                kw.update(high=value, high_inclusive=op == "<=")
        return cls(**kw)

    def admits(self, x: float) -> bool:
        if math.isnan(x):
            return True
        if self.low is not None and (x < self.low or (x == self.low and not self.low_inclusive)):
            return False
        if self.high is not None and (x > self.high or (x == self.high and not self.high_inclusive)):
            return False
        return True


@dataclass(frozen=True)
class FeatureCatalog:
    """Feature-space metadata.

    ``input_names`` is the raw column order of hotels.csv. After
    :func:`fit_scaling`, ``names``/``kinds`` list only the retained
    (non-constant) columns and ``scale_params`` holds one ``(mean, std)`` row
    per retained column.
    """

    input_names: tuple[str, ...]
    kinds: tuple[str, ...]
    bounds: Mapping[str, Bound] = field(default_factory=dict)
    names: tuple[str, ...] = ()
    scale_params: np.ndarray | None = None

    def __post_init__(self) -> None:
        if not self.names:
            object.__setattr__(self, "names", tuple(self.input_names))
        if len(set(self.input_names)) != len(self.input_names):
            raise DataError("feature names must be unique")
        if len(self.kinds) != len(self.names):
            raise DataError("kinds must align with names")
        if self.scale_params is not None:
            if self.scale_params.shape != (len(self.names), 2):
                raise DataError("scale_params must align with names")
            if not np.all(self.scale_params[:, 1] > 0):
                raise DataError("scale stddevs must be strictly positive")

    @property
    def fitted(self) -> bool:
        return self.scale_params is not None

    @property
    def columns(self) -> list[int]:
        """Positions of the retained features within the raw column order."""
        pos = {n: i for i, n in enumerate(self.input_names)}
        return [pos[n] for n in self.names]


# --------------------------------------------------------------------------
# parsing


def _text(source: IO[bytes]) -> io.TextIOWrapper:
    return io.TextIOWrapper(source, encoding="utf-8", newline="")


def parse_reservations(source: IO[bytes]) -> tuple[list[ReservationRecord], list[Reject]]:
    """Parse a reservations CSV byte stream.

    Malformed rows are returned as rejects with their 1-based line number
    (the header is line 1); structural problems with the stream itself raise
    :class:`DataError`.
    """
    records: list[ReservationRecord] = []
    rejects: list[Reject] = []
    try:
        reader = csv.reader(_text(source))
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != RESERVATION_HEADER:
            raise DataError(f"reservations header must be {','.join(RESERVATION_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                rejects.append(Reject(lineno, f"expected 3 fields, got {len(row)}"))
                continue
            user, hotel, day = (c.strip() for c in row)
            if not user:
                rejects.append(Reject(lineno, "empty user_id"))
                continue
            if not hotel:
                rejects.append(Reject(lineno, "empty hotel_code"))
                continue
            try:
                when = date.fromisoformat(day)
            except ValueError:
                rejects.append(Reject(lineno, f"invalid date {day!r}"))
                continue
            records.append(ReservationRecord(user, hotel, when))
    except (UnicodeDecodeError, csv.Error) as exc:
        raise DataError(f"unreadable reservations stream: {exc}") from exc
    return records, rejects


def parse_hotels(source: IO[bytes]) -> tuple[list[str], list[HotelFeatureVector], list[Reject]]:
    """Parse hotels.csv into ``(feature_names, hotels, rejects)``; empty cells become NaN."""
    hotels: list[HotelFeatureVector] = []
    rejects: list[Reject] = []
    seen: set[str] = set()
    try:
        reader = csv.reader(_text(source))
        header = next(reader, None)
        if not header or header[0].strip() != "hotel_code" or len(header) < 2:
            raise DataError("hotels header must be hotel_code,<feature_1>,...")
        names = [h.strip() for h in header[1:]]
        width = len(header)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                rejects.append(Reject(lineno, f"expected {width} fields, got {len(row)}"))
                continue
            code = row[0].strip()
            if not code:
                rejects.append(Reject(lineno, "empty hotel_code"))
                continue
            if code in seen:
                rejects.append(Reject(lineno, f"duplicate hotel_code {code}"))
                continue
            try:
                values = np.array(
                    [float(c) if c.strip() else math.nan for c in row[1:]], dtype=float
                )
            except ValueError:
                rejects.append(Reject(lineno, "non-numeric feature cell"))
                continue
            if np.isinf(values).any():
                rejects.append(Reject(lineno, "infinite feature value"))
                continue
            seen.add(code)
            hotels.append(HotelFeatureVector(code, values))
    except (UnicodeDecodeError, csv.Error) as exc:
        raise DataError(f"unreadable hotels stream: {exc}") from exc
    return names, hotels, rejects


def read_reservations(path: Path) -> tuple[list[ReservationRecord], list[Reject]]:
    try:
        with open(path, "rb") as fh:
            return parse_reservations(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def read_hotels(path: Path) -> tuple[list[str], list[HotelFeatureVector], list[Reject]]:
    try:
        with open(path, "rb") as fh:
            return parse_hotels(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def write_reservations(path: Path, records: Iterable[ReservationRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESERVATION_HEADER)
        for r in records:
            w.writerow((r.user_id, r.hotel_code, r.date.isoformat()))


def write_hotels(path: Path, names: Sequence[str], hotels: Iterable[HotelFeatureVector]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["hotel_code", *names])
        for h in hotels:
            w.writerow([h.hotel_code, *("" if math.isnan(v) else repr(float(v)) for v in h.features)])


def write_rejects(path: Path, rejects: Iterable[Reject]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("line", "reason"))
        for r in rejects:
            w.writerow((r.line, r.reason))


# --------------------------------------------------------------------------
# cleaning and scaling


def infer_kinds(names: Sequence[str], hotels: Sequence[HotelFeatureVector]) -> tuple[str, ...]:
    """Tag a column binary when every observed value is 0 or 1."""
    X = stack(hotels)
    kinds = []
    for j in range(len(names)):
        col = X[:, j]
        col = col[~np.isnan(col)]
        kinds.append(BINARY if col.size and np.isin(col, (0.0, 1.0)).all() else QUANTITY)
    return tuple(kinds)


def make_catalog(
    names: Sequence[str],
    hotels: Sequence[HotelFeatureVector],
    bounds: Mapping[str, Bound] | None = None,
) -> FeatureCatalog:
    bounds = dict(bounds or {})
    unknown = set(bounds) - set(names)
    if unknown:
        raise DataError(f"bounds for unknown features: {sorted(unknown)}")
    return FeatureCatalog(tuple(names), infer_kinds(names, hotels), bounds)


def stack(hotels: Sequence[HotelFeatureVector]) -> np.ndarray:
    if not hotels:
        return np.empty((0, 0))
    return np.vstack([h.features for h in hotels]).astype(float, copy=False)


def clean_hotels(
    raw: Sequence[HotelFeatureVector], catalog: FeatureCatalog
) -> list[HotelFeatureVector]:
    """Drop implausible rows, then fill missing cells with the column mean of the survivors."""
    width = len(catalog.input_names)
    for h in raw:
        if h.features.shape != (width,):
            raise DataError(f"hotel {h.hotel_code} has {h.features.size} features, expected {width}")
    bounded = [(catalog.input_names.index(n), b) for n, b in catalog.bounds.items()]
    kept = [h for h in raw if all(b.admits(float(h.features[j])) for j, b in bounded)]
    dropped = len(raw) - len(kept)
    if dropped:
        logger.info("dropped %d hotels violating plausibility bounds", dropped)
    if not kept:
        raise DataError("no hotels left after cleaning")
    X = stack(kept)
    missing = np.isnan(X)
    if not missing.any():
        return kept
    observed = ~missing
    n_obs = observed.sum(axis=0)
    sums = np.where(observed, X, 0.0).sum(axis=0)
    means = np.divide(sums, n_obs, out=np.zeros(width), where=n_obs > 0)
    out = []
    for h, row_missing in zip(kept, missing):
        if row_missing.any():
            h = HotelFeatureVector(h.hotel_code, np.where(row_missing, means, h.features))
        out.append(h)
    return out


def fit_scaling(hotels: Sequence[HotelFeatureVector], catalog: FeatureCatalog) -> FeatureCatalog:
    """Fit per-column (mean, std) on cleaned hotels, dropping constant columns."""
    X = stack(hotels)[:, catalog.columns]
    if np.isnan(X).any():
        raise DataError("fit_scaling requires cleaned (NaN-free) hotels")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    keep = std > 0
    if not keep.any():
        raise DataError("every feature column is constant")
    names = tuple(n for n, k in zip(catalog.names, keep) if k)
    kinds = tuple(t for t, k in zip(catalog.kinds, keep) if k)
    if not keep.all():
        logger.info("dropping %d constant feature columns", int((~keep).sum()))
    params = np.column_stack([mean[keep], std[keep]])
    return replace(catalog, names=names, kinds=kinds, scale_params=params)


# --------------------------------------------------------------------------
# interaction matrix


@dataclass(frozen=True, eq=False)
class InteractionMatrix:
    """Sparse user x hotel visit counts with id<->index maps.

    Users and hotels are indexed in sorted id order, which makes the matrix
    independent of record order.
    """

    counts: sp.csr_matrix
    user_ids: tuple[str, ...]
    hotel_codes: tuple[str, ...]
    user_index: dict[str, int]
    hotel_index: dict[str, int]

    @property
    def m(self) -> int:
        return len(self.user_ids)

    @property
    def u(self) -> int:
        return len(self.hotel_codes)

    @property
    def entries(self) -> dict[tuple[str, str], int]:
        coo = self.counts.tocoo()
        return {
            (self.user_ids[i], self.hotel_codes[j]): int(v)
            for i, j, v in zip(coo.row, coo.col, coo.data)
        }

    def row_hotels(self, user_index: int) -> np.ndarray:
        lo, hi = self.counts.indptr[user_index], self.counts.indptr[user_index + 1]
        return self.counts.indices[lo:hi]


def build_interactions(
    records: Sequence[ReservationRecord], hotels: Iterable[str] = ()
) -> InteractionMatrix:
    """Tally (user, hotel) stays into a sparse count matrix.

    ``hotels`` optionally widens the column universe (e.g. catalog hotels
    with no training stays), giving them empty columns.
    """
    if not records:
        raise DataError("cannot build an interaction matrix from zero records")
    user_ids = tuple(sorted({r.user_id for r in records}))
    hotel_codes = tuple(sorted({r.hotel_code for r in records} | set(hotels)))
    uidx = {k: i for i, k in enumerate(user_ids)}
    hidx = {k: i for i, k in enumerate(hotel_codes)}
    rows = np.fromiter((uidx[r.user_id] for r in records), dtype=np.int64, count=len(records))
    cols = np.fromiter((hidx[r.hotel_code] for r in records), dtype=np.int64, count=len(records))
    counts = sp.coo_matrix(
        (np.ones(len(records), dtype=np.int64), (rows, cols)),
        shape=(len(user_ids), len(hotel_codes)),
    ).tocsr()
    counts.sum_duplicates()
    counts.sort_indices()
    return InteractionMatrix(counts, user_ids, hotel_codes, uidx, hidx)
