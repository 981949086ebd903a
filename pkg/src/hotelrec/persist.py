"""On-disk formats for fitted models.

CSV files store floats with ``repr`` so they read back bit-identically.

``als.bin`` layout (little-endian, no padding)::

    offset  size   type  field
    0       4      char  magic "HALS"
    4       4      u32   format version (1)
    8       8      u64   m  (user rows)
    16      8      u64   u  (hotel columns)
    24      4      u32   k  (latent dimension)
    28      8      f64   lambda (regularisation)
    36      8      i64   seed
    44      4      u32   sweeps
    48      8      f64   tol
    56      8*m*k  f64   P, row-major (m x k)
    ...     8*k*u  f64   Q, row-major (k x u)

User and hotel ids for the rows/columns live beside it in
``als_users.csv`` / ``als_hotels.csv`` (``index,id``).
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .catalog import Bound, FeatureCatalog
from .cf import AlsConfig, FactorModel, LossPoint
from .content import ClusterModel, HotelSpace, PcaModel
from .errors import DataError

ALS_MAGIC = b"HALS"
ALS_VERSION = 1
_HEADER = struct.Struct("<4sIQQIdqId")


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def _rows(path: Path) -> Iterable[list[str]]:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            yield from csv.reader(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


# --------------------------------------------------------------------------
# long-format numeric tables: field,i,j,value


def _write_long(path: Path, blocks: Sequence[tuple[str, np.ndarray]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(("field", "i", "j", "value"))
        for name, arr in blocks:
            arr = np.asarray(arr, dtype=float)
            if arr.ndim == 1:
                arr = arr[:, None]
            for i, row in enumerate(arr):
                for j, v in enumerate(row):
                    w.writerow((name, i, j, repr(float(v))))


def _read_long(path: Path) -> dict[str, np.ndarray]:
    cells: dict[str, dict[tuple[int, int], float]] = {}
    rows = iter(_rows(path))
    if next(rows, None) != ["field", "i", "j", "value"]:
        raise DataError(f"{path}: unexpected header")
    try:
        for name, i, j, v in rows:
            cells.setdefault(name, {})[(int(i), int(j))] = float(v)
    except ValueError as exc:
        raise DataError(f"{path}: malformed row ({exc})") from exc
    out = {}
    for name, entries in cells.items():
        shape = (max(i for i, _ in entries) + 1, max(j for _, j in entries) + 1)
        arr = np.empty(shape)
        for (i, j), v in entries.items():
            arr[i, j] = v
        out[name] = arr
    return out


def save_pca(path: Path, model: PcaModel) -> None:
    _write_long(
        path,
        [
            ("component", model.components),
            ("variance", model.explained_variance),
            ("mean", model.input_mean),
        ],
    )


def load_pca(path: Path) -> PcaModel:
    t = _read_long(path)
    return PcaModel(t["component"], t["variance"][:, 0], t["mean"][:, 0])


def save_kmeans(path: Path, model: ClusterModel) -> None:
    _write_long(path, [("centroid", model.centroids), ("assignment", model.assignment.astype(float))])


def load_kmeans(path: Path) -> ClusterModel:
    t = _read_long(path)
    return ClusterModel(t["centroid"], t["assignment"][:, 0].astype(np.intp))


def save_space(path: Path, space: HotelSpace) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["hotel_code", *(f"c{j}" for j in range(space.vectors.shape[1]))])
        for code, row in zip(space.codes, space.vectors):
            w.writerow([code, *(repr(float(v)) for v in row)])


def load_space(path: Path) -> HotelSpace:
    rows = iter(_rows(path))
    header = next(rows, None)
    if not header or header[0] != "hotel_code":
        raise DataError(f"{path}: unexpected header")
    codes, vecs = [], []
    try:
        for row in rows:
            codes.append(row[0])
            vecs.append([float(v) for v in row[1:]])
    except ValueError as exc:
        raise DataError(f"{path}: malformed row ({exc})") from exc
    return HotelSpace(tuple(codes), np.array(vecs, dtype=float).reshape(len(codes), len(header) - 1))


def save_catalog(path: Path, catalog: FeatureCatalog) -> None:
    """One row per raw column: ``name,kind,retained,mean,std,bound``."""
    kept = {n: i for i, n in enumerate(catalog.names)}
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(("name", "kind", "retained", "mean", "std", "bound"))
        for name in catalog.input_names:
            b = catalog.bounds.get(name)
            bound = ""
            if b is not None:
                parts = []
                if b.low is not None:
                    parts.append((">=" if b.low_inclusive else ">") + repr(b.low))
                if b.high is not None:
                    parts.append(("<=" if b.high_inclusive else "<") + repr(b.high))
                bound = ",".join(parts)
            if name in kept and catalog.scale_params is not None:
                i = kept[name]
                mean, std = catalog.scale_params[i]
                w.writerow((name, catalog.kinds[i], 1, repr(float(mean)), repr(float(std)), bound))
            else:
                w.writerow((name, "", 0, "", "", bound))


def load_catalog(path: Path) -> FeatureCatalog:
    rows = iter(_rows(path))
    next(rows, None)
    input_names, names, kinds, params, bounds = [], [], [], [], {}
    for name, kind, retained, mean, std, bound in rows:
        input_names.append(name)
        if bound:
            bounds[name] = Bound.parse(bound)
        if retained == "1":
            names.append(name)
            kinds.append(kind)
            params.append((float(mean), float(std)))
    return FeatureCatalog(
        tuple(input_names), tuple(kinds), bounds, tuple(names), np.array(params, dtype=float)
    )


# --------------------------------------------------------------------------
# ALS factors


def _write_ids(path: Path, ids: Sequence[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(("index", "id"))
        w.writerows(enumerate(ids))


def _read_ids(path: Path) -> tuple[str, ...]:
    rows = iter(_rows(path))
    next(rows, None)
    return tuple(r[1] for r in rows)


def read_als_header(path: Path) -> dict:
    try:
        with open(path, "rb") as fh:
            raw = fh.read(_HEADER.size)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if len(raw) < _HEADER.size:
        raise DataError(f"{path}: truncated header")
    magic, version, m, u, k, lam, seed, sweeps, tol = _HEADER.unpack(raw)
    if magic != ALS_MAGIC or version != ALS_VERSION:
        raise DataError(f"{path}: not an ALS model file (v{ALS_VERSION})")
    return {"m": m, "u": u, "k": k, "lambda": lam, "seed": seed, "sweeps": sweeps, "tol": tol}


def save_factors(directory: Path, model: FactorModel) -> None:
    c = model.config
    header = _HEADER.pack(ALS_MAGIC, ALS_VERSION, model.m, model.u, model.k, c.reg, c.seed, c.sweeps, c.tol)
    with open(directory / "als.bin", "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(model.P, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.Q, dtype="<f8").tobytes())
    _write_ids(directory / "als_users.csv", model.user_ids)
    _write_ids(directory / "als_hotels.csv", model.hotel_codes)


def load_factors(directory: Path) -> FactorModel:
    path = directory / "als.bin"
    h = read_als_header(path)
    m, u, k = h["m"], h["u"], h["k"]
    data = np.fromfile(path, dtype="<f8", offset=_HEADER.size)
    if data.size != m * k + k * u:
        raise DataError(f"{path}: expected {m * k + k * u} factor values, found {data.size}")
    P = data[: m * k].reshape(m, k).astype(float)
    Q = data[m * k :].reshape(k, u).astype(float)
    config = AlsConfig(latent_dim=k, reg=h["lambda"], sweeps=h["sweeps"], seed=h["seed"], tol=h["tol"])
    users = _read_ids(directory / "als_users.csv")
    hotels = _read_ids(directory / "als_hotels.csv")
    # models fitted on a bare matrix carry no ids; their id files are empty
    if len(users) not in (0, m) or len(hotels) not in (0, u):
        raise DataError(f"{directory}: id files do not match the factor dimensions")
    return FactorModel(P, Q, config, users, hotels)


def write_loss_trace(path: Path, trace: Iterable[LossPoint]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(("sweep", "side", "loss"))
        for p in trace:
            w.writerow((p.sweep, p.side, repr(p.loss)))
