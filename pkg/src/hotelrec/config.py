"""Run configuration: a plain ``key = value`` file overridden by CLI flags.

Keys are dotted (``cf.lambda``, ``content.kmeans_k``, ``bounds.rooms``).
All randomness derives from the root ``seed``: module seeds that are not set
explicitly are ``derive_seed(seed, "<module>")``.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .catalog import Bound
from .errors import HotelRecError


class ConfigError(HotelRecError):
    exit_code = 1


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in str(text).replace(" ", "").split(",") if t)


def _opt_int(text: str) -> int | None:
    return None if str(text).strip().lower() in ("", "none", "auto") else int(text)


# dotted key -> (field name, parser)
KEYS: dict[str, tuple[str, Any]] = {
    "seed": ("seed", int),
    "out": ("out", str),
    "data": ("data", str),
    "scenario.id": ("scenario_id", int),
    "scenario.min_res": ("scenario_min_res", int),
    "scenario.max_res": ("scenario_max_res", int),
    "content.pca_dims": ("pca_dims", int),
    "content.kmeans_k": ("kmeans_k", int),
    "content.mode": ("content_mode", str),
    "content.seed": ("content_seed", _opt_int),
    "content.max_iter": ("kmeans_max_iter", int),
    "cf.latent_dim": ("latent_dim", int),
    "cf.lambda": ("reg", float),
    "cf.sweeps": ("sweeps", int),
    "cf.seed": ("cf_seed", _opt_int),
    "cf.tol": ("tol", float),
    "hybrid.first": ("hybrid_first", str),
    "hybrid.odd_slot": ("hybrid_odd_slot", str),
    "eval.ns": ("ns", _int_list),
    "recommend.n": ("recommend_n", int),
    "engine": ("engine", str),
    "synth.users": ("synth_users", int),
    "synth.hotels": ("synth_hotels", int),
    "synth.feature_dim": ("synth_feature_dim", int),
    "synth.latent_rank": ("synth_latent_rank", int),
    "synth.min_res": ("synth_min_res", int),
    "synth.max_res": ("synth_max_res", int),
    "synth.clusters": ("synth_clusters", int),
    "synth.missing_rate": ("synth_missing_rate", float),
}


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    out: str = "run"
    data: str = ""  # input directory; empty means <out>/data
    scenario_id: int = 0  # 0 = all five
    scenario_min_res: int = 0  # 0 = the scenario table's range
    scenario_max_res: int = 0
    pca_dims: int = 11
    kmeans_k: int = 50
    content_mode: str = "full"
    content_seed: int | None = None
    kmeans_max_iter: int = 100
    latent_dim: int = 20
    reg: float = 0.1
    sweeps: int = 15
    cf_seed: int | None = None
    tol: float = 1e-4
    hybrid_first: str = "content"
    hybrid_odd_slot: str = "content"
    ns: tuple[int, ...] = (5, 10, 100)
    recommend_n: int = 10
    engine: str = "all"
    synth_users: int = 2000
    synth_hotels: int = 300
    synth_feature_dim: int = 24
    synth_latent_rank: int = 5
    synth_min_res: int = 2
    synth_max_res: int = 12
    synth_clusters: int = 8
    synth_missing_rate: float = 0.0
    bounds: Mapping[str, str] = field(default_factory=lambda: {"rooms": ">0"})

    @property
    def out_dir(self) -> Path:
        return Path(self.out)

    @property
    def data_dir(self) -> Path:
        return Path(self.data) if self.data else self.out_dir / "data"

    def scenario_dir(self, sid: int) -> Path:
        return self.out_dir / f"scenario_{sid}"

    @property
    def scenario_ids(self) -> list[int]:
        return [self.scenario_id] if self.scenario_id else [1, 2, 3, 4, 5]

    @property
    def parsed_bounds(self) -> dict[str, Bound]:
        return {k: Bound.parse(v) for k, v in self.bounds.items() if v.strip()}

    @property
    def content_rng_seed(self) -> int:
        return self.content_seed if self.content_seed is not None else derive_seed(self.seed, "content")

    @property
    def cf_rng_seed(self) -> int:
        return self.cf_seed if self.cf_seed is not None else derive_seed(self.seed, "cf")

    def validate(self) -> "RunConfig":
        checks = [
            (0 <= self.scenario_id <= 5, "scenario.id must be 1..5 (0 for all)"),
            (self.scenario_min_res == 0 or self.scenario_min_res >= 2, "scenario.min_res must be >= 2"),
            (self.scenario_max_res == 0 or self.scenario_max_res >= max(2, self.scenario_min_res),
             "scenario.max_res must be >= scenario.min_res"),
            (self.pca_dims >= 1, "content.pca_dims must be >= 1"),
            (self.kmeans_k >= 1, "content.kmeans_k must be >= 1"),
            (self.kmeans_max_iter >= 1, "content.max_iter must be >= 1"),
            (self.content_mode in ("full", "cluster"), "content.mode must be full or cluster"),
            (self.latent_dim >= 1, "cf.latent_dim must be >= 1"),
            (self.reg >= 0, "cf.lambda must be >= 0"),
            (self.sweeps >= 1, "cf.sweeps must be >= 1"),
            (self.tol >= 0, "cf.tol must be >= 0"),
            (self.hybrid_first in ("content", "cf"), "hybrid.first must be content or cf"),
            (self.hybrid_odd_slot in ("content", "cf"), "hybrid.odd_slot must be content or cf"),
            (bool(self.ns) and min(self.ns) >= 1, "eval.ns must be positive integers"),
            (self.recommend_n >= 1, "recommend.n must be >= 1"),
            (self.synth_users >= 1, "synth.users must be >= 1"),
            (self.synth_hotels >= 1, "synth.hotels must be >= 1"),
            (self.synth_feature_dim >= 1, "synth.feature_dim must be >= 1"),
            (1 <= self.synth_latent_rank, "synth.latent_rank must be >= 1"),
            (2 <= self.synth_min_res <= self.synth_max_res, "synth needs 2 <= min_res <= max_res"),
            (self.synth_clusters >= 1, "synth.clusters must be >= 1"),
            (0 <= self.synth_missing_rate < 1, "synth.missing_rate must be in [0, 1)"),
        ]
        problems = [msg for ok, msg in checks if not ok]
        try:
            self.parsed_bounds
        except ValueError as exc:
            problems.append(str(exc))
        if problems:
            raise ConfigError("; ".join(problems))
        return self


def derive_seed(root: int, name: str) -> int:
    """Stable per-module seed from the root seed and a module name."""
    seq = np.random.SeedSequence([root & 0xFFFFFFFF, zlib.crc32(name.encode())])
    return int(seq.generate_state(1, dtype=np.uint32)[0])


def apply(config: RunConfig, values: Mapping[str, str]) -> RunConfig:
    """Return ``config`` with dotted-key string ``values`` parsed and applied."""
    changes: dict[str, Any] = {}
    bounds = dict(config.bounds)
    for key, raw in values.items():
        if key.startswith("bounds."):
            bounds[key[len("bounds."):]] = str(raw)
            continue
        if key not in KEYS:
            raise ConfigError(f"unknown configuration key {key!r}")
        name, parse = KEYS[key]
        try:
            changes[name] = parse(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return replace(config, bounds=bounds, **changes)


def read_config_file(path: Path) -> dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key] = value
    return values


def load(path: Path | None = None, overrides: Mapping[str, str] | None = None) -> RunConfig:
    config = RunConfig()
    if path is not None:
        config = apply(config, read_config_file(path))
    if overrides:
        config = apply(config, overrides)
    return config.validate()
