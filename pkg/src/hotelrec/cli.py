"""Command-line entry point: synth, split, train, recommend, evaluate, pipeline.

Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from . import config as cfg
from .catalog import read_hotels, read_reservations, write_rejects
from .config import ConfigError, RunConfig
from .errors import HotelRecError, UnknownUserError
from .evaluation import ENGINES, emit_report, evaluate_scenario
from .pipeline import RECOMMEND_ENGINES, Engines, load_models, save_models, train, user_training_hotels
from .scenario import SCENARIOS, ScenarioSpec, TestRule, load_split, materialize_scenario, save_split
from .synth import SynthSpec, generate, write_corpus

logger = logging.getLogger("hotelrec")

RECOMMENDATION_HEADER = ("user_id", "rank", "hotel_code", "score", "source", "engine")


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# flags that are shorthands for dotted keys
_ALIASES = {
    "--seed": "seed",
    "--out": "out",
    "--data": "data",
    "--scenario": "scenario.id",
    "--engine": "engine",
    "--users": "synth.users",
    "--hotels": "synth.hotels",
}


def _common() -> argparse.ArgumentParser:
    # SUPPRESS defaults so flags given before the subcommand survive the subparser
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    p.add_argument("--config", type=Path, help="key = value configuration file")
    p.add_argument("--n", dest="n_list", help="list length(s), e.g. 10 or 5,10,100")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any configuration key")
    p.add_argument("-v", "--verbose", action="count")
    for flag, key in _ALIASES.items():
        p.add_argument(flag, dest=key, help=f"same as --{key}")
    for key in cfg.KEYS:
        if f"--{key}" not in _ALIASES:
            p.add_argument(f"--{key}", dest=key, help=argparse.SUPPRESS)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="hotelrec", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("synth", parents=[common], help="generate a synthetic corpus")
    sub.add_parser("split", parents=[common], help="materialise train/test scenarios")
    sub.add_parser("train", parents=[common], help="fit PCA, k-means and ALS per scenario")
    rec = sub.add_parser("recommend", parents=[common], help="write top-N lists")
    rec.add_argument("users", nargs="*", help="user ids (or --all)")
    rec.add_argument("--all", action="store_true", help="every training user of the scenario")
    sub.add_parser("evaluate", parents=[common], help="recall@N report over scenarios and engines")
    sub.add_parser("pipeline", parents=[common], help="synth, split, train, recommend --all, evaluate")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    overrides: dict[str, str] = {}
    for item in getattr(args, "set", []):
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    for key in cfg.KEYS:
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    n_list = getattr(args, "n_list", None)
    if n_list:
        try:
            ns = cfg._int_list(n_list)
        except ValueError as exc:
            raise ConfigError(f"bad --n value {n_list!r}") from exc
        if not ns:
            raise ConfigError("--n needs at least one integer")
        overrides["eval.ns"] = n_list
        overrides["recommend.n"] = str(max(ns))
    return cfg.load(getattr(args, "config", None), overrides)


# --------------------------------------------------------------------------
# commands


def cmd_synth(config: RunConfig) -> None:
    spec = SynthSpec(
        users=config.synth_users,
        hotels=config.synth_hotels,
        feature_dim=config.synth_feature_dim,
        latent_rank=config.synth_latent_rank,
        reservations_per_user=(config.synth_min_res, config.synth_max_res),
        cluster_count=config.synth_clusters,
        seed=cfg.derive_seed(config.seed, "synth"),
        missing_rate=config.synth_missing_rate,
    )
    corpus = generate(spec)
    write_corpus(corpus, config.data_dir)
    logger.info("wrote %d reservations for %d users to %s", len(corpus.reservations), spec.users, config.data_dir)


def _scenario_spec(config: RunConfig, sid: int) -> ScenarioSpec:
    spec = SCENARIOS[sid]
    if config.scenario_min_res or config.scenario_max_res:
        spec = replace(
            spec,
            min_res=config.scenario_min_res or spec.min_res,
            max_res=config.scenario_max_res or spec.max_res,
        )
    return spec


def cmd_split(config: RunConfig) -> None:
    records, rejects = read_reservations(config.data_dir / "reservations.csv")
    config.out_dir.mkdir(parents=True, exist_ok=True)
    write_rejects(config.out_dir / "rejects.csv", rejects)
    if rejects:
        logger.warning("%d malformed reservation rows rejected (see rejects.csv)", len(rejects))
    done = {}
    for sid in config.scenario_ids:
        spec = _scenario_spec(config, sid)
        prior = None
        if spec.test_rule is TestRule.BORROW:
            prior = done.get(spec.borrow_from)
            if prior is None:
                prior = load_split(config.scenario_dir(spec.borrow_from), spec.borrow_from)
        split = materialize_scenario(spec, records, prior)
        save_split(split, config.scenario_dir(sid))
        done[sid] = split
        s = split.stats
        logger.info("scenario %d: %d hotels, %d train records, %d train users, %d test records",
                    sid, s.hotels, s.train_records, s.train_users, s.test_records)


def cmd_train(config: RunConfig) -> None:
    names, hotels, rejects = read_hotels(config.data_dir / "hotels.csv")
    if rejects:
        logger.warning("%d malformed hotel rows rejected", len(rejects))
    for sid in config.scenario_ids:
        split = load_split(config.scenario_dir(sid), sid)
        models = train(split.train, names, hotels, config)
        save_models(models, config.scenario_dir(sid) / "model")
        logger.info("scenario %d: trained; final ALS loss %.6g", sid, models.loss_trace[-1].loss)


def _engine_names(config: RunConfig, available: Sequence[str]) -> list[str]:
    if config.engine == "all":
        return list(available)
    names = [e.strip() for e in config.engine.split(",")]
    unknown = [e for e in names if e not in available]
    if unknown:
        raise ConfigError(f"unknown engine(s) {unknown}; choose from {', '.join(available)}")
    return names


def cmd_recommend(config: RunConfig, users: Sequence[str] = (), all_users: bool = False) -> None:
    if not users and not all_users:
        raise ConfigError("recommend needs user ids or --all")
    engines_wanted = _engine_names(config, RECOMMEND_ENGINES + ENGINES[3:])
    for sid in config.scenario_ids:
        sdir = config.scenario_dir(sid)
        split = load_split(sdir, sid)
        engines = Engines(load_models(sdir / "model"), split.train, config)
        visited = user_training_hotels(split.train)
        targets = sorted(visited) if all_users else list(users)
        errors = 0
        with open(sdir / "recommendations.csv", "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RECOMMENDATION_HEADER)
            for name in engines_wanted:
                engine = engines.get(name)
                for user in targets:
                    try:
                        ranked = engine(user, visited.get(user, ()), config.recommend_n)
                    except HotelRecError as exc:
                        errors += 1
                        reason = "unknown-user" if isinstance(exc, UnknownUserError) else "no-recommendation"
                        w.writerow((user, "", "", "", f"error:{reason}", name))
                        continue
                    for rank, ((code, score), src) in enumerate(zip(ranked.items, ranked.sources), 1):
                        w.writerow((user, rank, code, repr(score), src, name))
        if errors:
            logger.warning("scenario %d: %d user/engine pairs could not be served", sid, errors)


def cmd_evaluate(config: RunConfig) -> None:
    engine_names = _engine_names(config, ENGINES)
    reports = []
    for sid in config.scenario_ids:
        sdir = config.scenario_dir(sid)
        split = load_split(sdir, sid)
        engines = Engines(load_models(sdir / "model"), split.train, config)
        reports += evaluate_scenario(split, {e: engines.get(e) for e in engine_names}, config.ns)
    paths = emit_report(reports, config.out_dir)
    logger.info("wrote %s", ", ".join(str(p) for p in paths))


def cmd_pipeline(config: RunConfig) -> None:
    cmd_synth(config)
    cmd_split(config)
    cmd_train(config)
    cmd_recommend(replace(config, engine="all"), all_users=True)
    cmd_evaluate(replace(config, engine="all"))


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(getattr(args, "verbose", 0), 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = resolve_config(args)
        if args.command == "synth":
            cmd_synth(config)
        elif args.command == "split":
            cmd_split(config)
        elif args.command == "train":
            cmd_train(config)
        elif args.command == "recommend":
            cmd_recommend(config, args.users, args.all)
        elif args.command == "evaluate":
            cmd_evaluate(config)
        elif args.command == "pipeline":
            cmd_pipeline(config)
    except HotelRecError as exc:
        print(f"hotelrec: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
