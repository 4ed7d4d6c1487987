"""Command-line entry point: ingest, train, evaluate, rate-experiment,
recommend, serve."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, ingest
from .harness import SCENARIOS, SplitPlan, evaluate_models, rating_experiment
from .ingest import half_star_scale, whole_star_scale
from .models import MODEL_KINDS, ImportedRankings, ModelConfig, build_model, fit_coffee
from .tensor import save_model

log = logging.getLogger(__name__)


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="ratings file (.dat, .csv or ingested .npz)")
    p.add_argument("--format", choices=("dat", "csv"), default="dat")
    p.add_argument("--scale", choices=("whole", "half"), default="whole",
                   help="whole = 1..5 stars (K=5), half = 0.5..5 (K=10)")
    p.add_argument("--min-ratings", type=int, default=20)


def _mlrank(text: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected r1,r2,r3")
    try:
        return tuple(int(p) for p in parts)  # type: ignore[return-value]
    except ValueError:
        raise argparse.ArgumentTypeError("ranks must be integers") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coffee-rec")
    parser.add_argument("--config", help="JSON config file; flags override its entries")
    parser.add_argument("--threads", type=int, help="cap BLAS worker threads")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse, filter and re-index a ratings file")
    _add_data_args(p)
    p.add_argument("--out", required=True, help="output .npz table")

    p = sub.add_parser("train", help="fit one model and serialize it")
    _add_data_args(p)
    p.add_argument("--model", required=True, choices=MODEL_KINDS)
    p.add_argument("--rank", type=int, help="latent factors for matrix models")
    p.add_argument("--mlrank", type=_mlrank, help="r1,r2,r3 for the tensor model")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("evaluate", help="cross-validated top-n evaluation")
    _add_data_args(p)
    p.add_argument("--models", required=True,
                   help="comma list of kinds, or external:PATH for imported lists")
    p.add_argument("--scenarios", default="negative_1",
                   help=f"comma list from {','.join(SCENARIOS)}")
    p.add_argument("--threshold", type=float, help="negativity threshold (default per scale)")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--topn-max", type=int, default=100)
    p.add_argument("--holdout-size", type=int, default=10)
    p.add_argument("--rank", type=int, default=10)
    p.add_argument("--mlrank", type=_mlrank, default=(13, 10, 2))
    p.add_argument("--ranking", choices=("sum_positive", "top_level"), default="sum_positive")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", required=True, help="report path prefix (.tsv and .json)")

    p = sub.add_parser("rate-experiment", help="held-out favourite rating prediction")
    _add_data_args(p)
    p.add_argument("--mlrank", type=_mlrank, default=(13, 10, 2))
    p.add_argument("--threshold", type=float)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("recommend", help="fold in a cold profile and print top-n")
    p.add_argument("--model-file", required=True)
    p.add_argument("--ratings", required=True, help='profile as "item:rating,item:rating,..."')
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--positive-levels", help="comma list of level indices for ranking")

    p = sub.add_parser("serve", help="run the HTTP recommendation service")
    p.add_argument("--model-file", required=True)
    p.add_argument("--titles", help="id::title sidecar for item search")
    p.add_argument("--port", type=int, default=8080)
    return parser


def _walk_parsers(parser: argparse.ArgumentParser):
    yield parser
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for sub in action.choices.values():
                yield from _walk_parsers(sub)


def _load_with_config(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            defaults = json.load(fh)
        if "mlrank" in defaults:
            defaults["mlrank"] = tuple(int(r) for r in defaults["mlrank"])
        known = set()
        # Subparsers parse into their own namespace, so defaults must be
        # registered on every parser that knows the destination.
        for sub in _walk_parsers(parser):
            dests = {a.dest for a in sub._actions}
            known |= dests
            sub.set_defaults(**{k: v for k, v in defaults.items() if k in dests})
        bad = set(defaults) - known
        if bad:
            parser.error(f"unknown config entries: {sorted(bad)}")
        args = parser.parse_args(argv)
    return args


def _scale_for(args) -> ingest.RatingScale:
    base = whole_star_scale() if args.scale == "whole" else half_star_scale()
    threshold = getattr(args, "threshold", None)
    if threshold is not None:
        base = ingest.RatingScale(base.values, threshold)
    return base


def _load_table(args) -> ingest.RatingTable:
    path = Path(args.data)
    if path.suffix == ".npz":
        return ingest.load_table(path)
    raw = ingest.parse_movielens(path, args.format)
    return ingest.build_table(raw, args.min_ratings, _scale_for(args))


def _config_digest(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()[:16]


def _write_manifest(path: Path, command: str, config: dict, table=None) -> None:
    manifest = {
        "command": command,
        "config": config,
        "config_sha256": _config_digest(config),
        "versions": {"coffee_rec": __version__, "numpy": np.__version__},
    }
    if table is not None:
        manifest["dataset"] = {
            "users": table.n_users,
            "items": table.n_items,
            "ratings": table.n_ratings,
            "levels": table.scale.n_levels,
        }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")


def _cmd_ingest(args) -> int:
    table = _load_table(args)
    ingest.save_table(table, args.out)
    config = {"data": str(args.data), "format": args.format, "scale": args.scale,
              "min_ratings": args.min_ratings}
    _write_manifest(Path(args.out).with_suffix(".manifest.json"), "ingest", config, table)
    print(f"{table.n_users} users, {table.n_items} items, {table.n_ratings} ratings -> {args.out}")
    return 0


def _cmd_train(args, parser) -> int:
    if args.model == "coffee":
        if args.rank is not None:
            parser.error("--rank does not apply to the tensor model; use --mlrank")
        mlrank = args.mlrank or (13, 10, 2)
    else:
        if args.mlrank is not None:
            parser.error(f"--mlrank only applies to the tensor model, not {args.model}")
        mlrank = (13, 10, 2)
    config = ModelConfig(kind=args.model, rank=args.rank or 10, mlrank=mlrank, seed=args.seed)
    table = _load_table(args)
    scale_arr = np.asarray(table.scale.values, dtype=np.float64)
    thr = np.float64(table.scale.negativity_threshold)
    out = Path(args.out)
    if args.model == "coffee":
        model = fit_coffee(table, config.mlrank, seed=config.seed)
        save_model(model, out, kind="coffee", item_ids=table.item_ids,
                   scale_values=scale_arr, threshold=thr)
    elif args.model == "puresvd":
        from .models import fit_puresvd

        svd = fit_puresvd(table, config.rank, seed=config.seed)
        np.savez(out, format_version=np.int64(1), kind="puresvd", U=svd.U, S=svd.S, V=svd.V,
                 item_ids=table.item_ids, scale_values=scale_arr, threshold=thr)
    elif args.model == "knn":
        ingest.save_table(table, out)
    elif args.model == "popular":
        counts = np.bincount(table.items, minlength=table.n_items)
        np.savez(out, format_version=np.int64(1), kind="popular", counts=counts,
                 item_ids=table.item_ids, scale_values=scale_arr, threshold=thr)
    else:  # random
        np.savez(out, format_version=np.int64(1), kind="random", n_items=np.int64(table.n_items),
                 seed=np.int64(config.seed), item_ids=table.item_ids,
                 scale_values=scale_arr, threshold=thr)
    cfg_dict = {"model": args.model, "rank": config.rank, "mlrank": list(config.mlrank),
                "seed": config.seed, "data": str(args.data), "min_ratings": args.min_ratings,
                "scale": args.scale}
    _write_manifest(out.with_suffix(".manifest.json"), "train", cfg_dict, table)
    print(f"trained {args.model} -> {out}")
    return 0


def _cmd_evaluate(args, parser) -> int:
    table = _load_table(args)
    threshold = args.threshold if args.threshold is not None else table.scale.negativity_threshold
    scenarios = tuple(s.strip() for s in args.scenarios.split(",") if s.strip())
    plan = SplitPlan(folds=args.folds, seed=args.seed, holdout_size=args.holdout_size,
                     scenarios=scenarios)
    factories = []
    for token in (t.strip() for t in args.models.split(",")):
        if not token:
            continue
        if token.startswith("external:"):
            path = token.split(":", 1)[1]
            factories.append(lambda p=path: ImportedRankings(p))
        elif token in MODEL_KINDS:
            cfg = ModelConfig(kind=token, rank=args.rank, mlrank=tuple(args.mlrank),
                              seed=args.seed, ranking=args.ranking)
            factories.append(lambda c=cfg: build_model(c))
        else:
            parser.error(f"unknown model {token!r}")
    report = evaluate_models(table, plan, factories, threshold, n_max=args.topn_max)
    prefix = Path(args.report)
    tsv, js = prefix.with_suffix(".tsv"), prefix.with_suffix(".json")
    config = {"data": str(args.data), "models": args.models, "scenarios": list(scenarios),
              "threshold": threshold, "folds": args.folds, "topn_max": args.topn_max,
              "seed": args.seed, "rank": args.rank, "mlrank": list(args.mlrank),
              "ranking": args.ranking, "holdout_size": args.holdout_size}
    report.to_tsv(tsv)
    report.to_json(js, manifest={"config": config, "config_sha256": _config_digest(config),
                                 "versions": {"coffee_rec": __version__}})
    print(f"report -> {tsv} and {js}")
    return 0


def _cmd_rate_experiment(args) -> int:
    table = _load_table(args)
    threshold = args.threshold if args.threshold is not None else table.scale.negativity_threshold
    plan = SplitPlan(folds=args.folds, seed=args.seed)
    cfg = ModelConfig(kind="coffee", mlrank=tuple(args.mlrank), seed=args.seed)
    manifest = {"data": str(args.data), "mlrank": list(cfg.mlrank), "threshold": threshold,
                "folds": args.folds, "seed": args.seed, "version": __version__}
    log.info("rate-experiment manifest: %s (sha %s)", json.dumps(manifest, sort_keys=True),
             _config_digest(manifest))
    result = rating_experiment(table, plan, lambda: build_model(cfg), threshold)
    print(f"users\t{result.n_users}")
    print(f"exact\t{result.exact_rate:.4f}")
    print(f"positivity\t{result.positivity_rate:.4f}")
    print(f"rmse\t{result.rmse:.4f}")
    return 0


def _parse_profile(text: str) -> list[tuple[int, float]]:
    pairs = []
    for token in (t.strip() for t in text.split(",")):
        if not token:
            continue
        item, _, rating = token.partition(":")
        pairs.append((int(item), float(rating)))
    if not pairs:
        raise ValueError("empty profile: nothing to fold in")
    return pairs


def _cmd_recommend(args) -> int:
    from .service import ModelBundle, RecommenderService

    bundle = ModelBundle.load(args.model_file)
    service = RecommenderService(bundle)
    log.info("recommend manifest: model=%s n=%d ratings=%s version=%s",
             args.model_file, args.n, args.ratings, __version__)
    profile = _parse_profile(args.ratings)
    payload = {"ratings": [{"item": i, "rating": r} for i, r in profile], "n": args.n}
    if args.positive_levels:
        payload["positive_levels"] = [int(k) for k in args.positive_levels.split(",")]
    status, body = service.recommend(payload)
    if status != 200:
        raise ValueError(body.get("error", "recommendation failed"))
    for entry in body["items"]:
        shades = " ".join(f"{s:.4f}" for s in entry["shades"])
        print(f"{entry['item']}\t{entry['score']:.4f}\t{shades}")
    return 0


def _cmd_serve(args) -> int:
    from .service import ModelBundle, RecommenderService, serve

    bundle = ModelBundle.load(args.model_file, args.titles)
    server = serve(RecommenderService(bundle), args.port)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = _load_with_config(parser, argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.threads:
            try:
                import threadpoolctl

                threadpoolctl.threadpool_limits(args.threads)
            except ImportError:
                log.warning("threadpoolctl not installed; --threads ignored")
        if args.command == "ingest":
            return _cmd_ingest(args)
        if args.command == "train":
            return _cmd_train(args, parser)
        if args.command == "evaluate":
            return _cmd_evaluate(args, parser)
        if args.command == "rate-experiment":
            return _cmd_rate_experiment(args)
        if args.command == "recommend":
            return _cmd_recommend(args)
        if args.command == "serve":
            return _cmd_serve(args)
        parser.error(f"unknown command {args.command!r}")
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
