"""Command-line pipeline driver and thin client for the gateway.

Stages read and write a shared data directory (default ./data):

    synth -> problems/responses/cots/pricing files
    rank -> ranked.jsonl
    cot-aggregate -> cot_lengths.json
    cluster -> difficulty.json
    train-embedding -> projection.json
    train-classifier -> classifier.json + split.json (+ tier_classifier.json)
    evaluate -> report.json (+ CSV)

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import classifier as clf
from . import difficulty as diff
from . import evaluator, ranking, synth
from .corpus import Corpus, load_corpus, read_artifact, write_artifact
from .embedding import (
    DEFAULT_BATCH,
    DEFAULT_DIM,
    DEFAULT_EPOCHS,
    DEFAULT_LR,
    DEFAULT_MARGIN,
    DEFAULT_MAX_TOKENS,
    DEFAULT_PROJ_DIM,
    POSITIVE_POOL_SIZE,
    HashedEmbedder,
    ProjectionHead,
    head_from_payload,
    projection_payload,
    read_embedding_file,
    sample_triplets,
    train_projection,
)
from .errors import CoderouterError, SchemaError
from .router import GatewayConfig, Router


class _UsageError(Exception):
    def __init__(self, parser: argparse.ArgumentParser, message: str):
        super().__init__(message)
        self.parser = parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(self, message)


def _data_paths(data_dir: str) -> dict[str, Path]:
    d = Path(data_dir)
    return {
        "problems": d / "problems.jsonl",
        "responses": d / "responses.jsonl",
        "cots": d / "cots.jsonl",
        "pricing": d / "pricing.json",
        "ranked": d / "ranked.jsonl",
        "cot_lengths": d / "cot_lengths.json",
        "difficulty": d / "difficulty.json",
        "projection": d / "projection.json",
        "classifier": d / "classifier.json",
        "tier_classifier": d / "tier_classifier.json",
        "split": d / "split.json",
        "report": d / "report.json",
        "embeddings": d / "embeddings.jsonl",
    }


def _load_corpus(paths: dict[str, Path], samples: int, need=("responses", "cots", "pricing")) -> Corpus:
    return load_corpus(
        paths["problems"],
        paths["responses"] if "responses" in need and paths["responses"].exists() else None,
        paths["cots"] if "cots" in need and paths["cots"].exists() else None,
        paths["pricing"] if "pricing" in need and paths["pricing"].exists() else None,
        sample_count=samples,
    )


def _base_vectors(corpus: Corpus, provider: str, dim: int, max_tokens: int,
                  embeddings_path: Path | None) -> dict[str, np.ndarray]:
    if provider == "imported":
        if embeddings_path is None or not embeddings_path.exists():
            raise SchemaError("imported provider needs an embeddings file")
        header, vectors = read_embedding_file(embeddings_path)
        return vectors
    embedder = HashedEmbedder(dim=dim, max_tokens=max_tokens)
    return {p.problem_id: embedder.embed_problem(p.problem_id, p.prompt) for p in corpus.problems}


def _tier_labels(paths: dict[str, Path]) -> tuple[dict[str, int], diff.DifficultyModel]:
    model = diff.model_from_payload(read_artifact(paths["difficulty"]))
    lengths_payload = read_artifact(paths["cot_lengths"])
    labels = {
        row["problem_id"]: diff.assign_index(model, row["length"])
        for row in lengths_payload["lengths"]
    }
    return labels, model


# --- stage handlers ---------------------------------------------------------

def _cmd_synth(args) -> int:
    if args.spec:
        with open(args.spec, encoding="utf-8") as fh:
            spec = json.load(fh)
    else:
        spec = synth.default_spec()
    paths = synth.generate_synthetic_corpus(spec, args.seed, args.data_dir)
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    return 0


def _cmd_ingest(args) -> int:
    paths = _data_paths(args.data_dir)
    corpus = _load_corpus(paths, args.samples)
    pool = corpus.pool
    print(
        f"problems={len(corpus.problems)} responses={len(corpus.responses)} "
        f"cots={len(corpus.cots)} models={len(pool.models) if pool else 0}"
    )
    return 0


def _cmd_rank(args) -> int:
    paths = _data_paths(args.data_dir)
    corpus = _load_corpus(paths, args.samples)
    if corpus.pool is None:
        raise SchemaError("ranking needs pricing.json")
    ranked, skipped = ranking.build_ranking_dataset(corpus, corpus.pool, args.tokens)
    ranking.write_ranked(paths["ranked"], ranked)
    print(f"ranked {len(ranked)} problems -> {paths['ranked']}")
    for entry in skipped:
        print(
            f"skipped {entry['problem_id']}: {entry['model_id']} has "
            f"{entry['found']}/{entry['expected']} samples",
            file=sys.stderr,
        )
    return 0


def _cmd_cot_aggregate(args) -> int:
    paths = _data_paths(args.data_dir)
    corpus = _load_corpus(paths, args.samples, need=("cots",))
    reasoner = args.reasoner
    if reasoner is None:
        reasoners = sorted({c.reasoning_model_id for c in corpus.cots})
        if len(reasoners) != 1:
            raise SchemaError(
                f"--reasoner required: corpus has {len(reasoners)} reasoning models {reasoners}"
            )
        reasoner = reasoners[0]
    lengths, excluded = diff.aggregate_cot(corpus, reasoner)
    write_artifact(
        paths["cot_lengths"],
        {
            "reasoning_model_id": reasoner,
            "lengths": [
                {"problem_id": c.problem_id, "length": c.length, "n_samples_used": c.n_samples_used}
                for c in lengths
            ],
            "exclusions": excluded,
        },
    )
    print(f"aggregated {len(lengths)} problems ({len(excluded)} excluded) -> {paths['cot_lengths']}")
    return 0


def _cmd_cluster(args) -> int:
    paths = _data_paths(args.data_dir)
    payload = read_artifact(paths["cot_lengths"])
    values = [row["length"] for row in payload["lengths"]]
    model = diff.fit_kmeans_1d(values, args.k)
    write_artifact(
        paths["difficulty"],
        diff.difficulty_payload(model, payload["reasoning_model_id"], payload["exclusions"]),
    )
    counts = [0] * args.k
    for v in values:
        counts[diff.assign_index(model, v)] += 1
    tiers = ", ".join(
        f"{name}={count} (centroid {centroid:.1f})"
        for name, count, centroid in zip(model.tier_names, counts, model.centroids)
    )
    print(f"clustered: {tiers} -> {paths['difficulty']}")
    return 0


def _cmd_train_embedding(args) -> int:
    paths = _data_paths(args.data_dir)
    corpus = _load_corpus(paths, args.samples, need=())
    labels, _model = _tier_labels(paths)
    lengths_payload = read_artifact(paths["cot_lengths"])
    by_tier: dict[int, list[diff.CotLength]] = {}
    for row in lengths_payload["lengths"]:
        cot = diff.CotLength(row["problem_id"], row["length"], row["n_samples_used"])
        by_tier.setdefault(labels[cot.problem_id], []).append(cot)

    embeddings_path = Path(args.embeddings) if args.embeddings else paths["embeddings"]
    dim = args.dim
    if args.embedder == "imported":
        header, _ = read_embedding_file(embeddings_path)
        dim = int(header["dim"])
    vectors = _base_vectors(corpus, args.embedder, dim, args.max_tokens, embeddings_path)
    missing = [pid for pid in labels if pid not in vectors]
    if missing:
        raise SchemaError(f"no base vector for {len(missing)} labeled problems, e.g. {missing[:3]}")

    triplets = sample_triplets(by_tier, args.triplets, args.seed, args.positive_pool)
    head = ProjectionHead.identity(args.proj_dim, dim, args.margin)
    curve = train_projection(head, vectors, triplets, args.epochs, args.lr, args.batch, args.seed)
    head.meta.update({"provider": args.embedder, "max_tokens": args.max_tokens})
    write_artifact(paths["projection"], projection_payload(head))
    final = f"{curve[-1]:.4f}" if curve else "n/a"
    print(f"trained projection on {len(triplets)} triplets, final loss {final} -> {paths['projection']}")
    return 0


def _features_for(corpus: Corpus, head: ProjectionHead, paths: dict[str, Path],
                  problem_ids: list[str], embeddings_flag: str | None) -> np.ndarray:
    provider = head.meta.get("provider", "hashed")
    max_tokens = int(head.meta.get("max_tokens", DEFAULT_MAX_TOKENS))
    embeddings_path = Path(embeddings_flag) if embeddings_flag else paths["embeddings"]
    vectors = _base_vectors(corpus, provider, head.dim, max_tokens, embeddings_path
                            if provider == "imported" else None)
    return head.forward_batch(np.stack([vectors[pid] for pid in problem_ids]))


def _cmd_train_classifier(args) -> int:
    paths = _data_paths(args.data_dir)
    corpus = _load_corpus(paths, args.samples, need=("pricing",))
    if corpus.pool is None:
        raise SchemaError("training needs pricing.json")
    ranked = ranking.read_ranked(paths["ranked"])
    head = head_from_payload(read_artifact(paths["projection"]))

    train, test = clf.split_dataset(ranked, args.split, args.seed)
    classes = corpus.pool.model_ids
    class_index = {mid: i for i, mid in enumerate(classes)}
    train_ids = [rp.problem_id for rp in train]
    features = _features_for(corpus, head, paths, train_ids, args.embeddings)
    labels = np.array([class_index[rp.optimal_model_id] for rp in train])
    config = clf.TrainConfig(args.rounds, args.depth, args.eta, args.min_leaf, args.seed)
    forest = clf.fit(features, labels, classes, config)
    write_artifact(paths["classifier"], clf.forest_payload(forest))
    write_artifact(
        paths["split"],
        {
            "ratio": args.split,
            "seed": args.seed,
            "train_ids": train_ids,
            "test_ids": [rp.problem_id for rp in test],
        },
    )
    print(
        f"trained {len(forest.trees)} trees on {len(train)} problems "
        f"(test {len(test)}) -> {paths['classifier']}"
    )

    if args.tier_classifier:
        tier_labels, model = _tier_labels(paths)
        labeled = [pid for pid in train_ids if pid in tier_labels]
        if not labeled:
            raise SchemaError("no tier labels among training problems")
        tier_features = _features_for(corpus, head, paths, labeled, args.embeddings)
        tier_y = np.array([tier_labels[pid] for pid in labeled])
        tier_forest = clf.fit(tier_features, tier_y, list(model.tier_names), config)
        write_artifact(paths["tier_classifier"], clf.forest_payload(tier_forest))
        print(f"trained tier classifier -> {paths['tier_classifier']}")
    return 0


def _config_from_data_dir(paths: dict[str, Path]) -> GatewayConfig:
    provider = "hashed"
    if paths["projection"].exists():
        provider = read_artifact(paths["projection"]).get("meta", {}).get("provider", "hashed")
    return GatewayConfig(
        difficulty=paths["difficulty"],
        projection=paths["projection"],
        classifier=paths["classifier"],
        pricing=paths["pricing"],
        embeddings=paths["embeddings"] if paths["embeddings"].exists() else None,
        tier_classifier=paths["tier_classifier"] if paths["tier_classifier"].exists() else None,
        embedder=provider,
    )


def _cmd_evaluate(args) -> int:
    paths = _data_paths(args.data_dir)
    corpus = _load_corpus(paths, args.samples)
    pool = corpus.pool
    if pool is None:
        raise SchemaError("evaluation needs pricing.json")
    ranked = ranking.read_ranked(paths["ranked"])
    if paths["split"].exists():
        split = read_artifact(paths["split"])["test_ids"]
    else:
        split = [rp.problem_id for rp in ranked]

    results = []
    for profile in pool.models:
        results.append(
            evaluator.evaluate_policy(
                profile.model_id, evaluator.fixed_policy(profile.model_id),
                corpus, pool, split, args.tokens, args.pass1_tokens,
            )
        )

    prompts = {p.problem_id: p.prompt for p in corpus.problems}
    for name in args.policy:
        if name == "learned":
            router = Router.load(_config_from_data_dir(paths))
            policy = lambda pid: router.route(prompts[pid], problem_id=pid).model_id
        elif name == "oracle":
            policy = evaluator.oracle_policy(ranked)
        elif name == "random":
            policy = evaluator.random_policy(pool, args.seed)
        elif name.startswith("fixed:"):
            mid = name.split(":", 1)[1]
            pool.profile(mid)  # validates membership
            policy = evaluator.fixed_policy(mid)
        else:
            raise SchemaError(f"unknown policy {name!r}")
        results.append(
            evaluator.evaluate_policy(
                name, policy, corpus, pool, split, args.tokens, args.pass1_tokens
            )
        )

    payload = evaluator.report_payload(results, pool, split)
    try:
        pass1 = evaluator.per_model_pass1(corpus, pool, split)
        payload["size_performance_pearson"] = evaluator.correlate_size_performance(pool, pass1)
    except CoderouterError:
        payload["size_performance_pearson"] = None
    write_artifact(paths["report"], payload)

    print(evaluator.render_table(results, pool.sample_count))
    if payload["size_performance_pearson"] is not None:
        print(f"\nsize/performance Pearson r = {payload['size_performance_pearson']:.4f}")
    if args.csv:
        Path(args.csv).write_text(evaluator.render_csv(results, pool.sample_count), encoding="utf-8")
        print(f"csv -> {args.csv}")
    print(f"report -> {paths['report']}")
    return 0


def _cmd_route(args) -> int:
    if args.server:
        import httpx

        response = httpx.post(
            args.server.rstrip("/") + "/v1/route",
            json={"prompt": args.prompt},
            timeout=30.0,
        )
        print(json.dumps(response.json(), indent=2, sort_keys=True))
        return 0 if response.status_code == 200 else 2
    if args.config:
        config = GatewayConfig.from_file(args.config)
    else:
        config = _config_from_data_dir(_data_paths(args.data_dir))
    decision = Router.load(config).route(args.prompt)
    print(json.dumps(decision.to_dict(), indent=2, sort_keys=True))
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    config = GatewayConfig.from_file(args.config)
    app = create_app(config)
    host, port = config.host_port
    uvicorn.run(app, host=host, port=port, log_level="info")
    return 0


# --- parser -----------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="coderouter", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("-d", "--data-dir", default="data", help="pipeline data directory")
        p.add_argument("--samples", type=int, default=5, help="recorded samples per (problem, model)")
        return p

    p = add("synth", _cmd_synth, "generate a deterministic synthetic corpus")
    p.add_argument("--spec", help="generation spec JSON (default: built-in 3-tier spec)")
    p.add_argument("--seed", type=int, default=0)

    add("ingest", _cmd_ingest, "load and cross-validate the corpus files")

    p = add("rank", _cmd_rank, "score models per problem and label the optimal one")
    p.add_argument("--tokens", choices=("completion", "total"), default="completion")

    p = add("cot-aggregate", _cmd_cot_aggregate, "reduce reasoning traces to per-problem lengths")
    p.add_argument("--reasoner", help="reasoning model id (default: the only one present)")

    p = add("cluster", _cmd_cluster, "fit exact 1-D k-means difficulty tiers")
    p.add_argument("--k", type=int, default=3)

    p = add("train-embedding", _cmd_train_embedding, "fine-tune the projection with triplet loss")
    p.add_argument("--epochs", type=int, default=DEFAULT_EPOCHS)
    p.add_argument("--lr", type=float, default=DEFAULT_LR)
    p.add_argument("--margin", type=float, default=DEFAULT_MARGIN)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch", type=int, default=DEFAULT_BATCH)
    p.add_argument("--dim", type=int, default=DEFAULT_DIM, help="hashed embedder dimension")
    p.add_argument("--proj-dim", type=int, default=DEFAULT_PROJ_DIM)
    p.add_argument("--max-tokens", type=int, default=DEFAULT_MAX_TOKENS)
    p.add_argument("--triplets", type=int, default=None, help="triplet count (default: one per anchor)")
    p.add_argument("--positive-pool", type=int, default=POSITIVE_POOL_SIZE)
    p.add_argument("--embedder", choices=("hashed", "imported"), default="hashed")
    p.add_argument("--embeddings", help="portable embedding file for the imported provider")

    p = add("train-classifier", _cmd_train_classifier, "train the routing classifier")
    p.add_argument("--rounds", type=int, default=clf.DEFAULT_ROUNDS)
    p.add_argument("--depth", type=int, default=clf.DEFAULT_MAX_DEPTH)
    p.add_argument("--eta", type=float, default=clf.DEFAULT_LEARNING_RATE)
    p.add_argument("--min-leaf", type=int, default=clf.DEFAULT_MIN_SAMPLES_LEAF)
    p.add_argument("--split", type=float, default=0.7)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--embeddings", help="portable embedding file for the imported provider")
    p.add_argument("--tier-classifier", action="store_true",
                   help="also train the diagnostic difficulty-tier classifier")

    p = add("evaluate", _cmd_evaluate, "replay recorded responses against policies")
    p.add_argument("--policy", action="append",
                   default=None, help="learned | fixed:<model> | oracle | random (repeatable)")
    p.add_argument("--seed", type=int, default=0, help="seed for the random policy")
    p.add_argument("--tokens", choices=("completion", "total"), default="completion")
    p.add_argument("--pass1-tokens", choices=("mean", "first"), default="mean",
                   help="k=1 token accounting: mean of the samples or the first response only")
    p.add_argument("--csv", help="also write the comparison table as CSV")

    p = add("route", _cmd_route, "route one prompt")
    p.add_argument("--prompt", required=True)
    p.add_argument("--config", help="gateway config JSON (default: artifacts from --data-dir)")
    p.add_argument("--server", help="query a running gateway instead of loading artifacts")

    p = sub.add_parser("serve", help="run the HTTP gateway")
    p.set_defaults(func=_cmd_serve)
    p.add_argument("--config", required=True)

    return parser


def cli(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        exc.parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        return 1
    if args.command == "evaluate" and args.policy is None:
        args.policy = ["learned"]
    try:
        return args.func(args)
    except CoderouterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        report = getattr(exc, "report", None)
        if report and len(report) > 1:
            for line in report:
                print(f"  {line}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
