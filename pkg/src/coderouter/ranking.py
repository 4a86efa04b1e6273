"""Scores every (problem, model) pair and labels each problem with its
optimal model.

The score rewards pass rate and penalizes spend:

    score = ln(max_tokens_over_pool * max_price_over_pool) * pass_rate
            - ln(mean_tokens * price)

with natural logs, prices in $/M tokens, per-model mean completion tokens
clamped to >= 1, and the token maximum taken per problem over the pool. The
price maximum is the highest unit price in the pool.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .corpus import CandidatePool, Corpus, write_jsonl
from .errors import MissingSamples, NonPositiveArgument


@dataclass(frozen=True)
class ModelOutcome:
    model_id: str
    pass_rate: float
    mean_tokens: float
    score: float


@dataclass(frozen=True)
class RankedProblem:
    problem_id: str
    outcomes: tuple[ModelOutcome, ...]  # pool order
    optimal_model_id: str
    ranking: tuple[str, ...]  # model_ids sorted by score desc

    def outcome(self, model_id: str) -> ModelOutcome:
        for o in self.outcomes:
            if o.model_id == model_id:
                return o
        raise KeyError(model_id)


def score(
    pass_rate: float,
    mean_tokens: float,
    price: float,
    max_tokens_over_pool: float,
    max_price_over_pool: float,
) -> float:
    reward_arg = max_tokens_over_pool * max_price_over_pool
    penalty_arg = mean_tokens * price
    if reward_arg <= 0 or penalty_arg <= 0:
        raise NonPositiveArgument(
            f"log arguments must be > 0 (got {reward_arg}, {penalty_arg})"
        )
    return math.log(reward_arg) * pass_rate - math.log(penalty_arg)


def rank_problem(
    problem_id: str,
    corpus: Corpus,
    pool: CandidatePool,
    token_mode: str = "completion",
) -> RankedProblem:
    """Rank all pool models on one problem. Requires exactly n_s recorded
    samples per model."""
    n_s = pool.sample_count
    stats: list[tuple[str, float, float, float]] = []  # (mid, pass_rate, mean_tokens, price)
    for profile in pool.models:
        samples = corpus.samples(problem_id, profile.model_id)
        if len(samples) != n_s:
            raise MissingSamples(problem_id, profile.model_id, len(samples), n_s)
        passed = sum(1 for s in samples if s.passed)
        mean_tokens = sum(s.tokens(token_mode) for s in samples) / n_s
        stats.append(
            (profile.model_id, passed / n_s, max(1.0, mean_tokens), profile.price_per_mtok)
        )

    max_tokens = max(t for _, _, t, _ in stats)
    max_price = pool.max_price
    outcomes = [
        ModelOutcome(mid, pr, mt, score(pr, mt, price, max_tokens, max_price))
        for mid, pr, mt, price in stats
    ]
    # ties: higher pass rate, then lower spend, then lexicographic model_id
    by_mid = {o.model_id: o for o in outcomes}
    ranking = sorted(
        outcomes,
        key=lambda o: (
            -o.score,
            -o.pass_rate,
            o.mean_tokens * pool.profile(o.model_id).price_per_mtok,
            o.model_id,
        ),
    )
    ranked_ids = tuple(o.model_id for o in ranking)
    return RankedProblem(problem_id, tuple(outcomes), ranked_ids[0], ranked_ids)


def build_ranking_dataset(
    corpus: Corpus,
    pool: CandidatePool,
    token_mode: str = "completion",
) -> tuple[list[RankedProblem], list[dict]]:
    """One RankedProblem per problem with complete response coverage.
    Incomplete problems go to the skip report instead of failing the run."""
    ranked: list[RankedProblem] = []
    skipped: list[dict] = []
    for problem in corpus.problems:
        try:
            ranked.append(rank_problem(problem.problem_id, corpus, pool, token_mode))
        except MissingSamples as exc:
            skipped.append(
                {
                    "problem_id": problem.problem_id,
                    "model_id": exc.model_id,
                    "found": exc.found,
                    "expected": exc.expected,
                }
            )
    return ranked, skipped


def ranked_to_rows(ranked: list[RankedProblem]) -> list[dict]:
    return [
        {
            "problem_id": rp.problem_id,
            "optimal_model_id": rp.optimal_model_id,
            "ranking": list(rp.ranking),
            "outcomes": [
                {
                    "model_id": o.model_id,
                    "pass_rate": o.pass_rate,
                    "mean_tokens": o.mean_tokens,
                    "score": o.score,
                }
                for o in rp.outcomes
            ],
        }
        for rp in ranked
    ]


def rows_to_ranked(rows: list[dict]) -> list[RankedProblem]:
    ranked = []
    for row in rows:
        outcomes = tuple(
            ModelOutcome(o["model_id"], o["pass_rate"], o["mean_tokens"], o["score"])
            for o in row["outcomes"]
        )
        ranked.append(
            RankedProblem(
                row["problem_id"], outcomes, row["optimal_model_id"], tuple(row["ranking"])
            )
        )
    return ranked


def write_ranked(path, ranked: list[RankedProblem]) -> None:
    write_jsonl(path, ranked_to_rows(ranked))


def read_ranked(path) -> list[RankedProblem]:
    import json

    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rows.append(json.loads(line))
    return rows_to_ranked(rows)
