"""Replays recorded responses to score routing policies.

For a policy mapping problems to models, computes the three metric
families per k in {1, n_s}:

  - score: mean unbiased pass@k, 1 - C(n-c, k)/C(n, k)
  - token: mean tokens per problem (k=1: mean tokens of one response;
    k=n_s: total tokens of all n_s responses)
  - price: mean dollars per problem, tokens * price_per_mtok / 1e6

Aggregation uses exact compensated summation, so results are independent
of problem order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from .corpus import CandidatePool, Corpus
from .errors import DegenerateDistribution, DomainError, MissingSamples
from .ranking import RankedProblem
from .rng import SplitMix64


def pass_at_k(n: int, c: int, k: int) -> float:
    """Unbiased estimator of the probability that at least one of k draws
    (without replacement from n recorded samples, c of them passing) passes.
    Exact integer binomials, so the result is the correctly rounded float."""
    if not (0 <= c <= n) or not (1 <= k <= n):
        raise DomainError(f"need 0 <= c <= n and 1 <= k <= n, got n={n} c={c} k={k}")
    return float(1 - Fraction(math.comb(n - c, k), math.comb(n, k)))


@dataclass(frozen=True)
class PolicyMetrics:
    score: float
    token: float
    price: float


@dataclass(frozen=True)
class PolicyResult:
    name: str
    metrics: dict[int, PolicyMetrics]  # keyed by k
    selections: dict[str, str]  # problem_id -> model_id


def evaluate_policy(
    name: str,
    policy: Callable[[str], str],
    corpus: Corpus,
    pool: CandidatePool,
    split: list[str],
    token_mode: str = "completion",
    pass1_tokens: str = "mean",
) -> PolicyResult:
    """Score one policy over the problems in `split`. The selected model
    must have n_s recorded samples for every problem.

    pass1_tokens picks the k=1 token accounting: "mean" averages the n_s
    responses (default), "first" charges only the first response.
    """
    if pass1_tokens not in ("mean", "first"):
        raise DomainError(f"pass1_tokens must be 'mean' or 'first', got {pass1_tokens!r}")
    n_s = pool.sample_count
    ks = sorted({1, n_s})
    selections: dict[str, str] = {}
    scores = {k: [] for k in ks}
    tokens = {k: [] for k in ks}
    prices = {k: [] for k in ks}
    for pid in split:
        mid = policy(pid)
        samples = corpus.samples(pid, mid)
        if len(samples) != n_s:
            raise MissingSamples(pid, mid, len(samples), n_s)
        selections[pid] = mid
        passed = sum(1 for s in samples if s.passed)
        total_tokens = float(sum(s.tokens(token_mode) for s in samples))
        one_tokens = (
            total_tokens / n_s if pass1_tokens == "mean" else float(samples[0].tokens(token_mode))
        )
        price = pool.profile(mid).price_per_mtok
        for k in ks:
            per_problem_tokens = one_tokens if k == 1 else total_tokens
            scores[k].append(pass_at_k(n_s, passed, k))
            tokens[k].append(per_problem_tokens)
            prices[k].append(per_problem_tokens * price / 1e6)

    count = len(split)
    metrics = {
        k: PolicyMetrics(
            score=math.fsum(scores[k]) / count if count else 0.0,
            token=math.fsum(tokens[k]) / count if count else 0.0,
            price=math.fsum(prices[k]) / count if count else 0.0,
        )
        for k in ks
    }
    return PolicyResult(name, metrics, selections)


def fixed_policy(model_id: str) -> Callable[[str], str]:
    return lambda pid: model_id


def oracle_policy(ranked: list[RankedProblem]) -> Callable[[str], str]:
    labels = {rp.problem_id: rp.optimal_model_id for rp in ranked}
    return lambda pid: labels[pid]


def random_policy(pool: CandidatePool, seed: int = 0) -> Callable[[str], str]:
    """Uniform over the pool, deterministic per (seed, problem_id) so the
    choice does not depend on evaluation order."""
    from .embedding import fnv1a64

    ids = pool.model_ids

    def pick(pid: str) -> str:
        rng = SplitMix64(seed ^ fnv1a64(pid.encode("utf-8")))
        return ids[rng.below(len(ids))]

    return pick


def per_model_pass1(corpus: Corpus, pool: CandidatePool, split: list[str]) -> dict[str, float]:
    rates: dict[str, float] = {}
    n_s = pool.sample_count
    for profile in pool.models:
        vals = []
        for pid in split:
            samples = corpus.samples(pid, profile.model_id)
            if len(samples) != n_s:
                raise MissingSamples(pid, profile.model_id, len(samples), n_s)
            vals.append(pass_at_k(n_s, sum(1 for s in samples if s.passed), 1))
        rates[profile.model_id] = math.fsum(vals) / len(vals) if vals else 0.0
    return rates


def pearson(xs: list[float], ys: list[float]) -> float:
    if len(xs) != len(ys) or len(xs) < 2:
        raise DegenerateDistribution("need at least 2 paired values")
    n = len(xs)
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    sxx = math.fsum((x - mx) ** 2 for x in xs)
    syy = math.fsum((y - my) ** 2 for y in ys)
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateDistribution("zero variance")
    sxy = math.fsum((x - mx) * (y - my) for x, y in zip(xs, ys))
    return sxy / math.sqrt(sxx * syy)


def correlate_size_performance(pool: CandidatePool, pass1_by_model: dict[str, float]) -> float:
    """Pearson correlation between parameter count and pass@1 over the pool
    models that declare a parameter count."""
    sized = [m for m in pool.models if m.params_b is not None]
    if len(sized) < 2:
        raise DegenerateDistribution("need at least 2 models with params_b")
    return pearson(
        [m.params_b for m in sized],
        [pass1_by_model[m.model_id] for m in sized],
    )


# --- reporting --------------------------------------------------------------

def report_payload(results: list[PolicyResult], pool: CandidatePool, split: list[str]) -> dict:
    return {
        "sample_count": pool.sample_count,
        "ks": sorted({1, pool.sample_count}),
        "test_problems": len(split),
        "policies": [
            {
                "name": r.name,
                "metrics": {
                    str(k): {"score": m.score, "token": m.token, "price": m.price}
                    for k, m in sorted(r.metrics.items())
                },
                "selections": dict(sorted(r.selections.items())),
            }
            for r in results
        ],
    }


def render_table(results: list[PolicyResult], n_s: int) -> str:
    ks = sorted({1, n_s})
    name_width = max([len(r.name) for r in results] + [len("policy")]) + 2
    header = "policy".ljust(name_width)
    rule = "-" * name_width
    for k in ks:
        header += f" | {f'pass@{k}':>8} {'tokens':>10} {'price($)':>10}"
        rule += "-+-" + "-" * 30
    lines = [header, rule]
    for r in results:
        line = r.name.ljust(name_width)
        for k in ks:
            m = r.metrics[k]
            line += f" | {m.score:8.2%} {m.token:10.2f} {m.price:10.2e}"
        lines.append(line)
    return "\n".join(lines)


def render_csv(results: list[PolicyResult], n_s: int) -> str:
    ks = sorted({1, n_s})
    cols = ["policy"]
    for k in ks:
        cols += [f"pass@{k}_score", f"pass@{k}_token", f"pass@{k}_price"]
    rows = [",".join(cols)]
    for r in results:
        cells = [r.name]
        for k in ks:
            m = r.metrics[k]
            cells += [repr(m.score), repr(m.token), repr(m.price)]
        rows.append(",".join(cells))
    return "\n".join(rows) + "\n"
