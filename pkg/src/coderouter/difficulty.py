"""Difficulty estimation from reasoning-trace lengths.

Per problem, the reasoning lengths of the non-truncated traces are reduced
to their lower median; problems whose traces were all truncated are
excluded. Lengths are then clustered into difficulty tiers with an exact
dynamic-programming 1-D k-means (optimal clusters of sorted 1-D data are
contiguous), which is deterministic and needs no seeding or restarts.

Also provides the clustering-agreement analyses: z-score normalization,
confusion matrices, ARI and FMI.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus
from .errors import (
    DegenerateDistribution,
    ItemSetMismatch,
    NoCotData,
    TooFewDistinctValues,
)


@dataclass(frozen=True)
class CotLength:
    problem_id: str
    length: int
    n_samples_used: int


@dataclass(frozen=True)
class DifficultyModel:
    k: int
    centroids: tuple[float, ...]  # strictly ascending
    boundaries: tuple[float, ...]  # midpoints between adjacent centroids

    @property
    def tier_names(self) -> tuple[str, ...]:
        return tier_names(self.k)


def tier_names(k: int) -> tuple[str, ...]:
    if k == 2:
        return ("easy", "hard")
    if k == 3:
        return ("easy", "medium", "hard")
    return tuple(f"tier{i}" for i in range(k))


def aggregate_cot(
    corpus: Corpus, reasoning_model_id: str
) -> tuple[list[CotLength], list[str]]:
    """Reduce each problem's traces to one length.

    Truncated traces (recorded with length 0) are dropped; a problem whose
    traces were all truncated is excluded and reported. The per-problem
    length is the lower median of the remaining reasoning lengths.
    """
    per_problem = corpus.cot_samples(reasoning_model_id)
    if not per_problem:
        raise NoCotData(reasoning_model_id)
    lengths: list[CotLength] = []
    excluded: list[str] = []
    for problem_id in sorted(per_problem):
        valid = sorted(
            rec.reasoning_tokens
            for rec in per_problem[problem_id]
            if not rec.truncated and rec.reasoning_tokens > 0
        )
        if not valid:
            excluded.append(problem_id)
            continue
        median = valid[(len(valid) - 1) // 2]
        lengths.append(CotLength(problem_id, median, len(valid)))
    return lengths, excluded


def _segment_sse(prefix: np.ndarray, prefix_sq: np.ndarray, j: np.ndarray, i: int) -> np.ndarray:
    """SSE of sorted segments x[j..i] for a vector of start indices j."""
    cnt = i - j + 1
    seg = prefix[i + 1] - prefix[j]
    sse = prefix_sq[i + 1] - prefix_sq[j] - seg * seg / cnt
    return np.maximum(sse, 0.0)


def fit_kmeans_1d(lengths, k: int) -> DifficultyModel:
    """Globally optimal 1-D k-means (minimum within-cluster sum of squares).

    Standard O(k n^2) dynamic program over the sorted values; ties between
    equally good split points go to the leftmost split.
    """
    xs = np.sort(np.asarray(list(lengths), dtype=float))
    n = xs.size
    distinct = np.unique(xs).size
    if k < 1:
        raise TooFewDistinctValues(distinct, k)
    if distinct < k:
        raise TooFewDistinctValues(distinct, k)

    prefix = np.concatenate(([0.0], np.cumsum(xs)))
    prefix_sq = np.concatenate(([0.0], np.cumsum(xs * xs)))

    # best[m][i]: min SSE for the first i values in m clusters
    best = np.full((k + 1, n + 1), np.inf)
    best[0][0] = 0.0
    split = np.zeros((k + 1, n + 1), dtype=int)  # start index of the last cluster
    for m in range(1, k + 1):
        for i in range(m, n + 1):
            starts = np.arange(m, i + 1)  # last cluster = values starts..i (1-based)
            totals = best[m - 1][starts - 1] + _segment_sse(prefix, prefix_sq, starts - 1, i - 1)
            pick = int(np.argmin(totals))
            best[m][i] = totals[pick]
            split[m][i] = starts[pick]

    bounds = []
    i = n
    for m in range(k, 0, -1):
        start = split[m][i]
        bounds.append((start - 1, i - 1))
        i = start - 1
    bounds.reverse()

    centroids = tuple(float(xs[a : b + 1].mean()) for a, b in bounds)
    boundaries = tuple(
        (centroids[t] + centroids[t + 1]) / 2.0 for t in range(k - 1)
    )
    return DifficultyModel(k, centroids, boundaries)


def kmeans_sse(model: DifficultyModel, lengths) -> float:
    return math.fsum(
        (x - model.centroids[assign_index(model, x)]) ** 2 for x in lengths
    )


def assign_index(model: DifficultyModel, length: float) -> int:
    """Tier of the nearest centroid; at the exact midpoint between two
    centroids the lower tier wins."""
    return bisect_left(list(model.boundaries), length)


def assign(model: DifficultyModel, length: float) -> str:
    return model.tier_names[assign_index(model, length)]


def zscore(values) -> list[float]:
    vals = [float(v) for v in values]
    if len(vals) < 2:
        raise DegenerateDistribution("need at least 2 values")
    mean = math.fsum(vals) / len(vals)
    var = math.fsum((v - mean) ** 2 for v in vals) / len(vals)
    if var == 0.0:
        raise DegenerateDistribution("zero standard deviation")
    std = math.sqrt(var)
    return [(v - mean) / std for v in vals]


@dataclass(frozen=True)
class ClusteringComparison:
    labels_a: tuple
    labels_b: tuple
    confusion_matrix: tuple[tuple[int, ...], ...]  # rows: a labels, cols: b labels
    ari: float
    fmi: float


def compare_clusterings(a: dict, b: dict) -> ClusteringComparison:
    """Agreement between two labelings of the same item set: contingency
    counts plus the pair-counting ARI and FMI."""
    if set(a) != set(b):
        raise ItemSetMismatch(
            f"item sets differ ({len(set(a) - set(b))} only in a, {len(set(b) - set(a))} only in b)"
        )
    items = sorted(a)
    labels_a = sorted({a[i] for i in items})
    labels_b = sorted({b[i] for i in items})
    index_a = {lab: r for r, lab in enumerate(labels_a)}
    index_b = {lab: c for c, lab in enumerate(labels_b)}
    matrix = [[0] * len(labels_b) for _ in labels_a]
    for item in items:
        matrix[index_a[a[item]]][index_b[b[item]]] += 1

    n = len(items)
    tp = sum(math.comb(cell, 2) for row in matrix for cell in row)
    same_a = sum(math.comb(sum(row), 2) for row in matrix)
    same_b = sum(math.comb(sum(col), 2) for col in zip(*matrix))
    fn = same_a - tp
    fp = same_b - tp
    tn = math.comb(n, 2) - tp - fn - fp

    if fn == 0 and fp == 0:
        # the two partitions are identical (including degenerate ones)
        ari = 1.0
        fmi = 1.0
    else:
        ari = 2.0 * (tp * tn - fn * fp) / ((tp + fn) * (fn + tn) + (tp + fp) * (fp + tn))
        fmi = tp / math.sqrt((tp + fp) * (tp + fn)) if tp else 0.0
    return ClusteringComparison(
        tuple(labels_a), tuple(labels_b), tuple(tuple(row) for row in matrix), ari, fmi
    )


# --- artifact ---------------------------------------------------------------

def difficulty_payload(
    model: DifficultyModel, reasoning_model_id: str, exclusions: list[str]
) -> dict:
    return {
        "k": model.k,
        "centroids": list(model.centroids),
        "boundaries": list(model.boundaries),
        "reasoning_model_id": reasoning_model_id,
        "exclusions": sorted(exclusions),
    }


def model_from_payload(payload: dict) -> DifficultyModel:
    return DifficultyModel(
        int(payload["k"]),
        tuple(float(c) for c in payload["centroids"]),
        tuple(float(b) for b in payload["boundaries"]),
    )
