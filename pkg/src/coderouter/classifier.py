"""Multi-class gradient-boosted regression trees over problem embeddings.

First-order boosting with a softmax objective: each round fits one exact
greedy regression tree per class to the residuals (one-hot minus predicted
probability), then adds the shrunken tree outputs to the class logits.
Splits scan every observed threshold; ties go to the lowest feature index
and lowest threshold, which makes fitting a pure deterministic function of
(features, labels, config).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptyTrainingSet, SchemaError
from .rng import SplitMix64

DEFAULT_ROUNDS = 200
DEFAULT_MAX_DEPTH = 4
DEFAULT_LEARNING_RATE = 0.1
DEFAULT_MIN_SAMPLES_LEAF = 2


@dataclass(frozen=True)
class TrainConfig:
    rounds: int = DEFAULT_ROUNDS
    max_depth: int = DEFAULT_MAX_DEPTH
    learning_rate: float = DEFAULT_LEARNING_RATE
    min_samples_leaf: int = DEFAULT_MIN_SAMPLES_LEAF
    seed: int = 0

    def __post_init__(self):
        if self.rounds < 0:
            raise SchemaError("rounds must be >= 0")
        if self.max_depth < 1:
            raise SchemaError("max_depth must be >= 1")
        if not 0 < self.learning_rate <= 1:
            raise SchemaError("learning_rate must be in (0, 1]")
        if self.min_samples_leaf < 1:
            raise SchemaError("min_samples_leaf must be >= 1")


@dataclass
class BoostedForest:
    classes: tuple[str, ...]
    rounds: int
    learning_rate: float
    max_depth: int
    base_score: float
    # one entry per (round, class): flat node list; node is either
    # {feature_index, threshold, left, right} or {leaf_value}
    trees: list[tuple[int, int, list[dict]]]
    meta: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int | None:
        return self.meta.get("n_features")


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def _fit_tree(
    X: np.ndarray,
    residual: np.ndarray,
    max_depth: int,
    min_samples_leaf: int,
    out_pred: np.ndarray,
) -> list[dict]:
    """Exact greedy regression tree on (X, residual); writes training-set
    predictions for the fitted tree into out_pred."""
    nodes: list[dict] = []

    def build(indices: np.ndarray, depth: int) -> int:
        node_id = len(nodes)
        nodes.append({})
        g = residual[indices]
        impure = bool(g.max() > g.min())
        split = _best_split(X[indices], g, min_samples_leaf) if (
            impure and depth < max_depth and len(indices) >= 2 * min_samples_leaf
        ) else None
        if split is None:
            value = float(g.mean())
            nodes[node_id] = {"leaf_value": value}
            out_pred[indices] += value
            return node_id
        feature, threshold = split
        mask = X[indices, feature] <= threshold
        left = build(indices[mask], depth + 1)
        right = build(indices[~mask], depth + 1)
        nodes[node_id] = {
            "feature_index": feature,
            "threshold": threshold,
            "left": left,
            "right": right,
        }
        return node_id

    build(np.arange(X.shape[0]), 0)
    return nodes


def _best_split(X: np.ndarray, g: np.ndarray, min_leaf: int) -> tuple[int, float] | None:
    """Best variance-reduction split over all feature thresholds, or None if
    no threshold separates the rows. A zero-gain split is still taken when
    the residuals differ, so that patterns invisible to any single feature
    (e.g. XOR layouts) can be unfolded by deeper levels."""
    m, p = X.shape
    order = np.argsort(X, axis=0, kind="stable")
    xs = np.take_along_axis(X, order, axis=0)
    gs = g[order]
    prefix = np.cumsum(gs, axis=0)
    total = prefix[-1]

    n_left = np.arange(1, m)[:, None].astype(float)
    n_right = m - n_left
    sum_left = prefix[:-1]
    sum_right = total[None, :] - sum_left
    gain = sum_left**2 / n_left + sum_right**2 / n_right  # + const per node

    valid = (xs[:-1] < xs[1:]) & (n_left >= min_leaf) & (n_right >= min_leaf)
    if not valid.any():
        return None
    gain = np.where(valid, gain, -np.inf)
    # feature-major argmax: ties resolve to lowest feature, lowest threshold
    flat = np.argmax(gain.T)
    feature, pos = divmod(int(flat), m - 1)
    threshold = float((xs[pos, feature] + xs[pos + 1, feature]) / 2.0)
    return feature, threshold


def fit(
    features: np.ndarray,
    labels: np.ndarray,
    classes: list[str] | tuple[str, ...],
    config: TrainConfig = TrainConfig(),
) -> BoostedForest:
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=int)
    if X.ndim != 2:
        raise DimensionMismatch("features must be a 2-D matrix")
    n, p = X.shape
    if n == 0:
        raise EmptyTrainingSet("no training rows")
    if y.shape != (n,):
        raise DimensionMismatch(f"{n} rows but {y.shape} labels")
    n_classes = len(classes)
    if n_classes < 1 or y.min() < 0 or y.max() >= n_classes:
        raise DimensionMismatch("labels must be class indices in [0, n_classes)")

    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0

    logits = np.zeros((n, n_classes))
    trees: list[tuple[int, int, list[dict]]] = []
    log_loss_curve: list[float] = []
    for rnd in range(config.rounds):
        probs = _softmax(logits)
        residual = onehot - probs
        for c in range(n_classes):
            pred = np.zeros(n)
            nodes = _fit_tree(X, residual[:, c], config.max_depth,
                              config.min_samples_leaf, pred)
            logits[:, c] += config.learning_rate * pred
            trees.append((rnd, c, nodes))
        probs = _softmax(logits)
        log_loss_curve.append(float(-np.log(probs[np.arange(n), y]).mean()))

    return BoostedForest(
        classes=tuple(classes),
        rounds=config.rounds,
        learning_rate=config.learning_rate,
        max_depth=config.max_depth,
        base_score=0.0,
        trees=trees,
        meta={
            "n_features": p,
            "min_samples_leaf": config.min_samples_leaf,
            "seed": config.seed,
            "train_log_loss": log_loss_curve,
        },
    )


def _tree_value(nodes: list[dict], x: np.ndarray) -> float:
    node = nodes[0]
    while "leaf_value" not in node:
        node = nodes[node["left"] if x[node["feature_index"]] <= node["threshold"] else node["right"]]
    return node["leaf_value"]


def raw_scores(forest: BoostedForest, x: np.ndarray) -> np.ndarray:
    scores = np.full(len(forest.classes), forest.base_score)
    for _, class_index, nodes in forest.trees:
        scores[class_index] += forest.learning_rate * _tree_value(nodes, x)
    return scores


def predict_proba(forest: BoostedForest, feature: np.ndarray) -> np.ndarray:
    x = np.asarray(feature, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatch("feature must be a vector")
    expected = forest.n_features
    if expected is not None and x.size != expected:
        raise DimensionMismatch(f"feature length {x.size}, forest expects {expected}")
    return _softmax(raw_scores(forest, x))


def predict(forest: BoostedForest, feature: np.ndarray) -> str:
    probs = predict_proba(forest, feature)
    # argmax with lexicographic tie-break on the class name
    best = min(range(len(forest.classes)), key=lambda i: (-probs[i], forest.classes[i]))
    return forest.classes[best]


def split_dataset(items: list, ratio: float = 0.7, seed: int = 0) -> tuple[list, list]:
    """Seeded uniform shuffle then prefix split; train gets floor(ratio*n)."""
    if not 0 < ratio <= 1:
        raise SchemaError("split ratio must be in (0, 1]")
    order = list(range(len(items)))
    SplitMix64(seed).shuffle(order)
    cut = math.floor(ratio * len(items))
    train = [items[i] for i in order[:cut]]
    test = [items[i] for i in order[cut:]]
    return train, test


# --- persistence ------------------------------------------------------------

def forest_payload(forest: BoostedForest) -> dict:
    return {
        "classes": list(forest.classes),
        "rounds": forest.rounds,
        "eta": forest.learning_rate,
        "max_depth": forest.max_depth,
        "base_score": forest.base_score,
        "trees": [
            {"round": rnd, "class_index": c, "nodes": nodes}
            for rnd, c, nodes in forest.trees
        ],
        "meta": forest.meta,
    }


def forest_from_payload(payload: dict) -> BoostedForest:
    trees = []
    for entry in payload["trees"]:
        nodes = entry["nodes"]
        for node in nodes:
            if "leaf_value" in node:
                if not math.isfinite(node["leaf_value"]):
                    raise SchemaError("non-finite leaf value")
            else:
                for key in ("feature_index", "threshold", "left", "right"):
                    if key not in node:
                        raise SchemaError(f"internal node missing {key!r}")
                if not (0 <= node["left"] < len(nodes) and 0 <= node["right"] < len(nodes)):
                    raise SchemaError("child index out of range")
        trees.append((int(entry["round"]), int(entry["class_index"]), nodes))
    return BoostedForest(
        classes=tuple(payload["classes"]),
        rounds=int(payload["rounds"]),
        learning_rate=float(payload["eta"]),
        max_depth=int(payload["max_depth"]),
        base_score=float(payload["base_score"]),
        trees=trees,
        meta=dict(payload.get("meta", {})),
    )
