"""Difficulty-aware problem vectors.

A pluggable base embedder (deterministic hashed features, or vectors
imported from an offline encoder run) feeds a trainable linear projection.
The projection is fine-tuned with a triplet hinge loss over difficulty
tiers,

    loss = max(0, a.n - a.p + margin)

computed on L2-normalized outputs, so the dot products are cosines.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import FORMAT_VERSION
from .difficulty import CotLength
from .errors import (
    DuplicateKey,
    InsufficientCluster,
    MissingEmbedding,
    NonFiniteLoss,
    SchemaError,
    VersionMismatch,
)
from .rng import SplitMix64

DEFAULT_DIM = 768
DEFAULT_PROJ_DIM = 128
DEFAULT_MAX_TOKENS = 512
DEFAULT_MARGIN = 1.0
DEFAULT_EPOCHS = 20
DEFAULT_LR = 0.05
DEFAULT_BATCH = 32
POSITIVE_POOL_SIZE = 5  # positives come from the m nearest same-tier lengths

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1

_TOKEN_RE = re.compile(r"[0-9a-z]+")


def fnv1a64(data: bytes) -> int:
    """FNV-1a 64-bit hash; the fixed bucket hash of the hashed embedder."""
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def _l2_normalize(vec: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(vec)
    return vec / norm if norm > 0 else vec


class HashedEmbedder:
    """Deterministic bag-of-features embedder: lowercase, split on
    non-alphanumerics, truncate to max_tokens tokens, then hash unigrams and
    adjacent bigrams into dim buckets (FNV-1a 64) with tf counts and L2
    normalization. Stands in for a frozen neural encoder."""

    provider = "hashed"

    def __init__(self, dim: int = DEFAULT_DIM, max_tokens: int = DEFAULT_MAX_TOKENS):
        if dim < 1:
            raise SchemaError("embedder dim must be >= 1")
        self.dim = dim
        self.max_tokens = max_tokens

    def embed_text(self, text: str) -> np.ndarray:
        tokens = _TOKEN_RE.findall(text.lower())[: self.max_tokens]
        vec = np.zeros(self.dim)
        for tok in tokens:
            vec[fnv1a64(tok.encode("utf-8")) % self.dim] += 1.0
        for first, second in zip(tokens, tokens[1:]):
            vec[fnv1a64(f"{first} {second}".encode("utf-8")) % self.dim] += 1.0
        return _l2_normalize(vec)

    def embed_problem(self, problem_id: str, text: str) -> np.ndarray:
        return self.embed_text(text)


class ImportedEmbedder:
    """Exact lookup of externally computed vectors by problem_id."""

    provider = "imported"

    def __init__(self, vectors: dict[str, np.ndarray], dim: int):
        self.vectors = vectors
        self.dim = dim

    def embed_problem(self, problem_id: str, text: str = "") -> np.ndarray:
        if problem_id not in self.vectors:
            raise MissingEmbedding(problem_id)
        return self.vectors[problem_id]

    def embed_text(self, text: str) -> np.ndarray:
        raise MissingEmbedding("<ad-hoc text>")


@dataclass
class ProjectionHead:
    """Trainable linear map from base embeddings to the difficulty-aware
    space. Outputs are L2-normalized (zero input stays zero). Starts as the
    first proj_dim rows of the identity, so the untrained head is
    deterministic."""

    W: np.ndarray
    margin: float = DEFAULT_MARGIN
    meta: dict = field(default_factory=dict)

    @classmethod
    def identity(cls, proj_dim: int = DEFAULT_PROJ_DIM, dim: int = DEFAULT_DIM,
                 margin: float = DEFAULT_MARGIN) -> "ProjectionHead":
        if proj_dim > dim:
            raise SchemaError(f"proj_dim {proj_dim} exceeds base dim {dim}")
        if margin <= 0:
            raise SchemaError("margin must be > 0")
        return cls(np.eye(proj_dim, dim), margin)

    @property
    def proj_dim(self) -> int:
        return self.W.shape[0]

    @property
    def dim(self) -> int:
        return self.W.shape[1]

    def forward(self, vec: np.ndarray) -> np.ndarray:
        return _l2_normalize(self.W @ vec)

    def forward_batch(self, mat: np.ndarray) -> np.ndarray:
        out = mat @ self.W.T
        norms = np.linalg.norm(out, axis=1, keepdims=True)
        return np.divide(out, norms, out=np.zeros_like(out), where=norms > 0)


@dataclass(frozen=True)
class Triplet:
    anchor: str
    positive: str
    negative: str


def triplet_loss(a: np.ndarray, p: np.ndarray, n: np.ndarray, margin: float = DEFAULT_MARGIN) -> float:
    return max(0.0, float(a @ n) - float(a @ p) + margin)


def sample_triplets(
    clusters: dict[int, list[CotLength]],
    count: int | None = None,
    seed: int = 0,
    positive_pool: int = POSITIVE_POOL_SIZE,
) -> list[Triplet]:
    """Sample one triplet per anchor, cycling anchors over all labeled
    problems (tier order, then problem_id). The positive is uniform among
    the positive_pool same-tier problems closest in CoT length; the negative
    tier is uniform among the other tiers, then a uniform member. Fully
    determined by the seed."""
    tiers = sorted(clusters)
    for tier in tiers:
        if not clusters[tier]:
            raise InsufficientCluster(str(tier), "empty cluster")
    if len(tiers) < 2:
        raise InsufficientCluster(str(tiers[0]) if tiers else "?", "need at least two tiers")

    # singleton tiers cannot anchor (no positive exists) but they still
    # serve as negatives for anchors from the other tiers
    ordered: list[tuple[int, CotLength]] = []
    for tier in tiers:
        if len(clusters[tier]) < 2:
            continue
        for item in sorted(clusters[tier], key=lambda c: c.problem_id):
            ordered.append((tier, item))
    if not ordered:
        raise InsufficientCluster(str(tiers[0]), "every tier has fewer than 2 problems")
    if count is None:
        count = len(ordered)

    rng = SplitMix64(seed)
    triplets: list[Triplet] = []
    for i in range(count):
        tier, anchor = ordered[i % len(ordered)]
        mates = [c for c in sorted(clusters[tier], key=lambda c: c.problem_id)
                 if c.problem_id != anchor.problem_id]
        mates.sort(key=lambda c: (abs(c.length - anchor.length), c.problem_id))
        positive = rng.choice(mates[:positive_pool])
        other_tiers = [t for t in tiers if t != tier]
        neg_tier = rng.choice(other_tiers)
        negative = rng.choice(sorted(clusters[neg_tier], key=lambda c: c.problem_id))
        triplets.append(Triplet(anchor.problem_id, positive.problem_id, negative.problem_id))
    return triplets


def _norm_backprop(grad_y: np.ndarray, y: np.ndarray, norms: np.ndarray) -> np.ndarray:
    """Gradient through y = u / ||u||: du = (g - (g.y) y) / ||u||."""
    dots = np.sum(grad_y * y, axis=1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    return np.where(norms > 0, (grad_y - dots * y) / safe, 0.0)


def batch_loss_and_grad(
    head: ProjectionHead,
    xa: np.ndarray,
    xp: np.ndarray,
    xn: np.ndarray,
) -> tuple[float, np.ndarray]:
    """Mean triplet loss over a batch and its gradient w.r.t. W, with the
    gradient flowing through the output normalization."""
    W = head.W

    def project(x):
        u = x @ W.T
        norms = np.linalg.norm(u, axis=1, keepdims=True)
        y = np.divide(u, norms, out=np.zeros_like(u), where=norms > 0)
        return y, norms

    ya, na = project(xa)
    yp, np_ = project(xp)
    yn, nn = project(xn)

    losses = np.maximum(0.0, np.sum(ya * yn, axis=1) - np.sum(ya * yp, axis=1) + head.margin)
    active = (losses > 0).astype(float)[:, None]
    batch = xa.shape[0]
    mean_loss = float(losses.mean())

    ga = (yn - yp) * active
    gp = -ya * active
    gn = ya * active

    dua = _norm_backprop(ga, ya, na)
    dup = _norm_backprop(gp, yp, np_)
    dun = _norm_backprop(gn, yn, nn)

    grad = (dua.T @ xa + dup.T @ xp + dun.T @ xn) / batch
    return mean_loss, grad


def train_projection(
    head: ProjectionHead,
    base_vectors: dict[str, np.ndarray],
    triplets: list[Triplet],
    epochs: int = DEFAULT_EPOCHS,
    lr: float = DEFAULT_LR,
    batch_size: int = DEFAULT_BATCH,
    seed: int = 0,
) -> list[float]:
    """Mini-batch gradient descent on the mean triplet loss. Updates head.W
    in place and returns the per-epoch mean loss curve."""
    if lr <= 0:
        raise SchemaError("lr must be > 0")
    if not triplets:
        head.meta.update({"epochs": epochs, "lr": lr, "batch": batch_size,
                          "seed": seed, "triplets": 0})
        return []

    xa = np.stack([base_vectors[t.anchor] for t in triplets])
    xp = np.stack([base_vectors[t.positive] for t in triplets])
    xn = np.stack([base_vectors[t.negative] for t in triplets])

    rng = SplitMix64(seed)
    order = list(range(len(triplets)))
    curve: list[float] = []
    for epoch in range(epochs):
        rng.shuffle(order)
        epoch_loss = 0.0
        for start in range(0, len(order), batch_size):
            idx = order[start : start + batch_size]
            loss, grad = batch_loss_and_grad(head, xa[idx], xp[idx], xn[idx])
            if not math.isfinite(loss) or not np.all(np.isfinite(grad)):
                raise NonFiniteLoss(
                    f"non-finite loss/gradient at epoch {epoch}, batch offset {start} "
                    f"(loss={loss}, |W|max={np.abs(head.W).max()})"
                )
            head.W -= lr * grad
            epoch_loss += loss * len(idx)
        curve.append(epoch_loss / len(order))
    head.meta.update({"epochs": epochs, "lr": lr, "batch": batch_size,
                      "seed": seed, "triplets": len(triplets)})
    if curve:
        head.meta["final_loss"] = curve[-1]
    return curve


# --- persistence ------------------------------------------------------------

def projection_payload(head: ProjectionHead) -> dict:
    return {
        "d": head.dim,
        "p": head.proj_dim,
        "margin": head.margin,
        "W": [float(w) for w in head.W.reshape(-1)],  # row-major
        "meta": head.meta,
    }


def head_from_payload(payload: dict) -> ProjectionHead:
    d, p = int(payload["d"]), int(payload["p"])
    flat = np.asarray(payload["W"], dtype=float)
    if flat.size != p * d:
        raise SchemaError(f"projection W has {flat.size} entries, expected {p * d}")
    return ProjectionHead(flat.reshape(p, d), float(payload["margin"]), dict(payload.get("meta", {})))


def write_embedding_file(
    path: str | Path,
    vectors: dict[str, np.ndarray] | list[tuple[str, np.ndarray]],
    provider_name: str,
) -> None:
    """Portable embedding file: one JSON header line, then one JSON object
    per problem. Row order follows the given order (dicts: insertion)."""
    items = list(vectors.items()) if isinstance(vectors, dict) else list(vectors)
    if not items:
        raise SchemaError("refusing to write an empty embedding file")
    dim = len(items[0][1])
    header = {
        "format_version": FORMAT_VERSION,
        "dim": dim,
        "count": len(items),
        "provider_name": provider_name,
    }
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n")
        for pid, vec in items:
            row = {"problem_id": pid, "vector": [float(x) for x in vec]}
            fh.write(json.dumps(row, sort_keys=True, separators=(",", ":")) + "\n")


def read_embedding_file(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, encoding="utf-8") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid header: {exc.msg}") from exc
        if not isinstance(header, dict) or "format_version" not in header:
            raise SchemaError(f"{path}: first line must be a JSON header with format_version")
        if header["format_version"] != FORMAT_VERSION:
            raise VersionMismatch(str(path), header["format_version"], FORMAT_VERSION)
        for key in ("dim", "count"):
            if key not in header:
                raise SchemaError(f"{path}: header missing {key!r}")
        dim, count = int(header["dim"]), int(header["count"])

        vectors: dict[str, np.ndarray] = {}
        for line_no, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{line_no}: invalid JSON: {exc.msg}") from exc
            pid, vec = row.get("problem_id"), row.get("vector")
            if not isinstance(pid, str) or not isinstance(vec, list):
                raise SchemaError(f"{path}:{line_no}: row needs problem_id and vector")
            if len(vec) != dim:
                raise SchemaError(f"{path}:{line_no}: vector length {len(vec)} != header dim {dim}")
            arr = np.asarray(vec, dtype=float)
            if not np.all(np.isfinite(arr)):
                raise SchemaError(f"{path}:{line_no}: non-finite vector component")
            if pid in vectors:
                raise DuplicateKey(pid, f"{path}:{line_no}")
            vectors[pid] = arr
    if len(vectors) != count:
        raise SchemaError(f"{path}: header count {count} != {len(vectors)} rows")
    return header, vectors
