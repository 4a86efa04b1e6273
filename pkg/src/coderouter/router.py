"""Loads trained artifacts and answers routing requests.

Routing is embed -> project -> classify -> argmax. All loaded state is
immutable, so identical prompts always produce identical decisions for the
lifetime of the loaded artifacts.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import classifier as clf
from .corpus import CandidatePool, load_pricing, read_artifact
from .difficulty import DifficultyModel, model_from_payload
from .embedding import (
    HashedEmbedder,
    ImportedEmbedder,
    ProjectionHead,
    head_from_payload,
    read_embedding_file,
)
from .errors import MissingEmbedding, SchemaError

ENV_LISTEN = "CODEROUTER_LISTEN"
ENV_BACKEND_PREFIX = "CODEROUTER_BACKEND_"

DEFAULT_LISTEN = "127.0.0.1:8080"
DEFAULT_TIMEOUT_S = 30.0


@dataclass(frozen=True)
class Backend:
    base_url: str
    timeout_s: float = DEFAULT_TIMEOUT_S


@dataclass
class GatewayConfig:
    difficulty: Path
    projection: Path
    classifier: Path
    pricing: Path
    embeddings: Path | None = None
    tier_classifier: Path | None = None
    listen: str = DEFAULT_LISTEN
    embedder: str = "hashed"
    backends: dict[str, Backend] = field(default_factory=dict)
    sample_count: int = 5

    @classmethod
    def from_file(cls, path: str | Path) -> "GatewayConfig":
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise SchemaError(f"{path}: config must be a JSON object")
        base = path.parent

        def resolve(key, required=False):
            value = raw.get(key)
            if value is None:
                if required:
                    raise SchemaError(f"{path}: missing artifact path {key!r}")
                return None
            return (base / value).resolve() if not Path(value).is_absolute() else Path(value)

        backends = {}
        for mid, entry in raw.get("backends", {}).items():
            if not isinstance(entry, dict) or "base_url" not in entry:
                raise SchemaError(f"{path}: backend {mid!r} needs a base_url")
            backends[mid] = Backend(entry["base_url"], float(entry.get("timeout_s", DEFAULT_TIMEOUT_S)))

        config = cls(
            difficulty=resolve("difficulty", required=True),
            projection=resolve("projection", required=True),
            classifier=resolve("classifier", required=True),
            pricing=resolve("pricing", required=True),
            embeddings=resolve("embeddings"),
            tier_classifier=resolve("tier_classifier"),
            listen=raw.get("listen", DEFAULT_LISTEN),
            embedder=raw.get("embedder", "hashed"),
            backends=backends,
            sample_count=int(raw.get("sample_count", 5)),
        )
        config.apply_env(os.environ)
        return config

    def apply_env(self, env) -> None:
        """Environment overrides: CODEROUTER_LISTEN for the listen address,
        CODEROUTER_BACKEND_<MODEL_ID> (uppercased, non-alphanumerics mapped
        to underscores) for configured backend URLs."""
        if env.get(ENV_LISTEN):
            self.listen = env[ENV_LISTEN]
        for mid, backend in list(self.backends.items()):
            var = ENV_BACKEND_PREFIX + re.sub(r"[^0-9A-Za-z]", "_", mid).upper()
            if env.get(var):
                self.backends[mid] = Backend(env[var], backend.timeout_s)

    @property
    def host_port(self) -> tuple[str, int]:
        host, _, port = self.listen.rpartition(":")
        return host or "127.0.0.1", int(port)


@dataclass(frozen=True)
class RouteDecision:
    model_id: str
    probabilities: dict[str, float]
    embedder: str
    embedder_fallback: bool
    fingerprints: dict[str, str]
    difficulty_tier: str | None = None

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "probabilities": self.probabilities,
            "difficulty_tier": self.difficulty_tier,
            "embedder": self.embedder,
            "embedder_fallback": self.embedder_fallback,
            "fingerprints": self.fingerprints,
        }


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


class Router:
    def __init__(
        self,
        pool: CandidatePool,
        head: ProjectionHead,
        forest: clf.BoostedForest,
        difficulty_model: DifficultyModel,
        tier_forest: clf.BoostedForest | None = None,
        imported: ImportedEmbedder | None = None,
        provider: str = "hashed",
        fingerprints: dict[str, str] | None = None,
    ):
        self.pool = pool
        self.head = head
        self.forest = forest
        self.difficulty_model = difficulty_model
        self.tier_forest = tier_forest
        self.imported = imported
        self.provider = provider
        self.hashed = HashedEmbedder(dim=head.dim)
        self.fingerprints = fingerprints or {}
        missing = set(forest.classes) - set(pool.model_ids)
        if missing:
            raise SchemaError(f"classifier classes missing from pricing: {sorted(missing)}")

    @classmethod
    def load(cls, config: GatewayConfig) -> "Router":
        pool = load_pricing(config.pricing, config.sample_count)
        difficulty_model = model_from_payload(read_artifact(config.difficulty))
        head = head_from_payload(read_artifact(config.projection))
        forest = clf.forest_from_payload(read_artifact(config.classifier))
        tier_forest = None
        if config.tier_classifier is not None:
            tier_forest = clf.forest_from_payload(read_artifact(config.tier_classifier))
        imported = None
        if config.embedder == "imported":
            if config.embeddings is None:
                raise SchemaError("embedder 'imported' requires an embeddings file")
            header, vectors = read_embedding_file(config.embeddings)
            imported = ImportedEmbedder(vectors, int(header["dim"]))
            if imported.dim != head.dim:
                raise SchemaError(
                    f"imported embedding dim {imported.dim} != projection input dim {head.dim}"
                )
        elif config.embedder != "hashed":
            raise SchemaError(f"unknown embedder provider {config.embedder!r}")

        fingerprints = {
            "difficulty": _sha256(config.difficulty),
            "projection": _sha256(config.projection),
            "classifier": _sha256(config.classifier),
            "pricing": _sha256(config.pricing),
        }
        if config.embeddings is not None:
            fingerprints["embeddings"] = _sha256(config.embeddings)
        if config.tier_classifier is not None:
            fingerprints["tier_classifier"] = _sha256(config.tier_classifier)
        return cls(pool, head, forest, difficulty_model, tier_forest, imported,
                   config.embedder, fingerprints)

    def _base_vector(self, prompt: str, problem_id: str | None) -> tuple[np.ndarray, str, bool]:
        if self.provider == "imported":
            if problem_id is not None and self.imported is not None:
                try:
                    return self.imported.embed_problem(problem_id), "imported", False
                except MissingEmbedding:
                    pass
            # ad-hoc text has no imported vector: fall back and flag it
            return self.hashed.embed_text(prompt), "hashed", True
        return self.hashed.embed_text(prompt), "hashed", False

    def route(self, prompt: str, problem_id: str | None = None) -> RouteDecision:
        base, provider, fallback = self._base_vector(prompt, problem_id)
        projected = self.head.forward(base)
        probs = clf.predict_proba(self.forest, projected)
        order = sorted(range(len(self.forest.classes)),
                       key=lambda i: (-probs[i], self.forest.classes[i]))
        tier = None
        if self.tier_forest is not None:
            tier = clf.predict(self.tier_forest, projected)
        return RouteDecision(
            model_id=self.forest.classes[order[0]],
            probabilities={mid: float(probs[i]) for i, mid in enumerate(self.forest.classes)},
            embedder=provider,
            embedder_fallback=fallback,
            fingerprints=dict(self.fingerprints),
            difficulty_tier=tier,
        )
