"""Deterministic synthetic corpus generator for desk-scale end-to-end tests.

A generation spec defines difficulty tiers with disjoint vocabulary pools,
per-tier per-model pass probabilities and completion-token ranges, and
per-tier reasoning-length ranges. The default spec is arranged so that the
score-optimal model is constant within each tier: every model either always
or never passes a tier, and the (tokens x price) ranges of the passing
models do not overlap, so the cheapest passing model always wins.
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import SpecError
from .rng import SplitMix64

_EASY_WORDS = [
    "add", "sum", "list", "count", "string", "reverse", "digit", "upper",
    "lower", "join", "split", "index", "append", "sort", "even", "odd",
    "vowel", "letter", "number", "print", "loop", "range", "item", "value",
    "pair", "swap", "first", "last", "length", "copy",
]
_MEDIUM_WORDS = [
    "graph", "node", "edge", "path", "tree", "visit", "queue", "stack",
    "depth", "breadth", "weight", "interval", "schedule", "memo", "table",
    "subproblem", "partition", "prefix", "suffix", "window", "pointer",
    "binary", "search", "rotate", "merge", "heap", "priority", "balance",
    "cycle", "component",
]
_HARD_WORDS = [
    "flow", "matching", "bipartite", "segment", "lazy", "propagation",
    "convex", "hull", "geometry", "modular", "inverse", "combinatorics",
    "suffixautomaton", "centroid", "decomposition", "persistence", "fenwick",
    "offline", "query", "divide", "conquer", "bitmask", "profile",
    "matrix", "exponentiation", "probability", "expectation", "game",
    "grundy", "parity",
]


def default_spec() -> dict:
    """3 tiers x 20 problems, 4 synthetic models."""
    return {
        "sample_count": 5,
        "cot_samples": 10,
        "reasoning_model_id": "synth-reasoner-32b",
        "prompt_words": 24,
        "answer_token_range": [100, 300],
        "models": [
            {"model_id": "synth-tiny", "price_per_mtok": 0.14, "params_b": 1.5},
            {"model_id": "synth-mid", "price_per_mtok": 0.42, "params_b": 7.0},
            {"model_id": "synth-large", "price_per_mtok": 0.95, "params_b": 22.0},
            {"model_id": "synth-huge", "price_per_mtok": 1.26, "params_b": 32.0},
        ],
        "tiers": [
            {
                "name": "easy",
                "problems": 20,
                "vocabulary": _EASY_WORDS,
                "cot_range": [200, 800],
                "models": {
                    "synth-tiny": {"pass_prob": 1.0, "token_range": [200, 400]},
                    "synth-mid": {"pass_prob": 1.0, "token_range": [220, 420]},
                    "synth-large": {"pass_prob": 1.0, "token_range": [240, 440]},
                    "synth-huge": {"pass_prob": 1.0, "token_range": [260, 480]},
                },
            },
            {
                "name": "medium",
                "problems": 20,
                "vocabulary": _MEDIUM_WORDS,
                "cot_range": [3000, 5000],
                "models": {
                    "synth-tiny": {"pass_prob": 0.0, "token_range": [300, 600]},
                    "synth-mid": {"pass_prob": 0.0, "token_range": [300, 600]},
                    "synth-large": {"pass_prob": 1.0, "token_range": [300, 420]},
                    "synth-huge": {"pass_prob": 1.0, "token_range": [320, 540]},
                },
            },
            {
                "name": "hard",
                "problems": 20,
                "vocabulary": _HARD_WORDS,
                "cot_range": [11000, 15500],
                "models": {
                    "synth-tiny": {"pass_prob": 0.0, "token_range": [400, 800]},
                    "synth-mid": {"pass_prob": 0.0, "token_range": [400, 800]},
                    "synth-large": {"pass_prob": 0.0, "token_range": [400, 800]},
                    "synth-huge": {"pass_prob": 1.0, "token_range": [500, 900]},
                },
            },
        ],
    }


def _check_range(value, name: str, minimum: int) -> tuple[int, int]:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(v, int) for v in value)
    ):
        raise SpecError(f"{name} must be a [lo, hi] integer pair")
    lo, hi = value
    if lo < minimum or hi < lo:
        raise SpecError(f"{name} must satisfy {minimum} <= lo <= hi")
    return lo, hi


def validate_spec(spec: dict) -> None:
    if not spec.get("models"):
        raise SpecError("spec needs at least one model")
    if not spec.get("tiers"):
        raise SpecError("spec needs at least one tier")
    model_ids = [m.get("model_id") for m in spec["models"]]
    if len(set(model_ids)) != len(model_ids):
        raise SpecError("duplicate model_id in spec")
    for m in spec["models"]:
        if not isinstance(m.get("price_per_mtok"), (int, float)) or m["price_per_mtok"] <= 0:
            raise SpecError(f"model {m.get('model_id')!r}: price_per_mtok must be > 0")
    seen_words: set[str] = set()
    seen_names: set[str] = set()
    for tier in spec["tiers"]:
        name = tier.get("name")
        if not name or name in seen_names:
            raise SpecError(f"tier name {name!r} missing or repeated")
        seen_names.add(name)
        if not isinstance(tier.get("problems"), int) or tier["problems"] < 1:
            raise SpecError(f"tier {name!r}: problems must be a positive integer")
        vocab = tier.get("vocabulary")
        if not vocab:
            raise SpecError(f"tier {name!r}: vocabulary must be non-empty")
        overlap = seen_words.intersection(vocab)
        if overlap:
            raise SpecError(f"tier {name!r}: vocabulary overlaps another tier: {sorted(overlap)[:5]}")
        seen_words.update(vocab)
        _check_range(tier.get("cot_range"), f"tier {name!r} cot_range", 1)
        per_model = tier.get("models", {})
        for mid in model_ids:
            if mid not in per_model:
                raise SpecError(f"tier {name!r}: missing entry for model {mid!r}")
            entry = per_model[mid]
            prob = entry.get("pass_prob")
            if not isinstance(prob, (int, float)) or not 0 <= prob <= 1:
                raise SpecError(f"tier {name!r} model {mid!r}: pass_prob must be in [0, 1]")
            _check_range(entry.get("token_range"), f"tier {name!r} model {mid!r} token_range", 0)
        trunc = tier.get("truncated_prob", 0.0)
        if not isinstance(trunc, (int, float)) or not 0 <= trunc <= 1:
            raise SpecError(f"tier {name!r}: truncated_prob must be in [0, 1]")


def generate_synthetic_corpus(spec: dict, seed: int, out_dir: str | Path) -> dict[str, Path]:
    """Write problems.jsonl, responses.jsonl, cots.jsonl and pricing.json
    under out_dir. Byte-identical output for identical (spec, seed)."""
    validate_spec(spec)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = SplitMix64(seed)

    sample_count = int(spec.get("sample_count", 5))
    cot_samples = int(spec.get("cot_samples", 10))
    reasoner = spec.get("reasoning_model_id", "synth-reasoner")
    prompt_words = int(spec.get("prompt_words", 24))
    ans_lo, ans_hi = _check_range(spec.get("answer_token_range", [100, 300]),
                                  "answer_token_range", 0)

    problems, responses, cots = [], [], []
    for tier in spec["tiers"]:
        vocab = list(tier["vocabulary"])
        cot_lo, cot_hi = tier["cot_range"]
        trunc_prob = float(tier.get("truncated_prob", 0.0))
        for i in range(tier["problems"]):
            pid = f"{tier['name']}-{i:03d}"
            words = [vocab[rng.below(len(vocab))] for _ in range(prompt_words)]
            problems.append(
                {"problem_id": pid, "source": "Other", "prompt": " ".join(words)}
            )
            for model in spec["models"]:
                mid = model["model_id"]
                entry = tier["models"][mid]
                lo, hi = entry["token_range"]
                for s in range(sample_count):
                    responses.append(
                        {
                            "problem_id": pid,
                            "model_id": mid,
                            "sample_index": s,
                            "passed": rng.uniform() < entry["pass_prob"],
                            "completion_tokens": rng.randint(lo, hi),
                            "prompt_tokens": prompt_words,
                        }
                    )
            for s in range(cot_samples):
                truncated = rng.uniform() < trunc_prob
                cots.append(
                    {
                        "problem_id": pid,
                        "reasoning_model_id": reasoner,
                        "sample_index": s,
                        "reasoning_tokens": 0 if truncated else rng.randint(cot_lo, cot_hi),
                        "answer_tokens": rng.randint(ans_lo, ans_hi),
                        "truncated": truncated,
                    }
                )

    pricing = {
        m["model_id"]: {
            "price_per_mtok": m["price_per_mtok"],
            "params_b": m.get("params_b"),
        }
        for m in spec["models"]
    }

    paths = {
        "problems": out / "problems.jsonl",
        "responses": out / "responses.jsonl",
        "cots": out / "cots.jsonl",
        "pricing": out / "pricing.json",
    }
    _write_jsonl(paths["problems"], problems)
    _write_jsonl(paths["responses"], responses)
    _write_jsonl(paths["cots"], cots)
    with open(paths["pricing"], "w", encoding="utf-8") as fh:
        json.dump(pricing, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return paths


def _write_jsonl(path: Path, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True, separators=(",", ":")) + "\n")
