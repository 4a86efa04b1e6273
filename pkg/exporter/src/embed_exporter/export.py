"""Runs a pretrained encoder over problems.jsonl and writes the portable
embedding file (one JSON header line, then {problem_id, vector} rows).

Vectors are raw (un-normalized) pooled hidden states; the pooling choice is
recorded in the header so downstream consumers can report it.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

log = logging.getLogger("embed_exporter")

FORMAT_VERSION = 1
DEFAULT_ENCODER = "microsoft/codebert-base"
DEFAULT_MAX_LENGTH = 512
POOLINGS = ("mean", "cls")


class ExportError(Exception):
    pass


class EncoderLoadError(ExportError):
    pass


class TruncationWarning(UserWarning):
    """Inputs longer than the encoder limit were truncated (logged, not fatal)."""


@dataclass(frozen=True)
class ExportManifest:
    encoder: str
    pooling: str
    dim: int
    count: int
    truncation_length: int
    truncated_inputs: int

    def to_dict(self) -> dict:
        return {
            "encoder": self.encoder,
            "pooling": self.pooling,
            "dim": self.dim,
            "count": self.count,
            "truncation_length": self.truncation_length,
            "truncated_inputs": self.truncated_inputs,
        }


def load_problems(path: str | Path) -> list[tuple[str, str]]:
    """Read (problem_id, prompt) pairs; duplicates are a hard error before
    anything is written."""
    problems: list[tuple[str, str]] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ExportError(f"{path}:{line_no}: invalid JSON: {exc.msg}") from exc
            pid, prompt = row.get("problem_id"), row.get("prompt")
            if not isinstance(pid, str) or not pid or not isinstance(prompt, str):
                raise ExportError(f"{path}:{line_no}: row needs problem_id and prompt")
            if pid in seen:
                raise ExportError(f"{path}:{line_no}: duplicate problem_id {pid!r}")
            seen.add(pid)
            problems.append((pid, prompt))
    return problems


def _load_encoder(encoder: str):
    from transformers import AutoModel, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(encoder)
        model = AutoModel.from_pretrained(encoder)
    except Exception as exc:
        raise EncoderLoadError(f"cannot load encoder {encoder!r}: {exc}") from exc
    model.eval()
    return tokenizer, model


def _pool(hidden, attention_mask, pooling: str):
    import torch

    if pooling == "cls":
        return hidden[:, 0, :]
    mask = attention_mask.unsqueeze(-1).to(hidden.dtype)
    summed = (hidden * mask).sum(dim=1)
    counts = mask.sum(dim=1).clamp(min=1)
    return summed / counts


def export(
    problems_path: str | Path,
    out_path: str | Path,
    encoder: str = DEFAULT_ENCODER,
    pooling: str = "mean",
    batch_size: int = 16,
    max_length: int = DEFAULT_MAX_LENGTH,
) -> ExportManifest:
    import torch
    import warnings

    if pooling not in POOLINGS:
        raise ExportError(f"pooling must be one of {POOLINGS}, got {pooling!r}")
    if batch_size < 1:
        raise ExportError("batch size must be >= 1")
    problems = load_problems(problems_path)
    if not problems:
        raise ExportError(f"{problems_path}: no problems to export")
    tokenizer, model = _load_encoder(encoder)
    limit = min(max_length, getattr(tokenizer, "model_max_length", max_length))

    rows: list[tuple[str, list[float]]] = []
    truncated = 0
    with torch.no_grad():
        for start in range(0, len(problems), batch_size):
            batch = problems[start : start + batch_size]
            texts = [prompt for _, prompt in batch]
            full = tokenizer(texts, truncation=False)["input_ids"]
            over = sum(1 for ids in full if len(ids) > limit)
            if over:
                truncated += over
                warnings.warn(
                    TruncationWarning(f"{over} input(s) exceeded {limit} tokens and were truncated")
                )
                log.warning("truncated %d input(s) to %d tokens", over, limit)
            enc = tokenizer(
                texts, padding=True, truncation=True, max_length=limit, return_tensors="pt"
            )
            hidden = model(**enc).last_hidden_state
            pooled = _pool(hidden, enc["attention_mask"], pooling)
            for (pid, _), vec in zip(batch, pooled):
                rows.append((pid, [float(x) for x in vec]))

    dim = len(rows[0][1])
    header = {
        "format_version": FORMAT_VERSION,
        "dim": dim,
        "count": len(rows),
        "provider_name": encoder,
        "pooling": pooling,
        "truncation_length": limit,
    }
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n")
        for pid, vec in rows:
            fh.write(
                json.dumps({"problem_id": pid, "vector": vec}, sort_keys=True,
                           separators=(",", ":")) + "\n"
            )
    return ExportManifest(encoder, pooling, dim, len(rows), limit, truncated)
