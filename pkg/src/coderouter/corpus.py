"""Data model, JSONL ingestion and artifact persistence.

Record streams are JSONL (one object per line); artifacts are JSON objects
carrying a `format_version` field. Ingestion is order-independent: records
are sorted on canonical keys after loading, so shuffled input files produce
structurally identical corpora.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    DuplicateKey,
    IngestError,
    MalformedLine,
    SchemaError,
    UnknownReference,
    VersionMismatch,
)

FORMAT_VERSION = 1

PROBLEM_SOURCES = ("HumanEval", "LeetCodeSample", "CodeContests", "Other")

# Cost math uses completion tokens only by default; "total" adds prompt
# tokens on top. See TokenMode uses in ranking and evaluator.
TOKEN_MODES = ("completion", "total")

MAX_REPORTED_OFFENDERS = 20


@dataclass(frozen=True)
class Problem:
    problem_id: str
    source: str
    prompt: str
    human_difficulty: float | None = None


@dataclass(frozen=True)
class ModelProfile:
    model_id: str
    price_per_mtok: float
    params_b: float | None = None


@dataclass(frozen=True)
class CandidatePool:
    """Ordered candidate models; the ordering defines classifier class indices."""

    models: tuple[ModelProfile, ...]
    sample_count: int = 5

    def __post_init__(self):
        if not self.models:
            raise SchemaError("candidate pool must contain at least one model")
        if self.sample_count < 1:
            raise SchemaError("sample_count must be >= 1")
        seen = set()
        for m in self.models:
            if m.model_id in seen:
                raise DuplicateKey(m.model_id, "model_id repeated in pool")
            seen.add(m.model_id)
            if m.price_per_mtok <= 0:
                raise SchemaError(f"model {m.model_id!r}: price_per_mtok must be > 0")

    @property
    def model_ids(self) -> list[str]:
        return [m.model_id for m in self.models]

    def profile(self, model_id: str) -> ModelProfile:
        for m in self.models:
            if m.model_id == model_id:
                return m
        raise UnknownReference(model_id, "not in candidate pool")

    @property
    def max_price(self) -> float:
        return max(m.price_per_mtok for m in self.models)


@dataclass(frozen=True)
class ResponseRecord:
    problem_id: str
    model_id: str
    sample_index: int
    passed: bool
    completion_tokens: int
    prompt_tokens: int = 0

    def tokens(self, mode: str = "completion") -> int:
        if mode == "completion":
            return self.completion_tokens
        if mode == "total":
            return self.completion_tokens + self.prompt_tokens
        raise SchemaError(f"unknown token mode {mode!r}")


@dataclass(frozen=True)
class CotRecord:
    problem_id: str
    reasoning_model_id: str
    sample_index: int
    reasoning_tokens: int
    answer_tokens: int
    truncated: bool


@dataclass
class Corpus:
    problems: list[Problem]
    responses: list[ResponseRecord]
    cots: list[CotRecord]
    pool: CandidatePool | None = None
    # (problem_id -> model_id -> samples), built once after ingestion
    _resp_index: dict = field(default_factory=dict, repr=False)
    _cot_index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.problems.sort(key=lambda p: p.problem_id)
        self.responses.sort(key=lambda r: (r.problem_id, r.model_id, r.sample_index))
        self.cots.sort(key=lambda c: (c.problem_id, c.reasoning_model_id, c.sample_index))
        for r in self.responses:
            self._resp_index.setdefault(r.problem_id, {}).setdefault(r.model_id, []).append(r)
        for c in self.cots:
            self._cot_index.setdefault(c.reasoning_model_id, {}).setdefault(c.problem_id, []).append(c)

    @property
    def problem_ids(self) -> list[str]:
        return [p.problem_id for p in self.problems]

    def problem(self, problem_id: str) -> Problem:
        for p in self.problems:
            if p.problem_id == problem_id:
                return p
        raise UnknownReference(problem_id, "not in corpus")

    def samples(self, problem_id: str, model_id: str) -> list[ResponseRecord]:
        return self._resp_index.get(problem_id, {}).get(model_id, [])

    def cot_samples(self, reasoning_model_id: str) -> dict[str, list[CotRecord]]:
        return self._cot_index.get(reasoning_model_id, {})


class _IssueLog:
    """Collects ingestion offenders; aborts with the first offender's
    exception type carrying a report of the first 20."""

    def __init__(self):
        self.issues: list[IngestError] = []

    def add(self, exc: IngestError) -> None:
        if len(self.issues) < MAX_REPORTED_OFFENDERS:
            self.issues.append(exc)

    def raise_if_any(self) -> None:
        if not self.issues:
            return
        first = self.issues[0]
        first.report = [str(i) for i in self.issues]
        raise first


def _iter_jsonl(path: str | Path, log: _IssueLog):
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                log.add(MalformedLine(str(path), line_no, f"invalid JSON: {exc.msg}"))
                continue
            if not isinstance(obj, dict):
                log.add(MalformedLine(str(path), line_no, "line is not a JSON object"))
                continue
            yield line_no, obj


def _require(obj: dict, key: str, types, path: str, line_no: int, log: _IssueLog):
    if key not in obj:
        log.add(MalformedLine(path, line_no, f"missing field {key!r}"))
        return None
    value = obj[key]
    if not isinstance(value, types) or isinstance(value, bool) and bool not in (
        types if isinstance(types, tuple) else (types,)
    ):
        log.add(MalformedLine(path, line_no, f"field {key!r} has wrong type"))
        return None
    return value


def load_problems(path: str | Path, log: _IssueLog | None = None) -> list[Problem]:
    own_log = log is None
    log = log or _IssueLog()
    problems: list[Problem] = []
    seen: set[str] = set()
    for line_no, obj in _iter_jsonl(path, log):
        pid = _require(obj, "problem_id", str, str(path), line_no, log)
        source = _require(obj, "source", str, str(path), line_no, log)
        prompt = _require(obj, "prompt", str, str(path), line_no, log)
        if pid is None or source is None or prompt is None:
            continue
        if not pid or not prompt:
            log.add(MalformedLine(str(path), line_no, "problem_id and prompt must be non-empty"))
            continue
        if source not in PROBLEM_SOURCES:
            log.add(MalformedLine(str(path), line_no, f"unknown source {source!r}"))
            continue
        if pid in seen:
            log.add(DuplicateKey(pid, f"{path}:{line_no}"))
            continue
        seen.add(pid)
        hd = obj.get("human_difficulty")
        if hd is not None and not isinstance(hd, (int, float)):
            log.add(MalformedLine(str(path), line_no, "human_difficulty must be a number"))
            continue
        problems.append(Problem(pid, source, prompt, None if hd is None else float(hd)))
    if own_log:
        log.raise_if_any()
    return problems


def load_responses(path: str | Path, log: _IssueLog | None = None) -> list[ResponseRecord]:
    own_log = log is None
    log = log or _IssueLog()
    records: list[ResponseRecord] = []
    seen: set[tuple] = set()
    for line_no, obj in _iter_jsonl(path, log):
        pid = _require(obj, "problem_id", str, str(path), line_no, log)
        mid = _require(obj, "model_id", str, str(path), line_no, log)
        idx = _require(obj, "sample_index", int, str(path), line_no, log)
        passed = _require(obj, "passed", bool, str(path), line_no, log)
        ctok = _require(obj, "completion_tokens", int, str(path), line_no, log)
        if None in (pid, mid, idx, passed, ctok):
            continue
        ptok = obj.get("prompt_tokens", 0)
        if not isinstance(ptok, int) or isinstance(ptok, bool):
            log.add(MalformedLine(str(path), line_no, "prompt_tokens must be an integer"))
            continue
        if idx < 0 or ctok < 0 or ptok < 0:
            log.add(MalformedLine(str(path), line_no, "indices and token counts must be >= 0"))
            continue
        key = (pid, mid, idx)
        if key in seen:
            log.add(DuplicateKey(f"{pid}/{mid}/{idx}", f"{path}:{line_no}"))
            continue
        seen.add(key)
        records.append(ResponseRecord(pid, mid, idx, bool(passed), ctok, ptok))
    if own_log:
        log.raise_if_any()
    return records


def load_cots(path: str | Path, log: _IssueLog | None = None) -> list[CotRecord]:
    own_log = log is None
    log = log or _IssueLog()
    records: list[CotRecord] = []
    seen: set[tuple] = set()
    for line_no, obj in _iter_jsonl(path, log):
        pid = _require(obj, "problem_id", str, str(path), line_no, log)
        rmid = _require(obj, "reasoning_model_id", str, str(path), line_no, log)
        idx = _require(obj, "sample_index", int, str(path), line_no, log)
        rtok = _require(obj, "reasoning_tokens", int, str(path), line_no, log)
        atok = _require(obj, "answer_tokens", int, str(path), line_no, log)
        trunc = _require(obj, "truncated", bool, str(path), line_no, log)
        if None in (pid, rmid, idx, rtok, atok, trunc):
            continue
        if idx < 0 or rtok < 0 or atok < 0:
            log.add(MalformedLine(str(path), line_no, "indices and token counts must be >= 0"))
            continue
        if trunc and rtok != 0:
            # truncated traces are recorded with length 0 by convention
            log.add(MalformedLine(str(path), line_no, "truncated record must have reasoning_tokens 0"))
            continue
        key = (pid, rmid, idx)
        if key in seen:
            log.add(DuplicateKey(f"{pid}/{rmid}/{idx}", f"{path}:{line_no}"))
            continue
        seen.add(key)
        records.append(CotRecord(pid, rmid, idx, rtok, atok, bool(trunc)))
    if own_log:
        log.raise_if_any()
    return records


def load_pricing(path: str | Path, sample_count: int = 5) -> CandidatePool:
    """pricing.json maps model_id -> {price_per_mtok, params_b}. File order
    defines the pool ordering (and therefore class indices)."""
    with open(path, encoding="utf-8") as fh:
        try:
            table = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON: {exc.msg}") from exc
    if not isinstance(table, dict):
        raise SchemaError(f"{path}: pricing file must be a JSON object")
    models = []
    for model_id, entry in table.items():
        if not isinstance(entry, dict) or "price_per_mtok" not in entry:
            raise SchemaError(f"{path}: model {model_id!r} needs a price_per_mtok entry")
        price = entry["price_per_mtok"]
        if not isinstance(price, (int, float)) or price <= 0:
            raise SchemaError(f"{path}: model {model_id!r}: price_per_mtok must be > 0")
        params = entry.get("params_b")
        if params is not None and not isinstance(params, (int, float)):
            raise SchemaError(f"{path}: model {model_id!r}: params_b must be a number")
        models.append(ModelProfile(model_id, float(price), None if params is None else float(params)))
    return CandidatePool(tuple(models), sample_count)


def load_corpus(
    problems_path: str | Path,
    responses_path: str | Path | None = None,
    cots_path: str | Path | None = None,
    pricing_path: str | Path | None = None,
    sample_count: int = 5,
) -> Corpus:
    """Load and cross-validate a corpus. Every response/cot must reference a
    known problem_id, and every response a known pool model when a pricing
    file is given. Aborts with a report of the first 20 offenders."""
    log = _IssueLog()
    problems = load_problems(problems_path, log)
    responses = load_responses(responses_path, log) if responses_path else []
    cots = load_cots(cots_path, log) if cots_path else []
    pool = load_pricing(pricing_path, sample_count) if pricing_path else None

    known = {p.problem_id for p in problems}
    pool_ids = set(pool.model_ids) if pool else None
    for r in responses:
        if r.problem_id not in known:
            log.add(UnknownReference(r.problem_id, "response references unknown problem"))
        elif pool_ids is not None and r.model_id not in pool_ids:
            log.add(UnknownReference(r.model_id, "response references model outside the pool"))
        elif pool is not None and r.sample_index >= pool.sample_count:
            log.add(
                MalformedLine(
                    str(responses_path), 0,
                    f"sample_index {r.sample_index} out of range for n_s={pool.sample_count} "
                    f"({r.problem_id}/{r.model_id})",
                )
            )
    for c in cots:
        if c.problem_id not in known:
            log.add(UnknownReference(c.problem_id, "cot references unknown problem"))
    log.raise_if_any()
    return Corpus(problems, responses, cots, pool)


# --- artifact persistence ---------------------------------------------------

def write_artifact(path: str | Path, payload: dict) -> None:
    """Write a versioned JSON artifact. Keys are sorted and floats use
    shortest round-trip repr, so identical payloads are byte-identical."""
    if "format_version" not in payload:
        payload = {"format_version": FORMAT_VERSION, **payload}
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_artifact(path: str | Path, expected_version: int = FORMAT_VERSION) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON: {exc.msg}") from exc
    if not isinstance(payload, dict):
        raise SchemaError(f"{path}: artifact must be a JSON object")
    if "format_version" not in payload:
        raise SchemaError(f"{path}: missing format_version")
    if payload["format_version"] != expected_version:
        raise VersionMismatch(str(path), payload["format_version"], expected_version)
    return payload


def write_jsonl(path: str | Path, rows: list[dict]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True, separators=(",", ":")))
            fh.write("\n")
