import json

import pytest

from coderouter.corpus import (
    CandidatePool,
    Corpus,
    CotRecord,
    ModelProfile,
    Problem,
    ResponseRecord,
)


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def make_pool(prices: dict[str, float], sample_count: int = 5, params: dict | None = None):
    params = params or {}
    return CandidatePool(
        tuple(ModelProfile(mid, price, params.get(mid)) for mid, price in prices.items()),
        sample_count,
    )


def make_corpus(pool: CandidatePool, outcomes: dict, cots: dict | None = None) -> Corpus:
    """outcomes: problem_id -> model_id -> list of (passed, completion_tokens).
    cots: problem_id -> list of (reasoning_tokens, truncated)."""
    problems = [Problem(pid, "Other", f"prompt for {pid}") for pid in outcomes]
    responses = [
        ResponseRecord(pid, mid, idx, passed, tokens)
        for pid, models in outcomes.items()
        for mid, samples in models.items()
        for idx, (passed, tokens) in enumerate(samples)
    ]
    cot_records = [
        CotRecord(pid, "reasoner", idx, tokens, 100, truncated)
        for pid, samples in (cots or {}).items()
        for idx, (tokens, truncated) in enumerate(samples)
    ]
    return Corpus(problems, responses, cot_records, pool)


@pytest.fixture
def two_model_pool():
    return make_pool({"model-a": 1.26, "model-b": 0.14})


@pytest.fixture(scope="session")
def pipeline_dir(tmp_path_factory):
    """Synthetic corpus driven through the full training pipeline once,
    with reduced dimensions for speed."""
    from coderouter.cli import cli

    d = str(tmp_path_factory.mktemp("pipeline"))
    for argv in (
        ["synth", "-d", d, "--seed", "0"],
        ["rank", "-d", d],
        ["cot-aggregate", "-d", d],
        ["cluster", "-d", d, "--k", "3"],
        ["train-embedding", "-d", d, "--dim", "128", "--proj-dim", "32", "--seed", "1"],
        ["train-classifier", "-d", d, "--rounds", "60", "--seed", "2", "--tier-classifier"],
    ):
        assert cli(argv) == 0, argv
    return d
