"""Acceptance criteria, one test per criterion.

Run with `pytest tests/test_acceptance.py -v -s` to see one line per
criterion. Each test pins its stated tolerance and runtime budget.
"""

import itertools
import statistics
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from coderouter import classifier as clf
from coderouter import difficulty as diff
from coderouter import embedding as emb
from coderouter import evaluator as ev
from coderouter.cli import cli
from coderouter.corpus import (
    CandidatePool,
    Corpus,
    ModelProfile,
    Problem,
    ResponseRecord,
    read_artifact,
)
from coderouter.ranking import read_ranked
from coderouter.rng import SplitMix64
from coderouter.router import GatewayConfig, Router

from test_difficulty import brute_force_kmeans_sse, pair_counting_oracle


def _report(name: str, started: float, budget: float) -> None:
    elapsed = time.perf_counter() - started
    assert elapsed < budget, f"{name}: {elapsed:.2f}s exceeded {budget:.0f}s budget"
    print(f"ACCEPTANCE PASS: {name} ({elapsed:.2f}s)")


def _price_fixture_corpus():
    """100 problems x 5 samples per model, with integer token counts whose
    grand means equal the reference per-model token averages exactly."""
    rows = [
        ("coder-1.5b", 0.14, 329.02),
        ("coder-22b", 0.95, 476.48),
        ("coder-32b", 1.26, 763.57),
    ]
    problems = [Problem(f"p{i:03d}", "Other", f"prompt {i}") for i in range(100)]
    responses = []
    for mid, _price, mean in rows:
        total = round(mean * 500)
        base, extra = divmod(total, 500)
        counter = 0
        for p in problems:
            for s in range(5):
                tokens = base + (1 if counter < extra else 0)
                counter += 1
                responses.append(ResponseRecord(p.problem_id, mid, s, False, tokens))
    pool = CandidatePool(
        tuple(ModelProfile(mid, price) for mid, price, _ in rows), sample_count=5
    )
    return Corpus(problems, responses, []), pool, rows


def test_reference_price_rows_cross_check():
    # three real-world (mean tokens, $/Mtok, $/problem) benchmark rows that
    # the price arithmetic must reproduce: price = tokens * rate / 1e6
    started = time.perf_counter()
    corpus, pool, rows = _price_fixture_corpus()
    split = [p.problem_id for p in corpus.problems]
    reference = {"coder-1.5b": 4.61e-05, "coder-22b": 45.27e-05, "coder-32b": 96.21e-05}
    for mid, price, mean in rows:
        result = ev.evaluate_policy(mid, ev.fixed_policy(mid), corpus, pool, split)
        assert result.metrics[1].token == pytest.approx(mean, abs=1e-9)
        got = result.metrics[1].price
        assert abs(got - reference[mid]) / reference[mid] <= 0.005, (mid, got)
    _report("reference price-row arithmetic (3 rows within 0.5%)", started, 1.0)


def test_pass_at_k_equals_exhaustive_enumeration():
    started = time.perf_counter()
    for n in range(1, 7):
        for c in range(n + 1):
            for k in range(1, n + 1):
                hits = total = 0
                for subset in itertools.combinations(range(n), k):
                    total += 1
                    hits += any(i < c for i in subset)
                assert ev.pass_at_k(n, c, k) == float(Fraction(hits, total))
    _report("pass@k equals exhaustive subset enumeration (n <= 6, exact)", started, 1.0)


def test_kmeans_matches_brute_force_on_200_instances():
    started = time.perf_counter()
    rng = SplitMix64(314159)
    checked = 0
    while checked < 200:
        n = rng.randint(3, 12)
        k = rng.randint(2, 3)
        values = [rng.randint(0, 400) for _ in range(n)]
        if len(set(values)) < k:
            continue
        model = diff.fit_kmeans_1d(values, k)
        sse = diff.kmeans_sse(model, values)
        assert sse == pytest.approx(brute_force_kmeans_sse(values, k), abs=1e-9)
        checked += 1
    _report("exact 1-D k-means equals brute force (200 instances)", started, 10.0)


def test_triplet_gradient_matches_central_differences():
    started = time.perf_counter()
    h = 1e-4
    for seed in range(50):
        rng = np.random.default_rng(seed)
        head = emb.ProjectionHead(rng.normal(size=(4, 6)) * 0.6, margin=1.0)
        xa, xp, xn = rng.normal(size=(3, 8, 6))
        _, grad = emb.batch_loss_and_grad(head, xa, xp, xn)
        numeric = np.zeros_like(grad)
        for i in range(4):
            for j in range(6):
                w0 = head.W[i, j]
                head.W[i, j] = w0 + h
                up, _ = emb.batch_loss_and_grad(head, xa, xp, xn)
                head.W[i, j] = w0 - h
                down, _ = emb.batch_loss_and_grad(head, xa, xp, xn)
                head.W[i, j] = w0
                numeric[i, j] = (up - down) / (2 * h)
        scale = max(np.abs(numeric).max(), 1e-12)
        rel = np.abs(grad - numeric).max() / scale
        assert rel <= 1e-3, f"seed {seed}: relative error {rel}"
    _report("triplet-loss gradient vs central differences (50 batches)", started, 5.0)


def test_classifier_memorizes_50_points_with_monotone_loss():
    started = time.perf_counter()
    rng = np.random.default_rng(99)
    X = np.column_stack([np.arange(50.0), rng.normal(size=50), rng.normal(size=50)])
    y = rng.integers(0, 4, size=50)
    config = clf.TrainConfig(rounds=300, max_depth=6, min_samples_leaf=1, learning_rate=0.2)
    forest = clf.fit(X, y, ["a", "b", "c", "d"], config)
    hits = sum(clf.predict(forest, row) == "abcd"[label] for row, label in zip(X, y))
    assert hits == 50
    curve = forest.meta["train_log_loss"]
    assert all(b <= a + 1e-9 for a, b in zip(curve, curve[1:]))
    _report("classifier memorization (50 points) + monotone log loss", started, 10.0)


def _run_pipeline(d: str, synth_seed: int, embed_epochs: int, train_seed: int,
                  dim=128, proj_dim=32, rounds=80) -> None:
    for argv in (
        ["synth", "-d", d, "--seed", str(synth_seed)],
        ["rank", "-d", d],
        ["cot-aggregate", "-d", d],
        ["cluster", "-d", d, "--k", "3"],
        ["train-embedding", "-d", d, "--dim", str(dim), "--proj-dim", str(proj_dim),
         "--epochs", str(embed_epochs), "--seed", str(train_seed)],
        ["train-classifier", "-d", d, "--rounds", str(rounds), "--seed", str(train_seed)],
    ):
        assert cli(argv) == 0, argv


def _learned_vs_references(d: str):
    from coderouter.corpus import load_corpus

    paths = Path(d)
    corpus = load_corpus(paths / "problems.jsonl", paths / "responses.jsonl",
                         paths / "cots.jsonl", paths / "pricing.json")
    pool = corpus.pool
    ranked = read_ranked(paths / "ranked.jsonl")
    split = read_artifact(paths / "split.json")["test_ids"]
    config = GatewayConfig(
        difficulty=paths / "difficulty.json",
        projection=paths / "projection.json",
        classifier=paths / "classifier.json",
        pricing=paths / "pricing.json",
    )
    router = Router.load(config)
    prompts = {p.problem_id: p.prompt for p in corpus.problems}
    learned = ev.evaluate_policy(
        "learned", lambda pid: router.route(prompts[pid], problem_id=pid).model_id,
        corpus, pool, split,
    )
    oracle = ev.evaluate_policy("oracle", ev.oracle_policy(ranked), corpus, pool, split)
    largest = ev.evaluate_policy("synth-huge", ev.fixed_policy("synth-huge"), corpus, pool, split)
    return learned, oracle, largest


def test_end_to_end_synthetic_routing(tmp_path):
    started = time.perf_counter()
    d = str(tmp_path / "e2e")
    # full default hyperparameters on the default 3-tier corpus, fixed seeds
    _run_pipeline(d, synth_seed=0, embed_epochs=20, train_seed=0,
                  dim=768, proj_dim=128, rounds=200)
    learned, oracle, largest = _learned_vs_references(d)
    assert learned.metrics[1].score >= 0.9 * oracle.metrics[1].score, (
        learned.metrics[1].score, oracle.metrics[1].score)
    assert learned.metrics[1].price <= largest.metrics[1].price
    _report(
        f"end-to-end synthetic routing (learned pass@1 {learned.metrics[1].score:.2%} "
        f">= 0.9x oracle {oracle.metrics[1].score:.2%}, price "
        f"{learned.metrics[1].price:.2e} <= always-largest {largest.metrics[1].price:.2e})",
        started, 60.0,
    )


def test_ablation_trained_projection_not_worse(tmp_path):
    started = time.perf_counter()
    trained_scores, untrained_scores = [], []
    for seed in range(5):
        d_trained = str(tmp_path / f"trained{seed}")
        d_untrained = str(tmp_path / f"untrained{seed}")
        _run_pipeline(d_trained, synth_seed=seed, embed_epochs=20, train_seed=seed)
        _run_pipeline(d_untrained, synth_seed=seed, embed_epochs=0, train_seed=seed)
        trained_scores.append(_learned_vs_references(d_trained)[0].metrics[1].score)
        untrained_scores.append(_learned_vs_references(d_untrained)[0].metrics[1].score)
    median_trained = statistics.median(trained_scores)
    median_untrained = statistics.median(untrained_scores)
    assert median_trained >= median_untrained - 0.01, (trained_scores, untrained_scores)
    _report(
        f"ablation direction (median trained {median_trained:.2%} vs "
        f"untrained {median_untrained:.2%}, 5 seeds)",
        started, 120.0,
    )


def test_ari_fmi_match_pair_counting_oracles():
    started = time.perf_counter()
    rng = SplitMix64(271828)
    for trial in range(100):
        n = rng.randint(2, 20)
        a = {f"i{j}": rng.below(rng.randint(1, 4)) for j in range(n)}
        b = {f"i{j}": rng.below(rng.randint(1, 4)) for j in range(n)}
        result = diff.compare_clusterings(a, b)
        ari, fmi = pair_counting_oracle(a, b)
        assert result.ari == pytest.approx(ari, abs=1e-10)
        assert result.fmi == pytest.approx(fmi, abs=1e-10)
        identical = diff.compare_clusterings(a, dict(a))
        assert identical.ari == 1.0 and identical.fmi == 1.0
    _report("ARI/FMI vs pair-counting oracles (100 pairs, 1e-10)", started, 10.0)


ARTIFACT_FILES = (
    "problems.jsonl", "responses.jsonl", "cots.jsonl", "pricing.json",
    "ranked.jsonl", "cot_lengths.json", "difficulty.json", "projection.json",
    "classifier.json", "tier_classifier.json", "split.json", "report.json",
)


def test_cli_pipeline_determinism(tmp_path, capsys):
    started = time.perf_counter()

    def run(d: str) -> None:
        for argv in (
            ["synth", "-d", d, "--seed", "11"],
            ["rank", "-d", d],
            ["cot-aggregate", "-d", d],
            ["cluster", "-d", d, "--k", "3"],
            ["train-embedding", "-d", d, "--dim", "128", "--proj-dim", "32", "--seed", "5"],
            ["train-classifier", "-d", d, "--rounds", "60", "--seed", "5", "--tier-classifier"],
            ["evaluate", "-d", d, "--policy", "learned", "--policy", "oracle",
             "--policy", "random"],
        ):
            assert cli(argv) == 0, argv

    run(str(tmp_path / "one"))
    run(str(tmp_path / "two"))
    capsys.readouterr()
    for name in ARTIFACT_FILES:
        a = (tmp_path / "one" / name).read_bytes()
        b = (tmp_path / "two" / name).read_bytes()
        assert a == b, f"{name} differs between identical runs"
    _report("CLI pipeline determinism (byte-identical artifacts)", started, 60.0)
