import itertools
import math

import pytest

from coderouter import difficulty as diff
from coderouter.errors import (
    DegenerateDistribution,
    ItemSetMismatch,
    NoCotData,
    TooFewDistinctValues,
)
from coderouter.rng import SplitMix64

from conftest import make_corpus, make_pool


def brute_force_kmeans_sse(values, k):
    """Exhaustive search over all contiguous partitions of the sorted list.

    Optimal 1-D k-means clusters are contiguous in sorted order, so this
    enumerates every candidate optimum.
    """
    xs = sorted(values)
    n = len(xs)
    best = math.inf
    for cuts in itertools.combinations(range(1, n), k - 1):
        edges = [0, *cuts, n]
        sse = 0.0
        for a, b in zip(edges, edges[1:]):
            seg = xs[a:b]
            mean = sum(seg) / len(seg)
            sse += sum((x - mean) ** 2 for x in seg)
        best = min(best, sse)
    return best


def pair_counting_oracle(a, b):
    """ARI and FMI by direct enumeration over all item pairs."""
    items = sorted(a)
    n = len(items)
    tp = same_a = same_b = 0
    total = 0
    for i, j in itertools.combinations(range(n), 2):
        total += 1
        sa = a[items[i]] == a[items[j]]
        sb = b[items[i]] == b[items[j]]
        same_a += sa
        same_b += sb
        tp += sa and sb
    fn = same_a - tp
    fp = same_b - tp
    tn = total - tp - fn - fp
    if fn == 0 and fp == 0:
        return 1.0, 1.0
    ari = 2.0 * (tp * tn - fn * fp) / ((tp + fn) * (fn + tn) + (tp + fp) * (fp + tn))
    fmi = tp / math.sqrt(same_a * same_b) if tp else 0.0
    return ari, fmi


class TestAggregateCot:
    def test_lower_median_of_even_count(self):
        pool = make_pool({"a": 1.0}, 1)
        samples = [(v, False) for v in (10, 20, 30, 40, 50, 60, 70, 80, 90, 100)]
        corpus = make_corpus(pool, {"p1": {"a": [(True, 5)]}}, {"p1": samples})
        lengths, excluded = diff.aggregate_cot(corpus, "reasoner")
        assert lengths == [diff.CotLength("p1", 50, 10)]
        assert excluded == []

    def test_all_truncated_problem_is_excluded(self):
        pool = make_pool({"a": 1.0}, 1)
        corpus = make_corpus(
            pool,
            {"p1": {"a": [(True, 5)]}, "p2": {"a": [(True, 5)]}},
            {"p1": [(0, True)] * 10, "p2": [(100, False)] * 10},
        )
        lengths, excluded = diff.aggregate_cot(corpus, "reasoner")
        assert excluded == ["p1"]
        assert [c.problem_id for c in lengths] == ["p2"]

    def test_mixed_truncated_uses_valid_only(self):
        pool = make_pool({"a": 1.0}, 1)
        samples = [(0, True), (0, True), (16, False), (12, False), (14, False)]
        corpus = make_corpus(pool, {"p1": {"a": [(True, 5)]}}, {"p1": samples})
        lengths, _ = diff.aggregate_cot(corpus, "reasoner")
        # valid sorted: [12, 14, 16] -> median 14
        assert lengths[0].length == 14
        assert lengths[0].n_samples_used == 3

    def test_invariant_to_sample_order(self):
        pool = make_pool({"a": 1.0}, 1)
        vals = [(30, False), (10, False), (0, True), (20, False)]
        c1 = make_corpus(pool, {"p1": {"a": [(True, 5)]}}, {"p1": vals})
        c2 = make_corpus(pool, {"p1": {"a": [(True, 5)]}}, {"p1": vals[::-1]})
        assert diff.aggregate_cot(c1, "reasoner")[0] == diff.aggregate_cot(c2, "reasoner")[0]

    def test_no_cot_data(self):
        pool = make_pool({"a": 1.0}, 1)
        corpus = make_corpus(pool, {"p1": {"a": [(True, 5)]}})
        with pytest.raises(NoCotData):
            diff.aggregate_cot(corpus, "reasoner")


class TestKmeans1d:
    def test_zero_variance_groups(self):
        model = diff.fit_kmeans_1d([5, 5, 5, 100, 100, 900], 3)
        assert model.centroids == (5.0, 100.0, 900.0)
        assert diff.kmeans_sse(model, [5, 5, 5, 100, 100, 900]) == 0.0

    def test_three_singleton_reasoning_lengths(self):
        # reasoning lengths of one easy, one medium, one hard problem
        model = diff.fit_kmeans_1d([6832, 24806, 41058], 3)
        assert model.centroids == (6832.0, 24806.0, 41058.0)
        assert diff.assign(model, 6832) == "easy"
        assert diff.assign(model, 24806) == "medium"
        assert diff.assign(model, 41058) == "hard"

    def test_matches_brute_force_on_random_instances(self):
        rng = SplitMix64(2024)
        for trial in range(60):
            n = rng.randint(4, 12)
            k = rng.randint(2, 3)
            values = [rng.randint(0, 500) for _ in range(n)]
            if len(set(values)) < k:
                continue
            model = diff.fit_kmeans_1d(values, k)
            sse = diff.kmeans_sse(model, values)
            best = brute_force_kmeans_sse(values, k)
            assert sse == pytest.approx(best, abs=1e-9)

    def test_beats_random_contiguous_partitions(self):
        rng = SplitMix64(7)
        values = [rng.randint(0, 10_000) for _ in range(40)]
        model = diff.fit_kmeans_1d(values, 3)
        sse = diff.kmeans_sse(model, values)
        xs = sorted(float(v) for v in values)
        for _ in range(1000):
            a = rng.randint(1, 38)
            b = rng.randint(a + 1, 39)
            segs = [xs[:a], xs[a:b], xs[b:]]
            rand_sse = sum(
                sum((x - sum(s) / len(s)) ** 2 for x in s) for s in segs
            )
            assert sse <= rand_sse + 1e-9

    def test_too_few_distinct_values(self):
        with pytest.raises(TooFewDistinctValues):
            diff.fit_kmeans_1d([5, 5, 5, 5], 2)

    def test_centroids_strictly_ascending(self):
        rng = SplitMix64(11)
        for _ in range(30):
            values = [rng.randint(0, 50) for _ in range(rng.randint(5, 25))]
            if len(set(values)) < 3:
                continue
            model = diff.fit_kmeans_1d(values, 3)
            assert model.centroids[0] < model.centroids[1] < model.centroids[2]


class TestAssign:
    @pytest.fixture
    def model(self):
        return diff.fit_kmeans_1d([100, 110, 1000, 1100, 9000, 9100], 3)

    def test_at_lowest_centroid(self, model):
        assert diff.assign(model, model.centroids[0]) == "easy"

    def test_midpoint_goes_to_lower_tier(self, model):
        mid = (model.centroids[1] + model.centroids[2]) / 2
        assert diff.assign(model, mid) == "medium"

    def test_above_max_centroid(self, model):
        assert diff.assign(model, 1e9) == "hard"

    def test_monotone_in_length(self, model):
        rng = SplitMix64(3)
        lengths = sorted(rng.randint(0, 20_000) for _ in range(200))
        tiers = [diff.assign_index(model, x) for x in lengths]
        assert tiers == sorted(tiers)


class TestZscore:
    def test_constant_values_degenerate(self):
        with pytest.raises(DegenerateDistribution):
            diff.zscore([1, 1, 1])

    def test_symmetric_pair(self):
        assert diff.zscore([-1, 1]) == [-1.0, 1.0]

    def test_matches_two_pass_oracle(self):
        rng = SplitMix64(5)
        values = [rng.uniform() * 100 for _ in range(20)]
        mean = math.fsum(values) / 20
        std = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / 20)
        expected = [(v - mean) / std for v in values]
        got = diff.zscore(values)
        for g, e in zip(got, expected):
            assert g == pytest.approx(e, abs=1e-12)
        assert math.fsum(got) / 20 == pytest.approx(0.0, abs=1e-12)
        out_std = math.sqrt(math.fsum(g * g for g in got) / 20)
        assert out_std == pytest.approx(1.0, abs=1e-12)


class TestCompareClusterings:
    def test_identical_labelings(self):
        labels = {f"i{j}": j % 3 for j in range(9)}
        result = diff.compare_clusterings(labels, dict(labels))
        assert result.ari == 1.0 and result.fmi == 1.0
        matrix = result.confusion_matrix
        assert all(matrix[r][c] == 0 for r in range(3) for c in range(3) if r != c)

    def test_against_all_one_cluster(self):
        a = {f"i{j}": j % 2 for j in range(8)}
        b = {f"i{j}": 0 for j in range(8)}
        assert diff.compare_clusterings(a, b).ari == pytest.approx(0.0, abs=1e-12)

    def test_six_element_pair_enumeration(self):
        a = {"a": 0, "b": 0, "c": 1, "d": 1, "e": 2, "f": 2}
        b = {"a": 0, "b": 1, "c": 1, "d": 1, "e": 2, "f": 0}
        result = diff.compare_clusterings(a, b)
        ari, fmi = pair_counting_oracle(a, b)
        assert result.ari == pytest.approx(ari, abs=1e-12)
        assert result.fmi == pytest.approx(fmi, abs=1e-12)

    def test_symmetry_and_label_permutation_invariance(self):
        rng = SplitMix64(13)
        for _ in range(20):
            n = rng.randint(5, 15)
            a = {f"i{j}": rng.below(3) for j in range(n)}
            b = {f"i{j}": rng.below(4) for j in range(n)}
            r_ab = diff.compare_clusterings(a, b)
            r_ba = diff.compare_clusterings(b, a)
            assert r_ab.ari == pytest.approx(r_ba.ari, abs=1e-12)
            assert r_ab.fmi == pytest.approx(r_ba.fmi, abs=1e-12)
            permuted = {i: {0: 7, 1: 5, 2: 9}[lab] for i, lab in a.items()}
            r_pa = diff.compare_clusterings(permuted, b)
            assert r_pa.ari == pytest.approx(r_ab.ari, abs=1e-12)
            assert r_pa.fmi == pytest.approx(r_ab.fmi, abs=1e-12)

    def test_item_set_mismatch(self):
        with pytest.raises(ItemSetMismatch):
            diff.compare_clusterings({"a": 0}, {"b": 0})

    def test_confusion_matrix_counts(self):
        a = {"x": "easy", "y": "easy", "z": "hard"}
        b = {"x": 0, "y": 1, "z": 1}
        result = diff.compare_clusterings(a, b)
        assert result.labels_a == ("easy", "hard")
        assert result.labels_b == (0, 1)
        assert result.confusion_matrix == ((1, 1), (0, 1))


class TestBinaryReclustering:
    def test_k2_tiers_for_confusion_analysis(self):
        # human-difficulty values vs reasoning lengths, both re-clustered binary
        human = [0.1, 0.2, 0.15, 0.8, 0.9, 0.85]
        lengths = [500, 600, 9000, 8000, 9500, 700]
        ids = [f"p{i}" for i in range(6)]
        human_model = diff.fit_kmeans_1d(human, 2)
        length_model = diff.fit_kmeans_1d(lengths, 2)
        a = {pid: diff.assign(human_model, v) for pid, v in zip(ids, human)}
        b = {pid: diff.assign(length_model, v) for pid, v in zip(ids, lengths)}
        assert set(a.values()) == {"easy", "hard"}
        result = diff.compare_clusterings(a, b)
        oracle = pair_counting_oracle(a, b)
        assert (result.ari, result.fmi) == pytest.approx(oracle, abs=1e-12)
