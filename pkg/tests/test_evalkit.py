import math

import numpy as np
import pytest
from scipy import stats

from shortsim.errors import ConstantInput, LengthMismatch
from shortsim.evalkit import (
    ScoredPairSet,
    bucketed_mse,
    evaluate_set,
    make_report,
    mse,
    pearson,
    ranks,
    read_scored_pairs,
    render_text_tables,
    report_to_json,
    spearman,
)


def pearson_literal_form(x, y):
    """The published computational form, extra vanishing terms included:

    r = sum((xi-xb)(yi-yb)) /
        sqrt((sum((xi-xb)^2) - (sum(xi-xb))^2 / n) *
             (sum((yi-yb)^2) - (sum(yi-yb))^2 / n))
    """
    n = len(x)
    xb = sum(x) / n
    yb = sum(y) / n
    num = sum((xi - xb) * (yi - yb) for xi, yi in zip(x, y))
    sx = sum((xi - xb) ** 2 for xi in x) - sum(xi - xb for xi in x) ** 2 / n
    sy = sum((yi - yb) ** 2 for yi in y) - sum(yi - yb for yi in y) ** 2 / n
    return num / math.sqrt(sx * sy)


def spearman_rank_difference_form(x, y):
    """1 - 6 * sum(d^2) / (n (n^2 - 1)), valid for tie-free data."""
    def rank(values):
        order = sorted(range(len(values)), key=lambda i: values[i])
        r = [0] * len(values)
        for pos, idx in enumerate(order):
            r[idx] = pos + 1
        return r

    rx, ry = rank(list(x)), rank(list(y))
    n = len(x)
    d2 = sum((a - b) ** 2 for a, b in zip(rx, ry))
    return 1.0 - 6.0 * d2 / (n * (n * n - 1))


class TestPearson:
    def test_perfect_correlation(self):
        x = [1.0, 2.0, 5.0, 7.0]
        assert pearson(x, x) == pytest.approx(1.0, abs=1e-12)

    def test_perfect_anticorrelation(self):
        x = np.array([1.0, 2.0, 5.0, 7.0])
        assert pearson(x, -x) == pytest.approx(-1.0, abs=1e-12)

    def test_hand_computed_value(self):
        assert pearson([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8,
                                                                    abs=1e-12)

    def test_matches_literal_published_form(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            x = rng.normal(size=25)
            y = rng.normal(size=25)
            assert pearson(x, y) == pytest.approx(
                pearson_literal_form(list(x), list(y)), abs=1e-12)

    def test_matches_scipy(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=50)
        y = 0.4 * x + rng.normal(size=50)
        assert pearson(x, y) == pytest.approx(stats.pearsonr(x, y).statistic,
                                              abs=1e-12)

    def test_affine_invariance_and_sign_flip(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=30)
        y = rng.normal(size=30)
        r = pearson(x, y)
        assert pearson(2.5 * x + 7, y) == pytest.approx(r, abs=1e-12)
        assert pearson(-x, y) == pytest.approx(-r, abs=1e-12)

    def test_constant_input(self):
        with pytest.raises(ConstantInput):
            pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
        with pytest.raises(ConstantInput):
            pearson([1.0], [2.0])

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            pearson([1.0, 2.0], [1.0, 2.0, 3.0])


class TestSpearman:
    def test_monotone_transform_gives_one(self):
        x = np.array([0.3, 1.9, 2.2, 5.0, 9.1])
        assert spearman(x, np.exp(x)) == pytest.approx(1.0, abs=1e-12)

    def test_rank_reversal(self):
        assert spearman([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0, abs=1e-12)

    def test_tie_free_matches_rank_difference_form(self):
        rng = np.random.default_rng(6)
        for _ in range(200):
            x = rng.permutation(20).astype(float)
            y = rng.permutation(20).astype(float)
            assert spearman(x, y) == pytest.approx(
                spearman_rank_difference_form(x, y), abs=1e-12)

    def test_ties_match_scipy_average_ranks(self):
        x = [1.0, 2.0, 2.0, 3.0, 5.0, 5.0, 5.0]
        y = [2.0, 1.0, 4.0, 4.0, 6.0, 7.0, 6.5]
        assert spearman(x, y) == pytest.approx(
            stats.spearmanr(x, y).statistic, abs=1e-12)

    def test_average_ranks(self):
        np.testing.assert_array_equal(ranks([10.0, 20.0, 20.0, 30.0]),
                                      [1.0, 2.5, 2.5, 4.0])


class TestMse:
    def test_identity_is_zero(self):
        assert mse([1.0, 2.5, 4.0], [1.0, 2.5, 4.0]) == 0.0

    def test_hand_computed(self):
        assert mse([0.0, 0.0], [3.0, 4.0]) == pytest.approx(12.5, abs=1e-12)

    def test_permutation_invariance(self):
        pred = np.array([0.5, 1.0, 3.5, 2.0])
        gold = np.array([1.0, 1.5, 3.0, 2.5])
        perm = [2, 0, 3, 1]
        assert mse(pred, gold) == pytest.approx(mse(pred[perm], gold[perm]),
                                                abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            mse([1.0], [1.0, 2.0])
        with pytest.raises(LengthMismatch):
            mse([], [])


def pair_set(preds, golds):
    return ScoredPairSet(ids=[f"p{i}" for i in range(len(preds))],
                         pred=np.array(preds), gold=np.array(golds))


class TestBucketedMse:
    def test_single_bucket_zero_error(self):
        s = pair_set([4.25, 4.25], [4.25, 4.25])
        rows = bucketed_mse(s)
        assert rows[4] == (4.0, 5.0, 0.0, 2)
        assert all(value is None and count == 0
                   for _, _, value, count in rows[:4])

    def test_two_buckets_unit_error(self):
        s = pair_set([1.5, 0.5], [0.5, 1.5])
        rows = bucketed_mse(s)
        assert rows[0][2] == pytest.approx(1.0)
        assert rows[1][2] == pytest.approx(1.0)
        assert rows[2][2] is None

    def test_partition_identity(self):
        rng = np.random.default_rng(7)
        gold = rng.uniform(0, 5, size=60)
        pred = np.clip(gold + rng.normal(size=60), 0, 5)
        s = pair_set(pred, gold)
        rows = bucketed_mse(s)
        total = sum(value * count for _, _, value, count in rows
                    if value is not None)
        assert total == pytest.approx(mse(pred, gold) * len(gold), abs=1e-9)
        assert sum(count for *_, count in rows) == len(gold)

    def test_integer_labels_land_in_their_bucket(self):
        s = pair_set([3.0, 5.0, 0.0], [3.0, 5.0, 0.0])
        rows = bucketed_mse(s)
        assert rows[3][3] == 1   # 3.0 -> [3,4)
        assert rows[4][3] == 1   # 5.0 -> [4,5]
        assert rows[0][3] == 1   # 0.0 -> [0,1)


class TestReport:
    def test_ordering_by_descending_pearson(self):
        rng = np.random.default_rng(8)
        gold = rng.uniform(0, 5, 40)
        strong = np.clip(gold + rng.normal(scale=0.3, size=40), 0, 5)
        weak = np.clip(gold + rng.normal(scale=2.0, size=40), 0, 5)
        rows = make_report([("weak", pair_set(weak, gold)),
                            ("strong", pair_set(strong, gold))])
        assert [r.name for r in rows] == ["strong", "weak"]
        assert rows[0].pearson > rows[1].pearson

    def test_empty_input(self):
        assert make_report([]) == []

    def test_error_isolation(self):
        gold = np.array([1.0, 2.0, 3.0])
        ok = pair_set([1.0, 2.0, 2.5], gold)
        bad = pair_set([2.0, 2.0, 2.0], gold)   # constant predictions
        rows = make_report([("bad", bad), ("ok", ok)])
        assert rows[0].name == "ok" and rows[0].error is None
        assert rows[1].name == "bad"
        assert "ConstantInput" in rows[1].error

    def test_json_and_text_rendering(self):
        s = pair_set([4.2, 4.3, 0.5], [4.0, 4.5, 0.5])
        rows = make_report([("modelx", s)])
        doc = report_to_json(rows, metadata={"pooling": "mean"})
        assert '"pearson"' in doc and '"mse": null' in doc
        text = render_text_tables(rows)
        assert "modelx" in text
        assert "Pearson" in text and "Spearman" in text
        # empty buckets render as "-"
        assert " -" in text

    def test_unique_ids_enforced(self):
        with pytest.raises(ValueError):
            ScoredPairSet(ids=["a", "a"], pred=np.array([1.0, 2.0]),
                          gold=np.array([1.0, 2.0]))

    def test_read_scored_pairs(self, tmp_path):
        p = tmp_path / "scores.tsv"
        p.write_text("# comment\nid1\t4.5\t5.0\nid2\t1.0\t0.5\n",
                     encoding="utf-8")
        s = read_scored_pairs(str(p))
        assert s.ids == ["id1", "id2"]
        np.testing.assert_array_equal(s.pred, [4.5, 1.0])
        np.testing.assert_array_equal(s.gold, [5.0, 0.5])
