"""Word statistics: tokenization, exact tests, screening, SVM ranking."""

import math
import warnings
from fractions import Fraction

import numpy as np
import pytest

from conftest import build_matrix
from meetmine.corpus import Alphabet, Corpus, DialogueAct, Meeting, Suggestion
from meetmine.wordstats import (
    STOPWORDS,
    ContingencyTable2x2,
    SuggestionMatrix,
    aggregate_lexicon_test,
    fisher_exact,
    hypergeom_pmf,
    svm_word_ranking,
    tokenize,
    tokenize_suggestions,
    word_screen,
)


class TestTokenize:
    def test_stopword_list_size(self):
        assert 150 <= len(STOPWORDS) <= 185

    def test_quoted_suggestion(self):
        got = tokenize("Shouldn't we start with the most important parts?")
        assert got == {"start", "important", "parts"}

    def test_duplicates_collapse(self):
        assert tokenize("go go go now") == {"go"}

    def test_stopwords_only(self):
        assert tokenize("") == set()
        assert tokenize("the a of") == set()


class TestTokenizeSuggestions:
    def build(self):
        acts = [
            DialogueAct(0.0, "p0", "offer",
                        text="Shouldn't we start with the most important parts?"),
            DialogueAct(1.0, "p1", "accept", text=None),
            DialogueAct(2.0, "p0", "offer", text="the of and"),
            DialogueAct(3.0, "p1", "offer",
                        text="Maybe try the blue design design"),
        ]
        meeting = Meeting(
            id="m0", acts=acts,
            suggestions=(Suggestion(0, True), Suggestion(1, True),
                         Suggestion(2, False), Suggestion(3, False)),
        )
        return Corpus(alphabet=Alphabet(["offer", "accept"]), meetings=(meeting,))

    def test_matrix_shape_and_warnings(self):
        with warnings.catch_warnings(record=True) as rec:
            warnings.simplefilter("always")
            matrix = tokenize_suggestions(self.build())
        assert len(rec) == 1 and "no text" in str(rec[0].message)
        # the no-text and all-stopword suggestions both drop out
        assert len(matrix.labels) == 2
        assert matrix.vocabulary == tuple(sorted(matrix.vocabulary))
        assert set(np.unique(matrix.rows)) <= {0, 1}
        assert list(matrix.labels) == [1, -1]
        j = matrix.vocabulary.index("design")
        assert matrix.rows[1, j] == 1  # repeated word stays a single 1

    def test_matrix_validation(self):
        with pytest.raises(ValueError):
            SuggestionMatrix(("a",), np.zeros((2, 1), dtype=np.int8),
                             np.array([1, 2]))


class TestHypergeom:
    def test_normalization(self):
        total = sum(hypergeom_pmf(50, 20, 10, k) for k in range(11))
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_hand_value(self):
        assert hypergeom_pmf(4, 2, 2, 1) == pytest.approx(2 / 3, abs=1e-15)

    def test_out_of_support(self):
        assert hypergeom_pmf(10, 3, 4, 4) == 0.0
        assert hypergeom_pmf(10, 8, 9, 6) == 0.0

    def test_normalizes_across_sizes(self):
        for N in (7, 23, 100, 141, 200):
            for K, n in ((N // 2, N // 3), (N, N), (3, N - 1)):
                total = sum(hypergeom_pmf(N, K, n, k)
                            for k in range(min(K, n) + 1))
                assert total == pytest.approx(1.0, abs=1e-12), (N, K, n)

    def test_float_path_matches_rationals(self):
        # N=150 runs through log-gamma; compare against exact fractions
        def frac(N, K, n, k):
            return Fraction(math.comb(K, k) * math.comb(N - K, n - k),
                            math.comb(N, n))
        dev = max(abs(hypergeom_pmf(150, 60, 45, k) - float(frac(150, 60, 45, k)))
                  for k in range(46))
        assert dev < 1e-13


def fisher_oracle(a, b, c, d):
    """Exact rational enumeration over all tables with the same margins."""
    N = a + b + c + d
    r1, c1 = a + b, a + c
    lo, hi = max(0, c1 - (N - r1)), min(r1, c1)
    pmf = {
        k: Fraction(math.comb(r1, k) * math.comb(N - r1, c1 - k),
                    math.comb(N, c1))
        for k in range(lo, hi + 1)
    }
    p_obs = pmf[a]
    two = sum(p for p in pmf.values() if p <= p_obs)
    if a * N >= r1 * c1:
        one = sum(pmf[k] for k in range(a, hi + 1))
    else:
        one = sum(pmf[k] for k in range(lo, a + 1))
    return float(two), float(one)


class TestFisher:
    def test_both_extremes_sum_to_one(self):
        res = fisher_exact(ContingencyTable2x2(1, 0, 0, 1))
        assert res.p_two_sided == 1.0

    def test_perfectly_sorted_table(self):
        res = fisher_exact(ContingencyTable2x2(10, 0, 0, 10))
        assert res.p_two_sided == pytest.approx(2 / math.comb(20, 10), abs=1e-18)

    def test_degenerate_margins(self):
        res = fisher_exact(ContingencyTable2x2(3, 2, 0, 0))
        assert res.degenerate and res.p_two_sided == 1.0

    def test_matches_enumeration_oracle(self):
        rng = np.random.default_rng(5)
        checked = 0
        for _ in range(1000):
            cells = rng.integers(0, 16, 4)
            if cells.sum() == 0 or cells.sum() > 60:
                continue
            a, b, c, d = (int(v) for v in cells)
            res = fisher_exact(ContingencyTable2x2(a, b, c, d))
            if (a + b == 0) or (c + d == 0) or (a + c == 0) or (b + d == 0):
                assert res.degenerate and res.p_two_sided == 1.0
                continue
            two, one = fisher_oracle(a, b, c, d)
            assert res.p_two_sided == two, (a, b, c, d)
            assert res.p_one_sided == one, (a, b, c, d)
            checked += 1
        assert checked > 500

    def test_sides_ordered(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            cells = [int(v) for v in rng.integers(0, 40, 4)]
            if sum(cells) == 0:
                continue
            res = fisher_exact(ContingencyTable2x2(*cells))
            assert res.p_two_sided >= res.p_one_sided - 1e-12

    def test_large_aggregate_table(self):
        # 139 rows with the feature (134 accepted) vs 2185 without (1981)
        res = fisher_exact(ContingencyTable2x2(134, 5, 1981, 204))
        assert res.p_one_sided < 0.01
        assert res.p_one_sided == pytest.approx(0.00999058, abs=2e-8)
        assert res.p_two_sided == pytest.approx(0.0205869, abs=2e-7)


class TestAggregate:
    def aggregate_matrix(self):
        rows = ([({"persuade", "x"}, True)] * 134
                + [({"persuade", "x"}, False)] * 5
                + [({"x"}, True)] * 1981
                + [({"x"}, False)] * 204)
        return build_matrix(rows)

    def test_table_reconstruction(self):
        table, res = aggregate_lexicon_test(self.aggregate_matrix(),
                                            {"persuade"})
        assert (table.a, table.b, table.c, table.d) == (134, 5, 1981, 204)
        assert res.p_one_sided < 0.01

    def test_full_coverage_degenerate(self):
        _, res = aggregate_lexicon_test(self.aggregate_matrix(),
                                        {"persuade", "x"})
        assert res.degenerate and res.p_two_sided == 1.0

    def test_disjoint_lexicon_degenerate(self):
        _, res = aggregate_lexicon_test(self.aggregate_matrix(), {"unseen"})
        assert res.degenerate

    def test_perfect_separation_tiny_p(self):
        rows = [({"win"} if i < 100 else {"z"}, i < 100) for i in range(200)]
        _, res = aggregate_lexicon_test(build_matrix(rows), {"win"})
        assert res.p_two_sided < 1e-6 and res.p_one_sided < 1e-6


class TestWordScreen:
    def yeah_matrix(self):
        rows = ([({"yeah", "f"}, True)] * 46
                + [({"f"}, True)] * 2069 + [({"f"}, False)] * 209)
        return build_matrix(rows)

    def test_yeah_row(self):
        screened = word_screen(self.yeah_matrix(), alpha=0.05)
        got = {w: (p, rw, rwo, d) for w, p, rw, rwo, d in screened}
        assert "yeah" in got
        p, ratio_with, ratio_without, direction = got["yeah"]
        assert ratio_with == 1.0
        assert ratio_without == pytest.approx(2069 / 2278, abs=1e-15)
        assert abs(p - 0.012) <= 0.002
        assert direction == "persuasive"

    def test_alpha_zero_empty(self):
        assert word_screen(self.yeah_matrix(), 0.0) == []

    def test_singleton_word_excluded(self):
        rows = ([({"rare", "f"}, True)]
                + [({"f"}, True)] * 90 + [({"f"}, False)] * 9)
        screened = word_screen(build_matrix(rows), alpha=0.05)
        assert all(w != "rare" for w, *_ in screened)

    def test_order_invariant(self):
        rows = ([({"yeah", "f"}, True)] * 46
                + [({"f"}, True)] * 2069 + [({"f"}, False)] * 209)
        base = word_screen(build_matrix(rows), 0.05)
        rng = np.random.default_rng(2)
        perm = rng.permutation(len(rows))
        shuffled = word_screen(build_matrix([rows[i] for i in perm]), 0.05)
        assert shuffled == base

    def test_sorted_by_p(self):
        rows = ([({"alpha", "f"}, True)] * 60 + [({"beta", "f"}, False)] * 30
                + [({"f"}, True)] * 60 + [({"f"}, False)] * 60)
        screened = word_screen(build_matrix(rows), 1.0)
        ps = [p for _, p, *_ in screened]
        assert ps == sorted(ps)


def planted_matrix(seed=7):
    rng = np.random.default_rng(seed)
    planted = [f"win{i}" for i in range(10)]
    noise = [f"w{i}" for i in range(50)]
    rows = []
    for i in range(500):
        acc = i % 2 == 0
        words = {w for w in noise if rng.random() < 0.3}
        hit = 0.5 if acc else 0.08
        words |= {w for w in planted if rng.random() < hit}
        rows.append((words or {noise[0]}, acc))
    return build_matrix(rows), planted


class TestSvmRanking:
    def test_planted_words_dominate_folds(self):
        matrix, planted = planted_matrix()
        result = svm_word_ranking(matrix, folds=5, seed=0)
        planted_idx = {matrix.vocabulary.index(w) for w in planted}
        hits = sum(
            set(np.argsort(-np.abs(result.fold_coefs[r]))[:10]) == planted_idx
            for r in range(5)
        )
        assert hits >= 4
        assert 0.5 < result.accuracy_mean <= 1.0

    def test_label_flip_negates_coefficients(self):
        matrix, _ = planted_matrix()
        flipped = SuggestionMatrix(matrix.vocabulary, matrix.rows, -matrix.labels)
        base = svm_word_ranking(matrix, folds=5, seed=0)
        neg = svm_word_ranking(flipped, folds=5, seed=0)
        assert np.max(np.abs(base.coef_mean + neg.coef_mean)) == 0.0

    def test_no_signal_accuracy_near_majority(self):
        rng = np.random.default_rng(11)
        noise = [f"w{i}" for i in range(50)]
        rows = [
            ({w for w in noise if rng.random() < 0.3} or {noise[0]},
             bool(rng.random() < 0.7))
            for _ in range(400)
        ]
        matrix = build_matrix(rows)
        majority = max(np.mean(matrix.labels == 1), np.mean(matrix.labels == -1))
        result = svm_word_ranking(matrix, folds=5, seed=0)
        assert abs(result.accuracy_mean - majority) <= 0.05

    def test_screen_then_fit_does_not_degrade(self):
        matrix, _ = planted_matrix()
        full = svm_word_ranking(matrix, folds=5, seed=0)
        restricted = svm_word_ranking(matrix, folds=5, seed=0, screen_alpha=0.05)
        assert restricted.accuracy_mean >= full.accuracy_mean - 0.05

    def test_ranking_sorted_by_magnitude(self):
        matrix, _ = planted_matrix()
        result = svm_word_ranking(matrix, folds=5, seed=0)
        mags = [abs(m) for _, m, _ in result.ranking()]
        assert mags == sorted(mags, reverse=True)


class TestExports:
    def test_load_lexicon(self, tmp_path):
        path = tmp_path / "lex.txt"
        path.write_text("Yeah\n\n  scroll \nyeah\n", encoding="utf-8")
        from meetmine.wordstats import load_lexicon

        assert load_lexicon(path) == frozenset({"yeah", "scroll"})

    def test_screen_csv(self):
        from meetmine.wordstats import screen_csv

        rows = [("yeah", 0.0125, 1.0, 0.9082, "persuasive")]
        text = screen_csv(rows)
        lines = text.splitlines()
        assert lines[0] == "word,p_value,accept_ratio_with,accept_ratio_without,direction"
        assert lines[1].startswith("yeah,") and lines[1].endswith(",persuasive")

    def test_ranking_csv(self):
        from meetmine.wordstats import ranking_csv

        matrix, _ = planted_matrix()
        result = svm_word_ranking(matrix, folds=3, seed=0)
        lines = ranking_csv(result).splitlines()
        assert lines[0] == "word,mean_coefficient,std"
        assert len(lines) == len(result.vocabulary) + 1
