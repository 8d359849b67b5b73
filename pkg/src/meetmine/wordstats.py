"""Word-level acceptance statistics for suggestion dialogue acts.

Suggestions become binary bag-of-words rows (stopwords removed, vocabulary
sorted).  The module provides the exact hypergeometric/Fisher machinery,
an aggregate lexicon test, per-word significance screening, and a linear
SVM ranking over word features with an optional screen-then-fit mode that
restricts each training fold to its own significant words.

Fisher p-values are computed over all tables sharing the observed margins:
exact rational arithmetic when the grand total is at most 100, log-gamma
floats above that.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .corpus import Corpus
from . import detection

__all__ = [
    "STOPWORDS",
    "tokenize",
    "SuggestionMatrix",
    "tokenize_suggestions",
    "ContingencyTable2x2",
    "hypergeom_pmf",
    "FisherResult",
    "fisher_exact",
    "aggregate_lexicon_test",
    "word_screen",
    "WordRankingResult",
    "svm_word_ranking",
    "screen_csv",
    "ranking_csv",
    "load_lexicon",
]

# Embedded English stopword list.  Contractions appear with apostrophes
# stripped, matching the tokenizer; forms that collide with real words
# (ill, id, hell, shell, wed) are deliberately absent.
STOPWORDS = frozenset("""
a about above after again against all am among an and any are arent as at
be because been before being below between both but by
can cannot cant could couldnt
did didnt do does doesnt doing dont down during
each either
few for from further
had hadnt has hasnt have havent having he her here heres hers herself hes
him himself his how
i if im in into is isnt it its itself ive
just
lets
may me might more most must my myself
no nor not now
of off on once only onto or other ought our ours ourselves out over own
same shall she shes should shouldnt so some such
than that thats the their theirs them themselves then there these they
theyd theyll theyre theyve this those through to too
under until up upon
very via
was wasnt we were werent weve what whats when wheres where whether which
while who whom whos why will with within without wont would wouldnt
you youd youll your youre yours yourself yourselves youve
""".split())


def tokenize(text: str, stopwords: frozenset[str] | None = None) -> set[str]:
    """Lowercase, strip non-alphanumerics inside tokens, drop stopwords.

    Returns the set of distinct surviving words (presence semantics).
    """
    if stopwords is None:
        stopwords = STOPWORDS
    words = set()
    for raw in text.lower().split():
        word = "".join(ch for ch in raw if ch.isalnum())
        if word and word not in stopwords:
            words.add(word)
    return words


@dataclass(frozen=True)
class SuggestionMatrix:
    """Binary presence rows over a sorted vocabulary, labels +1/-1."""

    vocabulary: tuple[str, ...]
    rows: np.ndarray    # (n, |V|) of 0/1
    labels: np.ndarray  # (n,) of +1 (accepted) / -1 (rejected)

    def __post_init__(self) -> None:
        if self.rows.shape != (len(self.labels), len(self.vocabulary)):
            raise ValueError("rows shape must be (n_labels, n_vocabulary)")
        if not np.isin(self.labels, (-1, 1)).all():
            raise ValueError("labels must be +1 or -1")
        if not np.isin(self.rows, (0, 1)).all():
            raise ValueError("rows must be binary")


def tokenize_suggestions(
    corpus: Corpus, stopwords: frozenset[str] | None = None
) -> SuggestionMatrix:
    """Bag-of-words matrix over every annotated suggestion with text.

    Suggestions without text are skipped with a warning; suggestions whose
    every word is a stopword contribute no row.
    """
    docs: list[tuple[set[str], int]] = []
    for meeting in corpus.meetings:
        for sug in meeting.suggestions:
            act = meeting.acts[sug.act_index]
            if act.text is None:
                warnings.warn(
                    f"meeting {meeting.id!r}: suggestion at act {sug.act_index}"
                    " has no text; skipped",
                    stacklevel=2,
                )
                continue
            words = tokenize(act.text, stopwords)
            if not words:
                continue
            docs.append((words, 1 if sug.accepted else -1))
    vocabulary = tuple(sorted(set().union(*(w for w, _ in docs)) if docs else set()))
    index = {w: j for j, w in enumerate(vocabulary)}
    rows = np.zeros((len(docs), len(vocabulary)), dtype=np.int8)
    labels = np.empty(len(docs), dtype=np.int64)
    for i, (words, lab) in enumerate(docs):
        labels[i] = lab
        for w in words:
            rows[i, index[w]] = 1
    return SuggestionMatrix(vocabulary=vocabulary, rows=rows, labels=labels)


# ---------------------------------------------------------------------------
# exact-test machinery

_EXACT_N = 100


def hypergeom_pmf(N: int, K: int, n: int, k: int) -> float:
    """P[k successes drawing n from N with K marked].

    Out-of-support k returns 0.  Exact rational arithmetic for N <= 100,
    log-gamma otherwise.
    """
    if N < 0 or not (0 <= K <= N) or not (0 <= n <= N):
        raise ValueError("need 0 <= K <= N and 0 <= n <= N")
    if k < max(0, n - (N - K)) or k > min(K, n):
        return 0.0
    if N <= _EXACT_N:
        return float(_pmf_fraction(N, K, n, k))
    return math.exp(_log_pmf(N, K, n, k))


def _pmf_fraction(N: int, K: int, n: int, k: int) -> Fraction:
    return Fraction(math.comb(K, k) * math.comb(N - K, n - k), math.comb(N, n))


def _log_pmf(N: int, K: int, n: int, k: int) -> float:
    def log_comb(a: int, b: int) -> float:
        return math.lgamma(a + 1) - math.lgamma(b + 1) - math.lgamma(a - b + 1)

    return log_comb(K, k) + log_comb(N - K, n - k) - log_comb(N, n)


@dataclass(frozen=True)
class ContingencyTable2x2:
    """a = with-feature accepted, b = with rejected, c = without accepted,
    d = without rejected."""

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self) -> None:
        if min(self.a, self.b, self.c, self.d) < 0:
            raise ValueError("cell counts must be nonnegative")
        if self.total < 1:
            raise ValueError("table must contain at least one observation")

    @property
    def total(self) -> int:
        return self.a + self.b + self.c + self.d


@dataclass(frozen=True)
class FisherResult:
    p_two_sided: float
    p_one_sided: float
    degenerate: bool = False


def fisher_exact(table: ContingencyTable2x2) -> FisherResult:
    """Fisher's exact test on a 2x2 table.

    Two-sided p sums the probabilities of all same-margin tables no more
    likely than the observed one (exact comparison on the rational path,
    relative slack 1e-7 on the float path).  One-sided p is the tail in the
    direction of the observed deviation from independence.  A zero row or
    column margin makes the test degenerate: p = 1, flagged.
    """
    a, b, c, d = table.a, table.b, table.c, table.d
    N = table.total
    row1, col1 = a + b, a + c
    if row1 == 0 or row1 == N or col1 == 0 or col1 == N:
        return FisherResult(p_two_sided=1.0, p_one_sided=1.0, degenerate=True)
    lo = max(0, col1 - (N - row1))
    hi = min(row1, col1)
    right = a * N >= row1 * col1  # observed at or above independence
    if N <= _EXACT_N:
        pmfs = {k: _pmf_fraction(N, row1, col1, k) for k in range(lo, hi + 1)}
        p_obs = pmfs[a]
        two = sum(p for p in pmfs.values() if p <= p_obs)
        if right:
            one = sum(pmfs[k] for k in range(a, hi + 1))
        else:
            one = sum(pmfs[k] for k in range(lo, a + 1))
        return FisherResult(p_two_sided=float(two), p_one_sided=float(one))
    log_pmfs = {k: _log_pmf(N, row1, col1, k) for k in range(lo, hi + 1)}
    log_obs = log_pmfs[a]
    cutoff = log_obs + math.log1p(1e-7)
    two = sum(math.exp(lp) for lp in log_pmfs.values() if lp <= cutoff)
    if right:
        one = sum(math.exp(log_pmfs[k]) for k in range(a, hi + 1))
    else:
        one = sum(math.exp(log_pmfs[k]) for k in range(lo, a + 1))
    return FisherResult(p_two_sided=min(two, 1.0), p_one_sided=min(one, 1.0))


def _table_for_mask(mask: np.ndarray, labels: np.ndarray) -> ContingencyTable2x2:
    accepted = labels == 1
    return ContingencyTable2x2(
        a=int((mask & accepted).sum()),
        b=int((mask & ~accepted).sum()),
        c=int((~mask & accepted).sum()),
        d=int((~mask & ~accepted).sum()),
    )


def aggregate_lexicon_test(
    matrix: SuggestionMatrix, lexicon: Iterable[str]
) -> tuple[ContingencyTable2x2, FisherResult]:
    """Contains-any-lexicon-word vs accepted, with Fisher's exact test."""
    if len(matrix.labels) == 0:
        raise ValueError("empty suggestion matrix")
    lex = set(lexicon)
    cols = [j for j, w in enumerate(matrix.vocabulary) if w in lex]
    if cols:
        mask = matrix.rows[:, cols].any(axis=1)
    else:
        mask = np.zeros(len(matrix.labels), dtype=bool)
    table = _table_for_mask(mask, matrix.labels)
    return table, fisher_exact(table)


def word_screen(
    matrix: SuggestionMatrix, alpha: float
) -> list[tuple[str, float, float, float, str]]:
    """Per-word Fisher screen at significance level alpha.

    Rows are (word, p, accept ratio with the word, accept ratio without
    it, direction), sorted by ascending p then word.  The reported p is
    the directional (one-sided) tail in the deviation's own direction;
    a word present only in accepted suggestions thus gets exactly the
    probability of drawing that many accepted rows by chance.  Direction
    is "persuasive" when presence associates with more acceptance.
    """
    if len(matrix.labels) == 0:
        raise ValueError("empty suggestion matrix")
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    out = []
    accepted = matrix.labels == 1
    n_acc = int(accepted.sum())
    n_all = len(matrix.labels)
    for j, word in enumerate(matrix.vocabulary):
        mask = matrix.rows[:, j] == 1
        n_with = int(mask.sum())
        a = int((mask & accepted).sum())
        res = fisher_exact(_table_for_mask(mask, matrix.labels))
        if res.p_one_sided > alpha:
            continue
        ratio_with = a / n_with if n_with else 0.0
        n_without = n_all - n_with
        ratio_without = (n_acc - a) / n_without if n_without else 0.0
        direction = "persuasive" if ratio_with > ratio_without else "non-persuasive"
        out.append((word, res.p_one_sided, ratio_with, ratio_without, direction))
    out.sort(key=lambda r: (r[1], r[0]))
    return out


@dataclass(frozen=True)
class WordRankingResult:
    accuracy_mean: float
    accuracy_std: float
    vocabulary: tuple[str, ...]
    coef_mean: np.ndarray   # (|V|,) over folds
    coef_std: np.ndarray    # (|V|,)
    fold_coefs: np.ndarray  # (folds, |V|); screened-out words carry 0

    def ranking(self) -> list[tuple[str, float, float]]:
        order = np.argsort(-np.abs(self.coef_mean), kind="mergesort")
        return [
            (self.vocabulary[j], float(self.coef_mean[j]), float(self.coef_std[j]))
            for j in order
        ]


def svm_word_ranking(
    matrix: SuggestionMatrix,
    folds: int = 5,
    seed: int = 0,
    screen_alpha: float | None = None,
    hyper: dict | None = None,
) -> WordRankingResult:
    """Cross-validated linear SVM over raw binary word features.

    With ``screen_alpha`` set, each fold's vocabulary is first restricted
    to words passing the Fisher screen on that fold's training rows alone,
    and the fitted coefficients are mapped back to the full vocabulary
    (absent words contribute 0 for that fold).  Accuracy is held-out.

    Word features are high-dimensional sparse binaries, so the default L2
    weight is heavier than for count windows; raw (unstandardized)
    features keep the coefficients on a common presence scale.
    """
    y01 = (matrix.labels == 1).astype(np.int64)
    if len(np.unique(y01)) < 2:
        raise ValueError("both accepted and rejected suggestions are required")
    if len(y01) < folds:
        raise ValueError("need at least as many suggestions as folds")
    base_hyper = {"standardize": False, "l2": 0.1}
    base_hyper.update(hyper or {})
    test_folds = detection._split_with_retries(y01, folds, seed)
    n_words = len(matrix.vocabulary)
    fold_coefs = np.zeros((len(test_folds), n_words))
    accuracies = []
    for r, test_idx in enumerate(test_folds):
        mask = np.ones(len(y01), dtype=bool)
        mask[test_idx] = False
        train_rows = matrix.rows[mask]
        train_labels = matrix.labels[mask]
        cols = np.arange(n_words)
        if screen_alpha is not None:
            sub = SuggestionMatrix(
                vocabulary=matrix.vocabulary,
                rows=train_rows,
                labels=train_labels,
            )
            kept = {w for w, *_ in word_screen(sub, screen_alpha)}
            cols = np.array(
                [j for j, w in enumerate(matrix.vocabulary) if w in kept],
                dtype=np.int64,
            )
            if len(cols) == 0:
                cols = np.arange(n_words)  # nothing passed; fall back to all
        train = [
            detection.TimeframeExample(
                tuple(int(v) for v in train_rows[i, cols]),
                int(train_labels[i] == 1),
            )
            for i in range(len(train_rows))
        ]
        model = detection.fit("linear-svm", train, hyper=base_hyper, seed=seed)
        fold_coefs[r, cols] = model.params["w"]
        test_X = matrix.rows[test_idx][:, cols].astype(np.float64)
        preds = detection._predict_many(model, test_X)
        accuracies.append(float((preds == y01[test_idx]).mean()))
    coef_mean = fold_coefs.mean(axis=0)
    coef_std = (
        fold_coefs.std(axis=0, ddof=1)
        if len(test_folds) > 1
        else np.zeros(n_words)
    )
    acc_std = (
        float(np.std(accuracies, ddof=1)) if len(accuracies) > 1 else 0.0
    )
    return WordRankingResult(
        accuracy_mean=float(np.mean(accuracies)),
        accuracy_std=acc_std,
        vocabulary=matrix.vocabulary,
        coef_mean=coef_mean,
        coef_std=coef_std,
        fold_coefs=fold_coefs,
    )


# ---------------------------------------------------------------------------
# serialization


def screen_csv(rows: Sequence[tuple[str, float, float, float, str]]) -> str:
    lines = ["word,p_value,accept_ratio_with,accept_ratio_without,direction"]
    for word, p, rw, rwo, direction in rows:
        lines.append(f"{word},{p:.12g},{rw:.12g},{rwo:.12g},{direction}")
    return "\n".join(lines) + "\n"


def ranking_csv(result: WordRankingResult) -> str:
    lines = ["word,mean_coefficient,std"]
    for word, mean, std in result.ranking():
        lines.append(f"{word},{mean:.12g},{std:.12g}")
    return "\n".join(lines) + "\n"


def load_lexicon(path) -> frozenset[str]:
    """One word per line, UTF-8; blank lines and # comments ignored."""
    words = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            word = line.strip().lower()
            if word and not word.startswith("#"):
                words.add(word)
    return frozenset(words)
