"""Sequence-model baselines: first-order Markov chain and profile HMM.

The Markov chain is a maximum-likelihood bigram model; rows of the
transition matrix whose label was never observed as a bigram source stay
undefined (NaN) rather than silently uniform, and ranking helpers only ever
report observed transitions.

The profile HMM follows the classic match/insert/delete layout: match states
M_1..M_L with insert states I_0..I_L beside them and silent delete states
D_1..D_L above, begin and end pinned at M_0 and M_{L+1}.  Parameters are
estimated by Baum-Welch EM with pseudocount smoothing from a deterministic
seeded start, and the model's summary string is the per-match-state argmax
emission.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "MarkovChain",
    "fit_markov",
    "top_transitions",
    "markov_matrix_csv",
    "markov_to_dot",
    "ProfileHmm",
    "fit_profile_hmm",
    "log_likelihood",
    "consensus_string",
]

NEG_INF = float("-inf")


# ---------------------------------------------------------------------------
# Markov chain


@dataclass(frozen=True)
class MarkovChain:
    labels: tuple[str, ...]
    counts: np.ndarray        # (k, k) int64 bigram counts
    transition: np.ndarray    # (k, k) float64, NaN on undefined rows
    row_defined: np.ndarray   # (k,) bool

    def index(self, label: str) -> int:
        return self.labels.index(label)


def fit_markov(
    sequences: Sequence[Sequence[str]], alphabet: Sequence[str] | None = None
) -> MarkovChain:
    """Maximum-likelihood bigram transition estimates.

    Rows with no outgoing observations are flagged undefined instead of
    being imputed.  Raises if the corpus contains no bigram at all.
    """
    if alphabet is None:
        labels = tuple(sorted({lab for seq in sequences for lab in seq}))
    else:
        labels = tuple(alphabet)
    if not labels:
        raise ValueError("cannot fit a Markov chain on an empty label set")
    pos = {lab: i for i, lab in enumerate(labels)}
    k = len(labels)
    counts = np.zeros((k, k), dtype=np.int64)
    for seq in sequences:
        for a, b in zip(seq, seq[1:]):
            try:
                counts[pos[a], pos[b]] += 1
            except KeyError as exc:
                raise ValueError(f"label {exc} not in alphabet") from exc
    row_sums = counts.sum(axis=1)
    if row_sums.sum() == 0:
        raise ValueError("no bigrams observed; cannot fit a Markov chain")
    row_defined = row_sums > 0
    transition = np.full((k, k), np.nan)
    for i in range(k):
        if row_defined[i]:
            transition[i] = counts[i] / row_sums[i]
    return MarkovChain(
        labels=labels, counts=counts, transition=transition, row_defined=row_defined
    )


def top_transitions(
    chain: MarkovChain, k: int
) -> tuple[list[tuple[str, str, float]], bool]:
    """The ``k`` highest-probability observed transitions.

    Ties break by (from, to) label order.  When fewer than ``k`` transitions
    were ever observed, all of them are returned and the shortfall flag is
    set.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    observed = [
        (chain.labels[i], chain.labels[j], float(chain.transition[i, j]))
        for i in range(len(chain.labels))
        for j in range(len(chain.labels))
        if chain.counts[i, j] > 0
    ]
    observed.sort(key=lambda e: (-e[2], e[0], e[1]))
    short = len(observed) < k
    return observed[:k], short


def markov_matrix_csv(chain: MarkovChain) -> str:
    lines = ["from,to,count,prob"]
    for i, a in enumerate(chain.labels):
        for j, b in enumerate(chain.labels):
            p = chain.transition[i, j]
            p_str = "" if math.isnan(p) else f"{p:.12g}"
            lines.append(f"{a},{b},{chain.counts[i, j]},{p_str}")
    return "\n".join(lines) + "\n"


def markov_to_dot(chain: MarkovChain, name: str = "markov") -> str:
    lines = [f"digraph {name} {{", "  rankdir=LR;"]
    for lab in chain.labels:
        lines.append(f'  "{lab}";')
    for i, a in enumerate(chain.labels):
        for j, b in enumerate(chain.labels):
            if chain.counts[i, j] > 0:
                lines.append(
                    f'  "{a}" -> "{b}" [label="{chain.transition[i, j]:.3g}"];'
                )
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# profile HMM


@dataclass
class ProfileHmm:
    """Match/insert/delete profile with log-space parameters.

    Transition rows are stored per source family and column ``j``:
    ``tm[j] = (M_j->M_{j+1}, M_j->I_j, M_j->D_{j+1})`` and likewise ``ti``
    and ``td``; column L has no delete successor so its third entry is
    zero probability.  ``em[j]`` are match emissions (row 0 unused) and
    ``ei[j]`` insert emissions.
    """

    labels: tuple[str, ...]
    length: int
    tm: np.ndarray  # (L+1, 3)
    ti: np.ndarray  # (L+1, 3)
    td: np.ndarray  # (L+1, 3), row 0 unused
    em: np.ndarray  # (L+1, K), row 0 unused
    ei: np.ndarray  # (L+1, K)
    ll_history: tuple[float, ...] = ()


def _encode(sequences, labels):
    pos = {lab: i for i, lab in enumerate(labels)}
    out = []
    for seq in sequences:
        try:
            out.append(np.array([pos[lab] for lab in seq], dtype=np.int64))
        except KeyError as exc:
            raise ValueError(f"label {exc} not in alphabet") from exc
    return out


def _log(a: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(a)


def _lse2(a: float, b: float) -> float:
    """log(e^a + e^b) for scalars, tolerating -inf."""
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


def _forward(hmm: ProfileHmm, x: np.ndarray):
    """Log-space forward lattice; returns (fM, fI, fD, logP)."""
    L, T = hmm.length, len(x)
    ltm, lti, ltd = _log(hmm.tm), _log(hmm.ti), _log(hmm.td)
    lem, lei = _log(hmm.em), _log(hmm.ei)
    fM = np.full((L + 1, T + 1), NEG_INF)
    fI = np.full((L + 1, T + 1), NEG_INF)
    fD = np.full((L + 1, T + 1), NEG_INF)
    fM[0, 0] = 0.0
    for i in range(T + 1):
        if i >= 1:
            s = x[i - 1]
            # match states, vectorized over j = 1..L
            stacked = np.stack(
                [
                    fM[:-1, i - 1] + ltm[:-1, 0],
                    fI[:-1, i - 1] + lti[:-1, 0],
                    fD[:-1, i - 1] + ltd[:-1, 0],
                ]
            )
            fM[1:, i] = lem[1:, s] + np.logaddexp.reduce(stacked, axis=0)
            stacked = np.stack(
                [
                    fM[:, i - 1] + ltm[:, 1],
                    fI[:, i - 1] + lti[:, 1],
                    fD[:, i - 1] + ltd[:, 1],
                ]
            )
            fI[:, i] = lei[:, s] + np.logaddexp.reduce(stacked, axis=0)
        # silent delete chain, ascending j within this position
        for j in range(1, L + 1):
            fD[j, i] = _lse2(
                _lse2(fM[j - 1, i] + ltm[j - 1, 2], fI[j - 1, i] + lti[j - 1, 2]),
                fD[j - 1, i] + ltd[j - 1, 2],
            )
    logP = _lse2(
        _lse2(fM[L, T] + ltm[L, 0], fI[L, T] + lti[L, 0]),
        fD[L, T] + ltd[L, 0],
    )
    return fM, fI, fD, float(logP)


def _backward(hmm: ProfileHmm, x: np.ndarray):
    L, T = hmm.length, len(x)
    ltm, lti, ltd = _log(hmm.tm), _log(hmm.ti), _log(hmm.td)
    lem, lei = _log(hmm.em), _log(hmm.ei)
    bM = np.full((L + 1, T + 1), NEG_INF)
    bI = np.full((L + 1, T + 1), NEG_INF)
    bD = np.full((L + 1, T + 1), NEG_INF)
    for i in range(T, -1, -1):
        at_end = i == T
        s_next = x[i] if not at_end else -1
        # delete chain descending j; M_{j+1}/I_j moves need an emission
        for j in range(L, 0, -1):
            acc = NEG_INF
            if j == L:
                if at_end:
                    acc = ltd[j, 0]  # D_L -> End
            else:
                if not at_end:
                    acc = ltd[j, 0] + lem[j + 1, s_next] + bM[j + 1, i + 1]
                acc = _lse2(acc, ltd[j, 2] + bD[j + 1, i])
            if not at_end:
                acc = _lse2(acc, ltd[j, 1] + lei[j, s_next] + bI[j, i + 1])
            bD[j, i] = acc
        for j in range(L, -1, -1):
            accM = NEG_INF
            accI = NEG_INF
            if j == L:
                if at_end:
                    accM = ltm[j, 0]  # M_L -> End
                    accI = lti[j, 0]
            else:
                if not at_end:
                    step = lem[j + 1, s_next] + bM[j + 1, i + 1]
                    accM = ltm[j, 0] + step
                    accI = lti[j, 0] + step
                accM = _lse2(accM, ltm[j, 2] + bD[j + 1, i])
                accI = _lse2(accI, lti[j, 2] + bD[j + 1, i])
            if not at_end:
                into_insert = lei[j, s_next] + bI[j, i + 1]
                accM = _lse2(accM, ltm[j, 1] + into_insert)
                accI = _lse2(accI, lti[j, 1] + into_insert)
            bM[j, i] = accM
            bI[j, i] = accI
    return bM, bI, bD


def _init_params(length: int, n_labels: int, seed: int):
    rng = np.random.default_rng(seed)
    L, K = length, n_labels
    tm = np.tile(np.array([0.8, 0.1, 0.1]), (L + 1, 1))
    ti = np.tile(np.array([0.5, 0.4, 0.1]), (L + 1, 1))
    td = np.tile(np.array([0.5, 0.1, 0.4]), (L + 1, 1))
    # column L has no delete successor
    for a in (tm, ti, td):
        a[L, 2] = 0.0
        a[L] /= a[L].sum()
    td[0] = 0.0  # D_0 does not exist
    em = np.ones((L + 1, K)) + 0.02 * rng.random((L + 1, K))
    ei = np.ones((L + 1, K)) + 0.02 * rng.random((L + 1, K))
    em /= em.sum(axis=1, keepdims=True)
    ei /= ei.sum(axis=1, keepdims=True)
    em[0] = 0.0  # M_0 is silent
    return tm, ti, td, em, ei


def fit_profile_hmm(
    sequences: Sequence[Sequence[str]],
    length: int,
    pseudocount: float = 0.1,
    iterations: int = 20,
    seed: int = 0,
    alphabet: Sequence[str] | None = None,
) -> ProfileHmm:
    """Baum-Welch EM from a deterministic seeded start.

    ``pseudocount`` smooths both transition and emission counts; as it
    grows, every distribution tends to uniform over its support.  The
    log-likelihood history (one entry per EM iteration, evaluated before
    the update) is stored on the returned model.
    """
    if length < 1:
        raise ValueError("profile length must be at least 1")
    if pseudocount <= 0:
        raise ValueError("pseudocount must be positive")
    if iterations < 0:
        raise ValueError("iterations must be nonnegative")
    seqs = list(sequences)
    if not seqs:
        raise ValueError("cannot fit a profile HMM on an empty corpus")
    if alphabet is None:
        labels = tuple(sorted({lab for seq in seqs for lab in seq}))
    else:
        labels = tuple(alphabet)
    if not labels:
        raise ValueError("alphabet must be nonempty")
    encoded = _encode(seqs, labels)
    L, K = length, len(labels)
    tm, ti, td, em, ei = _init_params(L, K, seed)
    hmm = ProfileHmm(labels=labels, length=L, tm=tm, ti=ti, td=td, em=em, ei=ei)
    history: list[float] = []

    for _ in range(iterations):
        ltm, lti, ltd = _log(hmm.tm), _log(hmm.ti), _log(hmm.td)
        lem, lei = _log(hmm.em), _log(hmm.ei)
        Ctm = np.zeros((L + 1, 3))
        Cti = np.zeros((L + 1, 3))
        Ctd = np.zeros((L + 1, 3))
        Cem = np.zeros((L + 1, K))
        Cei = np.zeros((L + 1, K))
        total_ll = 0.0
        for x in encoded:
            fM, fI, fD, logP = _forward(hmm, x)
            bM, bI, bD = _backward(hmm, x)
            total_ll += logP
            T = len(x)
            # emissions: posterior mass of emitting x_i at each state
            postM = np.exp(fM + bM - logP)
            postI = np.exp(fI + bI - logP)
            for i in range(1, T + 1):
                Cem[:, x[i - 1]] += postM[:, i]
                Cei[:, x[i - 1]] += postI[:, i]
            # transitions into emitting successors (need the emission term)
            for j in range(L + 1):
                if j < L:
                    mm = fM[j, :T] + ltm[j, 0] + lem[j + 1, x] + bM[j + 1, 1:]
                    im = fI[j, :T] + lti[j, 0] + lem[j + 1, x] + bM[j + 1, 1:]
                    Ctm[j, 0] += np.exp(mm - logP).sum()
                    Cti[j, 0] += np.exp(im - logP).sum()
                    md = fM[j, :] + ltm[j, 2] + bD[j + 1, :]
                    idd = fI[j, :] + lti[j, 2] + bD[j + 1, :]
                    Ctm[j, 2] += np.exp(md - logP).sum()
                    Cti[j, 2] += np.exp(idd - logP).sum()
                else:
                    Ctm[j, 0] += math.exp(fM[j, T] + ltm[j, 0] - logP)
                    Cti[j, 0] += math.exp(fI[j, T] + lti[j, 0] - logP)
                mi = fM[j, :T] + ltm[j, 1] + lei[j, x] + bI[j, 1:]
                ii = fI[j, :T] + lti[j, 1] + lei[j, x] + bI[j, 1:]
                Ctm[j, 1] += np.exp(mi - logP).sum()
                Cti[j, 1] += np.exp(ii - logP).sum()
                if j >= 1:
                    if j < L:
                        dm = fD[j, :T] + ltd[j, 0] + lem[j + 1, x] + bM[j + 1, 1:]
                        Ctd[j, 0] += np.exp(dm - logP).sum()
                        dd = fD[j, :] + ltd[j, 2] + bD[j + 1, :]
                        Ctd[j, 2] += np.exp(dd - logP).sum()
                    else:
                        Ctd[j, 0] += math.exp(fD[j, T] + ltd[j, 0] - logP)
                    di = fD[j, :T] + ltd[j, 1] + lei[j, x] + bI[j, 1:]
                    Ctd[j, 1] += np.exp(di - logP).sum()
        history.append(total_ll)

        # M step with pseudocounts over each row's support
        new_tm = Ctm + pseudocount
        new_ti = Cti + pseudocount
        new_td = Ctd + pseudocount
        for a in (new_tm, new_ti, new_td):
            a[L, 2] = 0.0
        new_td[0] = 0.0
        for a in (new_tm, new_ti, new_td):
            sums = a.sum(axis=1, keepdims=True)
            np.divide(a, sums, out=a, where=sums > 0)
        new_em = Cem + pseudocount
        new_ei = Cei + pseudocount
        new_em[0] = 0.0
        sums = new_em.sum(axis=1, keepdims=True)
        np.divide(new_em, sums, out=new_em, where=sums > 0)
        new_ei /= new_ei.sum(axis=1, keepdims=True)
        hmm = ProfileHmm(
            labels=labels, length=L, tm=new_tm, ti=new_ti, td=new_td,
            em=new_em, ei=new_ei,
        )

    hmm.ll_history = tuple(history)
    return hmm


def log_likelihood(hmm: ProfileHmm, sequences: Sequence[Sequence[str]]) -> float:
    encoded = _encode(sequences, hmm.labels)
    return sum(_forward(hmm, x)[3] for x in encoded)


def consensus_string(hmm: ProfileHmm) -> list[str]:
    """Most likely emission of each match state; ties go to alphabet order."""
    return [hmm.labels[int(np.argmax(hmm.em[j]))] for j in range(1, hmm.length + 1)]
