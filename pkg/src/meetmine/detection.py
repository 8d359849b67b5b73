"""Decision-timeframe detection over bag-of-act windows.

Meetings are cut into consecutive non-overlapping windows of dialogue acts;
each window becomes a six-dimensional count vector (one count per decision
act label) labeled by whether it overlaps an annotated decision interval.
Five classifiers are implemented from scratch so their scoring rules stay
inspectable: a hinge-loss linear SVM, gradient-descent logistic regression,
Gaussian naive Bayes scored as the raw class product, k-means, and a
two-component diagonal Gaussian mixture.  Evaluation is stratified k-fold
with mean/std AUC and pooled precision/recall.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .corpus import DECISION_ACTS, Meeting

__all__ = [
    "TimeframeExample",
    "make_windows",
    "corpus_windows",
    "MODEL_KINDS",
    "Model",
    "fit",
    "score",
    "predict",
    "auc",
    "EvalMetrics",
    "cross_validate",
    "rank_features",
    "metrics_csv",
    "ranking_csv",
]

MODEL_KINDS = ("linear-svm", "logistic", "gaussian-nb", "kmeans", "em-gmm")
SUPERVISED_KINDS = ("linear-svm", "logistic", "gaussian-nb")

_VAR_FLOOR = 1e-6


@dataclass(frozen=True)
class TimeframeExample:
    """Act counts for one window plus its decision label."""

    features: tuple[int, ...]
    label: int

    def __post_init__(self) -> None:
        if any(c < 0 for c in self.features):
            raise ValueError("negative act count")
        if self.label not in (0, 1):
            raise ValueError("label must be 0 or 1")


def make_windows(meeting: Meeting, window_size: int = 70) -> list[TimeframeExample]:
    """Consecutive count windows over the decision-relevant acts.

    The final partial window survives only if it holds at least half of
    ``window_size`` acts.  A window is positive when any of its acts falls
    inside one of the meeting's decision intervals.
    """
    if window_size < 1:
        raise ValueError("window_size must be at least 1")
    relevant = [a for a in meeting.acts if a.label in DECISION_ACTS]
    if not relevant:
        return []
    pos = {lab: i for i, lab in enumerate(DECISION_ACTS)}
    out = []
    for start in range(0, len(relevant), window_size):
        chunk = relevant[start:start + window_size]
        if len(chunk) < window_size and 2 * len(chunk) < window_size:
            break
        counts = [0] * len(DECISION_ACTS)
        label = 0
        for act in chunk:
            counts[pos[act.label]] += 1
            if any(lo <= act.time <= hi for lo, hi in meeting.decision_windows):
                label = 1
        out.append(TimeframeExample(features=tuple(counts), label=label))
    return out


def corpus_windows(meetings: Sequence[Meeting], window_size: int = 70) -> list[TimeframeExample]:
    examples: list[TimeframeExample] = []
    for meeting in meetings:
        examples.extend(make_windows(meeting, window_size))
    return examples


# ---------------------------------------------------------------------------
# models


@dataclass
class Model:
    kind: str
    params: dict = field(default_factory=dict)
    scaler_mean: np.ndarray | None = None
    scaler_scale: np.ndarray | None = None

    def transform(self, X: np.ndarray) -> np.ndarray:
        if self.scaler_mean is None:
            return X
        return (X - self.scaler_mean) / self.scaler_scale


def _as_arrays(train: Sequence[TimeframeExample]):
    X = np.array([e.features for e in train], dtype=np.float64)
    y = np.array([e.label for e in train], dtype=np.int64)
    return X, y


def _fit_scaler(X: np.ndarray):
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale = np.where(scale < 1e-12, 1.0, scale)
    return mean, scale


def _fit_linear_svm(X, y, hyper):
    lam = float(hyper.get("l2", 0.01))
    epochs = int(hyper.get("epochs", 400))
    n, d = X.shape
    s = 2.0 * y - 1.0
    w = np.zeros(d)
    b = 0.0
    w_acc = np.zeros(d)
    b_acc = 0.0
    n_acc = 0
    for t in range(1, epochs + 1):
        margins = s * (X @ w + b)
        active = margins < 1.0
        gw = lam * w
        gb = 0.0
        if active.any():
            gw = gw - (s[active] @ X[active]) / n
            gb = -s[active].sum() / n
        eta = 1.0 / (lam * t)
        w = w - eta * gw
        b = b - eta * gb
        if 2 * t > epochs:
            w_acc += w
            b_acc += b
            n_acc += 1
    return {"w": w_acc / n_acc, "b": b_acc / n_acc}


def _logistic_objective(X, s, w, b, lam):
    f = X @ w + b
    return float(np.logaddexp(0.0, -s * f).mean() + 0.5 * lam * (w @ w))


def _fit_logistic(X, y, hyper):
    lam = float(hyper.get("l2", 1e-3))
    tol = float(hyper.get("tol", 1e-8))
    max_iter = int(hyper.get("max_iter", 2000))
    n, d = X.shape
    s = 2.0 * y - 1.0
    w = np.zeros(d)
    b = 0.0
    obj = _logistic_objective(X, s, w, b, lam)
    for _ in range(max_iter):
        f = X @ w + b
        sig = 1.0 / (1.0 + np.exp(s * f))  # sigmoid(-s f)
        gw = -((s * sig) @ X) / n + lam * w
        gb = -float((s * sig).mean())
        gnorm2 = float(gw @ gw) + gb * gb
        if math.sqrt(gnorm2) < tol:
            break
        step = 1.0
        while step > 1e-16:
            cand_w = w - step * gw
            cand_b = b - step * gb
            cand_obj = _logistic_objective(X, s, cand_w, cand_b, lam)
            if cand_obj <= obj - 0.25 * step * gnorm2:
                break
            step *= 0.5
        w, b, obj = cand_w, cand_b, cand_obj
    return {"w": w, "b": b}


def _fit_gaussian_nb(X, y, hyper):
    floor = float(hyper.get("var_floor", _VAR_FLOOR))
    priors = np.zeros(2)
    means = np.zeros((2, X.shape[1]))
    variances = np.zeros((2, X.shape[1]))
    for c in (0, 1):
        Xc = X[y == c]
        priors[c] = len(Xc) / len(X)
        means[c] = Xc.mean(axis=0)
        variances[c] = np.maximum(Xc.var(axis=0), floor)
    return {"priors": priors, "means": means, "vars": variances}


def _nb_class_product(params, X, c):
    """The literal quantity P(y=c) * prod_j phat(x_j | y=c)."""
    mu, var = params["means"][c], params["vars"][c]
    dens = np.exp(-((X - mu) ** 2) / (2.0 * var)) / np.sqrt(2.0 * math.pi * var)
    return params["priors"][c] * dens.prod(axis=1)


def _kmeans_assign(X, centers):
    d0 = ((X - centers[0]) ** 2).sum(axis=1)
    d1 = ((X - centers[1]) ** 2).sum(axis=1)
    return (d1 < d0).astype(np.int64)


def _fit_kmeans_core(X, seed, max_iter=100):
    rng = np.random.default_rng(seed)
    n = len(X)
    first = int(rng.integers(n))
    distinct = [i for i in range(n) if not np.array_equal(X[i], X[first])]
    if not distinct:
        raise ValueError("k-means needs at least two distinct points")
    second = distinct[int(rng.integers(len(distinct)))]
    centers = np.stack([X[first], X[second]])
    assign = _kmeans_assign(X, centers)
    for _ in range(max_iter):
        new_centers = centers.copy()
        for c in (0, 1):
            members = X[assign == c]
            if len(members):
                new_centers[c] = members.mean(axis=0)
        new_assign = _kmeans_assign(X, new_centers)
        centers = new_centers
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    return centers, assign


def _pick_positive_cluster(assign, y):
    # the labeling of clusters that best matches the training labels
    acc0 = float((y == (assign == 0)).mean())  # cluster 0 treated as positive
    acc1 = float((y == (assign == 1)).mean())
    return 0 if acc0 >= acc1 else 1


def _fit_kmeans(X, y, hyper, seed):
    centers, assign = _fit_kmeans_core(X, seed, int(hyper.get("max_iter", 100)))
    return {"centers": centers, "positive": _pick_positive_cluster(assign, y)}


def _gmm_log_density(X, means, variances):
    # (n, 2) log N(x; mu_c, diag var_c)
    out = np.empty((len(X), 2))
    for c in (0, 1):
        mu, var = means[c], variances[c]
        out[:, c] = -0.5 * (((X - mu) ** 2 / var) + np.log(2.0 * math.pi * var)).sum(axis=1)
    return out

def _gmm_responsibilities(X, weights, means, variances):
    logd = _gmm_log_density(X, means, variances) + np.log(weights)
    m = logd.max(axis=1, keepdims=True)
    p = np.exp(logd - m)
    return p / p.sum(axis=1, keepdims=True)


def _fit_em_gmm(X, y, hyper, seed):
    iterations = int(hyper.get("iterations", 100))
    centers, assign = _fit_kmeans_core(X, seed)
    weights = np.array([float((assign == c).mean()) for c in (0, 1)])
    weights = np.maximum(weights, 1e-6)
    weights /= weights.sum()
    means = centers.copy()
    variances = np.empty_like(means)
    for c in (0, 1):
        members = X[assign == c]
        base = members if len(members) > 1 else X
        variances[c] = np.maximum(base.var(axis=0), _VAR_FLOOR)
    for _ in range(iterations):
        resp = _gmm_responsibilities(X, weights, means, variances)
        mass = resp.sum(axis=0)
        weights = np.maximum(mass / len(X), 1e-9)
        weights /= weights.sum()
        for c in (0, 1):
            r = resp[:, c][:, None]
            means[c] = (r * X).sum(axis=0) / max(mass[c], 1e-12)
            variances[c] = np.maximum(
                (r * (X - means[c]) ** 2).sum(axis=0) / max(mass[c], 1e-12), _VAR_FLOOR
            )
    resp = _gmm_responsibilities(X, weights, means, variances)
    hard = resp.argmax(axis=1)
    return {
        "weights": weights,
        "means": means,
        "vars": variances,
        "positive": _pick_positive_cluster(hard, y),
    }


def fit(
    kind: str,
    train: Sequence[TimeframeExample],
    hyper: Mapping | None = None,
    seed: int = 0,
) -> Model:
    """Train one model kind; deterministic given ``seed``.

    Features are standardized from the training set for every kind except
    naive Bayes, whose scoring rule is defined on raw counts.  Pass
    ``hyper={"standardize": False}`` to fit linear models on raw features.
    """
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind: {kind!r}")
    if not train:
        raise ValueError("empty training set")
    hyper = dict(hyper or {})
    X, y = _as_arrays(train)
    if kind in SUPERVISED_KINDS and len(np.unique(y)) < 2:
        raise ValueError(f"{kind} needs both classes in the training set")
    standardize = bool(hyper.pop("standardize", kind != "gaussian-nb"))
    model = Model(kind=kind)
    if standardize and kind != "gaussian-nb":
        model.scaler_mean, model.scaler_scale = _fit_scaler(X)
    Xt = model.transform(X)
    if kind == "linear-svm":
        model.params = _fit_linear_svm(Xt, y, hyper)
    elif kind == "logistic":
        model.params = _fit_logistic(Xt, y, hyper)
    elif kind == "gaussian-nb":
        model.params = _fit_gaussian_nb(Xt, y, hyper)
    elif kind == "kmeans":
        model.params = _fit_kmeans(Xt, y, hyper, seed)
    else:
        model.params = _fit_em_gmm(Xt, y, hyper, seed)
    return model


def _score_many(model: Model, X: np.ndarray) -> np.ndarray:
    Xt = model.transform(X)
    p = model.params
    if model.kind in ("linear-svm", "logistic"):
        margin = Xt @ p["w"] + p["b"]
        if model.kind == "logistic":
            return 1.0 / (1.0 + np.exp(-margin))
        return margin
    if model.kind == "gaussian-nb":
        return _nb_class_product(p, Xt, 1)
    if model.kind == "kmeans":
        pos = p["positive"]
        d_pos = ((Xt - p["centers"][pos]) ** 2).sum(axis=1)
        d_neg = ((Xt - p["centers"][1 - pos]) ** 2).sum(axis=1)
        return d_neg - d_pos
    resp = _gmm_responsibilities(Xt, p["weights"], p["means"], p["vars"])
    return resp[:, p["positive"]]


def score(model: Model, features: Sequence[float]) -> float:
    return float(_score_many(model, np.asarray([features], dtype=np.float64))[0])


def _predict_many(model: Model, X: np.ndarray) -> np.ndarray:
    p = model.params
    if model.kind == "linear-svm":
        return (_score_many(model, X) > 0).astype(np.int64)
    if model.kind == "logistic":
        return (_score_many(model, X) > 0.5).astype(np.int64)
    if model.kind == "gaussian-nb":
        Xt = model.transform(X)
        prod1 = _nb_class_product(p, Xt, 1)
        prod0 = _nb_class_product(p, Xt, 0)
        return (prod1 > prod0).astype(np.int64)
    if model.kind == "kmeans":
        pos = p["positive"]
        assign = _kmeans_assign(model.transform(X), p["centers"])
        return (assign == pos).astype(np.int64)
    Xt = model.transform(X)
    resp = _gmm_responsibilities(Xt, p["weights"], p["means"], p["vars"])
    return (resp.argmax(axis=1) == p["positive"]).astype(np.int64)


def predict(model: Model, features: Sequence[float]) -> int:
    return int(_predict_many(model, np.asarray([features], dtype=np.float64))[0])


# ---------------------------------------------------------------------------
# metrics


def auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Mann-Whitney AUC with midrank tie handling."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if len(s) != len(y):
        raise ValueError("scores and labels must have equal length")
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("auc undefined: one class absent")
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(len(s), dtype=np.float64)
    sorted_s = s[order]
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0  # midrank, 1-based
        i = j + 1
    rank_sum_pos = float(ranks[y == 1].sum())
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


@dataclass(frozen=True)
class EvalMetrics:
    auc: float
    auc_std: float
    precision: float
    recall: float
    f_measure: float

    def __post_init__(self) -> None:
        for name in ("auc", "precision", "recall", "f_measure"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} out of [0, 1]: {v}")
        if self.auc_std < 0:
            raise ValueError("auc_std must be nonnegative")


def _stratified_folds(y: np.ndarray, folds: int, seed: int) -> list[np.ndarray]:
    """Round-robin deal within each class after a seeded shuffle.

    Classes are visited in an order derived from the index partition, not
    from the label values, so relabeling the classes leaves the split
    untouched.
    """
    rng = np.random.default_rng(seed)
    buckets: list[list[int]] = [[] for _ in range(folds)]
    groups = [np.flatnonzero(y == c) for c in np.unique(y)]
    groups.sort(key=lambda idx: (len(idx), int(idx[0])))
    for idx in groups:
        idx = idx.copy()
        rng.shuffle(idx)
        for k, i in enumerate(idx):
            buckets[k % folds].append(int(i))
    return [np.array(sorted(b), dtype=np.int64) for b in buckets]


def _split_with_retries(y: np.ndarray, folds: int, seed: int, retries: int = 20):
    for attempt in range(retries):
        test_folds = _stratified_folds(y, folds, seed + attempt)
        ok = True
        for test_idx in test_folds:
            if len(test_idx) == 0:
                ok = False
                break
            mask = np.ones(len(y), dtype=bool)
            mask[test_idx] = False
            if len(np.unique(y[mask])) < 2:
                ok = False
                break
        if ok:
            return test_folds
    raise ValueError(
        f"could not build {folds} folds with both classes in every training split"
    )


def cross_validate(
    examples: Sequence[TimeframeExample],
    kind: str,
    folds: int = 15,
    seed: int = 0,
    hyper: Mapping | None = None,
) -> EvalMetrics:
    """Stratified k-fold evaluation.

    AUC is averaged over folds whose test split contains both classes
    (std is the sample standard deviation over those folds); precision and
    recall pool the confusion counts across all folds, so the F measure
    identity holds exactly on the returned metrics.
    """
    if folds < 2:
        raise ValueError("folds must be at least 2")
    if len(examples) < folds:
        raise ValueError("need at least as many examples as folds")
    X, y = _as_arrays(examples)
    test_folds = _split_with_retries(y, folds, seed)
    fold_aucs = []
    tp = fp = fn = 0
    for test_idx in test_folds:
        mask = np.ones(len(y), dtype=bool)
        mask[test_idx] = False
        train = [examples[i] for i in np.flatnonzero(mask)]
        model = fit(kind, train, hyper=hyper, seed=seed)
        scores = _score_many(model, X[test_idx])
        preds = _predict_many(model, X[test_idx])
        truth = y[test_idx]
        if 0 < truth.sum() < len(truth):
            fold_aucs.append(auc(scores, truth))
        tp += int(((preds == 1) & (truth == 1)).sum())
        fp += int(((preds == 1) & (truth == 0)).sum())
        fn += int(((preds == 0) & (truth == 1)).sum())
    if not fold_aucs:
        raise ValueError("no test fold contained both classes; AUC undefined")
    mean_auc = float(np.mean(fold_aucs))
    std_auc = float(np.std(fold_aucs, ddof=1)) if len(fold_aucs) > 1 else 0.0
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return EvalMetrics(
        auc=mean_auc, auc_std=std_auc, precision=precision, recall=recall, f_measure=f
    )


def rank_features(
    examples: Sequence[TimeframeExample],
    folds: int = 15,
    seed: int = 0,
    hyper: Mapping | None = None,
    feature_names: Sequence[str] = DECISION_ACTS,
) -> list[tuple[str, float, float]]:
    """Features ranked by mean linear-SVM coefficient across training folds.

    Coefficients live in standardized feature space so they are comparable
    across features; the per-feature std is over folds.
    """
    if len(examples) < folds:
        raise ValueError("need at least as many examples as folds")
    dim = len(examples[0].features)
    if len(feature_names) != dim:
        raise ValueError("feature_names length must match feature dimension")
    X, y = _as_arrays(examples)
    test_folds = _split_with_retries(y, folds, seed)
    coefs = np.empty((len(test_folds), dim))
    for r, test_idx in enumerate(test_folds):
        mask = np.ones(len(y), dtype=bool)
        mask[test_idx] = False
        train = [examples[i] for i in np.flatnonzero(mask)]
        model = fit("linear-svm", train, hyper=hyper, seed=seed)
        coefs[r] = model.params["w"]
    means = coefs.mean(axis=0)
    stds = coefs.std(axis=0, ddof=1) if len(test_folds) > 1 else np.zeros(dim)
    ranked = sorted(
        zip(feature_names, means.tolist(), stds.tolist()),
        key=lambda e: (-e[1], e[0]),
    )
    return [(name, float(m), float(s)) for name, m, s in ranked]


def metrics_csv(rows: Sequence[tuple[str, EvalMetrics]]) -> str:
    lines = ["model,auc,auc_std,precision,recall,f_measure"]
    for name, m in rows:
        lines.append(
            f"{name},{m.auc:.12g},{m.auc_std:.12g},{m.precision:.12g},"
            f"{m.recall:.12g},{m.f_measure:.12g}"
        )
    return "\n".join(lines) + "\n"


def ranking_csv(ranked: Sequence[tuple[str, float, float]]) -> str:
    lines = ["feature,mean_coefficient,std"]
    for name, mean, std in ranked:
        lines.append(f"{name},{mean:.12g},{std:.12g}")
    return "\n".join(lines) + "\n"
