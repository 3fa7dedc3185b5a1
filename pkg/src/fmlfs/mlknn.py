"""ML-kNN multi-label classifier and the six-metric evaluation suite.

The classifier follows the classic construction: per-label priors and
neighbor-count conditionals with Laplace smoothing, MAP decision per label.
Distances are Euclidean over min-max-normalized raw features; neighbor ties
are broken by ascending training-instance index, so predictions are
deterministic. Brute-force search is plenty at desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import MultiLabelDataset


@dataclass(frozen=True)
class MlknnModel:
    """Fitted ML-kNN state: normalized training data plus probability tables."""

    train_features: np.ndarray
    train_labels: np.ndarray
    k: int
    smoothing: float
    feature_min: np.ndarray
    feature_range: np.ndarray
    prior1: np.ndarray          # per label, P(H1)
    cond1: np.ndarray           # per label, P(count | H1), counts 0..k
    cond0: np.ndarray           # per label, P(count | H0)

    @property
    def num_labels(self) -> int:
        return self.train_labels.shape[1]


@dataclass(frozen=True)
class PredictionSet:
    """Binary label decisions plus the posterior scores they came from."""

    labels: np.ndarray
    scores: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int8)
        if scores.shape != labels.shape or scores.ndim != 2:
            raise ValueError("labels and scores must be equal-shape 2-D matrices")
        if not np.isfinite(scores).all():
            raise ValueError("scores must be finite")
        if not (labels == (scores > 0.5)).all():
            raise ValueError("labels must equal the 0.5-threshold of the scores")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "scores", scores)


@dataclass(frozen=True)
class MetricsReport:
    """The six multi-label evaluation metrics for one experiment."""

    accuracy: float
    f_measure: float
    hamming_loss: float
    ranking_loss: float
    avg_precision: float
    coverage: float
    skipped: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "f_measure": self.f_measure,
            "hamming_loss": self.hamming_loss,
            "ranking_loss": self.ranking_loss,
            "avg_precision": self.avg_precision,
            "coverage": self.coverage,
            "skipped": dict(self.skipped),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MetricsReport":
        return cls(
            accuracy=float(obj["accuracy"]),
            f_measure=float(obj["f_measure"]),
            hamming_loss=float(obj["hamming_loss"]),
            ranking_loss=float(obj["ranking_loss"]),
            avg_precision=float(obj["avg_precision"]),
            coverage=float(obj["coverage"]),
            skipped=dict(obj.get("skipped", {})),
        )

    METRIC_NAMES = ("accuracy", "f_measure", "hamming_loss", "ranking_loss",
                    "avg_precision", "coverage")


def _normalize(features: np.ndarray, lo: np.ndarray, rng: np.ndarray) -> np.ndarray:
    return (features - lo) / rng


def _squared_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """All-pairs squared Euclidean distances, rows of a vs rows of b."""
    sq = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2.0 * (a @ b.T)
    return np.maximum(sq, 0.0)


def _k_nearest(dist: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k smallest entries per row; ties by ascending column."""
    order = np.argsort(dist, axis=1, kind="stable")
    return order[:, :k]


def fit(train: MultiLabelDataset, k: int = 10, s: float = 1.0) -> MlknnModel:
    """Fit ML-kNN on a training set.

    Priors are (s + positives)/(2s + n); the count conditionals come from the
    training instances' own k nearest neighbors (an instance is never its own
    neighbor), Laplace-smoothed with s over the k+1 possible counts.
    """
    n = train.num_instances
    if k < 1:
        raise ValueError("k must be >= 1")
    if s <= 0:
        raise ValueError("smoothing s must be > 0")
    if n <= k:
        raise ValueError(f"need more than k={k} training instances, got {n}")

    lo = train.features.min(axis=0)
    rng = train.features.max(axis=0) - lo
    rng = np.where(rng > 0, rng, 1.0)
    X = _normalize(train.features, lo, rng)
    Y = train.labels.astype(np.int64)
    num_labels = Y.shape[1]

    dist = _squared_distances(X, X)
    np.fill_diagonal(dist, np.inf)
    neighbors = _k_nearest(dist, k)
    counts = Y[neighbors].sum(axis=1)  # n x L positive-neighbor counts

    prior1 = (s + Y.sum(axis=0)) / (2.0 * s + n)
    c1 = np.zeros((num_labels, k + 1))
    c0 = np.zeros((num_labels, k + 1))
    for label in range(num_labels):
        positive = Y[:, label] == 1
        c1[label] = np.bincount(counts[positive, label], minlength=k + 1)
        c0[label] = np.bincount(counts[~positive, label], minlength=k + 1)
    cond1 = (s + c1) / (s * (k + 1) + c1.sum(axis=1, keepdims=True))
    cond0 = (s + c0) / (s * (k + 1) + c0.sum(axis=1, keepdims=True))

    return MlknnModel(
        train_features=X,
        train_labels=train.labels,
        k=k,
        smoothing=s,
        feature_min=lo,
        feature_range=rng,
        prior1=prior1,
        cond1=cond1,
        cond0=cond0,
    )


def predict(model: MlknnModel, test: MultiLabelDataset) -> PredictionSet:
    """MAP decision per label: 1 iff P(H1)P(c|H1) > P(H0)P(c|H0).

    The score is the posterior P(H1 | c) = p1/(p1+p0), always in (0, 1).
    """
    if test.num_features != model.train_features.shape[1]:
        raise ValueError(
            f"test has {test.num_features} features, model expects {model.train_features.shape[1]}"
        )
    X = _normalize(test.features, model.feature_min, model.feature_range)
    neighbors = _k_nearest(_squared_distances(X, model.train_features), model.k)
    counts = model.train_labels.astype(np.int64)[neighbors].sum(axis=1)

    labels_idx = np.arange(model.num_labels)
    p1 = model.prior1[None, :] * model.cond1[labels_idx, counts]
    p0 = (1.0 - model.prior1)[None, :] * model.cond0[labels_idx, counts]
    scores = p1 / (p1 + p0)
    return PredictionSet(labels=(p1 > p0).astype(np.int8), scores=scores)


def _ranks(scores: np.ndarray) -> np.ndarray:
    """Per-instance label ranks: rank 1 is the highest score, ties by label index."""
    order = np.argsort(-scores, axis=1, kind="stable")
    ranks = np.empty_like(order)
    n, num_labels = scores.shape
    rows = np.arange(n)[:, None]
    ranks[rows, order] = np.arange(1, num_labels + 1)[None, :]
    return ranks


def evaluate(actual: np.ndarray, predictions: PredictionSet) -> MetricsReport:
    """Compute the six multi-label metrics against the true label matrix.

    Instances whose denominator is undefined are skipped per metric (no true
    labels: accuracy, recall, ranking loss, average precision, coverage; no
    predicted labels: precision; no negative labels: ranking loss) and the
    skip counts are reported alongside the values.
    """
    actual = np.asarray(actual)
    z = predictions.labels
    if actual.shape != z.shape:
        raise ValueError("actual and predicted label matrices must have the same shape")
    n, num_labels = actual.shape
    if n == 0:
        raise ValueError("need at least one instance to evaluate")

    y = actual.astype(bool)
    zb = z.astype(bool)
    y_size = y.sum(axis=1)
    z_size = zb.sum(axis=1)
    inter = (y & zb).sum(axis=1)
    union = (y | zb).sum(axis=1)

    has_true = y_size > 0
    has_pred = z_size > 0
    has_false = y_size < num_labels

    accuracy = float((inter[has_true] / union[has_true]).mean()) if has_true.any() else 0.0
    precision = float((inter[has_pred] / z_size[has_pred]).mean()) if has_pred.any() else 0.0
    recall = float((inter[has_true] / y_size[has_true]).mean()) if has_true.any() else 0.0
    f_measure = 0.0 if precision + recall == 0 else 2.0 * precision * recall / (precision + recall)
    hamming = float((y ^ zb).sum(axis=1).mean() / num_labels)

    ranks = _ranks(predictions.scores)
    rl_values, ap_values, cov_values = [], [], []
    for i in range(n):
        true_ranks = ranks[i, y[i]]
        if y_size[i] > 0:
            cov_values.append(true_ranks.max() - 1)
            # average precision: fraction of true labels at or above each true label's rank
            at_or_above = (true_ranks[:, None] <= true_ranks[None, :]).sum(axis=0)
            ap_values.append(float((at_or_above / true_ranks).mean()))
            if y_size[i] < num_labels:
                false_ranks = ranks[i, ~y[i]]
                violated = (true_ranks[:, None] > false_ranks[None, :]).sum()
                rl_values.append(violated / (y_size[i] * (num_labels - y_size[i])))

    ranking_loss = float(np.mean(rl_values)) if rl_values else 0.0
    avg_precision = float(np.mean(ap_values)) if ap_values else 0.0
    coverage = float(np.mean(cov_values)) if cov_values else 0.0

    skipped = {
        "accuracy": int(n - has_true.sum()),
        "precision": int(n - has_pred.sum()),
        "recall": int(n - has_true.sum()),
        "ranking_loss": int(n - (has_true & has_false).sum()),
        "avg_precision": int(n - has_true.sum()),
        "coverage": int(n - has_true.sum()),
    }
    return MetricsReport(
        accuracy=accuracy,
        f_measure=f_measure,
        hamming_loss=hamming,
        ranking_loss=ranking_loss,
        avg_precision=avg_precision,
        coverage=coverage,
        skipped=skipped,
    )
