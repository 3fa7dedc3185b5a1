"""Client-side local phase: relevance and redundancy statistics for one shard.

Each client computes the D x L feature-label mutual-information matrix and the
D x D feature-feature correlation-distance matrix on its own (discretized)
data and packages them as a report for the server. Cost is O(N*D*L + N*D^2):
the redundancy matrix is evaluated once per unordered pair and mirrored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import DiscretizedDataset, MultiLabelDataset
from .infotheory import DiscreteColumn, entropy, joint_entropy
from .pareto import FeatureRanking

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class MiMatrix:
    """D x L mutual information between each feature and each label, in bits."""

    values: np.ndarray
    client_id: int
    num_instances: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError("MI matrix must be 2-D")
        if (values < 0).any():
            raise ValueError("MI entries must be nonnegative")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class CdMatrix:
    """D x D correlation distance between features, in bits."""

    values: np.ndarray
    client_id: int
    num_instances: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValueError("CD matrix must be square")
        if (values < 0).any():
            raise ValueError("CD entries must be nonnegative")
        if np.abs(values - values.T).max(initial=0.0) > 1e-9:
            raise ValueError("CD matrix must be symmetric")
        if np.abs(np.diagonal(values)).max(initial=0.0) > 1e-9:
            raise ValueError("CD diagonal must be zero")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class ClientReport:
    """The pair of local matrices one client sends to the server."""

    mi: MiMatrix
    cd: CdMatrix
    client_id: int
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.mi.client_id != self.client_id or self.cd.client_id != self.client_id:
            raise ValueError("mi/cd client_id must match the report client_id")
        if self.mi.values.shape[0] != self.cd.values.shape[0]:
            raise ValueError("mi and cd must agree on the feature dimension D")

    @property
    def num_features(self) -> int:
        return self.mi.values.shape[0]

    @property
    def num_labels(self) -> int:
        return self.mi.values.shape[1]

    @property
    def num_instances(self) -> int:
        return self.mi.num_instances

    def to_json(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "client_id": int(self.client_id),
            "n": int(self.mi.num_instances),
            "mi": self.mi.values.tolist(),
            "cd": self.cd.values.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ClientReport":
        if obj.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema_version {obj.get('schema_version')!r}")
        client_id = int(obj["client_id"])
        n = int(obj["n"])
        return cls(
            mi=MiMatrix(np.asarray(obj["mi"], dtype=np.float64), client_id, n),
            cd=CdMatrix(np.asarray(obj["cd"], dtype=np.float64), client_id, n),
            client_id=client_id,
        )


def compute_local_report(shard: DiscretizedDataset, client_id: int) -> ClientReport:
    """Run the local phase on one client's discretized shard.

    mi[a][b] = I(X_a; Y_b) and cd[a][b] = CD(X_a, X_b), both in bits. MI and
    CD are assembled from per-column entropies and pairwise joint entropies
    (I = H_a + H_b - H_ab, CD = H_ab - I), which matches the standalone
    estimators bit for bit while computing each joint table once.
    """
    if shard.num_instances < 1:
        raise ValueError("shard must contain at least one instance")
    d, num_labels = shard.num_features, shard.num_labels

    feature_cols = [DiscreteColumn(shard.codes[:, a], shard.num_bins) for a in range(d)]
    label_cols = [DiscreteColumn(shard.labels[:, b].astype(np.int64), 2) for b in range(num_labels)]
    h_feat = [entropy(col) for col in feature_cols]
    h_label = [entropy(col) for col in label_cols]

    mi = np.zeros((d, num_labels))
    for a in range(d):
        for b in range(num_labels):
            h_ab = joint_entropy(feature_cols[a], label_cols[b])
            mi[a, b] = max(h_feat[a] + h_label[b] - h_ab, 0.0)

    cd = np.zeros((d, d))
    for a in range(d):
        for b in range(a + 1, d):
            h_ab = joint_entropy(feature_cols[a], feature_cols[b])
            i_ab = max(h_feat[a] + h_feat[b] - h_ab, 0.0)
            cd[a, b] = cd[b, a] = max(h_ab - i_ab, 0.0)

    n = shard.num_instances
    return ClientReport(
        mi=MiMatrix(mi, client_id, n),
        cd=CdMatrix(cd, client_id, n),
        client_id=client_id,
    )


def apply_ranking(shard: MultiLabelDataset, ranking: FeatureRanking, top_k: int) -> MultiLabelDataset:
    """Restrict a raw shard to the top_k ranked features, in ranking order."""
    if len(ranking.order) != shard.num_features:
        raise ValueError(
            f"ranking covers {len(ranking.order)} features but shard has {shard.num_features}"
        )
    keep = ranking.top(top_k)
    return MultiLabelDataset(
        features=shard.features[:, keep],
        labels=shard.labels,
        feature_names=[shard.feature_names[i] for i in keep],
        label_names=list(shard.label_names),
    )
