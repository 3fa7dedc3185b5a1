"""Federated multi-label feature selection with Pareto-based bi-objective ranking.

Clients compute mutual-information relevance and correlation-distance
redundancy statistics on their own shards; a server aggregates the matrices,
ranks features by Pareto front number and crowding distance, and broadcasts
the ranking back. An ML-kNN classifier plus six multi-label metrics evaluate
the selected features.
"""

from .client import CdMatrix, ClientReport, MiMatrix, apply_ranking, compute_local_report
from .dataset import (
    DiscretizedDataset,
    MultiLabelDataset,
    PartitionPlan,
    discretize,
    load_arff,
    load_csv,
    partition_noniid,
    save_csv,
    split_train_test,
)
from .federation import ProtocolError, ProtocolMessage, RunConfig, run_round
from .infotheory import (
    DiscreteColumn,
    conditional_entropy,
    correlation_distance,
    entropy,
    joint_entropy,
    mutual_information,
)
from .mlknn import MetricsReport, MlknnModel, PredictionSet, evaluate, fit, predict
from .pareto import (
    FeatureRanking,
    ObjectivePair,
    crowding_distance,
    non_dominated_sort,
    rank_features,
    score_and_rank,
)
from .server import AggregatedStats, aggregate, objectives

__version__ = "0.1.0"

__all__ = [
    "AggregatedStats",
    "CdMatrix",
    "ClientReport",
    "DiscreteColumn",
    "DiscretizedDataset",
    "FeatureRanking",
    "MetricsReport",
    "MiMatrix",
    "MlknnModel",
    "MultiLabelDataset",
    "ObjectivePair",
    "PartitionPlan",
    "PredictionSet",
    "ProtocolError",
    "ProtocolMessage",
    "RunConfig",
    "aggregate",
    "apply_ranking",
    "compute_local_report",
    "conditional_entropy",
    "correlation_distance",
    "crowding_distance",
    "discretize",
    "entropy",
    "evaluate",
    "fit",
    "joint_entropy",
    "load_arff",
    "load_csv",
    "mutual_information",
    "non_dominated_sort",
    "objectives",
    "partition_noniid",
    "predict",
    "rank_features",
    "run_round",
    "save_csv",
    "score_and_rank",
    "split_train_test",
]
