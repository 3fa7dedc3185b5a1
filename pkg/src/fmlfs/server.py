"""Server-side global phase: aggregate client reports and extract objectives.

The server averages the per-client MI and CD matrices element-wise (summing in
ascending client_id order so the result is bit-deterministic regardless of
arrival order) and reads one (relevance, redundancy-distance) objective pair
per feature as the row maxima of the two global matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .client import ClientReport
from .pareto import ObjectivePair


@dataclass(frozen=True)
class AggregatedStats:
    """Global MI (D x L) and CD (D x D) matrices averaged over M clients."""

    mi_global: np.ndarray
    cd_global: np.ndarray
    num_clients: int

    def __post_init__(self):
        if self.num_clients < 2:
            raise ValueError("M must be a minimum of 2")
        cd = np.asarray(self.cd_global)
        if np.abs(cd - cd.T).max(initial=0.0) > 1e-9:
            raise ValueError("aggregated CD must be symmetric")
        if np.abs(np.diagonal(cd)).max(initial=0.0) > 1e-9:
            raise ValueError("aggregated CD diagonal must be zero")

    def to_json(self) -> dict:
        return {
            "num_clients": int(self.num_clients),
            "mi": self.mi_global.tolist(),
            "cd": self.cd_global.tolist(),
        }


def aggregate(reports: list[ClientReport], weighted: bool = False) -> AggregatedStats:
    """Element-wise mean of the client matrices.

    The default is the plain unweighted mean over clients; weighted=True
    weights each client by its instance count instead.
    """
    if len(reports) < 2:
        raise ValueError("aggregation needs at least 2 client reports")
    ids = [r.client_id for r in reports]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate client_id in reports: {sorted(ids)}")
    shapes = {(r.num_features, r.num_labels) for r in reports}
    if len(shapes) != 1:
        raise ValueError(f"reports disagree on matrix dimensions: {sorted(shapes)}")

    ordered = sorted(reports, key=lambda r: r.client_id)
    mi = np.zeros_like(ordered[0].mi.values)
    cd = np.zeros_like(ordered[0].cd.values)
    if weighted:
        total = float(sum(r.num_instances for r in ordered))
        for report in ordered:
            mi += report.num_instances * report.mi.values
            cd += report.num_instances * report.cd.values
        mi /= total
        cd /= total
    else:
        for report in ordered:
            mi += report.mi.values
            cd += report.cd.values
        mi /= len(ordered)
        cd /= len(ordered)
    # Averaging preserves symmetry exactly; pin the diagonal against drift.
    np.fill_diagonal(cd, 0.0)
    return AggregatedStats(mi_global=mi, cd_global=cd, num_clients=len(ordered))


def objectives(stats: AggregatedStats) -> list[ObjectivePair]:
    """Per-feature objective pair: row max of global MI and row max of global CD."""
    o1 = stats.mi_global.max(axis=1)
    o2 = stats.cd_global.max(axis=1)
    return [ObjectivePair(feature_index=i, o1=float(a), o2=float(b)) for i, (a, b) in enumerate(zip(o1, o2))]
