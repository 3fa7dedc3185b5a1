"""Bi-objective non-dominated sorting, crowding distance, and feature scoring.

Both objectives are maximized. A point dominates another when it is >= in
every objective and > in at least one. Fronts are numbered from 1; the final
per-feature score is S = P + 1/(1+d), lower being better.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ObjectivePair:
    """Per-feature (relevance, redundancy-distance) objective values in bits."""

    feature_index: int
    o1: float
    o2: float

    def __post_init__(self):
        if self.o1 < 0 or self.o2 < 0:
            raise ValueError("objective values must be nonnegative")


@dataclass(frozen=True)
class RankedFeature:
    feature_index: int
    front: int
    crowding: float
    score: float


@dataclass(frozen=True)
class FeatureRanking:
    """Per-feature front/crowding/score records plus the sorted feature order."""

    records: list[RankedFeature]
    order: list[int]

    def __post_init__(self):
        if sorted(self.order) != list(range(len(self.records))):
            raise ValueError("order must be a permutation of the feature indices")

    def top(self, k: int) -> list[int]:
        """The best k feature indices in ranking order."""
        if not 1 <= k <= len(self.order):
            raise ValueError(f"top_k must lie in [1, {len(self.order)}]")
        return self.order[:k]

    def to_json(self) -> dict:
        return {
            "order": [int(i) for i in self.order],
            "records": [
                {
                    "feature": int(r.feature_index),
                    "front": int(r.front),
                    "crowding": "inf" if math.isinf(r.crowding) else float(r.crowding),
                    "score": float(r.score),
                }
                for r in self.records
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "FeatureRanking":
        records = [
            RankedFeature(
                feature_index=int(r["feature"]),
                front=int(r["front"]),
                crowding=math.inf if r["crowding"] == "inf" else float(r["crowding"]),
                score=float(r["score"]),
            )
            for r in obj["records"]
        ]
        return cls(records=records, order=[int(i) for i in obj["order"]])


def dominates(u: ObjectivePair, v: ObjectivePair) -> bool:
    """Maximization Pareto dominance: u >= v everywhere and > somewhere."""
    return u.o1 >= v.o1 and u.o2 >= v.o2 and (u.o1 > v.o1 or u.o2 > v.o2)


def non_dominated_sort(points: list[ObjectivePair]) -> list[int]:
    """Front number (1-based) per point via fast non-dominated sorting.

    Equal points never dominate each other and therefore share a front.
    """
    if not points:
        raise ValueError("need at least one point")
    for p in points:
        if math.isnan(p.o1) or math.isnan(p.o2):
            raise ValueError("objective values must not be NaN")

    n = len(points)
    dominated: list[list[int]] = [[] for _ in range(n)]
    dom_count = [0] * n
    for i in range(n):
        for j in range(i + 1, n):
            if dominates(points[i], points[j]):
                dominated[i].append(j)
                dom_count[j] += 1
            elif dominates(points[j], points[i]):
                dominated[j].append(i)
                dom_count[i] += 1

    fronts = [0] * n
    current = [i for i in range(n) if dom_count[i] == 0]
    front_no = 1
    while current:
        nxt = []
        for i in current:
            fronts[i] = front_no
            for j in dominated[i]:
                dom_count[j] -= 1
                if dom_count[j] == 0:
                    nxt.append(j)
        current = nxt
        front_no += 1
    return fronts


def crowding_distance(front_points: list[ObjectivePair]) -> list[float]:
    """Normalized-gap crowding distance for the points of a single front.

    Per objective the sorted extremes get infinity and interior points
    accumulate (next - prev)/(max - min); an objective that is constant over
    the front contributes nothing.
    """
    if not front_points:
        raise ValueError("front must be non-empty")
    n = len(front_points)
    dist = [0.0] * n
    for values in ([p.o1 for p in front_points], [p.o2 for p in front_points]):
        order = sorted(range(n), key=lambda i: (values[i], i))
        lo, hi = values[order[0]], values[order[-1]]
        dist[order[0]] = dist[order[-1]] = math.inf
        if hi > lo:
            for k in range(1, n - 1):
                dist[order[k]] += (values[order[k + 1]] - values[order[k - 1]]) / (hi - lo)
    return dist


def score(front: int, crowding: float) -> float:
    """S = front + 1/(1 + crowding); an infinite crowding distance gives S = front."""
    if math.isinf(crowding):
        return float(front)
    return front + 1.0 / (1.0 + crowding)


def score_and_rank(fronts: list[int], distances: list[float]) -> FeatureRanking:
    """Combine per-feature fronts and crowding distances into the final order.

    The order is ascending by score, ties broken by ascending feature index.
    """
    if len(fronts) != len(distances):
        raise ValueError("fronts and distances must have equal length")
    records = [
        RankedFeature(feature_index=i, front=p, crowding=d, score=score(p, d))
        for i, (p, d) in enumerate(zip(fronts, distances))
    ]
    order = sorted(range(len(records)), key=lambda i: (records[i].score, i))
    return FeatureRanking(records=records, order=order)


def rank_features(points: list[ObjectivePair]) -> FeatureRanking:
    """Full ranking pipeline: sort into fronts, crowd each front, score, order."""
    fronts = non_dominated_sort(points)
    distances = [0.0] * len(points)
    for front_no in sorted(set(fronts)):
        members = [i for i, f in enumerate(fronts) if f == front_no]
        for i, d in zip(members, crowding_distance([points[i] for i in members])):
            distances[i] = d
    return score_and_rank(fronts, distances)
