"""Discrete information-theoretic estimators over integer-coded columns.

All quantities are plug-in (maximum likelihood) estimates in bits: probabilities
are raw empirical frequencies, logarithms are base 2, and 0*log(0) is taken as 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DiscreteColumn:
    """A length-N column of integer codes drawn from [0, cardinality).

    Labels are represented with cardinality 2.
    """

    codes: np.ndarray
    cardinality: int

    def __post_init__(self):
        codes = np.asarray(self.codes)
        if codes.ndim != 1 or codes.size == 0:
            raise ValueError("codes must be a non-empty 1-D array")
        if not np.issubdtype(codes.dtype, np.integer):
            raise ValueError("codes must be integers")
        if self.cardinality < 1:
            raise ValueError("cardinality must be >= 1")
        if codes.min() < 0 or codes.max() >= self.cardinality:
            raise ValueError("every code must lie in [0, cardinality)")
        object.__setattr__(self, "codes", codes)

    def __len__(self) -> int:
        return self.codes.size


def _entropy_from_counts(counts: np.ndarray) -> float:
    """Shannon entropy in bits of the distribution counts/counts.sum()."""
    total = counts.sum()
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def _joint_counts(a: DiscreteColumn, b: DiscreteColumn) -> np.ndarray:
    """Co-occurrence counts as a (a.cardinality, b.cardinality) table."""
    if len(a) != len(b):
        raise ValueError("columns must have equal length")
    fused = a.codes.astype(np.int64) * b.cardinality + b.codes
    counts = np.bincount(fused, minlength=a.cardinality * b.cardinality)
    return counts.reshape(a.cardinality, b.cardinality)


def entropy(col: DiscreteColumn) -> float:
    """H(col) in bits; lies in [0, log2(cardinality)]."""
    counts = np.bincount(col.codes, minlength=col.cardinality)
    return _entropy_from_counts(counts)


def joint_entropy(a: DiscreteColumn, b: DiscreteColumn) -> float:
    """H(a, b) in bits from the empirical co-occurrence table."""
    return _entropy_from_counts(_joint_counts(a, b))


def conditional_entropy(a: DiscreteColumn, b: DiscreteColumn) -> float:
    """H(a | b) in bits, computed definitionally as -sum p(a,b) log2 p(a|b).

    Agrees with joint_entropy(a, b) - entropy(b) by the chain rule.
    """
    counts = _joint_counts(a, b)
    total = counts.sum()
    cond = 0.0
    col_totals = counts.sum(axis=0)
    for j in range(counts.shape[1]):
        nz = counts[counts[:, j] > 0, j]
        if nz.size == 0:
            continue
        p_ab = nz / total
        p_a_given_b = nz / col_totals[j]
        cond -= float((p_ab * np.log2(p_a_given_b)).sum())
    return cond


def mutual_information(a: DiscreteColumn, b: DiscreteColumn) -> float:
    """I(a; b) = H(a) + H(b) - H(a, b) in bits, clamped at zero.

    Rounding can drive the estimate a hair below zero; anything within 1e-12
    of zero is returned as exactly 0.
    """
    mi = entropy(a) + entropy(b) - joint_entropy(a, b)
    if mi < 0.0:
        if mi < -1e-12:
            raise ValueError(f"mutual information {mi} is negative beyond rounding error")
        mi = 0.0
    return mi


def correlation_distance(a: DiscreteColumn, b: DiscreteColumn) -> float:
    """CD(a, b) = H(a, b) - I(a; b) in bits; symmetric and zero for a == b."""
    cd = joint_entropy(a, b) - mutual_information(a, b)
    if cd < 0.0:
        if cd < -1e-12:
            raise ValueError(f"correlation distance {cd} is negative beyond rounding error")
        cd = 0.0
    return cd
