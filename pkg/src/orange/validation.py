"""Probability-based knowledge filter.

A unit inherits the empirical probability of the candidate it was parsed
from: the fraction of the task's logged candidates whose execution produced
the same result (error candidates count in the denominator). Units strictly
below the threshold are dropped before they can enter memory.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .logstore import ClusterPartition
from .memory import KnowledgeUnit


@dataclass(frozen=True)
class ValidatorConfig:
    tau: float = 0.3

    def __post_init__(self) -> None:
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must lie in [0, 1], got {self.tau}")


def candidate_probability(partition: ClusterPartition, cluster_index: int) -> float:
    """Share of all logged candidates that landed in this cluster."""
    cluster = partition.clusters[cluster_index]
    return cluster.size / partition.total_candidates


def score_and_filter(
    units: list[KnowledgeUnit],
    partition: ClusterPartition,
    cfg: ValidatorConfig = ValidatorConfig(),
) -> list[KnowledgeUnit]:
    """Attach cluster probabilities to units and drop the unreliable ones.

    Each unit's probability is its source candidate's cluster frequency; a
    unit is removed exactly when that probability is strictly below ``tau``.
    Should the same unit (same normalized SQL and fingerprint) descend from
    several candidates, the strongest-probability copy is kept, first
    occurrence wins the position.
    """
    merged: dict[tuple[str, str], KnowledgeUnit] = {}
    order: list[tuple[str, str]] = []
    for unit in units:
        cluster_index = partition.cluster_index_of(unit.provenance.candidate_index)
        scored = replace(unit, probability=candidate_probability(partition, cluster_index))
        key = scored.dedup_key
        existing = merged.get(key)
        if existing is None:
            merged[key] = scored
            order.append(key)
        elif scored.probability > existing.probability:
            merged[key] = replace(existing, probability=scored.probability)
    return [merged[key] for key in order if merged[key].probability >= cfg.tau]
