"""Coreference scorers: MUC, B-cubed, and entity CEAF (phi4).

MUC is the link-based metric of Vilain et al. (1995); B-cubed averages
per-mention cluster overlap (Bagga and Baldwin, 1998); CEAF aligns key
and response clusters one-to-one under the phi4 similarity and scores
the optimal alignment (Luo, 2005). Degenerate denominators (all-singleton
key for MUC, an empty side for CEAF) score 0 rather than being skipped.

Mentions are arbitrary hashable values; the conversion layer uses
MentionId tuples but the scorers do not care.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from typing import Hashable, Iterable

import numpy as np
from scipy.optimize import linear_sum_assignment

Cluster = frozenset


@dataclass(frozen=True)
class ScoreTriple:
    precision: float
    recall: float
    f1: float

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}


def _triple(p_num: float, p_den: float, r_num: float, r_den: float) -> ScoreTriple:
    p = p_num / p_den if p_den else 0.0
    r = r_num / r_den if r_den else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return ScoreTriple(precision=p, recall=r, f1=f1)


class ClusterSet:
    """A partition fragment: non-empty, pairwise-disjoint mention sets."""

    def __init__(self, clusters: Iterable[Iterable[Hashable]]):
        self.clusters: tuple[frozenset, ...] = tuple(frozenset(c) for c in clusters)
        seen: set = set()
        for c in self.clusters:
            if not c:
                raise ValueError("empty cluster")
            if seen & c:
                raise ValueError(f"overlapping clusters: {sorted(seen & c)!r} appear twice")
            seen |= c
        self._mention_to_cluster = {m: i for i, c in enumerate(self.clusters) for m in c}

    def __len__(self) -> int:
        return len(self.clusters)

    def __iter__(self):
        return iter(self.clusters)

    def mentions(self) -> set:
        return set(self._mention_to_cluster)

    def cluster_of(self, mention: Hashable) -> frozenset | None:
        i = self._mention_to_cluster.get(mention)
        return self.clusters[i] if i is not None else None

    def cluster_index(self, mention: Hashable) -> int | None:
        return self._mention_to_cluster.get(mention)


def _as_cluster_set(x) -> ClusterSet:
    return x if isinstance(x, ClusterSet) else ClusterSet(x)


def muc(key, response) -> ScoreTriple:
    """Link-based score: recall counts, per key cluster, the links kept
    after partitioning it by response clusters (unaligned mentions each
    form their own part). Precision swaps the roles."""
    key, response = _as_cluster_set(key), _as_cluster_set(response)

    def counts(a: ClusterSet, b: ClusterSet) -> tuple[int, int]:
        num = den = 0
        for cluster in a:
            parts = set()
            unaligned = 0
            for m in cluster:
                i = b.cluster_index(m)
                if i is None:
                    unaligned += 1
                else:
                    parts.add(i)
            num += len(cluster) - (len(parts) + unaligned)
            den += len(cluster) - 1
        return num, den

    r_num, r_den = counts(key, response)
    p_num, p_den = counts(response, key)
    return _triple(p_num, p_den, r_num, r_den)


def b_cubed(key, response) -> ScoreTriple:
    """Mention-based score: per-mention overlap of the two clusters the
    mention belongs to, averaged over key mentions (recall) and response
    mentions (precision). Mentions absent from the other side contribute
    zero overlap."""
    key, response = _as_cluster_set(key), _as_cluster_set(response)

    def total(a: ClusterSet, b: ClusterSet) -> tuple[float, int]:
        terms = []
        n = 0
        for cluster in a:
            n += len(cluster)
            for m in cluster:
                other = b.cluster_of(m)
                if other is not None:
                    terms.append(len(cluster & other) / len(cluster))
        # fsum: correctly rounded, so the score ignores mention ordering
        return math.fsum(terms), n

    r_num, r_den = total(key, response)
    p_num, p_den = total(response, key)
    return _triple(p_num, p_den, r_num, r_den)


def _phi4(a: frozenset, b: frozenset) -> float:
    return 2 * len(a & b) / (len(a) + len(b))


def ceaf_e(key, response) -> ScoreTriple:
    """Entity-based score over the optimal one-to-one cluster alignment
    under phi4(K, R) = 2|K∩R| / (|K|+|R|)."""
    key, response = _as_cluster_set(key), _as_cluster_set(response)
    if not len(key) or not len(response):
        return _triple(0.0, float(len(response)), 0.0, float(len(key)))
    sim = np.zeros((len(key), len(response)))
    for i, k in enumerate(key):
        for j, r in enumerate(response):
            sim[i, j] = _phi4(k, r)
    rows, cols = linear_sum_assignment(sim, maximize=True)
    total = math.fsum(sim[i, j] for i, j in zip(rows, cols))
    return _triple(total, float(len(response)), total, float(len(key)))


def macro_average(triples: list[ScoreTriple]) -> ScoreTriple:
    """Componentwise arithmetic mean; F1 is averaged, not recomputed.

    statistics.mean works in exact rational arithmetic, so averaging
    identical triples returns them unchanged.
    """
    if not triples:
        raise ValueError("macro_average of an empty list")
    return ScoreTriple(
        precision=statistics.mean(t.precision for t in triples),
        recall=statistics.mean(t.recall for t in triples),
        f1=statistics.mean(t.f1 for t in triples),
    )
