"""Nearest-neighbor predictors for hyperedge weights and labels.

Two routes: the modified kNN works directly in the count metric and selects
neighbors by the k smallest *distinct* distances (shells), so a shell tie
brings in every edge at that distance.  The embedded kNN maps each edge to
its per-label neighbor histogram in R^q and runs classical Euclidean kNN on
those points.
"""

from __future__ import annotations

import warnings
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .core import Hypergraph
from .geometry import GeometryConfig, _mean, batch_records
from .weighting import LABEL, WEIGHT, ObservationMap, bucketize_labels


class KClampWarning(UserWarning):
    """k exceeded the available shells or points and was clamped."""


@dataclass(frozen=True)
class ShellSet:
    """The k smallest distinct distances from a query edge, with every member attaining them."""

    query: int
    shells: tuple[int, ...]
    members: tuple[tuple[int, int], ...]  # (edge id, distance), sorted by (distance, id)

    @property
    def member_ids(self) -> tuple[int, ...]:
        return tuple(e for e, _ in self.members)


@dataclass(frozen=True)
class FeatureVector:
    """Per-label counts over an edge's refined neighborhood; the embedding into R^q."""

    edge: int
    components: tuple[int, ...]


def knn_shells(e: int, observed: Iterable[int], counts: Mapping[int, int], k: int) -> ShellSet:
    """Collect the observed edges lying on the k nearest distance shells of e.

    Distances are |count(e) - count(f)|.  If fewer than k distinct distances
    exist, k is clamped with a warning so parameter sweeps never abort.
    """
    observed = sorted(set(observed))
    if not observed:
        raise ValueError("no observations")
    if k < 1:
        raise ValueError("k must be at least 1")
    ce = counts[e]
    dist = {f: abs(ce - counts[f]) for f in observed}
    values = sorted(set(dist.values()))
    if k > len(values):
        warnings.warn("k exceeds the number of distinct distances; clamped", KClampWarning, stacklevel=2)
        k = len(values)
    cut = values[k - 1]
    members = tuple(sorted(((f, d) for f, d in dist.items() if d <= cut), key=lambda t: (t[1], t[0])))
    return ShellSet(query=e, shells=tuple(values[:k]), members=members)


def predict_weight_modified(
    e: int,
    observed: Iterable[int],
    W: ObservationMap,
    counts: Mapping[int, int],
    k: int,
) -> float:
    """Mean observed weight over the k nearest distance shells of e."""
    shells = knn_shells(e, observed, counts, k)
    vals = np.fromiter((float(W[f]) for f in shells.member_ids), np.float64, len(shells.members))
    return _mean(vals)


def _vote(labels: list[int], q: int) -> int:
    """Unique mode if one exists, otherwise the half-up-rounded mean clamped to 1..q."""
    tally = Counter(labels)
    top = max(tally.values())
    modes = [lab for lab, c in tally.items() if c == top]
    if len(modes) == 1:
        return modes[0]
    s, n = sum(labels), len(labels)
    return min(q, max(1, (2 * s + n) // (2 * n)))


def predict_label_modified(
    e: int,
    observed: Iterable[int],
    L: ObservationMap,
    counts: Mapping[int, int],
    k: int,
) -> int:
    """Label vote over the k nearest distance shells of e."""
    if L.kind != LABEL:
        raise ValueError("predict_label_modified expects a label map")
    shells = knn_shells(e, observed, counts, k)
    return _vote([L[f] for f in shells.member_ids], L.q)


def feature_vector(e: int, refined: Iterable[int], L: ObservationMap, q: int) -> FeatureVector:
    """Count, per label 1..q, the refined neighbors carrying that label."""
    components = [0] * q
    for f in refined:
        components[L[f] - 1] += 1
    return FeatureVector(e, tuple(components))


def _feature_table(
    X: Hypergraph,
    observed: Iterable[int],
    F_geom: Mapping[int, float],
    L: ObservationMap,
    config: GeometryConfig,
    q: int,
    edges: Iterable[int],
    workers: int | None = None,
) -> tuple[list[int], np.ndarray]:
    """Feature vectors for the requested edges, one batch pass over the geometry."""
    ids = sorted(edges)
    records = batch_records(X, observed, F_geom, config, edges=ids, workers=workers)
    mat = np.zeros((len(ids), q), dtype=np.int64)
    for i, e in enumerate(ids):
        for f in records[e].refined:
            mat[i, L[f] - 1] += 1
    return ids, mat


def _point_knn(train: np.ndarray, query: np.ndarray, k: int) -> np.ndarray:
    """Positions of the k nearest rows of train to query; ties at the k-th radius all included."""
    if train.shape[0] == 0:
        raise ValueError("no observations")
    if k < 1:
        raise ValueError("k must be at least 1")
    diff = train - query
    d2 = np.einsum("ij,ij->i", diff, diff)
    if k > d2.size:
        warnings.warn("k exceeds the number of training points; clamped", KClampWarning, stacklevel=2)
        k = d2.size
    cut = np.partition(d2, k - 1)[k - 1]
    return np.nonzero(d2 <= cut)[0]


def predict_label_embedded(
    e: int,
    X: Hypergraph,
    observed: Iterable[int],
    L: ObservationMap,
    config: GeometryConfig = GeometryConfig(),
    q: int | None = None,
    k: int = 1,
) -> int:
    """Embed e and the observed edges as label histograms, then vote over the k nearest points.

    Every observed edge is a candidate point; self-exclusion happens one level
    down, where the geometry leaves an observed edge out of its own histogram.
    """
    if L.kind != LABEL:
        raise ValueError("predict_label_embedded expects a label map")
    q = L.q if q is None else q
    observed = sorted(set(observed))
    ids, mat = _feature_table(X, observed, L, L, config, q, set(observed) | {e})
    row = {f: i for i, f in enumerate(ids)}
    train = mat[[row[f] for f in observed]]
    sel = _point_knn(train, mat[row[e]], k)
    return _vote([L[observed[i]] for i in sel], L.q)


def predict_weight_embedded(
    e: int,
    X: Hypergraph,
    observed: Iterable[int],
    W: ObservationMap,
    config: GeometryConfig = GeometryConfig(),
    q: int = 2,
    k: int = 1,
) -> float:
    """Bucketize the observed weights into q labels, embed, and average the k nearest points' weights.

    The neighborhoods themselves are driven by the weights (bandwidth = std of
    neighboring weights); the derived labels only shape the histogram axes.
    """
    if W.kind != WEIGHT:
        raise ValueError("predict_weight_embedded expects a weight map")
    observed = sorted(set(observed))
    L = bucketize_labels(W.restrict(observed), q)
    ids, mat = _feature_table(X, observed, W, L, config, q, set(observed) | {e})
    row = {f: i for i, f in enumerate(ids)}
    train = mat[[row[f] for f in observed]]
    sel = _point_knn(train, mat[row[e]], k)
    vals = np.fromiter((float(W[observed[i]]) for i in sel), np.float64, len(sel))
    return _mean(vals)
