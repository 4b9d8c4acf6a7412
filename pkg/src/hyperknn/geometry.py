"""Local neighborhoods of hyperedges, the refined-neighbor count, and the count-difference metric.

The base neighborhood of an edge e collects observed edges sharing at least
floor(size(e)/2) vertices with e, subject to a size cap.  Refining keeps the
neighbors whose observed value sits within a bandwidth of the neighborhood
mean; the size of that refined set is the count statistic from which the
metric |count(e) - count(f)| is built.  Two edges with equal counts are
equivalent: the metric is a metric only modulo that equivalence.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np
from scipy import sparse

from .core import Hypergraph, IncidenceIndex

_CHUNK = 1024


@dataclass(frozen=True)
class SizePolicy:
    """Cap on neighbor sizes: unbounded, or epsilon times the query edge size.

    ``epsilon=None`` disables the cap entirely; otherwise epsilon must lie in
    (0, 2] and a neighbor f qualifies only when size(f) <= epsilon * size(e).
    """

    epsilon: float | None = None

    def __post_init__(self) -> None:
        if self.epsilon is not None and not 0.0 < self.epsilon <= 2.0:
            raise ValueError(f"epsilon must be in (0, 2], got {self.epsilon}")

    @classmethod
    def unbounded(cls) -> SizePolicy:
        return cls(None)

    @classmethod
    def scaled(cls, epsilon: float) -> SizePolicy:
        return cls(epsilon)

    @property
    def is_unbounded(self) -> bool:
        return self.epsilon is None

    def max_size(self, size: int) -> float:
        return math.inf if self.epsilon is None else self.epsilon * size

    def label(self) -> str:
        return "inf" if self.epsilon is None else f"{self.epsilon:g}"


@dataclass(frozen=True)
class GeometryConfig:
    """Size policy plus bandwidth rule shared by every neighborhood computation.

    ``fixed_bandwidth=None`` means the bandwidth of each edge is the population
    standard deviation of the observed values over its base neighborhood.
    """

    size_policy: SizePolicy = SizePolicy()
    fixed_bandwidth: float | None = None

    def __post_init__(self) -> None:
        if self.fixed_bandwidth is not None and self.fixed_bandwidth <= 0:
            raise ValueError("fixed bandwidth must be positive")


@dataclass(frozen=True)
class NeighborhoodRecord:
    """Base and refined neighborhoods of one edge, with the statistics between them."""

    edge: int
    base: tuple[int, ...]
    mean: float | None
    bandwidth: float | None
    refined: tuple[int, ...]

    @property
    def count(self) -> int:
        return len(self.refined)


def _mean(vals: np.ndarray) -> float:
    return float(vals.sum() / vals.size)


def _pop_std(vals: np.ndarray, mean: float) -> float:
    dev = vals - mean
    return float(np.sqrt(np.sum(dev * dev) / vals.size))


def _values(F: Mapping[int, float], base: Iterable[int], n: int) -> np.ndarray:
    return np.fromiter((float(F[f]) for f in base), np.float64, n)


def base_neighborhood(
    index: IncidenceIndex,
    X: Hypergraph,
    e: int,
    observed: Iterable[int],
    policy: SizePolicy = SizePolicy(),
) -> list[int]:
    """Observed edges overlapping e in at least floor(size(e)/2) vertices and passing the size cap.

    Candidates are gathered by counting e's vertices' postings in the
    incidence index, so only edges actually sharing a vertex are touched.
    The edge itself is excluded when it is observed.  Returned ascending.
    """
    observed_set = observed if isinstance(observed, set) else set(observed)
    edge = X.edges[e]
    threshold = edge.size // 2
    cap = policy.max_size(edge.size)
    if threshold == 0:
        # A size-one edge accepts any observed edge that fits the size cap.
        return sorted(f for f in observed_set if f != e and X.edges[f].size <= cap)
    counts: dict[int, int] = {}
    for v in edge.vertices:
        for f in index.vertex_to_edges[v]:
            counts[f] = counts.get(f, 0) + 1
    return sorted(
        f
        for f, c in counts.items()
        if c >= threshold and f != e and f in observed_set and X.edges[f].size <= cap
    )


def neighborhood_average(F: Mapping[int, float], base: Iterable[int]) -> float | None:
    """Arithmetic mean of the observed values over the base neighborhood; None when empty."""
    base = list(base)
    if not base:
        return None
    return _mean(_values(F, base, len(base)))


def neighborhood_bandwidth(
    F: Mapping[int, float],
    base: Iterable[int],
    config: GeometryConfig = GeometryConfig(),
) -> float | None:
    """Bandwidth for refining: the configured constant, or the population std over the base."""
    base = list(base)
    if not base:
        return None
    if config.fixed_bandwidth is not None:
        return config.fixed_bandwidth
    vals = _values(F, base, len(base))
    return _pop_std(vals, _mean(vals))


def refined_neighborhood(
    F: Mapping[int, float],
    base: Iterable[int],
    mean: float | None,
    bandwidth: float | None,
) -> list[int]:
    """Base members whose observed value lies within the bandwidth of the mean."""
    base = list(base)
    if not base:
        return []
    if mean is None or bandwidth is None:
        raise ValueError("mean and bandwidth must be defined for a non-empty base")
    vals = _values(F, base, len(base))
    keep = np.abs(vals - mean) <= bandwidth
    return [f for f, k in zip(base, keep) if k]


def neighborhood_record(
    index: IncidenceIndex,
    X: Hypergraph,
    e: int,
    observed: Iterable[int],
    F: Mapping[int, float],
    config: GeometryConfig = GeometryConfig(),
) -> NeighborhoodRecord:
    """Compose base neighborhood, statistics, and refinement for a single edge."""
    base = base_neighborhood(index, X, e, observed, config.size_policy)
    if not base:
        return NeighborhoodRecord(e, (), None, None, ())
    vals = _values(F, base, len(base))
    mean = _mean(vals)
    bw = config.fixed_bandwidth if config.fixed_bandwidth is not None else _pop_std(vals, mean)
    keep = np.abs(vals - mean) <= bw
    refined = tuple(f for f, k in zip(base, keep) if k)
    return NeighborhoodRecord(e, tuple(base), mean, bw, refined)


def neighborhood_count(
    index: IncidenceIndex,
    X: Hypergraph,
    e: int,
    observed: Iterable[int],
    F: Mapping[int, float],
    config: GeometryConfig = GeometryConfig(),
) -> int:
    """Size of the refined neighborhood of e; 0 when the base is empty."""
    return neighborhood_record(index, X, e, observed, F, config).count


def hyperedge_distance(count_e: int, count_f: int) -> int:
    """Absolute difference of refined-neighbor counts; zero exactly on equivalent edges."""
    return abs(count_e - count_f)


def equivalent(e: int, f: int, counts: Mapping[int, int]) -> bool:
    """Edges are equivalent when their refined-neighbor counts coincide."""
    return counts[e] == counts[f]


def _incidence_csr(X: Hypergraph) -> sparse.csr_matrix:
    n = len(X.edges)
    indptr = np.zeros(n + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([e.size for e in X.edges])
    indices = np.fromiter((v for e in X.edges for v in e.vertices), np.int64, int(indptr[-1]))
    data = np.ones(int(indptr[-1]), dtype=np.int32)
    return sparse.csr_matrix((data, indices, indptr), shape=(n, max(X.vertex_count, 1)))


def _chunk_records(
    B: sparse.csr_matrix,
    B0T: sparse.csr_matrix,
    e0: np.ndarray,
    sizes0: np.ndarray,
    F0: np.ndarray,
    sizes_all: np.ndarray,
    config: GeometryConfig,
    queries: np.ndarray,
) -> list[tuple[int, np.ndarray, float | None, float | None, np.ndarray]]:
    """Per-edge (edge, base positions, mean, bandwidth, refined positions) for one query chunk.

    Overlap counts against all observed edges come from one sparse
    matrix product; the per-row filtering then mirrors base_neighborhood
    exactly, including self-exclusion and the size cap.
    """
    overlaps = B[queries] @ B0T
    overlaps.sort_indices()
    eps = config.size_policy.epsilon
    out = []
    for i, e in enumerate(queries):
        e = int(e)
        s = int(sizes_all[e])
        threshold = s // 2
        cap = math.inf if eps is None else eps * s
        if threshold == 0:
            base_pos = np.nonzero((sizes0 <= cap) & (e0 != e))[0]
        else:
            lo, hi = overlaps.indptr[i], overlaps.indptr[i + 1]
            cols = overlaps.indices[lo:hi]
            cnt = overlaps.data[lo:hi]
            mask = (cnt >= threshold) & (sizes0[cols] <= cap) & (e0[cols] != e)
            base_pos = cols[mask].astype(np.int64)
        if base_pos.size == 0:
            out.append((e, base_pos, None, None, base_pos))
            continue
        vals = F0[base_pos]
        mean = _mean(vals)
        bw = config.fixed_bandwidth if config.fixed_bandwidth is not None else _pop_std(vals, mean)
        keep = np.abs(vals - mean) <= bw
        out.append((e, base_pos, mean, bw, base_pos[keep]))
    return out


def _batch(
    X: Hypergraph,
    observed: Iterable[int],
    F: Mapping[int, float],
    config: GeometryConfig,
    edges: Iterable[int] | None,
    workers: int | None,
):
    e0 = np.asarray(sorted(set(observed)), dtype=np.int64)
    sizes_all = np.fromiter((e.size for e in X.edges), np.int64, len(X.edges))
    sizes0 = sizes_all[e0]
    F0 = np.fromiter((float(F[int(f)]) for f in e0), np.float64, len(e0))
    B = _incidence_csr(X)
    B0T = B[e0].T.tocsr()
    queries = np.asarray(sorted(edges) if edges is not None else range(len(X.edges)), dtype=np.int64)
    chunks = [queries[i : i + _CHUNK] for i in range(0, len(queries), _CHUNK)]

    def run(chunk: np.ndarray):
        return _chunk_records(B, B0T, e0, sizes0, F0, sizes_all, config, chunk)

    if workers is not None and workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, chunks))
    else:
        results = [run(chunk) for chunk in chunks]
    for chunk_result in results:  # chunk order preserves ascending query order
        yield from ((row, e0) for row in chunk_result)


def batch_counts(
    X: Hypergraph,
    observed: Iterable[int],
    F: Mapping[int, float],
    config: GeometryConfig = GeometryConfig(),
    *,
    edges: Iterable[int] | None = None,
    workers: int | None = None,
) -> dict[int, int]:
    """Refined-neighbor count of every requested edge (default: all edges).

    Equals per-edge neighborhood_count but amortizes the candidate generation
    through one incidence matrix, chunked so memory stays bounded at dataset
    scale.  Results are deterministic for any worker count.
    """
    return {e: int(refined.size) for (e, _, _, _, refined), _ in _batch(X, observed, F, config, edges, workers)}


def batch_records(
    X: Hypergraph,
    observed: Iterable[int],
    F: Mapping[int, float],
    config: GeometryConfig = GeometryConfig(),
    *,
    edges: Iterable[int] | None = None,
    workers: int | None = None,
) -> dict[int, NeighborhoodRecord]:
    """Full NeighborhoodRecord per requested edge, computed through the batch engine."""
    out: dict[int, NeighborhoodRecord] = {}
    for (e, base_pos, mean, bw, refined_pos), e0 in _batch(X, observed, F, config, edges, workers):
        out[e] = NeighborhoodRecord(
            e,
            tuple(int(i) for i in e0[base_pos]),
            mean,
            bw,
            tuple(int(i) for i in e0[refined_pos]),
        )
    return out
