"""Rating normalization, fairness/goodness item scoring, and weight/label maps on hyperedges."""

from __future__ import annotations

import bisect
import warnings
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

import numpy as np

from .core import BipartiteGraph, Hypergraph

WEIGHT = "weight"
LABEL = "label"


@dataclass
class ObservationMap:
    """Partial map from hyperedge ids to weights in [a, b] or labels in {1..q}.

    The domain is the observed subset of hyperedges; everything outside it is
    what the predictors are asked about.
    """

    kind: str
    values: dict[int, float] | dict[int, int]
    bounds: tuple[float, float] | None = None
    q: int | None = None

    def __post_init__(self) -> None:
        if self.kind == WEIGHT:
            if self.q is not None:
                raise ValueError("weight maps carry bounds, not a label count")
            if self.bounds is None and self.values:
                vs = self.values.values()
                self.bounds = (min(vs), max(vs))
            if self.bounds is not None:
                a, b = self.bounds
                if a > b:
                    raise ValueError(f"invalid bounds [{a}, {b}]")
                for e, w in self.values.items():
                    if not a <= w <= b:
                        raise ValueError(f"weight {w} of edge {e} outside [{a}, {b}]")
        elif self.kind == LABEL:
            if self.q is None or self.q < 1:
                raise ValueError("label maps need q >= 1")
            if self.bounds is not None:
                raise ValueError("label maps carry q, not bounds")
            for e, lab in self.values.items():
                if not isinstance(lab, int) or not 1 <= lab <= self.q:
                    raise ValueError(f"label {lab!r} of edge {e} outside 1..{self.q}")
        else:
            raise ValueError(f"unknown kind {self.kind!r}")

    @classmethod
    def for_weights(cls, values: Mapping[int, float], bounds: tuple[float, float] | None = None) -> ObservationMap:
        return cls(WEIGHT, dict(values), bounds=bounds)

    @classmethod
    def for_labels(cls, values: Mapping[int, int], q: int) -> ObservationMap:
        return cls(LABEL, {e: int(v) for e, v in values.items()}, q=q)

    def domain(self) -> set[int]:
        return set(self.values)

    def restrict(self, ids: Iterable[int]) -> ObservationMap:
        sub = {e: self.values[e] for e in ids}
        if self.kind == WEIGHT:
            return ObservationMap(WEIGHT, sub, bounds=self.bounds)
        return ObservationMap(LABEL, sub, q=self.q)

    def items(self):
        return self.values.items()

    def __getitem__(self, e: int):
        return self.values[e]

    def __contains__(self, e: int) -> bool:
        return e in self.values

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self) -> Iterator[int]:
        return iter(self.values)


def normalize_ratings(g: BipartiteGraph) -> BipartiteGraph:
    """Affinely rescale ratings from their observed range onto [-1, 1].

    A constant rating carries no comparative signal and maps to 0.
    """
    if not g.edges:
        raise ValueError("no edges")
    ratings = [r for _, _, r in g.edges]
    lo, hi = min(ratings), max(ratings)
    if hi == lo:
        scaled = [(u, v, 0.0) for u, v, _ in g.edges]
    else:
        span = hi - lo
        scaled = [(u, v, 2.0 * (r - lo) / span - 1.0) for u, v, r in g.edges]
    return BipartiteGraph(g.u_ids, g.v_ids, scaled, malformed=g.malformed, duplicates=g.duplicates)


@dataclass
class FairnessGoodness:
    """Converged (or truncated) fairness/goodness scores with the convergence record."""

    fairness: dict[int, float]
    goodness: dict[int, float]
    iterations: int
    final_delta: float
    converged: bool
    history: list[dict] | None = None


def fairness_goodness(
    g: BipartiteGraph,
    tol: float = 1e-6,
    max_iter: int = 100,
    record_history: bool = False,
) -> FairnessGoodness:
    """Iterate the mutual fairness/goodness updates until the maximum per-vertex change drops below tol.

    Ratings are expected in [-1, 1] (see normalize_ratings).  Each iteration
    recomputes goodness of every rated item from the current fairness scores,
    then fairness of every rater from the fresh goodness:

        goodness(v) = mean over raters u of fairness(u) * rating(u, v)
        fairness(u) = 1 - mean over items v of |rating(u, v) - goodness(v)| / 2

    Scores are clamped to [0, 1] and [-1, 1] after every step.  Vertices with
    no incident edge are left out of the returned maps.  A run that hits
    max_iter without converging is returned flagged, not raised.
    """
    if not g.edges:
        raise ValueError("no edges")
    m = len(g.edges)
    ue = np.fromiter((e[0] for e in g.edges), np.int64, m)
    ve = np.fromiter((e[1] for e in g.edges), np.int64, m)
    we = np.fromiter((e[2] for e in g.edges), np.float64, m)
    nu, nv = len(g.u_ids), len(g.v_ids)
    out_deg = np.bincount(ue, minlength=nu).astype(np.float64)
    in_deg = np.bincount(ve, minlength=nv).astype(np.float64)
    active_u = out_deg > 0
    active_v = in_deg > 0

    f = np.ones(nu)
    gd = np.ones(nv)
    history: list[dict] | None = [] if record_history else None
    delta = np.inf
    converged = False
    iterations = 0
    for it in range(1, max_iter + 1):
        g_new = np.divide(
            np.bincount(ve, weights=f[ue] * we, minlength=nv),
            in_deg,
            out=np.zeros(nv),
            where=active_v,
        )
        np.clip(g_new, -1.0, 1.0, out=g_new)
        f_new = 1.0 - np.divide(
            np.bincount(ue, weights=np.abs(we - g_new[ve]) / 2.0, minlength=nu),
            out_deg,
            out=np.zeros(nu),
            where=active_u,
        )
        np.clip(f_new, 0.0, 1.0, out=f_new)
        delta = max(
            float(np.abs(f_new - f)[active_u].max()),
            float(np.abs(g_new - gd)[active_v].max()),
        )
        f, gd = f_new, g_new
        iterations = it
        if history is not None:
            history.append(
                {
                    "fairness": {int(u): float(f[u]) for u in np.nonzero(active_u)[0]},
                    "goodness": {int(v): float(gd[v]) for v in np.nonzero(active_v)[0]},
                    "delta": delta,
                }
            )
        if delta < tol:
            converged = True
            break
    return FairnessGoodness(
        fairness={int(u): float(f[u]) for u in np.nonzero(active_u)[0]},
        goodness={int(v): float(gd[v]) for v in np.nonzero(active_v)[0]},
        iterations=iterations,
        final_delta=float(delta),
        converged=converged,
        history=history,
    )


def hyperedge_weights(X: Hypergraph, fg: FairnessGoodness) -> ObservationMap:
    """Assign each hyperedge the goodness score of the item it was induced from."""
    values: dict[int, float] = {}
    for e in X.edges:
        if e.source_v is None:
            raise ValueError(f"hyperedge {e.id} has no source item; hypergraph was not induced from bipartite data")
        score = fg.goodness.get(e.source_v)
        if score is None:
            raise ValueError(f"no goodness score for source item {e.source_v} of hyperedge {e.id}")
        values[e.id] = score
    return ObservationMap.for_weights(values, bounds=(-1.0, 1.0))


def bucketize_labels(w: ObservationMap, q: int) -> ObservationMap:
    """Split the observed weight range into q equal-width intervals and label each edge.

    The first interval is closed on both ends, the rest are half-open on the
    left, so every weight lands in exactly one interval: the minimum gets
    label 1 and the maximum gets label q.
    """
    if w.kind != WEIGHT:
        raise ValueError("bucketize_labels expects a weight map")
    if q < 2:
        raise ValueError("q must be at least 2")
    if not w.values:
        raise ValueError("weight map is empty")
    lo = min(w.values.values())
    hi = max(w.values.values())
    if lo == hi:
        warnings.warn("all observed weights are equal; every hyperedge gets label 1", stacklevel=2)
        return ObservationMap.for_labels({e: 1 for e in w.values}, q=q)
    cuts = [lo + i * (hi - lo) / q for i in range(1, q + 1)]
    cuts[-1] = hi  # guard against float drift at the top boundary
    labels = {e: min(bisect.bisect_left(cuts, x) + 1, q) for e, x in w.values.items()}
    return ObservationMap.for_labels(labels, q=q)
