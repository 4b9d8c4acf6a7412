"""Bipartite rating graphs, induced hypergraphs, and the vertex-to-edge incidence index."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable


class Interner:
    """Bijection between source string ids and dense integer ids (0..n-1)."""

    def __init__(self) -> None:
        self._by_name: dict[str, int] = {}
        self._names: list[str] = []

    def intern(self, name: str) -> int:
        idx = self._by_name.get(name)
        if idx is None:
            idx = len(self._names)
            self._by_name[name] = idx
            self._names.append(name)
        return idx

    def get(self, name: str) -> int | None:
        return self._by_name.get(name)

    def name(self, idx: int) -> str:
        return self._names[idx]

    def __len__(self) -> int:
        return len(self._names)

    def __contains__(self, name: str) -> bool:
        return name in self._by_name


@dataclass
class BipartiteGraph:
    """Weighted bipartite rating data: edges (u, v, rating) between two disjoint id spaces."""

    u_ids: Interner
    v_ids: Interner
    edges: list[tuple[int, int, float]]
    malformed: int = 0
    duplicates: int = 0


@dataclass(frozen=True)
class EdgeSchema:
    """Column layout of a delimited edge list. ``delimiter=None`` splits on any whitespace."""

    delimiter: str | None = "\t"
    u_col: int = 0
    v_col: int = 1
    rating_col: int = 2


def parse_bipartite_edges(lines: Iterable[str], schema: EdgeSchema = EdgeSchema()) -> BipartiteGraph:
    """Parse a text edge list into a BipartiteGraph.

    Malformed records (too few columns, non-numeric rating) are counted and
    skipped.  A repeated (u, v) pair keeps the last rating seen and is counted
    as a duplicate.  Raises ValueError if no valid edge survives.
    """
    u_ids, v_ids = Interner(), Interner()
    edges: list[tuple[int, int, float]] = []
    seen: dict[tuple[int, int], int] = {}
    malformed = duplicates = 0
    need = max(schema.u_col, schema.v_col, schema.rating_col) + 1
    for line in lines:
        line = line.strip()
        if not line:
            continue
        parts = line.split(schema.delimiter)
        if len(parts) < need:
            malformed += 1
            continue
        try:
            rating = float(parts[schema.rating_col])
        except ValueError:
            malformed += 1
            continue
        if not math.isfinite(rating):
            malformed += 1
            continue
        u = u_ids.intern(parts[schema.u_col].strip())
        v = v_ids.intern(parts[schema.v_col].strip())
        pos = seen.get((u, v))
        if pos is None:
            seen[(u, v)] = len(edges)
            edges.append((u, v, rating))
        else:
            edges[pos] = (u, v, rating)
            duplicates += 1
    if not edges:
        raise ValueError("no edges")
    return BipartiteGraph(u_ids, v_ids, edges, malformed=malformed, duplicates=duplicates)


@dataclass(frozen=True)
class Hyperedge:
    """A vertex subset, stored as a strictly ascending tuple of dense vertex ids.

    ``source_v`` records the opposite-side vertex the edge was grouped from
    when the hypergraph was induced from bipartite data.
    """

    id: int
    vertices: tuple[int, ...]
    source_v: int | None = None

    def __post_init__(self) -> None:
        if not self.vertices:
            raise ValueError("hyperedge must contain at least one vertex")
        if any(b <= a for a, b in zip(self.vertices, self.vertices[1:])):
            raise ValueError("hyperedge vertices must be strictly ascending")

    @property
    def size(self) -> int:
        return len(self.vertices)


@dataclass
class Hypergraph:
    """Vertex count plus a list of hyperedges with contiguous ids 0..|E|-1."""

    vertex_count: int
    edges: list[Hyperedge]
    dropped_empty: int = 0

    def __post_init__(self) -> None:
        for i, e in enumerate(self.edges):
            if e.id != i:
                raise ValueError(f"edge ids must be contiguous from 0, got {e.id} at {i}")
            if e.vertices[-1] >= self.vertex_count:
                raise ValueError(f"edge {i} references vertex {e.vertices[-1]} >= {self.vertex_count}")

    def sizes(self) -> list[int]:
        return [e.size for e in self.edges]


def induce_hypergraph(g: BipartiteGraph, vertex_side: str = "U") -> Hypergraph:
    """Group the bipartite edges into one hyperedge per opposite-side vertex.

    With ``vertex_side="U"`` the hypergraph vertices are the U side and each
    V-side vertex v yields the hyperedge {u : (u, v) in edges}.  Items rated
    by identical user sets stay distinct edges.  Sources that interned no edge
    are dropped and counted.
    """
    if not g.edges:
        raise ValueError("bipartite graph has no edges")
    if vertex_side not in ("U", "V"):
        raise ValueError(f"vertex_side must be 'U' or 'V', got {vertex_side!r}")
    groups: dict[int, set[int]] = {}
    for u, v, _ in g.edges:
        src, member = (v, u) if vertex_side == "U" else (u, v)
        groups.setdefault(src, set()).add(member)
    if vertex_side == "U":
        vertex_count, n_sources = len(g.u_ids), len(g.v_ids)
    else:
        vertex_count, n_sources = len(g.v_ids), len(g.u_ids)
    edges = [
        Hyperedge(id=i, vertices=tuple(sorted(groups[src])), source_v=src)
        for i, src in enumerate(sorted(groups))
    ]
    return Hypergraph(vertex_count=vertex_count, edges=edges, dropped_empty=n_sources - len(groups))


def intersection_size(e: Hyperedge, f: Hyperedge) -> int:
    """Number of shared vertices, by linear merge of the sorted vertex tuples."""
    a, b = e.vertices, f.vertices
    i = j = n = 0
    while i < len(a) and j < len(b):
        if a[i] == b[j]:
            n += 1
            i += 1
            j += 1
        elif a[i] < b[j]:
            i += 1
        else:
            j += 1
    return n


@dataclass
class IncidenceIndex:
    """For each vertex, the ascending list of hyperedge ids containing it."""

    vertex_to_edges: list[list[int]]

    def posting(self, v: int) -> list[int]:
        return self.vertex_to_edges[v]


def build_incidence_index(X: Hypergraph) -> IncidenceIndex:
    postings: list[list[int]] = [[] for _ in range(X.vertex_count)]
    for e in X.edges:  # ascending edge id keeps every posting sorted
        for v in e.vertices:
            postings[v].append(e.id)
    return IncidenceIndex(postings)
