"""Map graphs: token embeddings on vertices plus an undirected adjacency.

Vertices are integers 0..T-1 in token order. Edges are canonicalized to a
(E, 2) int64 array with i < j per row, lexicographically sorted, no
duplicates, no self loops. All traversal helpers work on adjacency lists
produced by :func:`adjacency_lists`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

AdjacencyLists = Sequence[np.ndarray]


def canonical_edges(edges: Iterable[Sequence[int]] | np.ndarray, vertex_count: int) -> np.ndarray:
    """Canonicalize an undirected edge list.

    Accepts any iterable of (i, j) pairs, drops duplicates regardless of
    orientation, and returns a read-only (E, 2) int64 array sorted
    lexicographically with i < j per row.

    Raises ValueError on self loops or endpoints outside [0, vertex_count).
    """
    arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
    if arr.size == 0:
        arr = np.empty((0, 2), dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"edges must be pairs, got shape {arr.shape}")
    if arr.size:
        if arr.min() < 0 or arr.max() >= vertex_count:
            raise ValueError(
                f"edge endpoint out of range for vertex_count={vertex_count}"
            )
        if (arr[:, 0] == arr[:, 1]).any():
            raise ValueError("self loops are not allowed")
        lo = np.minimum(arr[:, 0], arr[:, 1])
        hi = np.maximum(arr[:, 0], arr[:, 1])
        arr = np.unique(np.column_stack([lo, hi]), axis=0)
    arr.setflags(write=False)
    return arr


def adjacency_lists(vertex_count: int, edges: np.ndarray) -> list[np.ndarray]:
    """Neighbor list per vertex, each sorted ascending."""
    counts = np.zeros(vertex_count, dtype=np.int64)
    if edges.size:
        np.add.at(counts, edges[:, 0], 1)
        np.add.at(counts, edges[:, 1], 1)
    offsets = np.zeros(vertex_count + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    flat = np.empty(offsets[-1], dtype=np.int64)
    cursor = offsets[:-1].copy()
    if edges.size:
        for i, j in edges:
            flat[cursor[i]] = j
            cursor[i] += 1
            flat[cursor[j]] = i
            cursor[j] += 1
    out = []
    for v in range(vertex_count):
        nb = flat[offsets[v]:offsets[v + 1]]
        nb.sort()
        nb.setflags(write=False)
        out.append(nb)
    return out


def neighborhood(adj: AdjacencyLists, v: int, r: int) -> set[int]:
    """Vertices within r hops of v, including v itself.

    r=0 gives {v}. BFS over adjacency lists; cost O(|N_r(v)| * degree).
    """
    if r < 0:
        raise ValueError("r must be >= 0")
    if not 0 <= v < len(adj):
        raise ValueError(f"vertex {v} out of range")
    seen = {v}
    frontier = [v]
    for _ in range(r):
        nxt = []
        for u in frontier:
            for w in adj[u]:
                w = int(w)
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
        if not nxt:
            break
        frontier = nxt
    return seen


def r_neighborhoods(adj: AdjacencyLists, r: int) -> tuple[np.ndarray, np.ndarray]:
    """CSR layout of N_r(v) for every vertex, self included.

    Returns (offsets, members): members[offsets[v]:offsets[v+1]] is the
    sorted neighborhood of v. Stamp-array BFS keeps the per-vertex reset
    O(|N_r(v)|) instead of O(T).
    """
    t = len(adj)
    if r < 0:
        raise ValueError("r must be >= 0")
    if r == 0:
        offsets = np.arange(t + 1, dtype=np.int64)
        return offsets, np.arange(t, dtype=np.int64)
    chunks: list[np.ndarray] = []
    offsets = np.zeros(t + 1, dtype=np.int64)
    stamp = np.full(t, -1, dtype=np.int64)
    for v in range(t):
        stamp[v] = v
        members = [v]
        frontier = [v]
        for _ in range(r):
            nxt = []
            for u in frontier:
                for w in adj[u]:
                    w = int(w)
                    if stamp[w] != v:
                        stamp[w] = v
                        members.append(w)
                        nxt.append(w)
            if not nxt:
                break
            frontier = nxt
        chunk = np.array(sorted(members), dtype=np.int64)
        chunks.append(chunk)
        offsets[v + 1] = offsets[v] + len(chunk)
    return offsets, np.concatenate(chunks) if chunks else np.empty(0, dtype=np.int64)


def connected_components(adj: AdjacencyLists, subset: Iterable[int]) -> list[set[int]]:
    """Connected components of the subgraph induced on `subset`.

    Only edges with both endpoints in the subset count. Components are
    returned sorted by their smallest vertex.
    """
    pool = set(int(v) for v in subset)
    for v in pool:
        if not 0 <= v < len(adj):
            raise ValueError(f"vertex {v} out of range")
    comps: list[set[int]] = []
    remaining = set(pool)
    while remaining:
        start = min(remaining)
        comp = {start}
        frontier = [start]
        while frontier:
            nxt = []
            for u in frontier:
                for w in adj[u]:
                    w = int(w)
                    if w in pool and w not in comp:
                        comp.add(w)
                        nxt.append(w)
            frontier = nxt
        comps.append(comp)
        remaining -= comp
    return sorted(comps, key=min)


def build_chain_graph(vertex_count: int, hop: int = 1) -> np.ndarray:
    """Chain adjacency: vertex i links to i+1..i+hop. No wraparound."""
    if vertex_count < 1:
        raise ValueError("vertex_count must be >= 1")
    if hop < 1:
        raise ValueError("hop must be >= 1")
    pairs = []
    for step in range(1, hop + 1):
        idx = np.arange(vertex_count - step, dtype=np.int64)
        if idx.size:
            pairs.append(np.column_stack([idx, idx + step]))
    if not pairs:
        return canonical_edges(np.empty((0, 2), dtype=np.int64), vertex_count)
    return canonical_edges(np.concatenate(pairs), vertex_count)


def build_grid_graph(height: int, width: int, connectivity: int = 4) -> np.ndarray:
    """Grid adjacency over row-major vertices, 4- or 8-connected."""
    if height < 1 or width < 1:
        raise ValueError("grid dimensions must be >= 1")
    if connectivity not in (4, 8):
        raise ValueError("connectivity must be 4 or 8")
    rows, cols = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    vid = (rows * width + cols).astype(np.int64)
    pairs = []
    # Right and down neighbors cover all 4-way edges once.
    if width > 1:
        pairs.append(np.column_stack([vid[:, :-1].ravel(), vid[:, 1:].ravel()]))
    if height > 1:
        pairs.append(np.column_stack([vid[:-1, :].ravel(), vid[1:, :].ravel()]))
    if connectivity == 8 and height > 1 and width > 1:
        pairs.append(np.column_stack([vid[:-1, :-1].ravel(), vid[1:, 1:].ravel()]))
        pairs.append(np.column_stack([vid[:-1, 1:].ravel(), vid[1:, :-1].ravel()]))
    total = height * width
    if not pairs:
        return canonical_edges(np.empty((0, 2), dtype=np.int64), total)
    return canonical_edges(np.concatenate(pairs), total)


def grid_coords(height: int, width: int) -> np.ndarray:
    """Row-major (row, col) coordinates matching build_grid_graph ids."""
    rows, cols = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    return np.column_stack([rows.ravel(), cols.ravel()]).astype(np.float64)


def build_geometric_graph(coords: np.ndarray, epsilon: float) -> np.ndarray:
    """Link every pair of points at Euclidean distance <= epsilon."""
    pts = np.asarray(coords, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError("coords must be (T, dim)")
    if not np.isfinite(pts).all():
        raise ValueError("coords must be finite")
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    t = pts.shape[0]
    diff = pts[:, None, :] - pts[None, :, :]
    dist2 = np.einsum("ijk,ijk->ij", diff, diff)
    i, j = np.nonzero(np.triu(dist2 <= epsilon * epsilon, k=1))
    return canonical_edges(np.column_stack([i, j]), t)


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(a)
    if out is a and a.flags.writeable:
        out = a.copy()
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class MapGraph:
    """Embeddings (T, d) float64 on vertices plus canonical edges."""

    embeddings: np.ndarray
    edges: np.ndarray
    coords: np.ndarray | None = None
    datum_id: str = ""

    def __post_init__(self) -> None:
        emb = np.asarray(self.embeddings, dtype=np.float64)
        if emb.ndim != 2 or emb.shape[0] < 1 or emb.shape[1] < 1:
            raise ValueError(f"embeddings must be (T>=1, d>=1), got {emb.shape}")
        if not np.isfinite(emb).all():
            raise ValueError("embeddings must be finite")
        object.__setattr__(self, "embeddings", _readonly(emb))
        object.__setattr__(self, "edges", canonical_edges(self.edges, emb.shape[0]))
        if self.coords is not None:
            c = np.asarray(self.coords, dtype=np.float64)
            if c.ndim != 2 or c.shape[0] != emb.shape[0]:
                raise ValueError("coords must align with vertices")
            object.__setattr__(self, "coords", _readonly(c))

    @property
    def vertex_count(self) -> int:
        return self.embeddings.shape[0]

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    @cached_property
    def adjacency(self) -> list[np.ndarray]:
        return adjacency_lists(self.vertex_count, self.edges)


@dataclass(frozen=True)
class Sprite:
    """A quantized map graph: one concept id in [0, K) per vertex."""

    concepts: np.ndarray
    concept_count: int
    edges: np.ndarray
    datum_id: str = ""

    def __post_init__(self) -> None:
        c = np.asarray(self.concepts, dtype=np.int64)
        if c.ndim != 1 or c.shape[0] < 1:
            raise ValueError("concepts must be a non-empty 1-d array")
        if self.concept_count < 1:
            raise ValueError("concept_count must be >= 1")
        if c.min() < 0 or c.max() >= self.concept_count:
            raise ValueError("concept id out of range")
        object.__setattr__(self, "concepts", _readonly(c))
        object.__setattr__(self, "edges", canonical_edges(self.edges, c.shape[0]))

    @property
    def vertex_count(self) -> int:
        return self.concepts.shape[0]

    @cached_property
    def adjacency(self) -> list[np.ndarray]:
        return adjacency_lists(self.vertex_count, self.edges)


@dataclass(frozen=True)
class ProspectMap:
    """Per-vertex attribution scores for one datum."""

    scores: np.ndarray
    scaled: bool
    datum_id: str = ""

    def __post_init__(self) -> None:
        s = np.asarray(self.scores, dtype=np.float64)
        if s.ndim != 1 or s.shape[0] < 1:
            raise ValueError("scores must be a non-empty 1-d array")
        if not np.isfinite(s).all():
            raise ValueError("scores must be finite")
        if self.scaled and s.size and (s.min() < 0.0 or s.max() > 1.0):
            raise ValueError("scaled maps must lie in [0, 1]")
        object.__setattr__(self, "scores", _readonly(s))


@dataclass(frozen=True)
class LabeledDatum:
    """A map graph with a binary class label and optional vertex mask."""

    graph: MapGraph
    label: int
    mask: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise ValueError("label must be 0 or 1")
        if self.mask is not None:
            m = np.asarray(self.mask, dtype=bool)
            if m.shape != (self.graph.vertex_count,):
                raise ValueError("mask must align with vertices")
            object.__setattr__(self, "mask", _readonly(m))

    @property
    def datum_id(self) -> str:
        return self.graph.datum_id
