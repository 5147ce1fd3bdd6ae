"""Synthetic datasets with planted concept patterns and exact masks.

Token embeddings are draws from a Gaussian mixture whose component means
are random orthonormal vectors (pairwise distance sqrt(2)), so a
quantizer with K set to the true component count recovers the generating
assignment almost perfectly and layer-two behavior can be tested in
isolation. Class 0 data use background components only; class 1 data
additionally carry m connected regions of motif-component tokens totaling
floor(rho * T) vertices, with the mask marking exactly those vertices.

Determinism: component means come from default_rng(seed); datum i (in
train-class0, train-class1, test-class0, test-class1 order) uses
default_rng(seed + 1 + i), so data can be generated independently.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .graphs import (
    LabeledDatum,
    MapGraph,
    adjacency_lists,
    build_chain_graph,
    build_geometric_graph,
    build_grid_graph,
    grid_coords,
)


@dataclass(frozen=True)
class ChainTopology:
    hop: int = 1


@dataclass(frozen=True)
class GridTopology:
    connectivity: int = 4
    height: int | None = None
    width: int | None = None


@dataclass(frozen=True)
class GeometricTopology:
    epsilon: float = 1.0


Topology = ChainTopology | GridTopology | GeometricTopology


@dataclass(frozen=True)
class SynthSpec:
    """Generator parameters; see module docstring for semantics."""

    topology: Topology
    t_range: tuple[int, int]
    dim: int
    concept_count: int
    sigma: float
    motif: int | tuple[int, int]
    rho: float
    components: int
    n_train: int
    n_test: int
    seed: int = 0

    def __post_init__(self) -> None:
        lo, hi = self.t_range
        if not 1 <= lo <= hi:
            raise ValueError("t_range must satisfy 1 <= lo <= hi")
        if self.dim < self.concept_count:
            raise ValueError("dim must be >= concept_count for orthonormal means")
        if self.concept_count < 1:
            raise ValueError("concept_count must be >= 1")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must be in (0, 1)")
        if self.components < 1:
            raise ValueError("components must be >= 1")
        if self.n_train < 1 or self.n_test < 0:
            raise ValueError("need n_train >= 1 and n_test >= 0")
        if self.sigma <= 0:
            raise ValueError("sigma must be > 0")
        for c in self.motif_concepts():
            if not 0 <= c < self.concept_count:
                raise ValueError("motif concepts must be < concept_count")

    def motif_concepts(self) -> tuple[int, ...]:
        if isinstance(self.motif, int):
            return (self.motif,)
        a, b = self.motif
        return (int(a), int(b))


def component_means(dim: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Random orthonormal component means (pairwise distance sqrt(2))."""
    gauss = rng.normal(size=(dim, count))
    q, _ = np.linalg.qr(gauss)
    return np.ascontiguousarray(q.T)


def _make_graph(topology: Topology, t_sampled: int, rng: np.random.Generator):
    """Edges, coords (or None), and the effective vertex count."""
    if isinstance(topology, ChainTopology):
        return build_chain_graph(t_sampled, topology.hop), None, t_sampled
    if isinstance(topology, GridTopology):
        if topology.height is not None and topology.width is not None:
            h, w = topology.height, topology.width
        else:
            h = max(1, int(np.sqrt(t_sampled)))
            w = max(1, t_sampled // h)
        t = h * w
        return build_grid_graph(h, w, topology.connectivity), grid_coords(h, w), t
    if isinstance(topology, GeometricTopology):
        side = topology.epsilon * t_sampled ** (1.0 / 3.0)
        coords = rng.uniform(0.0, side, size=(t_sampled, 3))
        return build_geometric_graph(coords, topology.epsilon), coords, t_sampled
    raise TypeError(f"unknown topology {topology!r}")


def _grow_region(adj, anchor: int, size: int, blocked: set[int]) -> list[tuple[int, int]] | None:
    """BFS region of `size` vertices from anchor, avoiding blocked ones.

    Returns (vertex, bfs_depth) pairs in visit order, or None when the
    component around the anchor is too small.
    """
    region = [(anchor, 0)]
    taken = {anchor}
    queue = deque([(anchor, 0)])
    while queue and len(region) < size:
        v, depth = queue.popleft()
        for w in adj[v]:
            w = int(w)
            if w in taken or w in blocked:
                continue
            taken.add(w)
            region.append((w, depth + 1))
            queue.append((w, depth + 1))
            if len(region) == size:
                break
    return region if len(region) == size else None


def _plant_regions(
    adj, t: int, m: int, total: int, rng: np.random.Generator
) -> list[list[tuple[int, int]]]:
    """m disjoint, non-adjacent connected regions with sizes summing to total."""
    sizes = [total // m + (1 if i < total % m else 0) for i in range(m)]
    blocked: set[int] = set()
    regions: list[list[tuple[int, int]]] = []
    for size in sizes:
        grown = None
        for _ in range(200):
            candidates = [v for v in range(t) if v not in blocked]
            if not candidates:
                break
            anchor = candidates[int(rng.integers(len(candidates)))]
            grown = _grow_region(adj, anchor, size, blocked)
            if grown is not None:
                break
        if grown is None:
            raise ValueError(
                f"could not place a connected region of size {size}; "
                "graph too small or fragmented for the requested rho and m"
            )
        regions.append(grown)
        for v, _ in grown:
            blocked.add(v)
            blocked.update(int(w) for w in adj[v])
    return regions


def _motif_concept_for(spec: SynthSpec, depth: int) -> int:
    motif = spec.motif_concepts()
    if len(motif) == 1:
        return motif[0]
    # Bigram motifs interleave by BFS depth parity, so every planted
    # vertex sits at hop distance 1 from the other motif concept.
    return motif[depth % 2]


def _generate_datum(
    spec: SynthSpec,
    means: np.ndarray,
    background: np.ndarray,
    label: int,
    datum_id: str,
    rng: np.random.Generator,
) -> tuple[LabeledDatum, list[list[int]]]:
    lo, hi = spec.t_range
    t_sampled = int(rng.integers(lo, hi + 1))
    edges, coords, t = _make_graph(spec.topology, t_sampled, rng)
    concepts = background[rng.integers(len(background), size=t)]
    noise = rng.normal(size=(t, spec.dim))
    mask = np.zeros(t, dtype=bool)
    regions: list[list[int]] = []
    if label == 1:
        total = int(spec.rho * t)
        if total < spec.components:
            raise ValueError("floor(rho * T) must be >= component count")
        if len(spec.motif_concepts()) == 2 and total < 2 * spec.components:
            raise ValueError(
                "bigram motifs need at least two tokens per region"
            )
        adj = adjacency_lists(t, edges)
        planted = _plant_regions(adj, t, spec.components, total, rng)
        concepts = concepts.copy()
        for region in planted:
            for v, depth in region:
                concepts[v] = _motif_concept_for(spec, depth)
                mask[v] = True
            regions.append(sorted(v for v, _ in region))
    embeddings = means[concepts] + spec.sigma * noise
    graph = MapGraph(embeddings, edges, coords=coords, datum_id=datum_id)
    return LabeledDatum(graph, label, mask), regions


def generate_dataset(
    spec: SynthSpec,
) -> tuple[list[LabeledDatum], list[LabeledDatum], dict]:
    """Build (train, test, metadata) per the module contract."""
    rng_means = np.random.default_rng(spec.seed)
    means = component_means(spec.dim, spec.concept_count, rng_means)
    dists = np.sqrt(
        ((means[:, None, :] - means[None, :, :]) ** 2).sum(-1)
    )
    if spec.concept_count > 1:
        min_dist = dists[~np.eye(spec.concept_count, dtype=bool)].min()
        if min_dist <= 4.0 * spec.sigma:
            raise ValueError(
                f"component separation {min_dist:.4f} must exceed 4*sigma"
            )
    motif = set(spec.motif_concepts())
    background = np.array(
        [c for c in range(spec.concept_count) if c not in motif], dtype=np.int64
    )
    if background.size == 0:
        raise ValueError("motif concepts leave no background components")
    train: list[LabeledDatum] = []
    test: list[LabeledDatum] = []
    regions_meta: dict[str, list[list[int]]] = {}
    index = 0
    for split, count, sink in (("train", spec.n_train, train), ("test", spec.n_test, test)):
        for label in (0, 1):
            for _ in range(count):
                datum_id = f"synth-{split}-{label}-{index:04d}"
                rng = np.random.default_rng(spec.seed + 1 + index)
                datum, regions = _generate_datum(
                    spec, means, background, label, datum_id, rng
                )
                sink.append(datum)
                regions_meta[datum_id] = regions
                index += 1
    metadata = {
        "motif": list(spec.motif_concepts()),
        "regions": regions_meta,
        "seed": spec.seed,
        "concept_count": spec.concept_count,
        "generator_version": 1,
    }
    return train, test, metadata


def plant_chain_trigram(
    t: int,
    dim: int,
    concept_count: int,
    sigma: float,
    r: int,
    n_train: int,
    n_test: int,
    seed: int = 0,
) -> tuple[list[LabeledDatum], list[LabeledDatum], dict]:
    """Chains where class 1 carries concepts A, B, C at (p, p+r, p+2r).

    Class 0 data contain each of A, B, C exactly once, pairwise more than
    r hops apart, so no pair of motif concepts ever co-occurs within an
    r-hop neighborhood. Masks mark the three motif positions (class 1)
    and nothing (class 0).
    """
    if r < 1:
        raise ValueError("r must be >= 1")
    if t < 2 * r + 1:
        raise ValueError("need T >= 2r + 1 to place the motif")
    if concept_count < 4:
        raise ValueError("need at least one background concept beyond A, B, C")
    if t < 3 * r + 3:
        # Class 0 needs three isolated positions pairwise > r hops apart.
        raise ValueError("need T >= 3r + 3 for isolated class-0 placements")
    motif = (0, 1, 2)
    rng_means = np.random.default_rng(seed)
    means = component_means(dim, concept_count, rng_means)
    background = np.arange(3, concept_count, dtype=np.int64)
    edges = build_chain_graph(t, hop=1)
    train: list[LabeledDatum] = []
    test: list[LabeledDatum] = []
    positions_meta: dict[str, list[int]] = {}
    index = 0
    for split, count, sink in (("train", n_train, train), ("test", n_test, test)):
        for label in (0, 1):
            for _ in range(count):
                datum_id = f"trigram-{split}-{label}-{index:04d}"
                rng = np.random.default_rng(seed + 1 + index)
                concepts = background[rng.integers(len(background), size=t)]
                noise = rng.normal(size=(t, dim))
                mask = np.zeros(t, dtype=bool)
                if label == 1:
                    p = int(rng.integers(0, t - 2 * r))
                    spots = [p, p + r, p + 2 * r]
                else:
                    # Rejection-sample three pairwise-isolated positions.
                    while True:
                        spots = sorted(
                            int(v) for v in rng.choice(t, size=3, replace=False)
                        )
                        if spots[1] - spots[0] > r and spots[2] - spots[1] > r:
                            break
                concepts = concepts.copy()
                for c, p_i in zip(motif, spots):
                    concepts[p_i] = c
                    if label == 1:
                        mask[p_i] = True
                embeddings = means[concepts] + sigma * noise
                graph = MapGraph(embeddings, edges, datum_id=datum_id)
                sink.append(LabeledDatum(graph, label, mask))
                positions_meta[datum_id] = spots
                index += 1
    metadata = {
        "motif": list(motif),
        "radius": r,
        "positions": positions_meta,
        "seed": seed,
        "concept_count": concept_count,
        "generator_version": 1,
    }
    return train, test, metadata
