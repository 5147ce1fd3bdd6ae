"""Layer one: vector quantization of token embeddings into concepts.

Lloyd iterations over a seeded greedy init (first centroid uniform, later
ones drawn proportionally to squared distance from the chosen set). Every
numeric path is single threaded numpy, so identical inputs and seed give
bitwise identical centroids. Ties in assignment go to the lowest centroid
index; empty clusters are re-seeded with the point farthest from its own
centroid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .graphs import LabeledDatum, MapGraph, Sprite

_CHUNK = 8192


@dataclass(frozen=True)
class Quantizer:
    """K centroids in embedding space, with the seed that produced them."""

    centroids: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        c = np.ascontiguousarray(np.asarray(self.centroids, dtype=np.float64))
        if c.ndim != 2 or c.shape[0] < 1 or c.shape[1] < 1:
            raise ValueError("centroids must be (K>=1, d>=1)")
        if not np.isfinite(c).all():
            raise ValueError("centroids must be finite")
        if c.flags.writeable:
            c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "centroids", c)

    @property
    def concept_count(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]


def _sqdist(block: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances (n, K) via the expanded dot product.

    One shared formula keeps single queries bitwise consistent with
    batched assignment.
    """
    x2 = np.einsum("ij,ij->i", block, block)
    c2 = np.einsum("ij,ij->i", centroids, centroids)
    d2 = x2[:, None] - 2.0 * (block @ centroids.T) + c2[None, :]
    np.maximum(d2, 0.0, out=d2)
    return d2


def assign_concepts(quantizer: Quantizer, embeddings: np.ndarray) -> np.ndarray:
    """Nearest-centroid ids for a block of embeddings, ties to lowest id."""
    x = np.ascontiguousarray(np.asarray(embeddings, dtype=np.float64))
    if x.ndim != 2 or x.shape[1] != quantizer.dim:
        raise ValueError(
            f"embeddings must be (T, {quantizer.dim}), got {x.shape}"
        )
    out = np.empty(x.shape[0], dtype=np.int64)
    for start in range(0, x.shape[0], _CHUNK):
        block = x[start:start + _CHUNK]
        out[start:start + _CHUNK] = np.argmin(_sqdist(block, quantizer.centroids), axis=1)
    return out


def quantize(quantizer: Quantizer, embedding: np.ndarray) -> int:
    """Concept id of a single embedding vector."""
    x = np.asarray(embedding, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("embedding must be a single vector")
    return int(assign_concepts(quantizer, x[None, :])[0])


def make_sprite(quantizer: Quantizer, graph: MapGraph) -> Sprite:
    """Quantize every vertex of a map graph, keeping its adjacency."""
    if graph.dim != quantizer.dim:
        raise ValueError("graph embedding dim does not match quantizer")
    concepts = assign_concepts(quantizer, graph.embeddings)
    return Sprite(concepts, quantizer.concept_count, graph.edges, graph.datum_id)


def sample_embeddings(
    data: Iterable[LabeledDatum | MapGraph],
    sample_size: int = 10_000,
    seed: int = 0,
) -> np.ndarray:
    """Draw up to sample_size token embeddings from a dataset.

    Sampling is without replacement over the pooled vertices (datum order,
    then vertex order); if the pool is smaller than the request the whole
    pool is returned in a seeded permutation.
    """
    if sample_size < 1:
        raise ValueError("sample_size must be >= 1")
    blocks = []
    dim = None
    for item in data:
        graph = item.graph if isinstance(item, LabeledDatum) else item
        if dim is None:
            dim = graph.dim
        elif graph.dim != dim:
            raise ValueError("all data must share one embedding dim")
        blocks.append(graph.embeddings)
    if not blocks:
        raise ValueError("no data to sample from")
    pool = np.concatenate(blocks, axis=0)
    rng = np.random.default_rng(seed)
    if pool.shape[0] <= sample_size:
        idx = rng.permutation(pool.shape[0])
    else:
        idx = rng.choice(pool.shape[0], size=sample_size, replace=False)
    return np.ascontiguousarray(pool[idx])


def _plus_plus_init(samples: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = samples.shape[0]
    centroids = np.empty((k, samples.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centroids[0] = samples[first]
    chosen = {first}
    d2 = _sqdist(samples, centroids[0:1])[:, 0]
    for j in range(1, k):
        total = d2.sum()
        if total > 0.0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            # All remaining mass is on already-chosen points (duplicates);
            # fall back to the lowest unchosen index.
            idx = min(i for i in range(n) if i not in chosen)
        chosen.add(idx)
        centroids[j] = samples[idx]
        d2 = np.minimum(d2, _sqdist(samples, centroids[j:j + 1])[:, 0])
    return centroids


def distortion(samples: np.ndarray, centroids: np.ndarray) -> float:
    """Sum of squared distances from each sample to its nearest centroid."""
    x = np.ascontiguousarray(np.asarray(samples, dtype=np.float64))
    c = np.ascontiguousarray(np.asarray(centroids, dtype=np.float64))
    return float(_sqdist(x, c).min(axis=1).sum())


def lloyd_iterations(
    samples: np.ndarray,
    centroids: np.ndarray,
    max_iters: int = 100,
    tol: float = 1e-6,
) -> np.ndarray:
    """Run Lloyd updates from explicit starting centroids."""
    x = np.ascontiguousarray(np.asarray(samples, dtype=np.float64))
    c = np.array(centroids, dtype=np.float64, copy=True)
    k = c.shape[0]
    for _ in range(max_iters):
        assign = np.argmin(_sqdist(x, c), axis=1)
        counts = np.bincount(assign, minlength=k)
        sums = np.zeros_like(c)
        np.add.at(sums, assign, x)
        new_c = c.copy()
        nonempty = counts > 0
        new_c[nonempty] = sums[nonempty] / counts[nonempty, None]
        empty = np.flatnonzero(~nonempty)
        if empty.size:
            # Re-seed each empty cluster with the point farthest from its
            # own (updated) centroid; each point used at most once.
            d2 = np.take_along_axis(
                _sqdist(x, new_c), assign[:, None], axis=1
            )[:, 0]
            for j in empty:
                i = int(np.argmax(d2))
                new_c[j] = x[i]
                d2[i] = -1.0
        shift = float(np.sqrt(((new_c - c) ** 2).sum(axis=1)).max())
        c = new_c
        if shift <= tol and not empty.size:
            break
    return c


def fit_quantizer(
    samples: np.ndarray,
    concept_count: int,
    seed: int = 0,
    max_iters: int = 100,
    tol: float = 1e-6,
    n_init: int = 10,
) -> Quantizer:
    """Fit K centroids to sampled embeddings.

    Runs n_init seeded greedy initializations through Lloyd iterations and
    keeps the lowest-distortion result (earliest wins ties), which guards
    against the occasional split-cluster local optimum while staying fully
    deterministic given the seed.
    """
    x = np.ascontiguousarray(np.asarray(samples, dtype=np.float64))
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError("samples must be (n>=1, d)")
    if not np.isfinite(x).all():
        raise ValueError("samples must be finite")
    if not 1 <= concept_count <= x.shape[0]:
        raise ValueError("concept_count must be in [1, n_samples]")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if tol < 0:
        raise ValueError("tol must be >= 0")
    if n_init < 1:
        raise ValueError("n_init must be >= 1")
    rng = np.random.default_rng(seed)
    best = None
    best_cost = np.inf
    for _ in range(n_init):
        init = _plus_plus_init(x, concept_count, rng)
        final = lloyd_iterations(x, init, max_iters=max_iters, tol=tol)
        cost = distortion(x, final)
        if cost < best_cost:
            best, best_cost = final, cost
    return Quantizer(best, seed)
