"""End-to-end orchestration: fit both layers, then attribute graphs.

A fitted prospector is the quantizer plus the kernel. Fitting samples
training embeddings, fits centroids, quantizes every training graph,
rolls neighborhoods up into sprite embeddings, scales them, and fits the
requested kernel variant. Attribution quantizes a graph, convolves the
kernel over it, and min-max scales the resulting map.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .conv import k2conv, scale_map
from .graphs import LabeledDatum, MapGraph, ProspectMap
from .kernel import (
    Kernel,
    build_vocabulary,
    fit_fold_change,
    fit_linear,
    fit_scaler,
    rollup,
    scale,
)
from .quantizer import Quantizer, fit_quantizer, make_sprite, sample_embeddings


@dataclass(frozen=True)
class FitParams:
    """Hyperparameters for one fit of the two-layer pipeline."""

    concept_count: int
    radius: int
    variant: str = "fold_change"
    tau: float = 0.0
    alpha: float | None = None
    lam: float = 0.5
    sample_size: int = 10_000
    quantizer_iters: int = 100
    quantizer_tol: float = 1e-6
    linear_iters: int = 3000
    linear_tol: float = 1e-6
    exact_threshold: int = 10

    def __post_init__(self) -> None:
        if self.concept_count < 1:
            raise ValueError("concept_count must be >= 1")
        if self.radius < 0:
            raise ValueError("radius must be >= 0")
        if self.variant not in ("fold_change", "linear"):
            raise ValueError(f"unknown variant {self.variant!r}")


@dataclass(frozen=True)
class Prospector:
    """A fitted attribution model: layer-one quantizer, layer-two kernel."""

    quantizer: Quantizer
    kernel: Kernel

    @property
    def radius(self) -> int:
        return self.kernel.vocabulary.radius


def dataset_fingerprint(data: Sequence[LabeledDatum]) -> str:
    """Stable short hash of the (datum_id, label) multiset."""
    lines = sorted(f"{d.datum_id}\t{d.label}" for d in data)
    digest = hashlib.sha256("\n".join(lines).encode()).hexdigest()
    return digest[:16]


def fit_prospector(
    train: Sequence[LabeledDatum],
    params: FitParams,
    seed: int = 0,
) -> Prospector:
    """Fit both layers on a labeled training set."""
    if not train:
        raise ValueError("training set is empty")
    samples = sample_embeddings(train, params.sample_size, seed)
    quantizer = fit_quantizer(
        samples,
        params.concept_count,
        seed=seed,
        max_iters=params.quantizer_iters,
        tol=params.quantizer_tol,
    )
    sprites = [make_sprite(quantizer, d.graph) for d in train]
    vocabulary = build_vocabulary(params.concept_count, params.radius)
    raw = [rollup(s, params.radius, vocabulary) for s in sprites]
    scaler = fit_scaler(raw)
    scaled = [scale(e, scaler) for e in raw]
    labels = [d.label for d in train]
    fingerprint = dataset_fingerprint(train)
    if params.variant == "fold_change":
        kernel = fit_fold_change(
            scaled,
            labels,
            vocabulary,
            scaler,
            tau=params.tau,
            alpha=params.alpha,
            exact_threshold=params.exact_threshold,
            fitted_on=fingerprint,
        )
    else:
        kernel = fit_linear(
            scaled,
            labels,
            vocabulary,
            scaler,
            lam=params.lam,
            max_iters=params.linear_iters,
            tol=params.linear_tol,
            fitted_on=fingerprint,
        )
    return Prospector(quantizer, kernel)


def attribute(
    prospector: Prospector,
    graph: MapGraph,
    neighborhoods: tuple[np.ndarray, np.ndarray] | None = None,
) -> ProspectMap:
    """Scaled prospect map for one graph."""
    sprite = make_sprite(prospector.quantizer, graph)
    return scale_map(k2conv(sprite, prospector.kernel, neighborhoods=neighborhoods))


def attribute_dataset(
    prospector: Prospector,
    graphs: Sequence[MapGraph],
    workers: int = 1,
) -> list[ProspectMap]:
    """Scaled maps for many graphs, in input order."""
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if workers == 1 or len(graphs) < 2:
        return [attribute(prospector, g) for g in graphs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda g: attribute(prospector, g), graphs))
