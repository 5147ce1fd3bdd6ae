"""Layer two: sprite embeddings and kernel weight learning.

The vocabulary enumerates concept monograms and unordered concept bigrams
in one canonical order. Rollup counts vocabulary occurrences over r-hop
neighborhoods, TF-IDF scaling turns counts into per-datum frequencies
weighted by corpus rarity, and the two fitting routines (fold change and
elastic-net logistic regression) turn scaled embeddings plus labels into
one weight per vocabulary element.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .graphs import Sprite, r_neighborhoods
from .stats import mann_whitney_u

LOG2_PSEUDOCOUNT = 1e-8


class Mono(NamedTuple):
    """A single concept occurrence."""

    concept: int


class Bigram(NamedTuple):
    """An unordered concept pair; canonical form has a <= b."""

    a: int
    b: int

    def canonical(self) -> "Bigram":
        return self if self.a <= self.b else Bigram(self.b, self.a)


VocabElement = Mono | Bigram


@dataclass(frozen=True)
class Vocabulary:
    """Canonical element order: monograms ascending, then bigrams (a, b)
    with a <= b in lexicographic order. Radius 0 has no bigrams."""

    concept_count: int
    radius: int

    def __post_init__(self) -> None:
        if self.concept_count < 1:
            raise ValueError("concept_count must be >= 1")
        if self.radius < 0:
            raise ValueError("radius must be >= 0")

    @property
    def size(self) -> int:
        k = self.concept_count
        return k if self.radius == 0 else k + k * (k + 1) // 2

    def position(self, element: VocabElement) -> int:
        k = self.concept_count
        if isinstance(element, Mono):
            if not 0 <= element.concept < k:
                raise ValueError(f"concept {element.concept} out of range")
            return element.concept
        if self.radius == 0:
            raise ValueError("radius-0 vocabulary has no bigrams")
        a, b = element.canonical()
        if not 0 <= a <= b < k:
            raise ValueError(f"bigram ({a}, {b}) out of range")
        return k + a * k - a * (a - 1) // 2 + (b - a)

    def elements(self) -> list[VocabElement]:
        out: list[VocabElement] = [Mono(c) for c in range(self.concept_count)]
        if self.radius > 0:
            for a in range(self.concept_count):
                for b in range(a, self.concept_count):
                    out.append(Bigram(a, b))
        return out

    def labels(self) -> list[str]:
        return [
            f"mono:{e.concept}" if isinstance(e, Mono) else f"bigram:{e.a}-{e.b}"
            for e in self.elements()
        ]


def build_vocabulary(concept_count: int, radius: int) -> Vocabulary:
    return Vocabulary(concept_count, radius)


@dataclass(frozen=True)
class SpriteEmbedding:
    """One vector over the vocabulary: raw counts or scaled frequencies."""

    values: np.ndarray
    scaled: bool

    def __post_init__(self) -> None:
        v = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if v.ndim != 1:
            raise ValueError("values must be 1-d")
        if not np.isfinite(v).all():
            raise ValueError("values must be finite")
        if not self.scaled:
            if (v < 0).any() or not (v == np.round(v)).all():
                raise ValueError("raw sprite embeddings are nonnegative integer counts")
        if v.flags.writeable:
            v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


def rollup(
    sprite: Sprite,
    radius: int,
    vocabulary: Vocabulary | None = None,
    neighborhoods: tuple[np.ndarray, np.ndarray] | None = None,
) -> SpriteEmbedding:
    """Count vocabulary occurrences over r-hop neighborhoods.

    Each vertex contributes its own concept exactly once. For radius >= 1
    each traversal (center, neighbor) with neighbor in N_r(center) minus
    the center itself contributes one count to the unordered bigram of the
    two concepts, so a geometric pair inside a shared neighborhood is
    counted from both ends.
    """
    if vocabulary is None:
        vocabulary = Vocabulary(sprite.concept_count, radius)
    if vocabulary.concept_count != sprite.concept_count or vocabulary.radius != radius:
        raise ValueError("vocabulary does not match sprite and radius")
    k = sprite.concept_count
    c = sprite.concepts
    values = np.zeros(vocabulary.size, dtype=np.float64)
    values[:k] = np.bincount(c, minlength=k)
    if radius >= 1:
        if neighborhoods is None:
            neighborhoods = r_neighborhoods(sprite.adjacency, radius)
        offsets, members = neighborhoods
        sizes = np.diff(offsets)
        centers = np.repeat(np.arange(sprite.vertex_count, dtype=np.int64), sizes)
        keep = members != centers
        ordered = np.zeros((k, k), dtype=np.int64)
        np.add.at(ordered, (c[centers[keep]], c[members[keep]]), 1)
        a_idx, b_idx = np.triu_indices(k)
        pair_counts = ordered[a_idx, b_idx] + np.where(
            a_idx < b_idx, ordered[b_idx, a_idx], 0
        )
        values[k:] = pair_counts
    return SpriteEmbedding(values, scaled=False)


@dataclass(frozen=True)
class Scaler:
    """Inverse document frequencies fitted on raw sprite embeddings."""

    idf: np.ndarray
    document_count: int
    document_frequency: np.ndarray

    def __post_init__(self) -> None:
        idf = np.ascontiguousarray(np.asarray(self.idf, dtype=np.float64))
        df = np.ascontiguousarray(np.asarray(self.document_frequency, dtype=np.int64))
        if idf.shape != df.shape or idf.ndim != 1:
            raise ValueError("idf and document_frequency must be aligned 1-d arrays")
        if self.document_count < 1:
            raise ValueError("document_count must be >= 1")
        idf.setflags(write=False)
        df.setflags(write=False)
        object.__setattr__(self, "idf", idf)
        object.__setattr__(self, "document_frequency", df)

    @property
    def size(self) -> int:
        return self.idf.shape[0]


def fit_scaler(embeddings: Sequence[SpriteEmbedding]) -> Scaler:
    """Fit smoothed idf weights: ln((1 + N) / (1 + df)) + 1."""
    if not embeddings:
        raise ValueError("need at least one embedding")
    stack = _stack(embeddings, scaled=False)
    df = (stack > 0).sum(axis=0).astype(np.int64)
    n = stack.shape[0]
    idf = np.log((1.0 + n) / (1.0 + df)) + 1.0
    return Scaler(idf, n, df)


def scale(embedding: SpriteEmbedding, scaler: Scaler) -> SpriteEmbedding:
    """Term frequency times idf; an all-zero count vector stays zero."""
    if embedding.scaled:
        raise ValueError("embedding is already scaled")
    if embedding.values.shape[0] != scaler.size:
        raise ValueError("embedding does not match scaler size")
    total = embedding.values.sum()
    tf = embedding.values / total if total > 0 else np.zeros_like(embedding.values)
    return SpriteEmbedding(tf * scaler.idf, scaled=True)


@dataclass(frozen=True)
class Kernel:
    """One weight per vocabulary element plus the fit configuration."""

    vocabulary: Vocabulary
    weights: np.ndarray
    scaler: Scaler
    variant: str
    tau: float | None = None
    alpha: float | None = None
    lam: float | None = None
    fitted_on: str = ""

    def __post_init__(self) -> None:
        if self.variant not in ("fold_change", "linear"):
            raise ValueError(f"unknown variant {self.variant!r}")
        w = np.ascontiguousarray(np.asarray(self.weights, dtype=np.float64))
        if w.shape != (self.vocabulary.size,):
            raise ValueError("weights must match vocabulary size")
        if not np.isfinite(w).all():
            raise ValueError("weights must be finite")
        if w.flags.writeable:
            w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def lookup(self, element: VocabElement) -> float:
        return float(self.weights[self.vocabulary.position(element)])

    def weight_matrix(self) -> tuple[np.ndarray, np.ndarray]:
        """(monogram weights (K,), symmetric bigram matrix (K, K))."""
        k = self.vocabulary.concept_count
        mono = self.weights[:k].copy()
        pair = np.zeros((k, k), dtype=np.float64)
        if self.vocabulary.radius > 0:
            a_idx, b_idx = np.triu_indices(k)
            vals = self.weights[k:]
            pair[a_idx, b_idx] = vals
            pair[b_idx, a_idx] = vals
        return mono, pair


def kernel_lookup(kernel: Kernel, element: VocabElement) -> float:
    return kernel.lookup(element)


def _stack(embeddings: Sequence[SpriteEmbedding], scaled: bool) -> np.ndarray:
    if not embeddings:
        raise ValueError("need at least one embedding")
    sizes = {e.values.shape[0] for e in embeddings}
    if len(sizes) != 1:
        raise ValueError("embeddings must share one vocabulary size")
    for e in embeddings:
        if e.scaled != scaled:
            kind = "scaled" if scaled else "raw"
            raise ValueError(f"expected {kind} sprite embeddings")
    return np.stack([e.values for e in embeddings])


def _check_labels(labels, n: int) -> np.ndarray:
    y = np.asarray(labels, dtype=np.int64)
    if y.shape != (n,):
        raise ValueError("labels must align with embeddings")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    if y.min() == y.max():
        raise ValueError("need both classes to fit a kernel")
    return y


def fit_fold_change(
    embeddings: Sequence[SpriteEmbedding],
    labels,
    vocabulary: Vocabulary,
    scaler: Scaler,
    tau: float = 0.0,
    alpha: float | None = None,
    exact_threshold: int = 10,
    fitted_on: str = "",
) -> Kernel:
    """Log2 fold change of class means, with magnitude and significance
    masking.

    Weights with |w| < tau are zeroed (strict). When alpha is an enabled
    significance level (finite, < 1), each element is tested with a
    two-sided rank test and zeroed unless p <= alpha / vocabulary size
    (Bonferroni). alpha of None, infinity, or >= 1 disables the filter.
    """
    x = _stack(embeddings, scaled=True)
    if x.shape[1] != vocabulary.size or scaler.size != vocabulary.size:
        raise ValueError("vocabulary, scaler, and embeddings disagree on size")
    y = _check_labels(labels, x.shape[0])
    if tau < 0:
        raise ValueError("tau must be >= 0")
    x0 = x[y == 0]
    x1 = x[y == 1]
    w = np.log2(x1.mean(axis=0) + LOG2_PSEUDOCOUNT) - np.log2(
        x0.mean(axis=0) + LOG2_PSEUDOCOUNT
    )
    w[np.abs(w) < tau] = 0.0
    alpha_enabled = alpha is not None and math.isfinite(alpha) and alpha < 1.0
    if alpha_enabled and alpha <= 0:
        raise ValueError("alpha must be positive")
    if alpha_enabled:
        corrected = alpha / vocabulary.size
        for t in range(vocabulary.size):
            if w[t] == 0.0:
                continue
            p = mann_whitney_u(x0[:, t], x1[:, t], exact_threshold=exact_threshold)
            if p > corrected:
                w[t] = 0.0
    return Kernel(
        vocabulary=vocabulary,
        weights=w,
        scaler=scaler,
        variant="fold_change",
        tau=tau,
        alpha=float(alpha) if alpha_enabled else None,
        lam=None,
        fitted_on=fitted_on,
    )


def _sigmoid(t: np.ndarray) -> np.ndarray:
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def elastic_net_objective(
    x: np.ndarray, y_signed: np.ndarray, w: np.ndarray, b: float, lam: float
) -> float:
    """Summed logistic loss plus unit-strength elastic-net penalty."""
    margins = y_signed * (x @ w + b)
    loss = np.logaddexp(0.0, -margins).sum()
    return float(
        loss + lam * np.abs(w).sum() + 0.5 * (1.0 - lam) * (w ** 2).sum()
    )


def fit_linear(
    embeddings: Sequence[SpriteEmbedding],
    labels,
    vocabulary: Vocabulary,
    scaler: Scaler,
    lam: float = 0.5,
    max_iters: int = 3000,
    tol: float = 1e-6,
    fitted_on: str = "",
) -> Kernel:
    """Elastic-net logistic regression by proximal gradient descent.

    Objective: sum of logistic losses plus lam * ||w||_1 plus
    (1 - lam)/2 * ||w||_2^2. The intercept is fitted unpenalized and is
    not part of the kernel weights. Deterministic: zero init, fixed step
    from a Lipschitz bound, soft-threshold proximal updates.
    """
    x = _stack(embeddings, scaled=True)
    if x.shape[1] != vocabulary.size or scaler.size != vocabulary.size:
        raise ValueError("vocabulary, scaler, and embeddings disagree on size")
    y = _check_labels(labels, x.shape[0])
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lam must be in [0, 1]")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    y_signed = np.where(y == 1, 1.0, -1.0)
    x_aug = np.column_stack([x, np.ones(x.shape[0])])
    lipschitz = 0.25 * np.linalg.norm(x_aug, 2) ** 2 + (1.0 - lam)
    step = 1.0 / lipschitz
    w = np.zeros(vocabulary.size)
    b = 0.0
    thresh = step * lam
    for _ in range(max_iters):
        s = _sigmoid(-y_signed * (x @ w + b))
        pull = y_signed * s
        grad_w = -(x.T @ pull) + (1.0 - lam) * w
        grad_b = -pull.sum()
        w_step = w - step * grad_w
        w_new = np.sign(w_step) * np.maximum(np.abs(w_step) - thresh, 0.0)
        b_new = b - step * grad_b
        delta = max(float(np.abs(w_new - w).max()), abs(b_new - b))
        w, b = w_new, b_new
        if delta <= tol:
            break
    return Kernel(
        vocabulary=vocabulary,
        weights=w,
        scaler=scaler,
        variant="linear",
        tau=None,
        alpha=None,
        lam=lam,
        fitted_on=fitted_on,
    )
