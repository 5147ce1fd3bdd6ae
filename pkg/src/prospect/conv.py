"""Kernel-to-map convolution: turn a sprite plus kernel into vertex scores.

Each vertex score sums the kernel weight of every concept occurrence in
its r-hop neighborhood (center included) plus the weight of every
unordered pair of distinct vertices in that neighborhood. The pair sum is
evaluated through the neighborhood concept histogram h as
0.5 * (h' W h - sum_c h_c W_cc), which is linear in the vertex count for
bounded neighborhoods instead of quadratic in neighborhood size.
"""

from __future__ import annotations

import numpy as np

from .graphs import ProspectMap, Sprite, r_neighborhoods
from .kernel import Kernel


def k2conv(
    sprite: Sprite,
    kernel: Kernel,
    neighborhoods: tuple[np.ndarray, np.ndarray] | None = None,
) -> ProspectMap:
    """Convolve a kernel over a sprite; returns an unscaled map."""
    vocab = kernel.vocabulary
    if sprite.concept_count != vocab.concept_count:
        raise ValueError("sprite and kernel disagree on concept count")
    radius = vocab.radius
    t = sprite.vertex_count
    k = vocab.concept_count
    c = sprite.concepts
    mono, pair = kernel.weight_matrix()
    if radius == 0:
        return ProspectMap(mono[c], scaled=False, datum_id=sprite.datum_id)
    if neighborhoods is None:
        neighborhoods = r_neighborhoods(sprite.adjacency, radius)
    offsets, members = neighborhoods
    if offsets.shape[0] != t + 1:
        raise ValueError("neighborhoods do not match sprite")
    sizes = np.diff(offsets)
    centers = np.repeat(np.arange(t, dtype=np.int64), sizes)
    hist = np.zeros((t, k), dtype=np.float64)
    np.add.at(hist, (centers, c[members]), 1.0)
    mono_part = hist @ mono
    quad = np.einsum("tk,kl,tl->t", hist, pair, hist)
    diag = hist @ np.diag(pair)
    scores = mono_part + 0.5 * (quad - diag)
    return ProspectMap(scores, scaled=False, datum_id=sprite.datum_id)


def scale_map(pmap: ProspectMap) -> ProspectMap:
    """Min-max scale scores to [0, 1]; constant maps become all zeros."""
    if pmap.scaled:
        raise ValueError("map is already scaled")
    lo = float(pmap.scores.min())
    hi = float(pmap.scores.max())
    if hi == lo:
        scores = np.zeros_like(pmap.scores)
    else:
        scores = (pmap.scores - lo) / (hi - lo)
    return ProspectMap(scores, scaled=True, datum_id=pmap.datum_id)
