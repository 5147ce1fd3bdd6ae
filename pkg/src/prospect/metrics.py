"""Localization metrics, region characterization, and report assembly.

AUPRC is step-wise area under the precision-recall curve with tied scores
processed as one block. AP here is the thresholded variant: mean precision
of the binarized map over a fixed threshold ladder (default 0.0..1.0 in
steps of 0.1), with empty predictions contributing precision 0. Threshold
metrics follow confusion-matrix conventions: precision 0 with no predicted
positives, MCC 0 when any marginal is zero, Dice 0 when the denominator
vanishes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .graphs import AdjacencyLists, LabeledDatum, ProspectMap, connected_components
from .kernel import SpriteEmbedding

DEFAULT_THRESHOLDS = tuple(np.arange(11) / 10.0)


def _check_scores_mask(scores, mask) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64)
    m = np.asarray(mask, dtype=bool)
    if s.ndim != 1 or s.shape != m.shape:
        raise ValueError("scores and mask must be aligned 1-d arrays")
    if not np.isfinite(s).all():
        raise ValueError("scores must be finite")
    return s, m


def auprc(scores, mask) -> float:
    """Area under the precision-recall curve, tie-grouped and step-wise."""
    s, m = _check_scores_mask(scores, mask)
    positives = int(m.sum())
    if positives == 0 or positives == m.size:
        raise ValueError("mask must contain both classes")
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    m_sorted = m[order]
    # Last index of each tie block.
    block_end = np.flatnonzero(np.diff(s_sorted) != 0.0)
    block_end = np.concatenate([block_end, [s.size - 1]])
    tp = np.cumsum(m_sorted)[block_end].astype(np.float64)
    predicted = (block_end + 1).astype(np.float64)
    precision = tp / predicted
    recall = tp / positives
    recall_step = np.diff(np.concatenate([[0.0], recall]))
    return float((recall_step * precision).sum())


def ap_at_thresholds(scores, mask, thresholds: Sequence[float] = DEFAULT_THRESHOLDS) -> float:
    """Mean precision of the binarized map over a threshold ladder."""
    s, m = _check_scores_mask(scores, mask)
    if len(thresholds) == 0:
        raise ValueError("need at least one threshold")
    total = 0.0
    for t in thresholds:
        pred = s >= t
        n_pred = int(pred.sum())
        total += (m & pred).sum() / n_pred if n_pred else 0.0
    return float(total / len(thresholds))


class ThresholdMetrics(NamedTuple):
    precision: float
    mcc: float
    dice: float


def threshold_metrics(scores, mask, threshold: float) -> ThresholdMetrics:
    """Precision, MCC, and Dice of the map binarized at score >= t."""
    s, m = _check_scores_mask(scores, mask)
    pred = s >= threshold
    tp = float((pred & m).sum())
    fp = float((pred & ~m).sum())
    fn = float((~pred & m).sum())
    tn = float((~pred & ~m).sum())
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    mcc = (tp * tn - fp * fn) / math.sqrt(denom) if denom > 0 else 0.0
    dice = 2.0 * tp / (2.0 * tp + fp + fn) if tp + fp + fn > 0 else 0.0
    return ThresholdMetrics(precision, mcc, dice)


def best_threshold_metrics(
    scores, mask, thresholds: Sequence[float] = DEFAULT_THRESHOLDS
) -> ThresholdMetrics:
    """Per-metric maximum over the threshold ladder."""
    per_t = [threshold_metrics(scores, mask, t) for t in thresholds]
    return ThresholdMetrics(
        max(m.precision for m in per_t),
        max(m.mcc for m in per_t),
        max(m.dice for m in per_t),
    )


def region_prevalence(mask) -> float:
    """Fraction of vertices inside the true region."""
    m = np.asarray(mask, dtype=bool)
    if m.ndim != 1 or m.size == 0:
        raise ValueError("mask must be a non-empty 1-d array")
    return float(m.sum() / m.size)


def region_dispersion(mask, adjacency: AdjacencyLists) -> float:
    """Component count divided by mean component size of the true region."""
    m = np.asarray(mask, dtype=bool)
    true_set = set(np.flatnonzero(m).tolist())
    if not true_set:
        raise ValueError("dispersion is undefined for an empty region")
    comps = connected_components(adjacency, true_set)
    mean_size = sum(len(c) for c in comps) / len(comps)
    return float(len(comps) / mean_size)


@dataclass(frozen=True)
class DatumMetrics:
    """Metrics for one datum; None marks values that are undefined there."""

    datum_id: str
    label: int
    prevalence: float | None
    dispersion: float | None
    auprc: float | None
    ap: float | None
    precision: float | None
    mcc: float | None
    dice: float | None


_AGG_FIELDS = (
    "auprc", "ap", "precision", "mcc", "dice", "prevalence", "dispersion",
)


@dataclass(frozen=True)
class EvalReport:
    """Per-datum metric rows plus aggregate means and standard errors.

    Aggregates run over data whose mask has at least one positive vertex;
    data without a usable mask are counted in `skipped`.
    """

    rows: tuple[DatumMetrics, ...]
    aggregates: dict[str, tuple[float, float] | None]
    skipped: int
    thresholds: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "thresholds": list(self.thresholds),
            "skipped": self.skipped,
            "aggregates": {
                name: (
                    None
                    if agg is None
                    else {"mean": agg[0], "stderr": agg[1]}
                )
                for name, agg in self.aggregates.items()
            },
            "per_datum": [
                {
                    "datum_id": r.datum_id,
                    "label": r.label,
                    "prevalence": r.prevalence,
                    "dispersion": r.dispersion,
                    "auprc": r.auprc,
                    "ap": r.ap,
                    "precision": r.precision,
                    "mcc": r.mcc,
                    "dice": r.dice,
                }
                for r in self.rows
            ],
        }

    def csv_rows(self) -> list[list[str]]:
        header = [
            "datum_id", "label", "prevalence", "dispersion",
            "auprc", "ap", "precision", "mcc", "dice",
        ]
        out = [header]
        for r in self.rows:
            out.append(
                [r.datum_id, str(r.label)]
                + [
                    "" if v is None else repr(float(v))
                    for v in (
                        r.prevalence, r.dispersion, r.auprc, r.ap,
                        r.precision, r.mcc, r.dice,
                    )
                ]
            )
        return out


def _mean_stderr(values: list[float]) -> tuple[float, float] | None:
    if not values:
        return None
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    stderr = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
    return mean, stderr


def evaluate_dataset(
    maps: Sequence[ProspectMap],
    data: Sequence[LabeledDatum],
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
) -> EvalReport:
    """Score every datum's map against its ground-truth mask."""
    if len(maps) != len(data):
        raise ValueError("maps and data must align")
    rows = []
    skipped = 0
    valid: dict[str, list[float]] = {name: [] for name in _AGG_FIELDS}
    for pmap, datum in zip(maps, data):
        if not pmap.scaled:
            raise ValueError("evaluation expects scaled maps")
        if pmap.scores.shape[0] != datum.graph.vertex_count:
            raise ValueError("map does not match datum size")
        if pmap.datum_id and datum.datum_id and pmap.datum_id != datum.datum_id:
            raise ValueError(
                f"map {pmap.datum_id!r} paired with datum {datum.datum_id!r}"
            )
        mask = datum.mask
        has_positive = mask is not None and bool(mask.any())
        if not has_positive:
            skipped += 1
            rows.append(
                DatumMetrics(
                    datum.datum_id, datum.label,
                    region_prevalence(mask) if mask is not None else None,
                    None, None, None, None, None, None,
                )
            )
            continue
        prevalence = region_prevalence(mask)
        dispersion = region_dispersion(mask, datum.graph.adjacency)
        if mask.all():
            rank_defined = False
            auprc_v = ap_v = prec = mcc = dice = None
        else:
            rank_defined = True
            auprc_v = auprc(pmap.scores, mask)
            ap_v = ap_at_thresholds(pmap.scores, mask, thresholds)
            prec, mcc, dice = best_threshold_metrics(pmap.scores, mask, thresholds)
        rows.append(
            DatumMetrics(
                datum.datum_id, datum.label, prevalence, dispersion,
                auprc_v, ap_v, prec, mcc, dice,
            )
        )
        valid["prevalence"].append(prevalence)
        valid["dispersion"].append(dispersion)
        if rank_defined:
            valid["auprc"].append(auprc_v)
            valid["ap"].append(ap_v)
            valid["precision"].append(prec)
            valid["mcc"].append(mcc)
            valid["dice"].append(dice)
    aggregates = {name: _mean_stderr(vals) for name, vals in valid.items()}
    return EvalReport(tuple(rows), aggregates, skipped, tuple(thresholds))


@dataclass(frozen=True)
class Dendrogram:
    """Agglomerative merge tree over n leaves.

    Each merge is (cluster_a, cluster_b, distance, merged_size); the step-i
    merge creates cluster id leaf_count + i.
    """

    merges: tuple[tuple[int, int, float, int], ...]
    leaf_count: int

    def cut(self, k: int) -> np.ndarray:
        """Flat labels for k clusters, numbered by smallest member leaf."""
        if not 1 <= k <= self.leaf_count:
            raise ValueError("k must be in [1, leaf_count]")
        parent = list(range(self.leaf_count + len(self.merges)))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for step, (a, b, _, _) in enumerate(self.merges[: self.leaf_count - k]):
            new = self.leaf_count + step
            parent[find(a)] = new
            parent[find(b)] = new
        roots: dict[int, list[int]] = {}
        for leaf in range(self.leaf_count):
            roots.setdefault(find(leaf), []).append(leaf)
        labels = np.empty(self.leaf_count, dtype=np.int64)
        for label, members in enumerate(sorted(roots.values(), key=min)):
            labels[members] = label
        return labels


def cluster_sprite_embeddings(
    embeddings: Sequence[SpriteEmbedding] | np.ndarray,
    linkage: str = "average",
) -> Dendrogram:
    """Average-linkage agglomerative clustering with Euclidean distances.

    Deterministic: at every step the closest active pair merges, ties
    broken by the lexicographically smallest cluster-id pair.
    """
    if linkage != "average":
        raise ValueError("only average linkage is supported")
    if isinstance(embeddings, np.ndarray):
        x = np.asarray(embeddings, dtype=np.float64)
    else:
        x = np.stack([e.values for e in embeddings]).astype(np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need at least two embeddings")
    n = x.shape[0]
    total = 2 * n - 1
    dist = np.full((total, total), np.inf)
    diff = x[:, None, :] - x[None, :, :]
    dist[:n, :n] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    sizes = np.zeros(total, dtype=np.int64)
    sizes[:n] = 1
    active = list(range(n))
    merges = []
    for step in range(n - 1):
        best = None
        for ai in range(len(active)):
            for bi in range(ai + 1, len(active)):
                i, j = active[ai], active[bi]
                d = dist[i, j]
                if best is None or d < best[0] or (d == best[0] and (i, j) < (best[1], best[2])):
                    best = (d, i, j)
        d, i, j = best
        new = n + step
        sizes[new] = sizes[i] + sizes[j]
        for t in active:
            if t in (i, j):
                continue
            merged = (sizes[i] * dist[i, t] + sizes[j] * dist[j, t]) / sizes[new]
            dist[new, t] = dist[t, new] = merged
        active.remove(i)
        active.remove(j)
        active.append(new)
        merges.append((i, j, float(d), int(sizes[new])))
    return Dendrogram(tuple(merges), n)
