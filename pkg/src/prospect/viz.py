"""Kernel and map visualization.

Machine-readable exports first: a DOT semantic network over the concept
self-complete graph (zero-weight edges omitted) and a K x K heatmap CSV.
Matplotlib figures render alongside the delimited outputs on the report
path; they are presentation only and never feed back into the pipeline.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .graphs import MapGraph, ProspectMap, Sprite
from .kernel import Bigram, Kernel, Vocabulary, rollup
from .metrics import EvalReport

_EDGE_EPS = 0.0  # exact zero means absent; fitted zeros are real omissions


def _dot_quote(text: str) -> str:
    return '"' + text.replace('"', '\\"') + '"'


def semantic_network_dot(
    mono: np.ndarray, pair: np.ndarray, title: str = "kernel"
) -> str:
    """DOT graph over K concepts; self-complete edges with weight zero omitted.

    Node labels carry the monogram weight; edges (including self loops for
    same-concept co-occurrence) carry the bigram weight.
    """
    mono = np.asarray(mono, dtype=np.float64)
    pair = np.asarray(pair, dtype=np.float64)
    k = mono.shape[0]
    if pair.shape != (k, k):
        raise ValueError("pair matrix must be K x K")
    if not np.allclose(pair, pair.T):
        raise ValueError("pair matrix must be symmetric")
    lines = [f"graph {_dot_quote(title)} {{"]
    lines.append("  node [shape=circle];")
    for c in range(k):
        label = f"{c}\\n{mono[c]:+.4g}"
        lines.append(f"  c{c} [label={_dot_quote(label)}];")
    edge_count = 0
    for a in range(k):
        for b in range(a, k):
            w = float(pair[a, b])
            if w == _EDGE_EPS:
                continue
            edge_count += 1
            lines.append(f'  c{a} -- c{b} [label={_dot_quote(f"{w:+.4g}")}, weight="{w!r}"];')
    lines.append(f"  // edges: {edge_count} of {k * (k + 1) // 2} possible")
    lines.append("}")
    return "\n".join(lines) + "\n"


def kernel_dot(kernel: Kernel) -> str:
    mono, pair = kernel.weight_matrix()
    return semantic_network_dot(mono, pair, title="kernel")


def sprite_semantic_dot(sprite: Sprite, radius: int) -> str:
    """Rollup counts of one sprite rendered as its semantic network."""
    vocab = Vocabulary(sprite.concept_count, radius)
    counts = rollup(sprite, radius, vocabulary=vocab)
    k = sprite.concept_count
    mono = counts.values[:k].astype(np.float64)
    pair = np.zeros((k, k), dtype=np.float64)
    if radius >= 1:
        for a in range(k):
            for b in range(a, k):
                w = counts.values[vocab.position(Bigram(a, b))]
                pair[a, b] = pair[b, a] = w
    return semantic_network_dot(mono, pair, title=sprite.datum_id or "sprite")


def heatmap_csv_rows(mono: np.ndarray, pair: np.ndarray) -> list[list[str]]:
    """K x K bigram weights plus a monogram column, concept ids on both axes."""
    k = len(mono)
    header = ["concept", "mono"] + [str(c) for c in range(k)]
    rows = [header]
    for a in range(k):
        rows.append([str(a), repr(float(mono[a]))] + [repr(float(v)) for v in pair[a]])
    return rows


def kernel_heatmap_rows(kernel: Kernel) -> list[list[str]]:
    mono, pair = kernel.weight_matrix()
    return heatmap_csv_rows(mono, pair)


# ---------------------------------------------------------------------------
# Figures


def save_kernel_heatmap_png(kernel: Kernel, path: Path | str) -> None:
    mono, pair = kernel.weight_matrix()
    k = len(mono)
    fig, (ax_m, ax_p) = plt.subplots(
        1, 2, figsize=(max(6.0, 0.5 * k + 4), max(4.0, 0.35 * k + 2)),
        gridspec_kw={"width_ratios": [1, k]},
    )
    vmax = max(np.abs(mono).max(), np.abs(pair).max(), 1e-12)
    ax_m.imshow(mono[:, None], cmap="coolwarm", vmin=-vmax, vmax=vmax, aspect="auto")
    ax_m.set_title("mono")
    ax_m.set_xticks([])
    ax_m.set_yticks(range(k))
    im = ax_p.imshow(pair, cmap="coolwarm", vmin=-vmax, vmax=vmax, aspect="auto")
    ax_p.set_title("bigram")
    ax_p.set_xticks(range(k))
    ax_p.set_yticks(range(k))
    fig.colorbar(im, ax=ax_p, shrink=0.85)
    fig.suptitle(f"kernel weights ({kernel.variant})")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_map_png(pmap: ProspectMap, graph: MapGraph, path: Path | str) -> None:
    """Render one prospect map: scatter when coords exist, line otherwise."""
    fig, ax = plt.subplots(figsize=(7, 4))
    if graph.coords is not None and graph.coords.shape[1] >= 2:
        pts = ax.scatter(
            graph.coords[:, 0], graph.coords[:, 1],
            c=pmap.scores, cmap="viridis", vmin=0.0, vmax=1.0, s=24,
        )
        ax.set_aspect("equal")
        fig.colorbar(pts, ax=ax, label="prospect score")
    else:
        ax.plot(np.arange(pmap.scores.shape[0]), pmap.scores, lw=1.0)
        ax.set_xlabel("vertex")
        ax.set_ylabel("prospect score")
        ax.set_ylim(-0.05, 1.05)
    ax.set_title(pmap.datum_id or "prospect map")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _report_scatter(ax, xs, ys, xlabel):
    ax.scatter(xs, ys, s=28, alpha=0.8)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("AUPRC")
    ax.set_ylim(-0.05, 1.05)
    ax.grid(True, alpha=0.3)


def save_report_figures(report: EvalReport, directory: Path | str) -> list[Path]:
    """AUPRC against region prevalence and dispersion, one PNG each."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rows = [r for r in report.rows if r.auprc is not None]
    written = []
    for attr, fname in (
        ("prevalence", "auprc_vs_prevalence.png"),
        ("dispersion", "auprc_vs_dispersion.png"),
    ):
        pts = [(getattr(r, attr), r.auprc) for r in rows if getattr(r, attr) is not None]
        fig, ax = plt.subplots(figsize=(6, 4))
        if pts:
            _report_scatter(ax, [p[0] for p in pts], [p[1] for p in pts], attr)
        else:
            ax.text(0.5, 0.5, "no evaluable data", ha="center", va="center")
        ax.set_title(f"AUPRC vs {attr}")
        fig.tight_layout()
        out = directory / fname
        fig.savefig(out, dpi=120)
        plt.close(fig)
        written.append(out)
    return written


def save_scaling_png(
    sizes: Sequence[int],
    quantize_seconds: Sequence[float],
    convolve_seconds: Sequence[float],
    path: Path | str,
) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(sizes, quantize_seconds, "o-", label="quantize")
    ax.loglog(sizes, convolve_seconds, "s-", label="convolve")
    ax.set_xlabel("vertices per datum")
    ax.set_ylabel("seconds")
    ax.set_title("runtime scaling")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
