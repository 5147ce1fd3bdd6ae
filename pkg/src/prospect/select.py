"""Hyperparameter grid search and sequential-ranking model selection.

Selection scores come from training-set localization: each config's maps
are evaluated against the training masks (an evaluation-only input; the
kernel fit never sees them), taking per-datum best-threshold precision,
MCC, and Dice plus AUPRC, averaged over data whose masks contain both
classes. Sweeps cache the quantizer and sprites per K, neighborhoods per
r, and scaled rollups per (K, r); caching never changes results.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

from .conv import k2conv, scale_map
from .graphs import LabeledDatum, r_neighborhoods
from .kernel import build_vocabulary, fit_fold_change, fit_linear, fit_scaler, rollup, scale
from .metrics import evaluate_dataset
from .pipeline import dataset_fingerprint
from .quantizer import fit_quantizer, make_sprite, sample_embeddings

_METRIC_ORDER = ("precision", "mcc", "dice", "auprc")
RANK_TOLERANCE = 1e-9
FAILURE_SENTINEL = -1.0


@dataclass(frozen=True)
class Config:
    """One grid point; index is its position in enumeration order."""

    index: int
    variant: str
    concept_count: int
    radius: int
    tau: float | None = None
    alpha: float | None = None
    lam: float | None = None


@dataclass(frozen=True)
class ConfigResult:
    config: Config
    precision: float
    mcc: float
    dice: float
    auprc: float
    error: str | None = None


@dataclass(frozen=True)
class HyperGrid:
    """Value lists for every tunable hyperparameter.

    Enumeration order: variant, then K, then r; fold_change expands
    tau x alpha, linear expands lambda. alpha None (or any value >= 1,
    or infinity) means the significance filter is disabled.
    """

    concept_counts: tuple[int, ...]
    radii: tuple[int, ...]
    alphas: tuple[float | None, ...] = (None,)
    taus: tuple[float, ...] = (0.0,)
    lams: tuple[float, ...] = (0.5,)
    variants: tuple[str, ...] = ("fold_change",)
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("concept_counts", "radii", "alphas", "taus", "lams", "variants"):
            if len(getattr(self, name)) == 0:
                raise ValueError(f"{name} must be non-empty")
        for v in self.variants:
            if v not in ("fold_change", "linear"):
                raise ValueError(f"unknown variant {v!r}")

    def configs(self) -> list[Config]:
        out: list[Config] = []
        for variant in self.variants:
            for k in self.concept_counts:
                for r in self.radii:
                    if variant == "fold_change":
                        for tau in self.taus:
                            for alpha in self.alphas:
                                out.append(
                                    Config(len(out), variant, k, r, tau=tau, alpha=alpha)
                                )
                    else:
                        for lam in self.lams:
                            out.append(Config(len(out), variant, k, r, lam=lam))
        return out


class _SweepCaches:
    """Shared per-K / per-r / per-(K, r) intermediates for one sweep."""

    def __init__(self, data: Sequence[LabeledDatum], seed: int, sample_size: int):
        self.data = data
        self.samples = sample_embeddings(data, sample_size, seed)
        self.seed = seed
        self.fingerprint = dataset_fingerprint(data)
        self.labels = [d.label for d in data]
        self.quantizers: dict[int, object] = {}
        self.sprites: dict[int, list] = {}
        self.hoods: dict[int, list] = {}
        self.scaled: dict[tuple[int, int], tuple] = {}

    def quantizer(self, k: int):
        if k not in self.quantizers:
            self.quantizers[k] = fit_quantizer(self.samples, k, seed=self.seed)
            self.sprites[k] = [
                make_sprite(self.quantizers[k], d.graph) for d in self.data
            ]
        return self.quantizers[k]

    def sprite_list(self, k: int):
        self.quantizer(k)
        return self.sprites[k]

    def neighborhoods(self, r: int):
        if r not in self.hoods:
            if r == 0:
                self.hoods[r] = [None] * len(self.data)
            else:
                self.hoods[r] = [
                    r_neighborhoods(d.graph.adjacency, r) for d in self.data
                ]
        return self.hoods[r]

    def scaled_embeddings(self, k: int, r: int):
        key = (k, r)
        if key not in self.scaled:
            sprites = self.sprite_list(k)
            hoods = self.neighborhoods(r)
            vocab = build_vocabulary(k, r)
            raw = [
                rollup(s, r, vocab, neighborhoods=h)
                for s, h in zip(sprites, hoods)
            ]
            scaler = fit_scaler(raw)
            scaled = [scale(e, scaler) for e in raw]
            self.scaled[key] = (vocab, scaler, scaled)
        return self.scaled[key]


def _run_config(caches: _SweepCaches, config: Config) -> ConfigResult:
    try:
        vocab, scaler, scaled = caches.scaled_embeddings(
            config.concept_count, config.radius
        )
        if config.variant == "fold_change":
            kern = fit_fold_change(
                scaled, caches.labels, vocab, scaler,
                tau=config.tau if config.tau is not None else 0.0,
                alpha=config.alpha,
                fitted_on=caches.fingerprint,
            )
        else:
            kern = fit_linear(
                scaled, caches.labels, vocab, scaler,
                lam=config.lam if config.lam is not None else 0.5,
                fitted_on=caches.fingerprint,
            )
        sprites = caches.sprite_list(config.concept_count)
        hoods = caches.neighborhoods(config.radius)
        maps = [
            scale_map(k2conv(s, kern, neighborhoods=h))
            for s, h in zip(sprites, hoods)
        ]
        report = evaluate_dataset(maps, caches.data)
        values = {}
        for name in _METRIC_ORDER:
            agg = report.aggregates[name]
            values[name] = agg[0] if agg is not None else FAILURE_SENTINEL
        return ConfigResult(config, values["precision"], values["mcc"],
                            values["dice"], values["auprc"])
    except Exception as exc:  # per-config isolation: sweeps must finish
        return ConfigResult(
            config, FAILURE_SENTINEL, FAILURE_SENTINEL, FAILURE_SENTINEL,
            FAILURE_SENTINEL, error=f"{type(exc).__name__}: {exc}",
        )


def grid_search(
    data: Sequence[LabeledDatum],
    grid: HyperGrid,
    sample_size: int = 10_000,
    workers: int = 1,
    configs: Sequence[Config] | None = None,
    on_result: Callable[[ConfigResult], None] | None = None,
) -> list[ConfigResult]:
    """Evaluate every grid point on training-set localization.

    `configs` restricts the sweep to a subset (resumption); results are
    returned and reported through `on_result` in enumeration order.
    """
    labels = {d.label for d in data}
    if labels != {0, 1}:
        raise ValueError("training set must contain both classes")
    if not any(d.mask is not None and d.mask.any() for d in data):
        raise ValueError("training set needs at least one nonempty mask")
    todo = list(grid.configs() if configs is None else configs)
    if not todo:
        raise ValueError("empty grid")
    caches = _SweepCaches(data, grid.seed, sample_size)
    # Materialize shared caches sequentially so config jobs are pure reads.
    for config in todo:
        try:
            caches.scaled_embeddings(config.concept_count, config.radius)
        except Exception:
            pass  # recorded per config below
    if workers == 1 or len(todo) == 1:
        results = [_run_config(caches, c) for c in todo]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda c: _run_config(caches, c), todo))
    for result in results:
        if on_result is not None:
            on_result(result)
    return results


def sequential_rank(
    results: Sequence[ConfigResult],
    tolerance: float = RANK_TOLERANCE,
) -> list[ConfigResult]:
    """Order configs by (precision, MCC, Dice, AUPRC), descending.

    At each stage, results within `tolerance` of the stage leader stay
    tied and move to the next metric; exhausted ties fall back to config
    enumeration order.
    """
    if not results:
        raise ValueError("need at least one result")

    def order(group: list[ConfigResult], metrics: tuple[str, ...]) -> list[ConfigResult]:
        if not metrics:
            return sorted(group, key=lambda r: r.config.index)
        name = metrics[0]
        group = sorted(
            group, key=lambda r: (-getattr(r, name), r.config.index)
        )
        out: list[ConfigResult] = []
        i = 0
        while i < len(group):
            leader = getattr(group[i], name)
            j = i
            while j < len(group) and getattr(group[j], name) >= leader - tolerance:
                j += 1
            out.extend(order(group[i:j], metrics[1:]))
            i = j
        return out

    return order(list(results), _METRIC_ORDER)
