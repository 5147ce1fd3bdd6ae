"""Command line interface.

Subcommands cover the full workflow: synth data, fit a model, attribute
maps, evaluate against masks, sweep and rank hyperparameters, export
visualizations, and benchmark scaling. Exit codes: 0 success, 1 usage,
2 bad data or config, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
import traceback
from pathlib import Path

import numpy as np

from . import io as pio
from . import viz
from .graphs import build_chain_graph, MapGraph
from .conv import k2conv, scale_map
from .kernel import Kernel, Scaler, Vocabulary
from .metrics import evaluate_dataset
from .pipeline import FitParams, Prospector, attribute, fit_prospector
from .quantizer import Quantizer, assign_concepts, make_sprite
from .select import Config, ConfigResult, HyperGrid, grid_search, sequential_rank
from .synth import (
    ChainTopology,
    GeometricTopology,
    GridTopology,
    SynthSpec,
    generate_dataset,
    plant_chain_trigram,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; this tool reserves 2 for data errors.
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


def _parse_alpha(value):
    """None-like spellings disable the significance filter."""
    if value is None:
        return None
    if isinstance(value, str):
        if value.strip().lower() in ("", "none", "null", "inf", "infinity", "off"):
            return None
        value = float(value)
    value = float(value)
    if not np.isfinite(value) or value >= 1.0:
        return None
    return value


def _load_config(path) -> dict:
    if path is None:
        return {}
    doc = pio.load_json(path)
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    return doc


def _setting(args, config: dict, name: str, default):
    """CLI flag wins over config file value wins over default."""
    value = getattr(args, name.replace("-", "_"), None)
    if value is not None:
        return value
    if name in config:
        return config[name]
    return default


def _require_dir(path, what: str) -> Path:
    if path is None:
        raise ValueError(f"missing required setting: --{what}")
    path = Path(path)
    if not path.is_dir():
        raise ValueError(f"{what} directory not found: {path}")
    return path


def _check_both_classes(data) -> None:
    labels = {d.label for d in data}
    for missing in (0, 1):
        if missing not in labels:
            raise ValueError(
                f"training set has no class-{missing} data; both classes are required"
            )


# ---------------------------------------------------------------------------
# fit


def _fit_params(args, config: dict) -> FitParams:
    return FitParams(
        concept_count=int(_setting(args, config, "k", 8)),
        radius=int(_setting(args, config, "r", 1)),
        variant=str(_setting(args, config, "variant", "fold_change")),
        tau=float(_setting(args, config, "tau", 0.0)),
        alpha=_parse_alpha(_setting(args, config, "alpha", None)),
        lam=float(_setting(args, config, "lam", 0.5)),
        sample_size=int(_setting(args, config, "sample-size", 10_000)),
    )


def cmd_fit(args) -> int:
    config = _load_config(args.config)
    train = pio.load_dataset(_require_dir(_setting(args, config, "train", None), "train"))
    if not train:
        raise ValueError("training directory contains no datum files")
    _check_both_classes(train)
    params = _fit_params(args, config)
    seed = int(_setting(args, config, "seed", 0))
    model = fit_prospector(train, params, seed=seed)
    out = Path(_setting(args, config, "output", "model"))
    q_path, k_path = pio.save_prospector(model, out)
    nonzero = int(np.count_nonzero(model.kernel.weights))
    print(f"fit {params.variant} kernel on {len(train)} data "
          f"(K={params.concept_count}, r={params.radius}, "
          f"{nonzero}/{model.kernel.weights.size} nonzero weights)")
    print(f"wrote {q_path}")
    print(f"wrote {k_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# attribute


def cmd_attribute(args) -> int:
    config = _load_config(args.config)
    model = pio.load_prospector(_require_dir(_setting(args, config, "model", None), "model"))
    data_dir = _require_dir(_setting(args, config, "data", None), "data")
    out = Path(_setting(args, config, "output", "maps"))
    paths = sorted(data_dir.glob("*.json"))
    if not paths:
        print(f"warning: no datum files in {data_dir}", file=sys.stderr)
        return EXIT_OK
    ok = 0
    failures: list[tuple[str, str]] = []
    for path in paths:
        try:
            datum = pio.load_datum(path)
            if datum.graph.dim != model.quantizer.dim:
                raise ValueError(
                    f"embedding dim {datum.graph.dim} does not match "
                    f"quantizer dim {model.quantizer.dim}"
                )
            pmap = attribute(model, datum.graph)
            pio.save_map(pmap, out, path.stem)
            if args.figures:
                viz.save_map_png(pmap, datum.graph, out / f"{path.stem}.map.png")
            ok += 1
        except (pio.DatumFormatError, ValueError) as exc:
            failures.append((path.name, str(exc)))
    print(f"attributed {ok}/{len(paths)} data -> {out}")
    for name, reason in failures:
        print(f"failed: {name}: {reason}", file=sys.stderr)
    if ok == 0:
        raise ValueError("every datum failed attribution")
    return EXIT_OK


# ---------------------------------------------------------------------------
# evaluate


def cmd_evaluate(args) -> int:
    config = _load_config(args.config)
    data = pio.load_dataset(_require_dir(_setting(args, config, "data", None), "data"))
    maps = pio.load_maps(_require_dir(_setting(args, config, "maps", None), "maps"))
    if not data:
        raise ValueError("data directory contains no datum files")
    if not any(d.mask is not None for d in data):
        raise ValueError("no datum carries a mask; nothing to evaluate")
    by_id = {m.datum_id: m for m in maps}
    missing = [d.datum_id for d in data if d.datum_id not in by_id]
    if missing:
        raise ValueError(f"maps missing for data: {', '.join(sorted(missing))}")
    ordered = [by_id[d.datum_id] for d in data]
    report = evaluate_dataset(ordered, data)
    out = Path(_setting(args, config, "output", "report"))
    out.mkdir(parents=True, exist_ok=True)
    pio.save_json(report.to_dict(), out / "report.json")
    pio.write_csv(out / "report.csv", report.csv_rows())
    print(f"evaluated {len(data)} data ({report.skipped} without positive masks)")
    for key, agg in sorted(report.aggregates.items()):
        if agg is not None:
            print(f"  {key}: {agg[0]:.4f} +/- {agg[1]:.4f}")
    print(f"wrote {out / 'report.json'}")
    print(f"wrote {out / 'report.csv'}")
    if not args.no_figures:
        for fig_path in viz.save_report_figures(report, out):
            print(f"wrote {fig_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep / rank


def _parse_grid(doc: dict, seed: int) -> HyperGrid:
    def pick(*names, default=None):
        for name in names:
            if name in doc:
                return doc[name]
        if default is None:
            raise ValueError(f"grid config missing {names[0]!r}")
        return default

    alphas = tuple(_parse_alpha(a) for a in pick("alpha", "alphas", default=[None]))
    return HyperGrid(
        concept_counts=tuple(int(k) for k in pick("K", "concept_counts")),
        radii=tuple(int(r) for r in pick("r", "radii")),
        alphas=alphas,
        taus=tuple(float(t) for t in pick("tau", "taus", default=[0.0])),
        lams=tuple(float(l) for l in pick("lambda", "lams", default=[0.5])),
        variants=tuple(pick("variant", "variants", default=["fold_change"])),
        seed=seed,
    )


def cmd_sweep(args) -> int:
    config = _load_config(args.config)
    grid_doc = config.get("grid")
    if args.grid is not None:
        grid_doc = pio.load_json(args.grid)
    if not isinstance(grid_doc, dict):
        raise ValueError("sweep needs a grid config (--grid FILE or config key 'grid')")
    seed = int(_setting(args, config, "seed", 0))
    grid = _parse_grid(grid_doc, seed)
    train = pio.load_dataset(_require_dir(_setting(args, config, "train", None), "train"))
    out = Path(_setting(args, config, "output", "sweep"))
    out.mkdir(parents=True, exist_ok=True)
    ledger_path = out / "sweep.csv"
    done = pio.read_ledger(ledger_path) if args.resume else {}
    all_configs = grid.configs()
    todo = [c for c in all_configs if c.index not in done]
    if done:
        print(f"resuming: {len(done)} of {len(all_configs)} configs already in ledger")
    if not todo:
        print("nothing to do")
        return EXIT_OK

    rows = dict(done)

    def on_result(result: ConfigResult) -> None:
        rows[result.config.index] = pio.ledger_row(result)
        body = [pio.LEDGER_HEADER] + [rows[i] for i in sorted(rows)]
        pio.write_csv(ledger_path, body)
        status = result.error or f"auprc={result.auprc:.4f}"
        print(f"config {result.config.index:>4}: {status}")

    results = grid_search(
        train,
        grid,
        sample_size=int(_setting(args, config, "sample-size", 10_000)),
        workers=int(_setting(args, config, "workers", 1)),
        configs=todo,
        on_result=on_result,
    )
    failed = sum(1 for r in results if r.error)
    print(f"swept {len(results)} configs ({failed} failed); ledger at {ledger_path}")
    return EXIT_OK


def _results_from_ledger(path) -> list[ConfigResult]:
    rows = pio.read_ledger(path)
    if not rows:
        raise ValueError(f"ledger not found or empty: {path}")
    results = []
    opt = lambda s: None if s == "" else float(s)
    for index in sorted(rows):
        row = rows[index]
        cfg = Config(
            index=index, variant=row[1], concept_count=int(row[2]), radius=int(row[3]),
            tau=opt(row[4]), alpha=opt(row[5]), lam=opt(row[6]),
        )
        results.append(ConfigResult(
            config=cfg, precision=float(row[7]), mcc=float(row[8]),
            dice=float(row[9]), auprc=float(row[10]), error=row[11] or None,
        ))
    return results


def cmd_rank(args) -> int:
    results = _results_from_ledger(args.ledger)
    ranked = sequential_rank(results)
    top = ranked if args.top is None else ranked[: args.top]
    header = ["rank"] + pio.LEDGER_HEADER
    table = [header]
    for pos, result in enumerate(top, start=1):
        table.append([str(pos)] + pio.ledger_row(result))
    widths = [max(len(row[i]) for row in table) for i in range(len(header))]
    for row in table:
        print("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    if args.output is not None:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        pio.write_csv(out / "ranked.csv", [header] + [
            [str(pos)] + pio.ledger_row(r) for pos, r in enumerate(ranked, start=1)
        ])
        print(f"wrote {out / 'ranked.csv'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# synth


def _parse_motif(text: str):
    parts = [int(p) for p in text.split(",") if p != ""]
    if len(parts) == 1:
        return parts[0]
    if len(parts) == 2:
        return (parts[0], parts[1])
    raise ValueError("motif must be one concept or a comma-separated pair")


def cmd_synth(args) -> int:
    config = _load_config(args.config)
    seed = int(_setting(args, config, "seed", 0))
    out = Path(_setting(args, config, "output", "synth-data"))
    if args.preset == "trigram":
        train, test, metadata = plant_chain_trigram(
            t=args.t_max, dim=args.dim, concept_count=args.concepts,
            sigma=args.sigma, r=args.trigram_r,
            n_train=args.n_train, n_test=args.n_test, seed=seed,
        )
    else:
        if args.topology == "chain":
            topology = ChainTopology(hop=args.hop)
        elif args.topology == "grid":
            topology = GridTopology(connectivity=args.connectivity)
        else:
            topology = GeometricTopology(epsilon=args.epsilon)
        motif = _parse_motif(args.motif)
        if args.preset == "mono" and not isinstance(motif, int):
            raise ValueError("mono preset takes a single motif concept")
        if args.preset == "bigram" and isinstance(motif, int):
            raise ValueError("bigram preset takes a motif pair, e.g. --motif 2,3")
        spec = SynthSpec(
            topology=topology, t_range=(args.t_min, args.t_max), dim=args.dim,
            concept_count=args.concepts, sigma=args.sigma, motif=motif,
            rho=args.rho, components=args.components,
            n_train=args.n_train, n_test=args.n_test, seed=seed,
        )
        train, test, metadata = generate_dataset(spec)
    pio.save_dataset(train, out / "train", sidecar=args.sidecar)
    pio.save_dataset(test, out / "test", sidecar=args.sidecar)
    pio.save_json(metadata, out / "metadata.json")
    print(f"wrote {len(train)} train and {len(test)} test data -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# export-viz


def cmd_export_viz(args) -> int:
    config = _load_config(args.config)
    model_dir = _require_dir(_setting(args, config, "model", None), "model")
    kernel = pio.kernel_from_dict(pio.load_json(model_dir / "kernel.json"))
    out = Path(_setting(args, config, "output", "viz"))
    out.mkdir(parents=True, exist_ok=True)
    pio.atomic_write_text(out / "kernel.dot", viz.kernel_dot(kernel))
    pio.write_csv(out / "kernel_heatmap.csv", viz.kernel_heatmap_rows(kernel))
    viz.save_kernel_heatmap_png(kernel, out / "kernel_heatmap.png")
    print(f"wrote {out / 'kernel.dot'}")
    print(f"wrote {out / 'kernel_heatmap.csv'}")
    print(f"wrote {out / 'kernel_heatmap.png'}")
    if args.datum is not None:
        quantizer = pio.quantizer_from_dict(pio.load_json(model_dir / "quantizer.json"))
        datum = pio.load_datum(args.datum)
        sprite = make_sprite(quantizer, datum.graph)
        dot = viz.sprite_semantic_dot(sprite, kernel.vocabulary.radius)
        stem = Path(args.datum).stem
        pio.atomic_write_text(out / f"{stem}.sprite.dot", dot)
        print(f"wrote {out / f'{stem}.sprite.dot'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench-scaling


def _bench_model(k: int, r: int, dim: int, seed: int) -> tuple[Quantizer, Kernel]:
    rng = np.random.default_rng(seed)
    quantizer = Quantizer(rng.normal(size=(k, dim)), seed)
    vocab = Vocabulary(k, r)
    scaler = Scaler(np.ones(vocab.size), 1, np.ones(vocab.size, dtype=np.int64))
    weights = rng.normal(size=vocab.size)
    kernel = Kernel(vocabulary=vocab, weights=weights, scaler=scaler,
                    variant="fold_change", tau=0.0)
    return quantizer, kernel


def cmd_bench_scaling(args) -> int:
    config = _load_config(args.config)
    seed = int(_setting(args, config, "seed", 0))
    sizes = [int(s) for s in args.sizes.split(",")]
    if sorted(sizes) != sizes or len(set(sizes)) != len(sizes):
        raise ValueError("sizes must be strictly increasing")
    quantizer, kernel = _bench_model(args.k, args.r, args.dim, seed)
    rng = np.random.default_rng(seed + 1)
    rows = [["T", "quantize_seconds", "convolve_seconds"]]
    q_times, c_times = [], []
    for t in sizes:
        embeddings = rng.normal(size=(t, args.dim))
        graph = MapGraph(embeddings, build_chain_graph(t).tolist(), datum_id=f"bench-{t}")
        start = time.perf_counter()
        concepts = assign_concepts(quantizer, graph.embeddings)
        q_elapsed = time.perf_counter() - start
        sprite = make_sprite(quantizer, graph)
        start = time.perf_counter()
        scale_map(k2conv(sprite, kernel))
        c_elapsed = time.perf_counter() - start
        assert concepts.shape[0] == t
        q_times.append(q_elapsed)
        c_times.append(c_elapsed)
        rows.append([str(t), repr(q_elapsed), repr(c_elapsed)])
        print(f"T={t:>8}: quantize {q_elapsed:.4f}s  convolve {c_elapsed:.4f}s")
    out = Path(_setting(args, config, "output", "bench"))
    out.mkdir(parents=True, exist_ok=True)
    pio.write_csv(out / "bench.csv", rows)
    viz.save_scaling_png(sizes, q_times, c_times, out / "scaling.png")
    print(f"wrote {out / 'bench.csv'}")
    print(f"wrote {out / 'scaling.png'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> _Parser:
    parser = _Parser(prog="prospect", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file supplying defaults")
    common.add_argument("--seed", type=int, help="RNG seed (default 0)")
    common.add_argument("--workers", type=int, help="thread count (default 1)")
    common.add_argument("--output", help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", parents=[common], help="fit quantizer and kernel")
    p.add_argument("--train", help="directory of training datum files")
    p.add_argument("--k", type=int, help="concept count (default 8)")
    p.add_argument("--r", type=int, help="neighborhood radius (default 1)")
    p.add_argument("--variant", choices=["fold_change", "linear"])
    p.add_argument("--tau", type=float, help="fold-change threshold (default 0)")
    p.add_argument("--alpha", help="significance level; none/inf disables")
    p.add_argument("--lam", type=float, help="elastic-net mixing (default 0.5)")
    p.add_argument("--sample-size", type=int, dest="sample_size")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("attribute", parents=[common], help="write prospect maps")
    p.add_argument("--model", help="directory with quantizer.json and kernel.json")
    p.add_argument("--data", help="directory of datum files")
    p.add_argument("--figures", action="store_true", help="also render map PNGs")
    p.set_defaults(func=cmd_attribute)

    p = sub.add_parser("evaluate", parents=[common], help="score maps against masks")
    p.add_argument("--maps", help="directory of *.map.json files")
    p.add_argument("--data", help="directory of datum files with masks")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", parents=[common], help="grid-search hyperparameters")
    p.add_argument("--train", help="directory of training datum files")
    p.add_argument("--grid", help="JSON file with value lists (K, r, tau, alpha, ...)")
    p.add_argument("--resume", action="store_true",
                   help="skip configs already in the ledger")
    p.add_argument("--sample-size", type=int, dest="sample_size")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("rank", parents=[common], help="rank a sweep ledger")
    p.add_argument("--ledger", required=True, help="sweep.csv from a sweep run")
    p.add_argument("--top", type=int, help="print only the best N configs")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("synth", parents=[common], help="generate synthetic datasets")
    p.add_argument("--preset", choices=["mono", "bigram", "trigram"], default="mono")
    p.add_argument("--topology", choices=["chain", "grid", "geometric"], default="chain")
    p.add_argument("--t-min", type=int, default=80, dest="t_min")
    p.add_argument("--t-max", type=int, default=120, dest="t_max",
                   help="max vertices; exact chain length for the trigram preset")
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--concepts", type=int, default=8)
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--motif", default="0", help="concept id or pair like 2,3")
    p.add_argument("--rho", type=float, default=0.2)
    p.add_argument("--components", type=int, default=1)
    p.add_argument("--n-train", type=int, default=16, dest="n_train")
    p.add_argument("--n-test", type=int, default=8, dest="n_test")
    p.add_argument("--hop", type=int, default=1)
    p.add_argument("--connectivity", type=int, choices=[4, 8], default=4)
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--trigram-r", type=int, default=2, dest="trigram_r")
    p.add_argument("--sidecar", action="store_true",
                   help="store embeddings as float32 sidecar blobs")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("export-viz", parents=[common],
                       help="DOT, heatmap CSV, and PNG for a fitted kernel")
    p.add_argument("--model", help="directory with kernel.json (and quantizer.json)")
    p.add_argument("--datum", help="optional datum file for a sprite network")
    p.set_defaults(func=cmd_export_viz)

    p = sub.add_parser("bench-scaling", parents=[common],
                       help="time quantization and convolution across sizes")
    p.add_argument("--sizes", default="1000,10000,100000",
                   help="comma-separated vertex counts")
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--dim", type=int, default=32)
    p.set_defaults(func=cmd_bench_scaling)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (pio.DatumFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception:
        print("internal error:", file=sys.stderr)
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
