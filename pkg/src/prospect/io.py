"""File formats and atomic persistence.

One datum per JSON file; a directory of them is a dataset. Embeddings may
live inline ("tokens") or in a little-endian float32 row-major sidecar
referenced as {"embeddings_bin", "T", "d"}. Artifacts (quantizer, kernel,
maps, reports) serialize to JSON with sorted keys and shortest round-trip
floats, so identical values produce identical bytes. Every writer goes
through an atomic temp-file rename.
"""

from __future__ import annotations

import csv
import io as _io
import json
import os
from pathlib import Path
from typing import Sequence

import numpy as np

from .graphs import LabeledDatum, MapGraph, ProspectMap
from .kernel import Kernel, Scaler, Vocabulary
from .pipeline import Prospector
from .quantizer import Quantizer


class DatumFormatError(ValueError):
    """A datum file violating the schema; carries path and JSON pointer."""

    def __init__(self, path, pointer: str, message: str):
        self.path = str(path)
        self.pointer = pointer
        super().__init__(f"{self.path}: {pointer}: {message}")


def atomic_write_bytes(path: Path | str, data: bytes) -> None:
    """Write via temp file + rename so readers never see partial content."""
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    try:
        with open(tmp, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


def atomic_write_text(path: Path | str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def save_json(obj, path: Path | str) -> None:
    atomic_write_text(path, dump_json(obj))


def load_json(path: Path | str):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def write_csv(path: Path | str, rows: Sequence[Sequence[str]]) -> None:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    atomic_write_text(path, buf.getvalue())


# ---------------------------------------------------------------------------
# Datum files


def _fail(path, pointer, message):
    raise DatumFormatError(path, pointer, message)


def _require(condition, path, pointer, message):
    if not condition:
        _fail(path, pointer, message)


def load_datum(path: Path | str) -> LabeledDatum:
    """Load and strictly validate one datum file."""
    path = Path(path)
    try:
        doc = load_json(path)
    except json.JSONDecodeError as exc:
        _fail(path, "", f"invalid JSON ({exc.msg} at line {exc.lineno})")
    except OSError as exc:
        _fail(path, "", f"unreadable ({exc.strerror})")
    _require(isinstance(doc, dict), path, "", "top level must be an object")
    for key in ("id", "label", "edges"):
        _require(key in doc, path, f"/{key}", "missing required field")
    _require(isinstance(doc["id"], str) and doc["id"], path, "/id", "must be a non-empty string")
    _require(doc["label"] in (0, 1), path, "/label", "must be 0 or 1")

    if "tokens" in doc:
        tokens = doc["tokens"]
        _require(isinstance(tokens, list) and tokens, path, "/tokens", "must be a non-empty array")
        width = None
        for i, row in enumerate(tokens):
            _require(
                isinstance(row, list) and all(isinstance(v, (int, float)) for v in row),
                path, f"/tokens/{i}", "must be an array of numbers",
            )
            if width is None:
                width = len(row)
                _require(width >= 1, path, f"/tokens/{i}", "must have at least one value")
            else:
                _require(len(row) == width, path, f"/tokens/{i}",
                         f"length {len(row)} != {width}")
        embeddings = np.asarray(tokens, dtype=np.float64)
    elif "embeddings_bin" in doc:
        for key in ("T", "d"):
            _require(
                isinstance(doc.get(key), int) and doc[key] >= 1,
                path, f"/{key}", "must be a positive integer",
            )
        t, d = doc["T"], doc["d"]
        bin_path = path.parent / doc["embeddings_bin"]
        _require(bin_path.exists(), path, "/embeddings_bin", f"sidecar {bin_path} not found")
        blob = bin_path.read_bytes()
        _require(
            len(blob) == 4 * t * d, path, "/embeddings_bin",
            f"sidecar holds {len(blob)} bytes, expected {4 * t * d}",
        )
        embeddings = np.frombuffer(blob, dtype="<f4").reshape(t, d).astype(np.float64)
    else:
        _fail(path, "/tokens", "need either tokens or embeddings_bin")
    t = embeddings.shape[0]
    _require(np.isfinite(embeddings).all(), path, "/tokens", "embeddings must be finite")

    edges = doc["edges"]
    _require(isinstance(edges, list), path, "/edges", "must be an array")
    for i, pair in enumerate(edges):
        _require(
            isinstance(pair, list) and len(pair) == 2
            and all(isinstance(v, int) for v in pair),
            path, f"/edges/{i}", "must be a pair of integers",
        )
        a, b = pair
        _require(0 <= a < t and 0 <= b < t, path, f"/edges/{i}",
                 f"endpoint out of range for T={t}")
        _require(a != b, path, f"/edges/{i}", "self loops are not allowed")

    coords = None
    if doc.get("coords") is not None:
        raw = doc["coords"]
        _require(isinstance(raw, list) and len(raw) == t, path, "/coords",
                 f"must have T={t} points")
        for i, row in enumerate(raw):
            _require(
                isinstance(row, list) and all(isinstance(v, (int, float)) for v in row),
                path, f"/coords/{i}", "must be an array of numbers",
            )
        coords = np.asarray(raw, dtype=np.float64)

    mask = None
    if doc.get("mask") is not None:
        raw = doc["mask"]
        _require(isinstance(raw, list) and len(raw) == t, path, "/mask",
                 f"must have T={t} entries")
        for i, v in enumerate(raw):
            _require(v in (0, 1, True, False), path, f"/mask/{i}", "must be 0 or 1")
        mask = np.asarray(raw, dtype=bool)

    try:
        graph = MapGraph(embeddings, edges, coords=coords, datum_id=doc["id"])
        return LabeledDatum(graph, int(doc["label"]), mask)
    except ValueError as exc:
        _fail(path, "", str(exc))


def save_datum(datum: LabeledDatum, path: Path | str, sidecar: bool = False) -> None:
    """Write one datum file (optionally with a float32 sidecar blob)."""
    path = Path(path)
    doc: dict = {
        "id": datum.datum_id,
        "label": int(datum.label),
        "edges": datum.graph.edges.tolist(),
    }
    if sidecar:
        bin_name = path.stem + ".bin"
        blob = np.ascontiguousarray(datum.graph.embeddings, dtype="<f4").tobytes()
        atomic_write_bytes(path.parent / bin_name, blob)
        doc["embeddings_bin"] = bin_name
        doc["T"] = datum.graph.vertex_count
        doc["d"] = datum.graph.dim
    else:
        doc["tokens"] = datum.graph.embeddings.tolist()
    if datum.graph.coords is not None:
        doc["coords"] = datum.graph.coords.tolist()
    if datum.mask is not None:
        doc["mask"] = [int(v) for v in datum.mask]
    save_json(doc, path)


def load_dataset(directory: Path | str) -> list[LabeledDatum]:
    """Load every *.json datum in a directory, sorted by filename."""
    directory = Path(directory)
    if not directory.is_dir():
        raise DatumFormatError(directory, "", "not a directory")
    data = []
    seen: dict[str, str] = {}
    for path in sorted(directory.glob("*.json")):
        datum = load_datum(path)
        if datum.datum_id in seen:
            raise DatumFormatError(
                path, "/id",
                f"duplicate id {datum.datum_id!r} (also in {seen[datum.datum_id]})",
            )
        seen[datum.datum_id] = path.name
        data.append(datum)
    return data


def save_dataset(data: Sequence[LabeledDatum], directory: Path | str,
                 sidecar: bool = False) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, datum in enumerate(data):
        name = datum.datum_id if datum.datum_id else f"datum-{i:05d}"
        out = directory / f"{name}.json"
        save_datum(datum, out, sidecar=sidecar)
        paths.append(out)
    return paths


# ---------------------------------------------------------------------------
# Artifacts


def quantizer_to_dict(q: Quantizer) -> dict:
    return {
        "schema": "quantizer/v1",
        "K": q.concept_count,
        "d": q.dim,
        "seed": q.seed,
        "centroids": q.centroids.tolist(),
    }


def quantizer_from_dict(doc: dict) -> Quantizer:
    if doc.get("schema") != "quantizer/v1":
        raise ValueError(f"unexpected quantizer schema {doc.get('schema')!r}")
    q = Quantizer(np.asarray(doc["centroids"], dtype=np.float64), int(doc["seed"]))
    if q.concept_count != doc["K"] or q.dim != doc["d"]:
        raise ValueError("quantizer document K/d do not match centroids")
    return q


def kernel_to_dict(k: Kernel) -> dict:
    return {
        "schema": "kernel/v1",
        "vocabulary": {
            "K": k.vocabulary.concept_count,
            "r": k.vocabulary.radius,
        },
        "variant": k.variant,
        "tau": k.tau,
        "alpha": k.alpha,
        "lambda": k.lam,
        "fitted_on": k.fitted_on,
        "weights": k.weights.tolist(),
        "scaler": {
            "document_count": k.scaler.document_count,
            "document_frequency": k.scaler.document_frequency.tolist(),
            "idf": k.scaler.idf.tolist(),
        },
    }


def kernel_from_dict(doc: dict) -> Kernel:
    if doc.get("schema") != "kernel/v1":
        raise ValueError(f"unexpected kernel schema {doc.get('schema')!r}")
    vocab = Vocabulary(int(doc["vocabulary"]["K"]), int(doc["vocabulary"]["r"]))
    scaler_doc = doc["scaler"]
    scaler = Scaler(
        np.asarray(scaler_doc["idf"], dtype=np.float64),
        int(scaler_doc["document_count"]),
        np.asarray(scaler_doc["document_frequency"], dtype=np.int64),
    )
    return Kernel(
        vocabulary=vocab,
        weights=np.asarray(doc["weights"], dtype=np.float64),
        scaler=scaler,
        variant=doc["variant"],
        tau=doc["tau"],
        alpha=doc["alpha"],
        lam=doc["lambda"],
        fitted_on=doc.get("fitted_on", ""),
    )


def save_prospector(model: Prospector, directory: Path | str) -> tuple[Path, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    q_path = directory / "quantizer.json"
    k_path = directory / "kernel.json"
    save_json(quantizer_to_dict(model.quantizer), q_path)
    save_json(kernel_to_dict(model.kernel), k_path)
    return q_path, k_path


def load_prospector(directory: Path | str) -> Prospector:
    directory = Path(directory)
    quantizer = quantizer_from_dict(load_json(directory / "quantizer.json"))
    kernel = kernel_from_dict(load_json(directory / "kernel.json"))
    if kernel.vocabulary.concept_count != quantizer.concept_count:
        raise ValueError("quantizer and kernel disagree on concept count")
    return Prospector(quantizer, kernel)


def map_to_dict(pmap: ProspectMap) -> dict:
    return {
        "schema": "map/v1",
        "id": pmap.datum_id,
        "scaled": bool(pmap.scaled),
        "scores": pmap.scores.tolist(),
    }


def map_from_dict(doc: dict) -> ProspectMap:
    if doc.get("schema") != "map/v1":
        raise ValueError(f"unexpected map schema {doc.get('schema')!r}")
    return ProspectMap(
        np.asarray(doc["scores"], dtype=np.float64),
        bool(doc["scaled"]),
        doc.get("id", ""),
    )


def map_csv_rows(pmap: ProspectMap) -> list[list[str]]:
    rows = [["vertex_id", "score"]]
    rows.extend([str(i), repr(float(s))] for i, s in enumerate(pmap.scores))
    return rows


def save_map(pmap: ProspectMap, directory: Path | str, stem: str) -> tuple[Path, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    json_path = directory / f"{stem}.map.json"
    csv_path = directory / f"{stem}.map.csv"
    save_json(map_to_dict(pmap), json_path)
    write_csv(csv_path, map_csv_rows(pmap))
    return json_path, csv_path


def load_maps(directory: Path | str) -> list[ProspectMap]:
    directory = Path(directory)
    if not directory.is_dir():
        raise DatumFormatError(directory, "", "not a directory")
    return [map_from_dict(load_json(p)) for p in sorted(directory.glob("*.map.json"))]


# ---------------------------------------------------------------------------
# Sweep ledger

LEDGER_HEADER = [
    "index", "variant", "K", "r", "tau", "alpha", "lambda",
    "precision", "mcc", "dice", "auprc", "error",
]


def ledger_row(result) -> list[str]:
    cfg = result.config
    opt = lambda v: "" if v is None else repr(float(v))
    return [
        str(cfg.index), cfg.variant, str(cfg.concept_count), str(cfg.radius),
        opt(cfg.tau), opt(cfg.alpha), opt(cfg.lam),
        repr(float(result.precision)), repr(float(result.mcc)),
        repr(float(result.dice)), repr(float(result.auprc)),
        result.error or "",
    ]


def read_ledger(path: Path | str) -> dict[int, list[str]]:
    """Completed ledger rows keyed by config index."""
    path = Path(path)
    if not path.exists():
        return {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if not rows or rows[0] != LEDGER_HEADER:
        raise ValueError(f"{path}: not a sweep ledger")
    return {int(row[0]): row for row in rows[1:]}
