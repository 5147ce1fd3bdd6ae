"""Drive an encoder over raw inputs and write map-graph datum files.

Output schema (one JSON file per input): ``id``, ``label``, ``edges``, and
either an inline ``tokens`` matrix or ``embeddings_bin``/``T``/``d`` pointing
at a little-endian float32 row-major sidecar, plus optional ``coords`` and
``mask``. Labels come from a manifest, never from the input itself, and graph
construction runs before the label is even looked up, so topology cannot
depend on class.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from prospect_exporter.encoders import Encoder, load_encoder
from prospect_exporter.image import grid_edges, tile_patches
from prospect_exporter.structure import epsilon_edges, load_residues
from prospect_exporter.text import chain_edges, split_sentences

KINDS = ("text", "image", "structure")


@dataclass(frozen=True)
class ExportJob:
    """One export run: inputs, tokenization settings, encoder, destination."""

    inputs: tuple[Path, ...]
    kind: str
    labels_path: Path
    output_dir: Path
    encoder_name: str = "hash:64"
    annotations_path: Path | None = None
    batch_size: int = 32
    hop: int = 2              # text: chain reach in sentences
    patch_size: int = 224     # image: square patch side in pixels
    connectivity: int = 8     # image: grid neighbors per patch
    epsilon: float = 8.0      # structure: contact distance cutoff
    sidecar: bool = False

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.inputs:
            raise ValueError("export job has no inputs")
        if self.batch_size < 1:
            raise ValueError(f"batch size must be >= 1, got {self.batch_size}")
        object.__setattr__(self, "inputs", tuple(Path(p) for p in self.inputs))
        object.__setattr__(self, "labels_path", Path(self.labels_path))
        object.__setattr__(self, "output_dir", Path(self.output_dir))
        if self.annotations_path is not None:
            object.__setattr__(self, "annotations_path", Path(self.annotations_path))


def read_labels(path: Path | str) -> dict[str, int]:
    """Parse a labels manifest: CSV with header id,label; label is 0 or 1."""
    labels: dict[str, int] = {}
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["id", "label"]:
            raise ValueError(f"{path}: expected header id,label")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ValueError(f"{path}: line {lineno}: expected 2 columns, got {len(row)}")
            datum_id = row[0].strip()
            if not datum_id:
                raise ValueError(f"{path}: line {lineno}: empty id")
            if datum_id in labels:
                raise ValueError(f"{path}: line {lineno}: duplicate id {datum_id!r}")
            if row[1].strip() not in ("0", "1"):
                raise ValueError(f"{path}: line {lineno}: label must be 0 or 1")
            labels[datum_id] = int(row[1])
    return labels


def read_annotations(path: Path | str) -> dict[str, set[int]]:
    """Parse an annotations manifest: CSV with header id,vertex_id.

    Each row marks one vertex of one datum as inside the ground-truth
    region; data absent from the manifest get no mask at all.
    """
    marks: dict[str, set[int]] = {}
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["id", "vertex_id"]:
            raise ValueError(f"{path}: expected header id,vertex_id")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ValueError(f"{path}: line {lineno}: expected 2 columns, got {len(row)}")
            datum_id = row[0].strip()
            if not datum_id:
                raise ValueError(f"{path}: line {lineno}: empty id")
            try:
                vertex = int(row[1])
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: vertex_id must be an integer")
            if vertex < 0:
                raise ValueError(f"{path}: line {lineno}: vertex_id must be >= 0")
            marks.setdefault(datum_id, set()).add(vertex)
    return marks


def _tokenize(job: ExportJob, path: Path) -> tuple[
    list[str | bytes], list[tuple[int, int]], list[tuple[float, ...]] | None
]:
    """Input file -> (tokens, edges, coords). Labels are not in scope here."""
    if job.kind == "text":
        tokens = list(split_sentences(path.read_text()))
        return tokens, chain_edges(len(tokens), job.hop), None
    if job.kind == "image":
        patches, rows, cols, coords = tile_patches(path, job.patch_size)
        return list(patches), grid_edges(rows, cols, job.connectivity), list(coords)
    residues, coords3 = load_residues(path)
    return list(residues), epsilon_edges(coords3, job.epsilon), list(coords3)


def _encode_batched(encoder: Encoder, tokens: list[str | bytes], batch_size: int) -> np.ndarray:
    chunks = [
        np.asarray(encoder.encode(tokens[start : start + batch_size]), dtype=np.float64)
        for start in range(0, len(tokens), batch_size)
    ]
    embeddings = np.concatenate(chunks, axis=0)
    if embeddings.shape != (len(tokens), encoder.dim):
        raise RuntimeError(
            f"encoder returned shape {embeddings.shape}, "
            f"expected ({len(tokens)}, {encoder.dim})"
        )
    if not np.isfinite(embeddings).all():
        raise RuntimeError("encoder produced non-finite embeddings")
    return embeddings


def _atomic_write_bytes(path: Path, data: bytes) -> None:
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    try:
        with open(tmp, "wb") as handle:
            handle.write(data)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp, path)
    finally:
        tmp.unlink(missing_ok=True)


def _write_datum(
    job: ExportJob,
    datum_id: str,
    label: int,
    embeddings: np.ndarray,
    edges: list[tuple[int, int]],
    coords: list[tuple[float, ...]] | None,
    mask: list[int] | None,
) -> Path:
    doc: dict[str, object] = {
        "id": datum_id,
        "label": label,
        "edges": [[int(a), int(b)] for a, b in edges],
    }
    out_path = job.output_dir / f"{datum_id}.json"
    if job.sidecar:
        bin_name = f"{datum_id}.bin"
        _atomic_write_bytes(
            job.output_dir / bin_name,
            np.ascontiguousarray(embeddings, dtype="<f4").tobytes(),
        )
        doc["embeddings_bin"] = bin_name
        doc["T"] = int(embeddings.shape[0])
        doc["d"] = int(embeddings.shape[1])
    else:
        doc["tokens"] = embeddings.tolist()
    if coords is not None:
        doc["coords"] = [[float(v) for v in point] for point in coords]
    if mask is not None:
        doc["mask"] = mask
    text = json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"
    _atomic_write_bytes(out_path, text.encode("utf-8"))
    return out_path


def export(job: ExportJob) -> list[Path]:
    """Emit one datum file per input; returns the written JSON paths.

    Fails fast on a broken encoder, a missing or duplicate id, zero tokens,
    or an annotation pointing past the end of a datum. Files already written
    when a later input fails are left in place; rerunning after a fix
    overwrites them with identical bytes.
    """
    encoder = load_encoder(job.encoder_name)
    labels = read_labels(job.labels_path)
    marks = (
        read_annotations(job.annotations_path)
        if job.annotations_path is not None
        else {}
    )
    seen: set[str] = set()
    job.output_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for path in job.inputs:
        datum_id = path.stem
        if datum_id in seen:
            raise ValueError(f"{path}: duplicate datum id {datum_id!r}")
        seen.add(datum_id)
        tokens, edges, coords = _tokenize(job, path)
        if not tokens:
            raise ValueError(f"{path}: tokenization produced zero tokens")
        if datum_id not in labels:
            raise ValueError(f"{path}: no label for id {datum_id!r} in {job.labels_path}")
        mask = None
        if datum_id in marks:
            bad = sorted(v for v in marks[datum_id] if v >= len(tokens))
            if bad:
                raise ValueError(
                    f"{path}: annotation vertex {bad[0]} out of range for T={len(tokens)}"
                )
            mask = [1 if i in marks[datum_id] else 0 for i in range(len(tokens))]
        embeddings = _encode_batched(encoder, tokens, job.batch_size)
        written.append(
            _write_datum(job, datum_id, labels[datum_id], embeddings, edges, coords, mask)
        )
    return written
