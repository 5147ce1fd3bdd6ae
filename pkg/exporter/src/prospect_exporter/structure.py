"""Structure inputs: one residue per vertex, edges within a distance cutoff."""

from __future__ import annotations

import csv
import math
from pathlib import Path


def load_residues(path: str | Path) -> tuple[list[str], list[tuple[float, float, float]]]:
    """Read residue tokens and 3D coordinates from a structure file.

    Two formats. ``.csv``: columns residue,x,y,z with a header row. ``.pdb``:
    ATOM records, one residue per CA atom, token is the three-letter residue
    name. Returns (tokens, coords) in file order.
    """
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return _load_csv(path)
    if path.suffix.lower() in (".pdb", ".ent"):
        return _load_pdb(path)
    raise ValueError(f"{path}: unsupported structure format {path.suffix!r}")


def _load_csv(path: Path) -> tuple[list[str], list[tuple[float, float, float]]]:
    tokens: list[str] = []
    coords: list[tuple[float, float, float]] = []
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["residue", "x", "y", "z"]:
            raise ValueError(f"{path}: expected header residue,x,y,z")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ValueError(f"{path}: line {lineno}: expected 4 columns, got {len(row)}")
            name = row[0].strip()
            if not name:
                raise ValueError(f"{path}: line {lineno}: empty residue name")
            try:
                xyz = tuple(float(v) for v in row[1:])
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: non-numeric coordinate")
            tokens.append(name)
            coords.append(xyz)  # type: ignore[arg-type]
    return tokens, coords


def _load_pdb(path: Path) -> tuple[list[str], list[tuple[float, float, float]]]:
    tokens: list[str] = []
    coords: list[tuple[float, float, float]] = []
    with open(path) as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.startswith("ATOM"):
                continue
            # fixed-column PDB fields: atom name 13-16, residue name 18-20, xyz 31-54
            if line[12:16].strip() != "CA":
                continue
            name = line[17:20].strip()
            if not name:
                raise ValueError(f"{path}: line {lineno}: ATOM record has no residue name")
            try:
                xyz = (float(line[30:38]), float(line[38:46]), float(line[46:54]))
            except (ValueError, IndexError):
                raise ValueError(f"{path}: line {lineno}: malformed coordinates")
            tokens.append(name)
            coords.append(xyz)
    return tokens, coords


def epsilon_edges(
    coords: list[tuple[float, float, float]], epsilon: float
) -> list[tuple[int, int]]:
    """Edges between residue pairs within Euclidean distance `epsilon`."""
    if not math.isfinite(epsilon) or epsilon <= 0:
        raise ValueError(f"epsilon must be a positive finite number, got {epsilon}")
    limit = epsilon * epsilon
    edges = []
    for i in range(len(coords)):
        xi, yi, zi = coords[i]
        for j in range(i + 1, len(coords)):
            xj, yj, zj = coords[j]
            d2 = (xi - xj) ** 2 + (yi - yj) ** 2 + (zi - zj) ** 2
            if d2 <= limit:
                edges.append((i, j))
    return edges
