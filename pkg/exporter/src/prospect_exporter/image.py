"""Image inputs: non-overlapping square patches on an 8-connected grid.

Pillow is imported lazily so text and structure exports work without it.
"""

from __future__ import annotations

from pathlib import Path


def tile_patches(
    path: str | Path, patch_size: int = 224
) -> tuple[list[bytes], int, int, list[tuple[float, float]]]:
    """Cut an image into a grid of patch tokens.

    Returns (patches, rows, cols, coords). Each patch is the raw RGB byte
    string of one `patch_size` x `patch_size` tile, row-major from the top
    left; coords are patch-center pixel positions (x, y). Trailing pixels
    that do not fill a whole tile are dropped.
    """
    if patch_size < 1:
        raise ValueError(f"patch size must be >= 1, got {patch_size}")
    try:
        from PIL import Image
    except ImportError as exc:
        raise RuntimeError(
            "image export requires Pillow (pip install prospect-exporter[image])"
        ) from exc
    with Image.open(path) as raw:
        img = raw.convert("RGB")
        width, height = img.size
        cols = width // patch_size
        rows = height // patch_size
        if rows == 0 or cols == 0:
            raise ValueError(
                f"{path}: image {width}x{height} is smaller than one {patch_size}px patch"
            )
        patches: list[bytes] = []
        coords: list[tuple[float, float]] = []
        for gy in range(rows):
            for gx in range(cols):
                left, top = gx * patch_size, gy * patch_size
                tile = img.crop((left, top, left + patch_size, top + patch_size))
                patches.append(tile.tobytes())
                coords.append((left + patch_size / 2.0, top + patch_size / 2.0))
    return patches, rows, cols, coords


def grid_edges(rows: int, cols: int, connectivity: int = 8) -> list[tuple[int, int]]:
    """Edges of a rows x cols grid, 4- or 8-connected, row-major indices."""
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    if rows < 1 or cols < 1:
        raise ValueError(f"grid must be at least 1x1, got {rows}x{cols}")
    steps = [(0, 1), (1, 0)]
    if connectivity == 8:
        steps += [(1, 1), (1, -1)]
    edges = []
    for y in range(rows):
        for x in range(cols):
            for dy, dx in steps:
                ny, nx = y + dy, x + dx
                if 0 <= ny < rows and 0 <= nx < cols:
                    a, b = y * cols + x, ny * cols + nx
                    edges.append((min(a, b), max(a, b)))
    edges.sort()
    return edges
