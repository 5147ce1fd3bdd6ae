"""Text inputs: one sentence per vertex, chain topology over sentence order."""

from __future__ import annotations


def split_sentences(text: str) -> tuple[str, ...]:
    """Split on full stops and drop blank fragments.

    Deliberately dumb: a full stop ends a sentence, nothing else does.
    Abbreviation handling belongs to whoever prepares the raw text.
    """
    parts = (piece.strip() for piece in text.split("."))
    return tuple(piece for piece in parts if piece)


def chain_edges(count: int, hop: int = 2) -> list[tuple[int, int]]:
    """Edges (i, j) with i < j <= i + hop over a path of `count` vertices."""
    if count < 0:
        raise ValueError(f"vertex count must be >= 0, got {count}")
    if hop < 1:
        raise ValueError(f"hop must be >= 1, got {hop}")
    return [
        (i, j)
        for i in range(count)
        for j in range(i + 1, min(i + hop, count - 1) + 1)
    ]
