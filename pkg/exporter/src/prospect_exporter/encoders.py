"""Encoders map tokens to fixed-width embedding vectors.

Two forms are supported by name. ``hash:<dim>`` builds the offline hashing
encoder below, which needs no model weights and is bit-reproducible across
platforms. ``<module>:<attribute>`` imports a user-supplied factory (for
example a wrapper around a pretrained transformer) and calls it with no
arguments; the returned object must expose ``dim`` and ``encode``.
"""

from __future__ import annotations

import hashlib
import importlib
from typing import Protocol, Sequence, runtime_checkable

import numpy as np


@runtime_checkable
class Encoder(Protocol):
    """Minimal surface the export pipeline relies on."""

    @property
    def dim(self) -> int: ...

    def encode(self, tokens: Sequence[str | bytes]) -> np.ndarray: ...


class EncoderLoadError(RuntimeError):
    """Raised when an encoder name cannot be resolved to a working encoder."""


class HashingEncoder:
    """Deterministic stand-in for a pretrained encoder.

    Each token is hashed with keyed blake2b in counter mode to fill ``dim``
    float64 slots, mapped into [-1, 1), and the row is scaled to unit norm.
    Identical tokens always land on identical vectors, so exports are
    byte-reproducible, while distinct tokens are near-orthogonal in
    expectation. Useful for tests, dry runs, and pipelines where the
    embedding only needs to separate token identities.
    """

    _KEY = b"prospect-exporter/hash-encoder"

    def __init__(self, dim: int) -> None:
        if dim < 1:
            raise ValueError(f"encoder dim must be >= 1, got {dim}")
        self._dim = int(dim)

    @property
    def dim(self) -> int:
        return self._dim

    def _token_vector(self, token: str | bytes) -> np.ndarray:
        data = token.encode("utf-8") if isinstance(token, str) else bytes(token)
        blocks = []
        # 32-byte digest -> four uint64 lanes per counter step.
        for counter in range((self._dim + 3) // 4):
            digest = hashlib.blake2b(
                data,
                digest_size=32,
                key=self._KEY,
                salt=counter.to_bytes(8, "little"),
            ).digest()
            blocks.append(np.frombuffer(digest, dtype="<u8"))
        lanes = np.concatenate(blocks)[: self._dim].astype(np.float64)
        # top 53 bits -> uniform [0, 1) -> [-1, 1)
        vec = (lanes / 2.0**64) * 2.0 - 1.0
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            vec = np.zeros(self._dim)
            vec[0] = 1.0
            return vec
        return vec / norm

    def encode(self, tokens: Sequence[str | bytes]) -> np.ndarray:
        if len(tokens) == 0:
            return np.zeros((0, self._dim))
        return np.stack([self._token_vector(t) for t in tokens])


def load_encoder(name: str) -> Encoder:
    """Resolve an encoder name of the form ``hash:<dim>`` or ``module:attr``."""
    head, sep, tail = name.partition(":")
    if not sep:
        raise EncoderLoadError(
            f"encoder name {name!r} must look like 'hash:<dim>' or 'module:attribute'"
        )
    if head == "hash":
        try:
            dim = int(tail)
        except ValueError:
            raise EncoderLoadError(f"encoder name {name!r}: dimension {tail!r} is not an integer")
        if dim < 1:
            raise EncoderLoadError(f"encoder name {name!r}: dimension must be >= 1")
        return HashingEncoder(dim)
    try:
        module = importlib.import_module(head)
    except ImportError as exc:
        raise EncoderLoadError(f"encoder module {head!r} failed to import: {exc}") from exc
    try:
        factory = getattr(module, tail)
    except AttributeError:
        raise EncoderLoadError(f"encoder module {head!r} has no attribute {tail!r}")
    encoder = factory()
    if not isinstance(encoder, Encoder):
        raise EncoderLoadError(
            f"{name!r} returned {type(encoder).__name__}, which lacks dim/encode"
        )
    return encoder
