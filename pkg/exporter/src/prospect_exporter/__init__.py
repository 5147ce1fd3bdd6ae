"""Turn raw documents, images, and structures into map-graph datum files.

The exporter owes the downstream attribution pipeline exactly one thing:
datum files that its strict loader accepts. Everything here is organized
around that contract. Each input becomes one JSON file holding per-vertex
embeddings, an edge list, and a label; topology comes from the input's own
geometry (sentence order, patch grid, residue coordinates) and never from
the label, so the graph structure cannot leak class information.
"""

from prospect_exporter.encoders import Encoder, HashingEncoder, load_encoder
from prospect_exporter.export import ExportJob, export, read_annotations, read_labels
from prospect_exporter.image import grid_edges, tile_patches
from prospect_exporter.structure import epsilon_edges, load_residues
from prospect_exporter.text import chain_edges, split_sentences

__all__ = [
    "Encoder",
    "ExportJob",
    "HashingEncoder",
    "chain_edges",
    "epsilon_edges",
    "export",
    "grid_edges",
    "load_encoder",
    "load_residues",
    "read_annotations",
    "read_labels",
    "split_sentences",
    "tile_patches",
]
