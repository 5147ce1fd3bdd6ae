"""Two-layer feature attribution over map graphs of token embeddings."""

__version__ = "0.1.0"

from .graphs import (
    LabeledDatum,
    MapGraph,
    ProspectMap,
    Sprite,
    adjacency_lists,
    build_chain_graph,
    build_geometric_graph,
    build_grid_graph,
    connected_components,
    grid_coords,
    neighborhood,
)

__all__ = [
    "LabeledDatum",
    "MapGraph",
    "ProspectMap",
    "Sprite",
    "adjacency_lists",
    "build_chain_graph",
    "build_geometric_graph",
    "build_grid_graph",
    "connected_components",
    "grid_coords",
    "neighborhood",
    "__version__",
]
