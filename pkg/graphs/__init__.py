"""Graphs package - Graph, Dataset, TU loader and basic graph algorithms"""

from graphs.graph import (
    UNREACHABLE,
    Dataset,
    Graph,
    normalized_adjacency,
    shortest_paths,
)
from graphs.tu_loader import load_tu_dataset
