"""Explicit feature maps for the WL subtree, shortest-path and size-3 graphlet kernels"""

import math
import threading
from collections import Counter
from itertools import combinations
from typing import Dict, Hashable, Iterator, Mapping, Optional, Tuple

import numpy as np

from graphs.graph import Graph, shortest_paths
from kernels.spec import KernelKind, KernelSpec
from tools.errors import DegenerateGraphError

GRAPHLET_EMPTY = "empty"
GRAPHLET_ONE_EDGE = "one_edge"
GRAPHLET_PATH = "path"
GRAPHLET_TRIANGLE = "triangle"

# indexed by the number of edges inside a node triple
GRAPHLET_CLASSES = (GRAPHLET_EMPTY, GRAPHLET_ONE_EDGE, GRAPHLET_PATH, GRAPHLET_TRIANGLE)


class FeatureMap(Mapping):
    """Sparse count vector φ(x); only keys with a positive count are stored."""

    __slots__ = ("_counts",)

    def __init__(self, counts: Optional[Mapping[Hashable, int]] = None):
        stored: Dict[Hashable, int] = {}
        for key, count in (counts or {}).items():
            count = int(count)
            if count < 0:
                raise ValueError(f"negative count for feature {key!r}")
            if count:
                stored[key] = count
        self._counts = stored

    def __getitem__(self, key: Hashable) -> int:
        return self._counts[key]

    def __iter__(self) -> Iterator[Hashable]:
        return iter(self._counts)

    def __len__(self) -> int:
        return len(self._counts)

    def __repr__(self) -> str:
        return f"FeatureMap({self._counts!r})"

    def dot(self, other: "FeatureMap") -> int:
        small, large = (self, other) if len(self) <= len(other) else (other, self)
        return sum(count * large._counts.get(key, 0) for key, count in small._counts.items())

    def squared_norm(self) -> int:
        return sum(count * count for count in self._counts.values())

    def total(self) -> int:
        return sum(self._counts.values())


class WLRelabeler:
    """Run-scoped injective recoding table for WL signatures.

    Every graph of one kernel run must go through the same relabeler so that
    identical subtree patterns receive identical ids across graphs.
    """

    def __init__(self):
        self._table: Dict[Tuple, int] = {}
        self._lock = threading.Lock()

    def code(self, iteration: int, own: int, neighborhood: Tuple[int, ...]) -> int:
        key = (iteration, own, neighborhood)
        with self._lock:
            code = self._table.get(key)
            if code is None:
                code = len(self._table)
                self._table[key] = code
            return code

    def __len__(self) -> int:
        return len(self._table)


def wl_feature_map(g: Graph, h: int, relabeler: Optional[WLRelabeler] = None) -> FeatureMap:
    """Counts of compressed WL labels over iterations 0..h, keyed (iteration, label)."""
    if h < 0:
        raise ValueError("h must be >= 0")
    relabeler = relabeler if relabeler is not None else WLRelabeler()

    labels = list(g.node_labels)
    counts = Counter((0, label) for label in labels)
    for iteration in range(1, h + 1):
        labels = [
            relabeler.code(iteration, labels[v], tuple(sorted(labels[u] for u in g.neighbors[v])))
            for v in range(g.node_count)
        ]
        counts.update((iteration, label) for label in labels)
    return FeatureMap(counts)


def sp_feature_map(g: Graph) -> FeatureMap:
    """Counts of (smaller label, larger label, distance) over reachable node pairs."""
    distances = shortest_paths(g)
    rows, cols = np.triu_indices(g.node_count, k=1)
    lengths = distances[rows, cols]
    reachable = lengths > 0
    labels = np.asarray(g.node_labels, dtype=np.int64)
    first = labels[rows[reachable]]
    second = labels[cols[reachable]]
    low = np.minimum(first, second)
    high = np.maximum(first, second)
    return FeatureMap(Counter(zip(low.tolist(), high.tolist(), lengths[reachable].tolist())))


def gl3_feature_map(g: Graph, connected_only: bool = False) -> FeatureMap:
    """Counts of induced 3-node subgraph classes over every node triple, labels ignored."""
    n = g.node_count
    if n < 3:
        return FeatureMap()
    adjacency = g.adjacency().toarray().astype(np.int64)
    triples = np.fromiter(
        (node for triple in combinations(range(n), 3) for node in triple), dtype=np.int64
    ).reshape(-1, 3)
    i, j, k = triples[:, 0], triples[:, 1], triples[:, 2]
    edge_counts = adjacency[i, j] + adjacency[i, k] + adjacency[j, k]
    histogram = np.bincount(edge_counts, minlength=4)
    counts = {GRAPHLET_CLASSES[e]: int(histogram[e]) for e in range(4)}
    if connected_only:
        counts = {key: counts[key] for key in (GRAPHLET_PATH, GRAPHLET_TRIANGLE)}
    return FeatureMap(counts)


def feature_map(g: Graph, spec: KernelSpec, relabeler: Optional[WLRelabeler] = None) -> FeatureMap:
    if spec.kind == KernelKind.WL:
        return wl_feature_map(g, spec.h, relabeler)
    if spec.kind == KernelKind.SP:
        return sp_feature_map(g)
    return gl3_feature_map(g, spec.graphlet_connected_only)


def kernel_value(fm1: FeatureMap, fm2: FeatureMap) -> float:
    """k(x, y) = <φ(x), φ(y)> as a sparse dot product."""
    return float(fm1.dot(fm2))


def normalize(kxy: float, kxx: float, kyy: float, graph_id: Optional[int] = None) -> float:
    """Cosine normalization k(x,y) / sqrt(k(x,x) k(y,y))."""
    if kxx <= 0 or kyy <= 0:
        raise DegenerateGraphError(graph_id)
    return kxy / math.sqrt(kxx * kyy)
