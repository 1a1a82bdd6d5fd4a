"""Graph data model and basic graph algorithms"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import shortest_path

from tools.errors import ContractViolation

# Distance entry for node pairs with no connecting path.
UNREACHABLE = -1

Edge = Tuple[int, int]


@dataclass(frozen=True)
class Graph:
    """Undirected node-labeled graph.

    Edges are stored once as (u, v) with u < v; node labels are dataset-wide
    label ids.
    """

    node_count: int
    edges: Tuple[Edge, ...]
    node_labels: Tuple[int, ...]
    graph_id: int = 0

    def __post_init__(self):
        if self.node_count < 1:
            raise ContractViolation(f"graph {self.graph_id}: node_count must be >= 1")
        if len(self.node_labels) != self.node_count:
            raise ContractViolation(
                f"graph {self.graph_id}: {len(self.node_labels)} labels for {self.node_count} nodes"
            )
        if any(label < 0 for label in self.node_labels):
            raise ContractViolation(f"graph {self.graph_id}: negative node label id")
        seen = set()
        for u, v in self.edges:
            if not (0 <= u < v < self.node_count):
                raise ContractViolation(f"graph {self.graph_id}: invalid edge ({u}, {v})")
            if (u, v) in seen:
                raise ContractViolation(f"graph {self.graph_id}: duplicate edge ({u}, {v})")
            seen.add((u, v))

    @classmethod
    def from_edges(
        cls,
        node_count: int,
        edges: Iterable[Edge],
        node_labels: Sequence[int],
        graph_id: int = 0,
    ) -> Tuple["Graph", int, int]:
        """Build a graph from raw edges, dropping self-loops and duplicates.

        Returns the graph with the number of self-loops and duplicate edges removed.
        """
        canonical = set()
        self_loops = 0
        duplicates = 0
        for u, v in edges:
            if u == v:
                self_loops += 1
                continue
            key = (u, v) if u < v else (v, u)
            if key in canonical:
                duplicates += 1
                continue
            canonical.add(key)
        graph = cls(node_count, tuple(sorted(canonical)), tuple(node_labels), graph_id)
        return graph, self_loops, duplicates

    @cached_property
    def neighbors(self) -> Tuple[Tuple[int, ...], ...]:
        """N(v) for every node, in ascending order."""
        adjacency: List[List[int]] = [[] for _ in range(self.node_count)]
        for u, v in self.edges:
            adjacency[u].append(v)
            adjacency[v].append(u)
        return tuple(tuple(sorted(nodes)) for nodes in adjacency)

    def adjacency(self) -> sparse.csr_matrix:
        """Symmetric 0/1 adjacency matrix A."""
        n = self.node_count
        if not self.edges:
            return sparse.csr_matrix((n, n), dtype=np.float64)
        rows, cols = zip(*self.edges)
        data = np.ones(2 * len(self.edges), dtype=np.float64)
        return sparse.csr_matrix(
            (data, (np.concatenate([rows, cols]), np.concatenate([cols, rows]))), shape=(n, n)
        )

    def permuted(self, permutation: Sequence[int]) -> "Graph":
        """Copy of the graph with node i renamed to permutation[i]."""
        permutation = list(permutation)
        if sorted(permutation) != list(range(self.node_count)):
            raise ContractViolation("permutation must be a rearrangement of the node indices")
        labels = [0] * self.node_count
        for old, new in enumerate(permutation):
            labels[new] = self.node_labels[old]
        edges = []
        for u, v in self.edges:
            a, b = permutation[u], permutation[v]
            edges.append((a, b) if a < b else (b, a))
        return Graph(self.node_count, tuple(sorted(edges)), tuple(labels), self.graph_id)


@dataclass(frozen=True)
class Dataset:
    """Ordered graphs with per-graph class ids.

    label_alphabet holds the raw node-label values in id order: node label id i
    stands for raw label label_alphabet[i]. Targets may be None for an
    unlabeled pre-training set.
    """

    graphs: Tuple[Graph, ...]
    targets: Optional[Tuple[int, ...]]
    label_alphabet: Tuple[int, ...]
    name: str = "dataset"
    class_values: Tuple[int, ...] = field(default=())

    def __post_init__(self):
        if self.targets is not None and len(self.targets) != len(self.graphs):
            raise ContractViolation(
                f"{self.name}: {len(self.targets)} targets for {len(self.graphs)} graphs"
            )
        alphabet_size = len(self.label_alphabet)
        for graph in self.graphs:
            if any(label >= alphabet_size for label in graph.node_labels):
                raise ContractViolation(
                    f"{self.name}: graph {graph.graph_id} uses a label outside the alphabet"
                )

    def __len__(self) -> int:
        return len(self.graphs)

    @property
    def num_classes(self) -> int:
        if self.targets is None:
            return 0
        return max(self.targets) + 1 if self.targets else 0

    def subset(self, indices: Sequence[int], name: Optional[str] = None) -> "Dataset":
        """Dataset restricted to the given graph indices, alphabet preserved."""
        graphs = tuple(self.graphs[i] for i in indices)
        targets = None if self.targets is None else tuple(self.targets[i] for i in indices)
        return Dataset(graphs, targets, self.label_alphabet, name or self.name, self.class_values)

    def with_targets(self, targets: Optional[Sequence[int]]) -> "Dataset":
        return Dataset(
            self.graphs,
            None if targets is None else tuple(int(t) for t in targets),
            self.label_alphabet,
            self.name,
            self.class_values,
        )


def shortest_paths(g: Graph) -> np.ndarray:
    """All-pairs BFS distances as an int64 matrix; UNREACHABLE where no path exists."""
    distances = shortest_path(g.adjacency(), method="D", directed=False, unweighted=True)
    result = np.full(distances.shape, UNREACHABLE, dtype=np.int64)
    reachable = np.isfinite(distances)
    result[reachable] = distances[reachable].astype(np.int64)
    return result


def normalized_adjacency(g: Graph) -> sparse.csr_matrix:
    """D̃⁻¹Ã with Ã = A + I; every row sums to one."""
    a_tilde = g.adjacency() + sparse.identity(g.node_count, dtype=np.float64, format="csr")
    degrees = np.asarray(a_tilde.sum(axis=1)).ravel()
    return sparse.csr_matrix(sparse.diags(1.0 / degrees) @ a_tilde)
