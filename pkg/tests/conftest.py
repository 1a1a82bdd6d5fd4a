import os
import sys
from typing import List, Sequence, Tuple

import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from config.settings import get_settings
from graphs.graph import Dataset, Graph
from models.dgcnn import Conv1dSpec, NetworkConfig
from tools.logger import set_history_path

# (node_count, edges) templates; the first two contain a triangle
TRIANGLE_TEMPLATES = [
    (6, [(0, 1), (0, 2), (1, 2), (3, 4)]),
    (6, [(0, 1), (0, 2), (1, 2), (2, 3), (3, 4)]),
]
NO_TRIANGLE_TEMPLATES = [
    (6, [(0, 1), (1, 2), (2, 3), (0, 3), (4, 5)]),
    (6, [(0, 1), (0, 2), (0, 3), (0, 4)]),
]


def make_graph(node_count: int, edges: Sequence[Tuple[int, int]], labels: Sequence[int] = None, graph_id: int = 0) -> Graph:
    labels = list(labels) if labels is not None else [0] * node_count
    graph, _, _ = Graph.from_edges(node_count, edges, labels, graph_id)
    return graph


def random_graph(rng: np.random.Generator, node_count: int, edge_probability: float = 0.35,
                 num_labels: int = 3, graph_id: int = 0) -> Graph:
    edges = [
        (u, v)
        for u in range(node_count)
        for v in range(u + 1, node_count)
        if rng.random() < edge_probability
    ]
    labels = rng.integers(0, num_labels, size=node_count).tolist()
    return make_graph(node_count, edges, labels, graph_id)


def random_dataset(seed: int, size: int = 20, num_labels: int = 3, min_nodes: int = 4, max_nodes: int = 9) -> Dataset:
    rng = np.random.default_rng(seed)
    graphs = [
        random_graph(rng, int(rng.integers(min_nodes, max_nodes + 1)), num_labels=num_labels, graph_id=i)
        for i in range(size)
    ]
    targets = tuple(i % 2 for i in range(size))
    return Dataset(tuple(graphs), targets, tuple(range(num_labels)), name="random")


def write_tu(directory, name: str, edges: List[Tuple[int, int]], indicator: List[int],
             graph_labels: List[int], node_labels: List[int] = None) -> str:
    """Write a TU-format dataset; node_labels=None leaves the node-label file out."""
    path = os.path.join(str(directory), name)
    os.makedirs(path, exist_ok=True)

    def write(suffix, lines):
        with open(os.path.join(path, f"{name}_{suffix}.txt"), "w") as f:
            f.write("\n".join(lines) + "\n")

    write("A", [f"{u}, {v}" for u, v in edges])
    write("graph_indicator", [str(g) for g in indicator])
    write("graph_labels", [str(c) for c in graph_labels])
    if node_labels is not None:
        write("node_labels", [str(label) for label in node_labels])
    return path


@pytest.fixture(autouse=True)
def trace_history(tmp_path):
    path = str(tmp_path / "trace_history.jsonl")
    set_history_path(path)
    yield path
    set_history_path(None)


@pytest.fixture(scope="function")
def tiny_tu_dir(tmp_path):
    # graph 1: path 1-2-3 with a self-loop on 1; graph 2: triangle 4-5-6 with a repeated edge
    return write_tu(
        tmp_path,
        "TINY",
        edges=[(1, 2), (2, 1), (2, 3), (3, 2), (1, 1), (4, 5), (5, 4), (5, 6), (6, 5), (4, 6), (6, 4), (4, 5)],
        indicator=[1, 1, 1, 2, 2, 2],
        graph_labels=[-1, 1],
        node_labels=[6, 3, 6, 3, 3, 9],
    )


@pytest.fixture(scope="function")
def random_graphs():
    rng = np.random.default_rng(7)
    return [random_graph(rng, int(rng.integers(1, 11)), graph_id=i) for i in range(25)]


@pytest.fixture(scope="function")
def small_dataset():
    return random_dataset(seed=3)


@pytest.fixture(scope="function")
def triangle_dataset():
    """20 unlabeled-node graphs of 6 nodes; class 1 exactly when a triangle is present."""
    rng = np.random.default_rng(11)
    graphs, targets = [], []
    for copy in range(5):
        for cls, templates in ((1, TRIANGLE_TEMPLATES), (0, NO_TRIANGLE_TEMPLATES)):
            for node_count, edges in templates:
                base = make_graph(node_count, edges)
                graphs.append(base.permuted(rng.permutation(node_count).tolist()))
                targets.append(cls)
    graphs = [Graph(g.node_count, g.edges, g.node_labels, i) for i, g in enumerate(graphs)]
    return Dataset(tuple(graphs), tuple(targets), (0,), name="triangles")


@pytest.fixture(scope="function")
def small_network_config():
    return NetworkConfig(
        num_labels=3,
        num_classes=2,
        conv_channels=[4, 4, 1],
        sortpool_k=5,
        conv1d=[Conv1dSpec(filters=4), Conv1dSpec(filters=4, width=2, stride=1)],
        dense_width=8,
    )


@pytest.fixture(scope="function")
def small_experiment_values():
    """Flat config keys for a fast DGCNN run on a tiny network."""
    return {
        "conv_channels": "4, 4, 1",
        "sortpool_k": "5",
        "conv1d_filters": "4, 4",
        "conv1d_widths": "0, 2",
        "conv1d_strides": "0, 1",
        "dense_width": "8",
        "finetune_epochs": "2",
        "finetune_batch_size": "8",
        "pretrain_epochs": "1",
        "pretrain_batch_size": "16",
        "repetitions": "1",
        "seed": "5",
    }


def dataset_dir(name: str) -> str:
    return os.path.join(get_settings().DATA_DIR, name)


def require_dataset(name: str) -> str:
    path = dataset_dir(name)
    if not os.path.isdir(path):
        pytest.skip(f"{name} not found under {get_settings().DATA_DIR}")
    return path
