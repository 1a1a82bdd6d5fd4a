"""TU dataset loader - reads the community graph-dataset text format"""

import glob
import logging
import os
from collections import defaultdict
from typing import Dict, List, Tuple

from graphs.graph import Dataset, Graph
from tools.errors import DatasetFormatError, DatasetLoadError
from tools.file_reader import file_exists, read_int_column, read_int_rows
from tools.logger import log_stage

logger = logging.getLogger(__name__)

TU_FILES = {
    "edges": "{name}_A.txt",
    "indicator": "{name}_graph_indicator.txt",
    "graph_labels": "{name}_graph_labels.txt",
    "node_labels": "{name}_node_labels.txt",
}


def _dataset_name(directory_path: str) -> str:
    """Name prefix of the TU files; the directory name unless the edge file says otherwise."""
    name = os.path.basename(os.path.normpath(directory_path))
    if os.path.exists(os.path.join(directory_path, TU_FILES["edges"].format(name=name))):
        return name
    candidates = sorted(glob.glob(os.path.join(directory_path, "*_A.txt")))
    if len(candidates) == 1:
        return os.path.basename(candidates[0])[: -len("_A.txt")]
    return name


def load_tu_dataset(directory_path: str) -> Dataset:
    """Load a TU-format dataset directory.

    Graphs follow the order of first appearance in the graph-indicator file;
    node ids are re-based to 0 within each graph; node labels are encoded
    dataset-wide in ascending raw-value order and class values are remapped to
    a contiguous [0, C) range.
    """
    name = _dataset_name(directory_path)
    paths = {key: os.path.join(directory_path, pattern.format(name=name)) for key, pattern in TU_FILES.items()}
    for path in paths.values():
        if not file_exists(path):
            raise DatasetLoadError(path)

    log_stage("Dataset loader", "start", {"directory": directory_path, "name": name})

    indicator = read_int_column(paths["indicator"])
    raw_node_labels = read_int_column(paths["node_labels"])
    raw_graph_labels = read_int_column(paths["graph_labels"])
    edge_rows = read_int_rows(paths["edges"])

    if len(raw_node_labels) < len(indicator):
        raise DatasetFormatError(
            f"{paths['node_labels']}: node {len(raw_node_labels) + 1} has no label "
            f"({len(raw_node_labels)} labels for {len(indicator)} nodes)"
        )
    if len(raw_node_labels) > len(indicator):
        raise DatasetFormatError(
            f"{paths['node_labels']}: {len(raw_node_labels)} labels for {len(indicator)} nodes"
        )

    # graph id -> member node ids (1-based, file order)
    graph_order: List[int] = []
    members: Dict[int, List[int]] = defaultdict(list)
    for node_id, graph_id in enumerate(indicator, 1):
        if graph_id not in members:
            graph_order.append(graph_id)
        members[graph_id].append(node_id)

    if len(raw_graph_labels) != len(graph_order):
        raise DatasetFormatError(
            f"{paths['graph_labels']}: {len(raw_graph_labels)} graph labels for {len(graph_order)} graphs"
        )

    local_index: Dict[int, Tuple[int, int]] = {}
    for graph_id, nodes in members.items():
        for position, node_id in enumerate(nodes):
            local_index[node_id] = (graph_id, position)

    edges_by_graph: Dict[int, List[Tuple[int, int]]] = defaultdict(list)
    seen_records = set()
    duplicates = 0
    for line_number, row in enumerate(edge_rows, 1):
        if len(row) != 2:
            raise DatasetFormatError(f"{paths['edges']}, record {line_number}: expected 2 node ids")
        source, target = row
        if source not in local_index or target not in local_index:
            raise DatasetFormatError(f"{paths['edges']}, record {line_number}: unknown node id")
        source_graph, u = local_index[source]
        target_graph, v = local_index[target]
        if source_graph != target_graph:
            raise DatasetFormatError(
                f"{paths['edges']}, record {line_number}: edge ({source}, {target}) "
                f"crosses graphs {source_graph} and {target_graph}"
            )
        if (source, target) in seen_records:
            duplicates += 1
            continue
        seen_records.add((source, target))
        edges_by_graph[source_graph].append((u, v))

    label_alphabet = tuple(sorted(set(raw_node_labels)))
    label_ids = {raw: i for i, raw in enumerate(label_alphabet)}
    class_values = tuple(sorted(set(raw_graph_labels)))
    class_ids = {raw: i for i, raw in enumerate(class_values)}

    graphs = []
    self_loops = 0
    for index, graph_id in enumerate(graph_order):
        nodes = members[graph_id]
        labels = [label_ids[raw_node_labels[node_id - 1]] for node_id in nodes]
        # (u, v) and (v, u) records of one undirected edge are not repeats
        graph, loops, _ = Graph.from_edges(len(nodes), edges_by_graph[graph_id], labels, graph_id=index)
        self_loops += loops
        graphs.append(graph)

    if self_loops or duplicates:
        logger.warning(
            "%s: dropped %d self-loops and %d duplicate edge records", name, self_loops, duplicates
        )

    dataset = Dataset(
        graphs=tuple(graphs),
        targets=tuple(class_ids[raw] for raw in raw_graph_labels),
        label_alphabet=label_alphabet,
        name=name,
        class_values=class_values,
    )

    log_stage("Dataset loader", "complete", {
        "output": {
            "graphs": len(dataset),
            "classes": len(class_values),
            "labels": len(label_alphabet),
            "self_loops_dropped": self_loops,
            "duplicate_edges_dropped": duplicates,
        }
    })
    return dataset
