"""
1. WL feature maps: hand examples, label-histogram oracle at h=0, permutation invariance
2. SP feature maps: hand examples and an exhaustive networkx pair-enumeration oracle
3. GL3 feature maps: hand examples and a brute-force triple oracle
4. kernel_value and normalize examples, degenerate graphs rejected
5. Gram matrices: symmetric, unit diagonal, PSD, spot entries match single-pair recomputation
6. Gram matrices do not depend on the worker count
7. FeatureBank observers see every block request with its phase
8. Gram files: binary and CSV export, corrupt payloads rejected
"""
from collections import Counter
from itertools import combinations

import networkx as nx
import numpy as np
import pytest

from conftest import make_graph
from graphs.graph import Dataset
from kernels.feature_maps import (
    GRAPHLET_CLASSES,
    FeatureMap,
    WLRelabeler,
    gl3_feature_map,
    kernel_value,
    normalize,
    sp_feature_map,
    wl_feature_map,
)
from kernels.gram import FeatureBank, gram_matrix
from kernels.gram_io import decode_gram, encode_gram, read_gram_binary, write_gram_binary, write_gram_csv
from kernels.spec import KernelKind, KernelSpec
from tools.errors import CheckpointFormatError, DegenerateGraphError


def random_permutations(g, count, seed=0):
    rng = np.random.default_rng(seed)
    return [g.permuted(rng.permutation(g.node_count).tolist()) for _ in range(count)]


# WL

def test_wl_single_node():
    assert dict(wl_feature_map(make_graph(1, [], [4]), 0)) == {(0, 4): 1}


def test_wl_isolated_nodes_share_one_key_per_iteration():
    fm = wl_feature_map(make_graph(2, []), 2)
    assert len(fm) == 3
    assert all(count == 2 for count in fm.values())
    assert sorted(iteration for iteration, _ in fm) == [0, 1, 2]


def test_wl_triangle_matches_hand_relabeling():
    relabeler = WLRelabeler()
    fm = wl_feature_map(make_graph(3, [(0, 1), (0, 2), (1, 2)]), 1, relabeler)
    expected_code = relabeler.code(1, 0, (0, 0))
    assert dict(fm) == {(0, 0): 3, (1, expected_code): 3}
    assert len(relabeler) == 1


def test_wl_h0_is_label_histogram(random_graphs):
    for g in random_graphs:
        expected = Counter(g.node_labels)
        assert dict(wl_feature_map(g, 0)) == {(0, label): count for label, count in expected.items()}


def test_wl_permutation_invariance(random_graphs):
    relabeler = WLRelabeler()
    for g in random_graphs[:10]:
        reference = wl_feature_map(g, 3, relabeler)
        for copy in random_permutations(g, 10):
            assert wl_feature_map(copy, 3, relabeler) == reference


def test_wl_distinguishes_different_neighborhoods():
    relabeler = WLRelabeler()
    path = wl_feature_map(make_graph(3, [(0, 1), (1, 2)]), 1, relabeler)
    triangle = wl_feature_map(make_graph(3, [(0, 1), (0, 2), (1, 2)]), 1, relabeler)
    assert path != triangle
    # iteration 0: 3 * 3; iteration 1: the middle path node matches all three triangle nodes
    assert kernel_value(path, triangle) == 12.0


# SP

def test_sp_examples():
    assert len(sp_feature_map(make_graph(1, []))) == 0
    assert dict(sp_feature_map(make_graph(2, [(0, 1)], [1, 0]))) == {(0, 1, 1): 1}
    assert dict(sp_feature_map(make_graph(3, [(0, 1), (1, 2)]))) == {(0, 0, 1): 2, (0, 0, 2): 1}


def test_sp_matches_pair_enumeration(random_graphs):
    for g in random_graphs:
        if g.node_count > 8:
            continue
        graph = nx.Graph()
        graph.add_nodes_from(range(g.node_count))
        graph.add_edges_from(g.edges)
        lengths = dict(nx.all_pairs_shortest_path_length(graph))
        expected = Counter()
        for u, v in combinations(range(g.node_count), 2):
            if v in lengths[u]:
                a, b = sorted((g.node_labels[u], g.node_labels[v]))
                expected[(a, b, lengths[u][v])] += 1
        assert dict(sp_feature_map(g)) == dict(expected)


# GL3

def test_gl3_examples():
    assert dict(gl3_feature_map(make_graph(3, [(0, 1), (0, 2), (1, 2)]))) == {"triangle": 1}
    assert dict(gl3_feature_map(make_graph(3, [(0, 1), (1, 2)]))) == {"path": 1}
    assert dict(gl3_feature_map(make_graph(4, [(0, 1), (1, 2), (2, 3), (0, 3)]))) == {"path": 4}
    assert len(gl3_feature_map(make_graph(2, [(0, 1)]))) == 0


def test_gl3_matches_triple_enumeration(random_graphs):
    for g in random_graphs:
        edges = set(g.edges)
        expected = Counter()
        for triple in combinations(range(g.node_count), 3):
            inside = sum(1 for pair in combinations(triple, 2) if pair in edges)
            expected[GRAPHLET_CLASSES[inside]] += 1
        assert dict(gl3_feature_map(g)) == {k: v for k, v in expected.items() if v}


def test_gl3_connected_only_drops_disconnected_classes():
    g = make_graph(4, [(0, 1), (1, 2)])
    assert dict(gl3_feature_map(g)) == {"empty": 1, "one_edge": 2, "path": 1}
    assert dict(gl3_feature_map(g, connected_only=True)) == {"path": 1}


def test_feature_map_totals_count_every_substructure(random_graphs):
    for g in random_graphs:
        n = g.node_count
        assert wl_feature_map(g, 3).total() == 4 * n
        assert gl3_feature_map(g).total() == n * (n - 1) * (n - 2) // 6
        assert sp_feature_map(g).total() <= n * (n - 1) // 2


# kernel values and normalization

def test_kernel_value_examples():
    assert kernel_value(FeatureMap({"a": 1}), FeatureMap({"b": 2})) == 0.0
    same = FeatureMap({"k1": 2, "k2": 1})
    assert kernel_value(same, same) == 5.0
    assert kernel_value(FeatureMap({"k1": 2}), FeatureMap({"k1": 3, "k2": 7})) == 6.0


def test_normalize_examples():
    assert normalize(2, 4, 1) == 1.0
    assert normalize(0, 5, 7) == 0.0
    assert normalize(3, 9, 4) == 0.5
    with pytest.raises(DegenerateGraphError):
        normalize(0, 0, 1, graph_id=12)


def test_kernel_spec_requires_height_for_wl_only():
    with pytest.raises(ValueError):
        KernelSpec(kind=KernelKind.WL)
    with pytest.raises(ValueError):
        KernelSpec(kind=KernelKind.SP, h=2)
    assert KernelSpec(kind="wl", h=2).describe() == "wl(h=2) normalized"


# Gram matrices

def _dataset(graphs):
    labels = max(label for g in graphs for label in g.node_labels) + 1
    return Dataset(tuple(graphs), None, tuple(range(labels)), name="fixture")


def test_gram_small_examples():
    spec = KernelSpec(kind=KernelKind.WL, h=2)
    single = _dataset([make_graph(3, [(0, 1)])])
    assert gram_matrix(single, spec).values.tolist() == [[1.0]]
    g = make_graph(3, [(0, 1), (1, 2)], [0, 1, 0])
    pair = _dataset([g, g.permuted([2, 0, 1])])
    assert np.allclose(gram_matrix(pair, spec).values, 1.0)


@pytest.mark.parametrize("spec", [
    KernelSpec(kind=KernelKind.WL, h=2),
    KernelSpec(kind=KernelKind.SP),
    KernelSpec(kind=KernelKind.WL, h=1, normalize=False),
])
def test_gram_invariants(random_graphs, spec):
    graphs = [g for g in random_graphs if g.edges]
    gram = gram_matrix(_dataset(graphs), spec)
    assert gram.size == len(graphs)
    assert gram.is_symmetric()
    assert gram.is_psd()
    if spec.normalize:
        assert np.all(np.diag(gram.values) == 1.0)


def test_gram_spot_entries_match_single_pairs(random_graphs):
    spec = KernelSpec(kind=KernelKind.WL, h=2)
    dataset = _dataset(random_graphs)
    gram = gram_matrix(dataset, spec)
    relabeler = WLRelabeler()
    maps = [wl_feature_map(g, 2, relabeler) for g in dataset.graphs]
    rng = np.random.default_rng(1)
    for _ in range(20):
        i, j = rng.integers(0, len(dataset), size=2)
        expected = normalize(
            kernel_value(maps[i], maps[j]),
            kernel_value(maps[i], maps[i]),
            kernel_value(maps[j], maps[j]),
        )
        assert gram.values[i, j] == pytest.approx(expected, rel=1e-12, abs=1e-15)


def test_gram_is_independent_of_worker_count(random_graphs):
    dataset = _dataset(random_graphs)
    spec = KernelSpec(kind=KernelKind.WL, h=3)
    single = gram_matrix(dataset, spec, workers=1).values
    parallel = gram_matrix(dataset, spec, workers=8).values
    assert np.array_equal(single, parallel)


def test_gram_rejects_empty_feature_map_when_normalizing():
    dataset = _dataset([make_graph(2, [(0, 1)]), make_graph(2, [])])
    with pytest.raises(DegenerateGraphError):
        gram_matrix(dataset, KernelSpec(kind=KernelKind.SP))
    raw = gram_matrix(dataset, KernelSpec(kind=KernelKind.SP, normalize=False))
    assert raw.values.tolist() == [[1.0, 0.0], [0.0, 0.0]]


def test_feature_bank_reports_block_access(random_graphs):
    bank = FeatureBank.build(_dataset(random_graphs), KernelSpec(kind=KernelKind.WL, h=1))
    seen = []
    bank.add_observer(lambda phase, rows, cols: seen.append((phase, rows, cols)))
    block = bank.block([0, 2], [1, 3, 4], phase="select")
    assert block.shape == (2, 3)
    assert seen == [("select", [0, 2], [1, 3, 4])]
    full = bank.gram(phase="fit").values
    assert np.array_equal(block, full[np.ix_([0, 2], [1, 3, 4])])


# Gram files

def test_gram_binary_file(tmp_path, random_graphs):
    spec = KernelSpec(kind=KernelKind.GL3, graphlet_connected_only=True, normalize=False)
    gram = gram_matrix(_dataset(random_graphs), spec)
    path = str(tmp_path / "out" / "gram.bin")
    write_gram_binary(path, gram)
    loaded = read_gram_binary(path)
    assert np.array_equal(loaded.values, gram.values)
    assert loaded.kernel_spec == spec
    assert loaded.normalized is False


def test_gram_csv_export(tmp_path):
    gram = gram_matrix(_dataset([make_graph(2, [(0, 1)]), make_graph(3, [(0, 1)])]), KernelSpec(kind=KernelKind.WL, h=1))
    path = str(tmp_path / "gram.csv")
    write_gram_csv(path, gram)
    assert np.array_equal(np.loadtxt(path, delimiter=","), gram.values)


def test_corrupt_gram_payload():
    gram = gram_matrix(_dataset([make_graph(2, [(0, 1)])]), KernelSpec(kind=KernelKind.WL, h=1))
    payload = encode_gram(gram)
    with pytest.raises(CheckpointFormatError):
        decode_gram(payload[:-3])
    with pytest.raises(CheckpointFormatError):
        decode_gram(b"XXXX" + payload[4:])
