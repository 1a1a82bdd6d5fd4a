"""
1. Full pair sets hold every i <= j pair, self-pairs included, with the Gram entry as target
2. Sampled pair sets are distinct, ordered, reproducible per seed and bounded by M(M+1)/2
3. auto mode switches to sampling above the full-pair limit
4. A zero network cannot move: every epoch loss is the mean squared target
5. A single self-pair with target 1 is fitted to near-zero loss
6. The predicted kernel matrix is symmetric and positive semi-definite
7. A non-finite loss stops training with the offending batch
"""
import numpy as np
import pytest

from conftest import make_graph, random_graph
from graphs.graph import Dataset
from kernels.gram import GramMatrix
from kernels.spec import KernelKind, KernelSpec
from models.dgcnn import build, embed
from pretrain.siamese import (
    PairSampling,
    PretrainConfig,
    build_pairs,
    kernel_correlation,
    pair_count,
    predicted_kernel,
    predicted_kernel_matrix,
    pretrain,
)
from tools.errors import ContractViolation, PairSamplingError, TrainingDivergedError

SPEC = KernelSpec(kind=KernelKind.WL, h=2)
PATH = make_graph(5, [(0, 1), (1, 2), (2, 3), (3, 4)], [0, 1, 2, 1, 0])


def _unlabeled(graphs):
    return Dataset(tuple(graphs), None, (0, 1, 2))


def _gram(values):
    return GramMatrix(np.asarray(values, dtype=np.float64), True, SPEC)


def test_pair_count():
    assert [pair_count(m) for m in (1, 2, 3, 10)] == [1, 3, 6, 55]


def test_full_pairs_two_graphs():
    u = _unlabeled([PATH, make_graph(2, [(0, 1)])])
    pairs = build_pairs(u, _gram([[1.0, 0.25], [0.25, 1.0]]), PairSampling.full())
    assert pairs.pairs == [(0, 0, 1.0), (0, 1, 0.25), (1, 1, 1.0)]


def test_full_pairs_single_graph():
    pairs = build_pairs(_unlabeled([PATH]), _gram([[1.0]]), PairSampling.full())
    assert pairs.pairs == [(0, 0, 1.0)]


def test_gram_must_cover_the_pool():
    with pytest.raises(ContractViolation):
        build_pairs(_unlabeled([PATH, PATH]), _gram([[1.0]]), PairSampling.full())


def test_sampled_pairs():
    size = 12
    values = np.arange(size * size, dtype=np.float64).reshape(size, size)
    u = _unlabeled([PATH] * size)
    gram = _gram((values + values.T) / 2.0)
    first = build_pairs(u, gram, PairSampling.sampled(30, seed=3))
    second = build_pairs(u, gram, PairSampling.sampled(30, seed=3))
    other = build_pairs(u, gram, PairSampling.sampled(30, seed=4))

    assert first.pairs == second.pairs
    assert first.pairs != other.pairs
    assert len(first) == 30
    assert len({(i, j) for i, j, _ in first.pairs}) == 30
    for i, j, target in first.pairs:
        assert 0 <= i <= j < size
        assert target == gram.values[i, j]

    everything = build_pairs(u, gram, PairSampling.sampled(pair_count(size), seed=0))
    assert sorted((i, j) for i, j, _ in everything.pairs) == sorted(
        (i, j) for i in range(size) for j in range(i, size)
    )
    with pytest.raises(PairSamplingError):
        build_pairs(u, gram, PairSampling.sampled(pair_count(size) + 1))


def test_resample():
    u = _unlabeled([PATH] * 8)
    gram = _gram(np.eye(8))
    full = build_pairs(u, gram, PairSampling.full())
    assert full.resample(3) is full
    sampled = build_pairs(u, gram, PairSampling.sampled(10, seed=1))
    assert sampled.resample(2).pairs == sampled.resample(2).pairs
    assert len(sampled.resample(2)) == 10


def test_auto_sampling_mode():
    cfg = PretrainConfig(full_pair_limit=100, pair_sample_factor=5, seed=2)
    assert cfg.sampling_for(13).kind == "full"
    sampled = cfg.sampling_for(14)
    assert sampled.kind == "sampled"
    assert sampled.count == 70
    assert sampled.seed == 2
    assert PretrainConfig(pair_mode="full", full_pair_limit=1).sampling_for(50).kind == "full"


def test_zero_network_loss_is_mean_squared_target(small_network_config):
    net = build(small_network_config, seed=0)
    for name in net.params:
        net.params[name].values = np.zeros_like(net.params[name].values)
    u = _unlabeled([PATH, make_graph(3, [(0, 1)])])
    pairs = build_pairs(u, _gram([[1.0, 0.5], [0.5, 1.0]]), PairSampling.full())
    _, curve = pretrain(net, pairs, PretrainConfig(epochs=3, batch_size=2))
    expected = (1.0 + 0.25 + 1.0) / 3.0
    assert curve == pytest.approx([expected] * 3, rel=1e-12)


def test_self_pair_converges(small_network_config):
    seed = next(s for s in range(50) if np.any(embed(build(small_network_config, seed=s), PATH).values > 0))
    net = build(small_network_config, seed=seed)
    pairs = build_pairs(_unlabeled([PATH]), _gram([[1.0]]), PairSampling.full())
    _, curve = pretrain(net, pairs, PretrainConfig(epochs=400, batch_size=1, learning_rate=0.01))
    assert curve[-1] < 1e-3
    assert predicted_kernel(net, PATH, PATH) == pytest.approx(1.0, abs=0.05)


def test_predicted_kernel_matrix_is_symmetric_psd(small_network_config):
    net = build(small_network_config, seed=1)
    rng = np.random.default_rng(5)
    graphs = [random_graph(rng, int(rng.integers(2, 9))) for _ in range(12)]
    matrix = predicted_kernel_matrix(net, graphs)
    assert np.array_equal(matrix, matrix.T)
    eigenvalues = np.linalg.eigvalsh(matrix)
    assert eigenvalues[0] >= -1e-9 * max(eigenvalues[-1], 1.0)
    assert matrix[2, 5] == pytest.approx(predicted_kernel(net, graphs[2], graphs[5]), rel=1e-12)


def test_kernel_correlation_of_constant_targets_is_undefined(small_network_config):
    net = build(small_network_config, seed=1)
    u = _unlabeled([PATH, make_graph(3, [(0, 1)])])
    pairs = build_pairs(u, _gram([[1.0, 1.0], [1.0, 1.0]]), PairSampling.full())
    assert kernel_correlation(net, u.graphs, pairs.pairs) is None
    assert kernel_correlation(net, u.graphs, pairs.pairs[:1]) is None


def test_non_finite_loss_raises(small_network_config):
    net = build(small_network_config, seed=0)
    for name in net.params:
        net.params[name].values = np.full_like(net.params[name].values, 1e200)
    pairs = build_pairs(_unlabeled([PATH]), _gram([[1.0]]), PairSampling.full())
    with np.errstate(all="ignore"), pytest.raises(TrainingDivergedError) as error:
        pretrain(net, pairs, PretrainConfig(epochs=1))
    assert error.value.batch == [(0, 0)]
