"""Siamese pre-training - regress embedding dot products onto graph kernel values"""

from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import stats

from autodiff import ops
from autodiff.adam import AdamState, adam_step
from autodiff.tensor import Tensor, backward
from graphs.graph import Dataset, Graph
from kernels.gram import GramMatrix
from kernels.spec import KernelKind, KernelSpec
from models.dgcnn import Network, embed
from tools.errors import ContractViolation, PairSamplingError, TrainingDivergedError
from tools.logger import log_metric, log_stage

Pair = Tuple[int, int, float]


class PairSampling(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["full", "sampled"] = "full"
    count: Optional[int] = Field(default=None, ge=1)
    seed: int = 0

    @classmethod
    def full(cls) -> "PairSampling":
        return cls(kind="full")

    @classmethod
    def sampled(cls, count: int, seed: int = 0) -> "PairSampling":
        return cls(kind="sampled", count=count, seed=seed)


class PretrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    kernel_spec: KernelSpec = KernelSpec(kind=KernelKind.WL, h=2, normalize=True)
    epochs: int = Field(default=20, ge=1)
    batch_size: int = Field(default=32, ge=1)
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    # auto: every pair while the pair count stays under full_pair_limit, else sampled
    pair_mode: Literal["auto", "full", "sampled"] = "auto"
    pair_sample_factor: int = Field(default=20, ge=1)
    full_pair_limit: int = Field(default=200_000, ge=1)
    seed: int = 0

    def sampling_for(self, size: int) -> PairSampling:
        total = pair_count(size)
        mode = self.pair_mode
        if mode == "auto":
            mode = "full" if total <= self.full_pair_limit else "sampled"
        if mode == "full":
            return PairSampling.full()
        return PairSampling.sampled(min(total, self.pair_sample_factor * size), self.seed)


def pair_count(size: int) -> int:
    """Unordered pairs with repetition over `size` graphs: M(M+1)/2."""
    return size * (size + 1) // 2


def _pairs_from_linear(linear: np.ndarray, size: int) -> Tuple[np.ndarray, np.ndarray]:
    """Map row-major indices over {(i, j): i <= j} back to (i, j)."""
    row_starts = np.concatenate([[0], np.cumsum(np.arange(size, 0, -1))])
    rows = np.searchsorted(row_starts, linear, side="right") - 1
    cols = rows + (linear - row_starts[rows])
    return rows, cols


@dataclass
class PairDataset:
    source: Dataset
    pairs: List[Pair]
    sampling: PairSampling
    gram: GramMatrix = field(repr=False)

    def __len__(self) -> int:
        return len(self.pairs)

    def resample(self, round_index: int) -> "PairDataset":
        """Fresh sample for another epoch; full pair sets are returned unchanged."""
        if self.sampling.kind == "full":
            return self
        seed = int(np.random.SeedSequence([self.sampling.seed, round_index]).generate_state(1)[0])
        return build_pairs(self.source, self.gram, PairSampling.sampled(self.sampling.count, seed))


def build_pairs(u: Dataset, gram: GramMatrix, mode: PairSampling) -> PairDataset:
    """Pairs (i, j, k(x_i, x_j)) with i <= j, self-pairs included."""
    size = len(u)
    if gram.size != size:
        raise ContractViolation(f"Gram matrix of size {gram.size} does not cover {size} graphs")
    total = pair_count(size)

    if mode.kind == "full":
        rows, cols = np.triu_indices(size)
    else:
        if mode.count is None or mode.count > total:
            raise PairSamplingError(f"cannot sample {mode.count} pairs from {total}")
        rng = np.random.default_rng(mode.seed)
        linear = np.sort(rng.choice(total, size=mode.count, replace=False))
        rows, cols = _pairs_from_linear(linear, size)

    values = gram.values
    pairs = [(int(i), int(j), float(values[i, j])) for i, j in zip(rows.tolist(), cols.tolist())]
    return PairDataset(u, pairs, mode, gram)


def _batch_loss(net: Network, graphs: Sequence[Graph], batch: Sequence[Pair]) -> Tensor:
    embeddings: Dict[int, Tensor] = {}
    losses = []
    for i, j, target in batch:
        for index in (i, j):
            if index not in embeddings:
                embeddings[index] = embed(net, graphs[index])
        losses.append(ops.mse_loss(ops.dot_head(embeddings[i], embeddings[j]), target))
    return ops.mean(losses)


def _diverged(net: Network, stage: str, epoch: int, batch: Sequence[Pair]):
    pair_ids = [(i, j) for i, j, _ in batch]
    log_stage(stage, "failed", {"epoch": epoch, "batch": pair_ids})
    raise TrainingDivergedError(pair_ids, net.params.norm(), stage)


def pretrain(net: Network, pairs: PairDataset, cfg: PretrainConfig, stage: str = "Pretrain") -> Tuple[Network, List[float]]:
    """Train the shared branch so that <f(x_i), f(x_j)> approximates the kernel target.

    Returns the network (updated in place) and the mean pair loss of each epoch.
    """
    graphs = pairs.source.graphs
    state = AdamState(learning_rate=cfg.learning_rate, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
    curve: List[float] = []

    log_stage(stage, "start", {"pairs": len(pairs), "sampling": pairs.sampling.kind, "epochs": cfg.epochs})
    for epoch in range(cfg.epochs):
        epoch_pairs = pairs.resample(epoch) if epoch > 0 else pairs
        order = rng.permutation(len(epoch_pairs))
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = [epoch_pairs.pairs[t] for t in order[start:start + cfg.batch_size]]
            net.params.zero_grad()
            loss = _batch_loss(net, graphs, batch)
            if not np.isfinite(loss.item()):
                _diverged(net, stage, epoch, batch)
            backward(loss)
            adam_step(net.params, state)
            if not net.params.all_finite():
                _diverged(net, stage, epoch, batch)
            total += loss.item() * len(batch)
        epoch_loss = total / max(len(epoch_pairs), 1)
        curve.append(epoch_loss)
        log_metric(stage, "pretrain_mse", epoch_loss, epoch=epoch)

    log_stage(stage, "complete", {"output": {"loss_curve": curve}})
    return net, curve


def predicted_kernel(net: Network, g1: Graph, g2: Graph) -> float:
    """<f(g1), f(g2)> with the dot-product head."""
    return float(np.dot(embed(net, g1).values, embed(net, g2).values))


def predicted_kernel_matrix(net: Network, graphs: Sequence[Graph]) -> np.ndarray:
    """Gram matrix of the embeddings; symmetric entry for entry."""
    embeddings = [embed(net, g).values for g in graphs]
    size = len(embeddings)
    matrix = np.zeros((size, size))
    for i in range(size):
        for j in range(i, size):
            matrix[i, j] = matrix[j, i] = float(np.dot(embeddings[i], embeddings[j]))
    return matrix


def kernel_correlation(net: Network, graphs: Sequence[Graph], pairs: Sequence[Pair]) -> Optional[float]:
    """Pearson correlation between predicted and true kernel values; None when either side is constant."""
    embeddings: Dict[int, np.ndarray] = {}
    predicted, actual = [], []
    for i, j, target in pairs:
        for index in (i, j):
            if index not in embeddings:
                embeddings[index] = embed(net, graphs[index]).values
        predicted.append(float(np.dot(embeddings[i], embeddings[j])))
        actual.append(target)
    if len(pairs) < 2 or np.std(predicted) == 0 or np.std(actual) == 0:
        return None
    return float(stats.pearsonr(predicted, actual)[0])
