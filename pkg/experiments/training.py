"""Fine-tuning - NLL training with Adam and validation-selected epoch"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from autodiff import ops
from autodiff.adam import AdamState, adam_step
from autodiff.tensor import backward
from config.experiment import FinetuneConfig
from graphs.graph import Dataset
from models.dgcnn import Network, classify
from tools.errors import ContractViolation, TrainingDivergedError
from tools.logger import log_metric, log_stage

# observer(phase, graph indices, column indices); same shape as the kernel FeatureBank hook
AccessObserver = Callable[[str, Sequence[int], Sequence[int]], None]

SHUFFLE_STREAM = 2
DROPOUT_STREAM = 3


@dataclass
class FinetuneResult:
    best_epoch: int
    best_validation_accuracy: float
    losses: List[float] = field(default_factory=list)
    validation_accuracies: List[float] = field(default_factory=list)


def predict(net: Network, dataset: Dataset, indices: Sequence[int]) -> np.ndarray:
    """Class ids by argmax of the log-probabilities; ties go to the lower class id."""
    return np.asarray(
        [int(np.argmax(classify(net, dataset.graphs[i]).values)) for i in indices], dtype=np.int64
    )


def accuracy(net: Network, dataset: Dataset, indices: Sequence[int]) -> float:
    if dataset.targets is None:
        raise ContractViolation(f"{dataset.name} has no targets to score against")
    if len(indices) == 0:
        return 0.0
    expected = np.asarray([dataset.targets[i] for i in indices])
    return float(np.mean(predict(net, dataset, indices) == expected))


def _diverged(net: Network, stage: str, epoch: int, batch: List[int]):
    log_stage(stage, "failed", {"epoch": epoch, "batch": batch})
    raise TrainingDivergedError(batch, net.params.norm(), stage)


def finetune(
    net: Network,
    dataset: Dataset,
    train_indices: Sequence[int],
    validation_indices: Sequence[int],
    cfg: FinetuneConfig,
    seed: int,
    stage: str = "Finetune",
    observer: Optional[AccessObserver] = None,
) -> FinetuneResult:
    """Train `net` in place and leave it at the epoch with the best validation accuracy.

    Earlier epochs win ties. Without a validation set the last epoch is kept.
    """
    if dataset.targets is None:
        raise ContractViolation(f"{dataset.name} has no targets to train on")
    if len(train_indices) == 0:
        raise ContractViolation("fine-tuning needs at least one training graph")

    state = AdamState(learning_rate=cfg.learning_rate, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)
    shuffle = np.random.default_rng(np.random.SeedSequence([int(seed), SHUFFLE_STREAM]))
    dropout_rng = None
    if net.config.dropout > 0:
        dropout_rng = np.random.default_rng(np.random.SeedSequence([int(seed), DROPOUT_STREAM]))

    train = np.asarray(train_indices, dtype=np.int64)
    result = FinetuneResult(best_epoch=-1, best_validation_accuracy=-1.0)
    best_snapshot = None

    log_stage(stage, "start", {"train": len(train), "validation": len(validation_indices), "epochs": cfg.epochs})
    for epoch in range(cfg.epochs):
        order = train[shuffle.permutation(len(train))]
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size].tolist()
            if observer is not None:
                observer("finetune", batch, [])
            net.params.zero_grad()
            loss = ops.mean([
                ops.nll_loss(classify(net, dataset.graphs[i], dropout_rng), dataset.targets[i]) for i in batch
            ])
            if not np.isfinite(loss.item()):
                _diverged(net, stage, epoch, batch)
            backward(loss)
            adam_step(net.params, state)
            if not net.params.all_finite():
                _diverged(net, stage, epoch, batch)
            total += loss.item() * len(batch)
        epoch_loss = total / len(train)
        result.losses.append(epoch_loss)

        if len(validation_indices):
            if observer is not None:
                observer("validate", list(validation_indices), [])
            score = accuracy(net, dataset, validation_indices)
        else:
            score = 0.0
        result.validation_accuracies.append(score)
        log_metric(stage, "finetune_nll", epoch_loss, epoch=epoch, validation_accuracy=score)

        if score > result.best_validation_accuracy or not len(validation_indices):
            result.best_epoch = epoch
            result.best_validation_accuracy = score
            best_snapshot = net.params.snapshot()

    net.params.restore(best_snapshot)
    log_stage(stage, "complete", {"output": {
        "best_epoch": result.best_epoch,
        "best_validation_accuracy": result.best_validation_accuracy,
    }})
    return result
