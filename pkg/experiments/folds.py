"""Fold plans - stratified outer folds, with the next fold as validation"""

from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from tools.errors import ConfigError, ContractViolation


class FoldPlan(BaseModel):
    model_config = ConfigDict(frozen=True)

    size: int
    repetitions: int
    seed: int
    num_folds: int = 10
    # folds[r][f] -> sorted graph indices of fold f in repetition r
    folds: List[List[List[int]]]

    def split(self, repetition: int, fold: int) -> Tuple[List[int], List[int], List[int]]:
        """(train, validation, test) for one outer fold; validation is fold f+1 mod K."""
        if not 0 <= repetition < self.repetitions or not 0 <= fold < self.num_folds:
            raise ContractViolation(f"no fold ({repetition}, {fold}) in this plan")
        partition = self.folds[repetition]
        test = partition[fold]
        validation_fold = (fold + 1) % self.num_folds
        validation = partition[validation_fold]
        train = sorted(
            index
            for f, members in enumerate(partition)
            if f not in (fold, validation_fold)
            for index in members
        )
        return train, list(validation), list(test)

    def jobs(self) -> List[Tuple[int, int]]:
        return [(r, f) for r in range(self.repetitions) for f in range(self.num_folds)]


def fold_seed(seed: int, repetition: int, fold: int) -> int:
    """Per-fold seed derived from the master seed."""
    return int(np.random.SeedSequence([int(seed), repetition, fold]).generate_state(1)[0])


def make_fold_plan(
    size: int,
    repetitions: int,
    seed: int,
    targets: Optional[Sequence[int]] = None,
    num_folds: int = 10,
) -> FoldPlan:
    """Deal a seeded permutation into folds, class by class when targets are given.

    The fold cursor carries over from one class to the next, so fold sizes
    differ by at most one and every fold holds floor or ceil of n_c / K items
    of each class c.
    """
    if size < num_folds:
        raise ConfigError(f"{size} graphs cannot be split into {num_folds} folds")
    if repetitions < 1:
        raise ConfigError("repetitions must be >= 1")
    if targets is not None and len(targets) != size:
        raise ContractViolation(f"{len(targets)} targets for {size} graphs")

    plan = []
    for repetition in range(repetitions):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), repetition]))
        order = rng.permutation(size).tolist()
        folds: List[List[int]] = [[] for _ in range(num_folds)]
        if targets is None:
            groups = [order]
        else:
            groups = [[i for i in order if targets[i] == c] for c in sorted(set(targets))]
        cursor = 0
        for group in groups:
            for index in group:
                folds[cursor % num_folds].append(index)
                cursor += 1
        plan.append([sorted(fold) for fold in folds])
    return FoldPlan(size=size, repetitions=repetitions, seed=seed, num_folds=num_folds, folds=plan)
