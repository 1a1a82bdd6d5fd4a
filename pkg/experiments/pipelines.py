"""Pipelines - kernel+SVM, DGCNN, pre-trained DGCNN and pre-training diagnostics.

Each experiment class follows the same shape: load the dataset, build the
fold plan, run one job per (repetition, fold), and reduce the job results in
fold order into a Report.
"""

import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from config.experiment import ExperimentConfig
from experiments.folds import FoldPlan, fold_seed, make_fold_plan
from experiments.report import FoldResult, Report
from experiments.training import AccessObserver, accuracy, finetune
from graphs.graph import Dataset
from graphs.tu_loader import load_tu_dataset
from kernels.gram import FeatureBank
from models.dgcnn import Network, build, reset_head, save_network
from pretrain.siamese import build_pairs, kernel_correlation, predicted_kernel_matrix, pretrain
from svm.smo import train_multiclass
from tools.errors import ConfigError, TrainingDivergedError
from tools.file_writer import write_file
from tools.logger import log_metric, log_stage

logger = logging.getLogger(__name__)

DIAGNOSTICS_STREAM = 4
PSD_SUBSET = 30


class Experiment:
    """Nested cross-validation over one dataset for one method."""

    method = ""
    stage = "Experiment"

    def __init__(
        self,
        cfg: ExperimentConfig,
        dataset: Optional[Dataset] = None,
        observer: Optional[AccessObserver] = None,
    ):
        self.cfg = cfg
        self.dataset = dataset
        self.observer = observer
        self.plan: Optional[FoldPlan] = None

    def load(self):
        if self.dataset is None:
            self.dataset = load_tu_dataset(self.cfg.dataset_path())
        if self.dataset.targets is None:
            raise ConfigError(f"{self.dataset.name} has no graph labels to evaluate against")
        self.plan = make_fold_plan(
            len(self.dataset),
            self.cfg.repetitions,
            self.cfg.seed,
            targets=self.dataset.targets,
            num_folds=self.cfg.num_folds,
        )

    def prepare(self):
        pass

    def _observe(self, phase: str, rows: Sequence[int], cols: Sequence[int] = ()):
        if self.observer is not None:
            self.observer(phase, list(rows), list(cols))

    def run_fold(self, job: Tuple[int, int]) -> FoldResult:
        raise NotImplementedError

    def _run_jobs(self, jobs: List[Tuple[int, int]]) -> List[FoldResult]:
        # observers live in this process, so instrumented runs stay serial
        if self.cfg.workers <= 1 or self.observer is not None:
            return [self.run_fold(job) for job in jobs]
        with ProcessPoolExecutor(max_workers=self.cfg.workers) as executor:
            return list(executor.map(self.run_fold, jobs))

    def run(self) -> Report:
        started = time.perf_counter()
        log_stage(self.stage, "start", {"method": self.method, "dataset": self.cfg.dataset, "seed": self.cfg.seed})
        self.load()
        self.prepare()
        results = self._run_jobs(self.plan.jobs())
        for failed in (r for r in results if r.failed):
            logger.warning(
                "%s: fold %d of repetition %d failed and is excluded: %s",
                self.method, failed.fold, failed.repetition, failed.error,
            )
        report = Report.from_folds(
            method=self.method,
            dataset=self.dataset.name,
            folds=results,
            repetitions=self.cfg.repetitions,
            num_folds=self.cfg.num_folds,
            wall_clock_seconds=time.perf_counter() - started,
            config=self.cfg.model_dump(mode="json"),
        )
        log_stage(self.stage, "complete", {"output": {"mean": report.mean, "std": report.std, "std_over": report.std_over}})
        return report


class KernelSvmExperiment(Experiment):
    method = "kernel_svm"
    stage = "Kernel SVM"

    def prepare(self):
        self.specs = self.cfg.svm_kernel_specs()
        self.banks: List[FeatureBank] = []
        for spec in self.specs:
            bank = FeatureBank.build(self.dataset, spec)
            if self.observer is not None:
                bank.add_observer(self.observer)
            self.banks.append(bank)
        self.classes = list(range(self.dataset.num_classes))

    def _fit(self, bank: FeatureBank, indices: Sequence[int], C: float, phase: str):
        targets = np.asarray([self.dataset.targets[i] for i in indices])
        gram = bank.block(indices, indices, phase=phase)
        return train_multiclass(gram, targets, C, self.cfg.svm_tol, self.cfg.svm_max_passes, self.classes)

    def run_fold(self, job: Tuple[int, int]) -> FoldResult:
        repetition, fold = job
        train, validation, test = self.plan.split(repetition, fold)
        targets = np.asarray(self.dataset.targets)

        # grid order is (spec, C) ascending, so ties keep the smaller h, then the smaller C
        best: Optional[Tuple[float, int, int]] = None
        for spec_index, bank in enumerate(self.banks):
            train_gram = bank.block(train, train, phase="fit")
            validation_rows = bank.block(validation, train, phase="select")
            for c_index, C in enumerate(self.cfg.svm_c_grid):
                model = train_multiclass(
                    train_gram, targets[train], C, self.cfg.svm_tol, self.cfg.svm_max_passes, self.classes
                )
                score = float(np.mean(model.predict(validation_rows) == targets[validation]))
                if best is None or score > best[0]:
                    best = (score, spec_index, c_index)

        _, spec_index, c_index = best
        bank, C = self.banks[spec_index], self.cfg.svm_c_grid[c_index]
        refit = sorted(train + validation)
        model = self._fit(bank, refit, C, phase="refit")
        predictions = model.predict(bank.block(test, refit, phase="test"))
        score = float(np.mean(predictions == targets[test]))

        spec = self.specs[spec_index]
        hyperparameters: Dict[str, Any] = {"kernel": spec.kind.value, "C": C, "validation_accuracy": best[0]}
        if spec.h is not None:
            hyperparameters["h"] = spec.h
        log_metric(self.stage, "test_accuracy", score, repetition=repetition, fold=fold, **hyperparameters)
        return FoldResult(repetition=repetition, fold=fold, accuracy=score, hyperparameters=hyperparameters)


class DgcnnExperiment(Experiment):
    method = "dgcnn"
    stage = "DGCNN"

    def before_finetune(self, net: Network, train, validation, seed: int, hyperparameters: Dict[str, Any]):
        pass

    def run_fold(self, job: Tuple[int, int]) -> FoldResult:
        repetition, fold = job
        train, validation, test = self.plan.split(repetition, fold)
        seed = fold_seed(self.cfg.seed, repetition, fold)
        net_config = self.cfg.network_config(self.dataset, train)
        net = build(net_config, seed)
        hyperparameters: Dict[str, Any] = {"sortpool_k": net_config.sortpool_k}
        try:
            self.before_finetune(net, train, validation, seed, hyperparameters)
            result = finetune(
                net,
                self.dataset,
                train,
                validation,
                self.cfg.finetune_config(),
                seed,
                stage=f"{self.stage} finetune r{repetition} f{fold}",
                observer=self.observer,
            )
        except TrainingDivergedError as exc:
            return FoldResult(
                repetition=repetition, fold=fold, hyperparameters=hyperparameters, failed=True, error=str(exc)
            )

        self._observe("test", test)
        score = accuracy(net, self.dataset, test)
        hyperparameters["best_epoch"] = result.best_epoch
        log_metric(self.stage, "test_accuracy", score, repetition=repetition, fold=fold)
        return FoldResult(repetition=repetition, fold=fold, accuracy=score, hyperparameters=hyperparameters)


class PretrainedDgcnnExperiment(DgcnnExperiment):
    method = "pretrained_dgcnn"
    stage = "Pre-trained DGCNN"

    def before_finetune(self, net: Network, train, validation, seed: int, hyperparameters: Dict[str, Any]):
        if self.cfg.pretrain_epochs == 0:
            return
        if self.cfg.pretrain_on_all:
            pool = list(range(len(self.dataset)))
        else:
            pool = sorted(train + validation)
        self._observe("pretrain", pool, pool)

        unlabeled = self.dataset.subset(pool).with_targets(None)
        pretrain_config = self.cfg.pretrain_config(seed)
        gram = FeatureBank.build(unlabeled, pretrain_config.kernel_spec).gram(phase="pretrain")
        pairs = build_pairs(unlabeled, gram, pretrain_config.sampling_for(len(unlabeled)))
        _, curve = pretrain(net, pairs, pretrain_config, stage=f"{self.stage} pretrain")
        reset_head(net, seed)
        hyperparameters["pretrain_pairs"] = len(pairs)
        hyperparameters["pretrain_final_mse"] = curve[-1]


class PretrainDiagnostics(BaseModel):
    dataset: str
    kernel: str
    pretrain_graphs: int
    holdout_graphs: int
    pairs: int
    sampling: str
    loss_curve: List[float]
    final_to_first_mse: float
    train_correlation: Optional[float] = None
    heldout_pairs: int
    heldout_correlation: Optional[float] = None
    predicted_min_eig_ratio: float
    checkpoint: Optional[str] = None
    wall_clock_seconds: float = 0.0


class PretrainDiagnosticsExperiment:
    """Pre-train once on most of a dataset and score the kernel regression on held-out pairs."""

    stage = "Pretrain diagnostics"

    def __init__(self, cfg: ExperimentConfig, dataset: Optional[Dataset] = None):
        self.cfg = cfg
        self.dataset = dataset

    def _heldout_pairs(self, bank: FeatureBank, heldout: List[int], rng) -> List[Tuple[int, int, float]]:
        if not heldout:
            return []
        everything = list(range(len(self.dataset)))
        block = bank.block(heldout, everything, phase="diagnostics")
        count = min(self.cfg.diagnostic_pairs, block.size)
        chosen = np.sort(rng.choice(block.size, size=count, replace=False))
        rows, cols = np.unravel_index(chosen, block.shape)
        return [(heldout[r], everything[c], float(block[r, c])) for r, c in zip(rows.tolist(), cols.tolist())]

    def run(self, output_dir: Optional[str] = None) -> PretrainDiagnostics:
        started = time.perf_counter()
        cfg = self.cfg
        pretrain_config = cfg.pretrain_config()
        log_stage(self.stage, "start", {"dataset": cfg.dataset, "seed": cfg.seed})
        if self.dataset is None:
            self.dataset = load_tu_dataset(cfg.dataset_path())
        dataset = self.dataset

        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, DIAGNOSTICS_STREAM]))
        order = rng.permutation(len(dataset)).tolist()
        holdout_size = int(round(cfg.holdout_fraction * len(dataset)))
        heldout, pool = sorted(order[:holdout_size]), sorted(order[holdout_size:])
        if len(pool) < 2:
            raise ConfigError("pre-training needs at least two graphs outside the held-out set")

        # one bank over every graph so held-out targets share the WL label table
        bank = FeatureBank.build(dataset, pretrain_config.kernel_spec)
        unlabeled = dataset.subset(pool).with_targets(None)
        gram = bank.gram(pool, phase="pretrain")
        pairs = build_pairs(unlabeled, gram, pretrain_config.sampling_for(len(unlabeled)))

        net = build(cfg.network_config(dataset, pool), cfg.seed)
        net, curve = pretrain(net, pairs, pretrain_config, stage=self.stage)

        heldout_pairs = self._heldout_pairs(bank, heldout, rng)
        subset = [dataset.graphs[i] for i in order[:PSD_SUBSET]]
        eigenvalues = np.linalg.eigvalsh(predicted_kernel_matrix(net, subset))
        largest = float(eigenvalues[-1])
        diagnostics = PretrainDiagnostics(
            dataset=dataset.name,
            kernel=pretrain_config.kernel_spec.describe(),
            pretrain_graphs=len(pool),
            holdout_graphs=len(heldout),
            pairs=len(pairs),
            sampling=pairs.sampling.kind,
            loss_curve=curve,
            final_to_first_mse=curve[-1] / curve[0] if curve[0] > 0 else 0.0,
            train_correlation=kernel_correlation(net, unlabeled.graphs, pairs.pairs[:cfg.diagnostic_pairs]),
            heldout_pairs=len(heldout_pairs),
            heldout_correlation=kernel_correlation(net, dataset.graphs, heldout_pairs),
            predicted_min_eig_ratio=float(eigenvalues[0]) / largest if largest > 0 else 0.0,
            wall_clock_seconds=time.perf_counter() - started,
        )

        if output_dir:
            checkpoint = os.path.join(output_dir, "pretrained.ckpt")
            save_network(checkpoint, net, provenance={
                "dataset": dataset.name,
                "kernel": diagnostics.kernel,
                "epochs": pretrain_config.epochs,
                "pairs": len(pairs),
                "sampling": pairs.sampling.kind,
                "seed": cfg.seed,
                "final_loss": curve[-1],
            })
            diagnostics.checkpoint = checkpoint
            write_file(os.path.join(output_dir, "pretrain_report.json"), diagnostics.model_dump_json(indent=2))
            write_file(os.path.join(output_dir, "config.echo"), cfg.echo())

        log_stage(self.stage, "complete", {"output": json.loads(diagnostics.model_dump_json(exclude={"loss_curve"}))})
        return diagnostics


EXPERIMENTS = {
    "kernel_svm": KernelSvmExperiment,
    "dgcnn": DgcnnExperiment,
    "pretrained_dgcnn": PretrainedDgcnnExperiment,
}


def run_kernel_svm(cfg: ExperimentConfig, dataset: Optional[Dataset] = None, observer: Optional[AccessObserver] = None) -> Report:
    return KernelSvmExperiment(cfg, dataset, observer).run()


def run_dgcnn(cfg: ExperimentConfig, dataset: Optional[Dataset] = None, observer: Optional[AccessObserver] = None) -> Report:
    return DgcnnExperiment(cfg, dataset, observer).run()


def run_pretrained_dgcnn(cfg: ExperimentConfig, dataset: Optional[Dataset] = None, observer: Optional[AccessObserver] = None) -> Report:
    return PretrainedDgcnnExperiment(cfg, dataset, observer).run()


def run_pretrain_diagnostics(cfg: ExperimentConfig, dataset: Optional[Dataset] = None, output_dir: Optional[str] = None) -> PretrainDiagnostics:
    return PretrainDiagnosticsExperiment(cfg, dataset).run(output_dir)


def run_experiment(cfg: ExperimentConfig, dataset: Optional[Dataset] = None, observer: Optional[AccessObserver] = None) -> Report:
    """Dispatch on cfg.method."""
    return EXPERIMENTS[cfg.method](cfg, dataset, observer).run()
