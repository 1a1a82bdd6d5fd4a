"""Experiments package - nested cross-validation harness, pipelines and reports"""

from experiments.folds import FoldPlan, fold_seed, make_fold_plan
from experiments.pipelines import (
    DgcnnExperiment,
    KernelSvmExperiment,
    PretrainDiagnostics,
    PretrainDiagnosticsExperiment,
    PretrainedDgcnnExperiment,
    run_dgcnn,
    run_experiment,
    run_kernel_svm,
    run_pretrain_diagnostics,
    run_pretrained_dgcnn,
)
from experiments.report import FoldResult, Report, aggregate, load_report, write_report
from experiments.training import FinetuneResult, accuracy, finetune, predict
