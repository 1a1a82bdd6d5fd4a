"""Experiment configuration - flat `key = value` files parsed into one pydantic model"""

import os
from typing import Any, Dict, List, Literal, Mapping, Optional, Sequence

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from config.settings import get_settings
from graphs.graph import Dataset
from kernels.spec import KernelKind, KernelSpec
from models.dgcnn import Conv1dSpec, NetworkConfig, choose_sortpool_k
from pretrain.siamese import PretrainConfig
from tools.errors import ConfigError
from tools.file_reader import read_file

Method = Literal["kernel_svm", "dgcnn", "pretrained_dgcnn"]

# applied when the config file does not set the key itself
DATASET_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "NCI1": {"pretrain_epochs": 2, "pair_mode": "sampled"},
}


class FinetuneConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    epochs: int = Field(default=100, ge=1)
    batch_size: int = Field(default=50, ge=1)
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


class ExperimentConfig(BaseModel):
    """Every key an experiment config file may set, with its default."""

    model_config = ConfigDict(extra="forbid")

    # dataset name under DATA_DIR, or a directory path
    dataset: str = "MUTAG"
    method: Method = "dgcnn"

    # kernel baselines
    kernel: KernelKind = KernelKind.WL
    wl_heights: List[int] = [0, 1, 2, 3, 4, 5]
    normalize: bool = True
    graphlet_connected_only: bool = False
    svm_c_grid: List[float] = [0.01, 0.1, 1.0, 10.0, 100.0]
    svm_tol: float = 1e-3
    svm_max_passes: int = 10

    # DGCNN
    conv_channels: List[int] = [32, 32, 32, 1]
    # None selects k so that 60% of the training graphs have at least k nodes
    sortpool_k: Optional[int] = None
    conv1d_filters: List[int] = [16, 32]
    # 0 stands for the concatenated channel width
    conv1d_widths: List[int] = [0, 5]
    conv1d_strides: List[int] = [0, 1]
    dense_width: int = 128
    use_bias: bool = False
    dropout: float = 0.0

    # siamese pre-training
    pretrain_kernel: KernelKind = KernelKind.WL
    pretrain_h: int = 2
    pretrain_epochs: int = Field(default=20, ge=0)
    pretrain_batch_size: int = Field(default=32, ge=1)
    pretrain_learning_rate: float = 1e-3
    pair_mode: Literal["auto", "full", "sampled"] = "auto"
    pair_sample_factor: int = 20
    full_pair_limit: int = 200_000
    pretrain_on_all: bool = False
    holdout_fraction: float = Field(default=0.1, ge=0.0, lt=1.0)
    diagnostic_pairs: int = 500

    # fine-tuning
    finetune_epochs: int = Field(default=100, ge=1)
    finetune_batch_size: int = Field(default=50, ge=1)
    finetune_learning_rate: float = 1e-4

    # protocol
    repetitions: int = Field(default=10, ge=1)
    num_folds: int = Field(default=10, ge=3)
    seed: int = 0
    workers: int = Field(default=1, ge=1)
    output_dir: str = "runs"

    @field_validator(
        "wl_heights", "svm_c_grid", "conv_channels", "conv1d_filters",
        "conv1d_widths", "conv1d_strides", mode="before",
    )
    @classmethod
    def _split_list(cls, value):
        if isinstance(value, str):
            return [item.strip() for item in value.split(",") if item.strip()]
        return value

    @field_validator("sortpool_k", mode="before")
    @classmethod
    def _auto_k(cls, value):
        if isinstance(value, str) and value.strip().lower() in ("", "auto", "none"):
            return None
        return value

    # derived configurations

    def dataset_path(self) -> str:
        if os.path.isdir(self.dataset):
            return self.dataset
        return os.path.join(get_settings().DATA_DIR, self.dataset)

    def svm_kernel_specs(self) -> List[KernelSpec]:
        if self.kernel == KernelKind.WL:
            return [KernelSpec(kind=KernelKind.WL, h=h, normalize=self.normalize) for h in self.wl_heights]
        return [KernelSpec(
            kind=self.kernel,
            normalize=self.normalize,
            graphlet_connected_only=self.graphlet_connected_only,
        )]

    def pretrain_kernel_spec(self) -> KernelSpec:
        h = self.pretrain_h if self.pretrain_kernel == KernelKind.WL else None
        return KernelSpec(
            kind=self.pretrain_kernel,
            h=h,
            normalize=self.normalize,
            graphlet_connected_only=self.graphlet_connected_only,
        )

    def pretrain_config(self, seed: Optional[int] = None) -> PretrainConfig:
        if self.pretrain_epochs == 0:
            raise ConfigError("pretrain_epochs = 0 leaves nothing to pre-train")
        return PretrainConfig(
            kernel_spec=self.pretrain_kernel_spec(),
            epochs=self.pretrain_epochs,
            batch_size=self.pretrain_batch_size,
            learning_rate=self.pretrain_learning_rate,
            pair_mode=self.pair_mode,
            pair_sample_factor=self.pair_sample_factor,
            full_pair_limit=self.full_pair_limit,
            seed=self.seed if seed is None else seed,
        )

    def finetune_config(self) -> FinetuneConfig:
        return FinetuneConfig(
            epochs=self.finetune_epochs,
            batch_size=self.finetune_batch_size,
            learning_rate=self.finetune_learning_rate,
        )

    def network_config(self, dataset: Dataset, train_indices: Optional[Sequence[int]] = None) -> NetworkConfig:
        if not (len(self.conv1d_filters) == len(self.conv1d_widths) == len(self.conv1d_strides)):
            raise ConfigError("conv1d_filters, conv1d_widths and conv1d_strides must have equal lengths")
        k = self.sortpool_k
        if k is None:
            subset = dataset if train_indices is None else dataset.subset(train_indices)
            k = choose_sortpool_k(subset)
        layers = [
            Conv1dSpec(filters=f, width=w or None, stride=s or None)
            for f, w, s in zip(self.conv1d_filters, self.conv1d_widths, self.conv1d_strides)
        ]
        config = NetworkConfig(
            num_labels=max(len(dataset.label_alphabet), 1),
            num_classes=max(dataset.num_classes, 1),
            conv_channels=self.conv_channels,
            sortpool_k=k,
            conv1d=layers,
            dense_width=self.dense_width,
            use_bias=self.use_bias,
            dropout=self.dropout,
        )
        config.check()
        return config

    def echo(self) -> str:
        lines = []
        for key, value in self.model_dump(mode="json").items():
            if isinstance(value, list):
                value = ", ".join(str(item) for item in value)
            elif value is None:
                value = "auto"
            elif isinstance(value, bool):
                value = str(value).lower()
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"


def parse_config_text(text: str) -> Dict[str, str]:
    """Parse `key = value` lines; `#` starts a comment."""
    values: Dict[str, str] = {}
    for line_number, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {line_number}: expected `key = value`, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"config line {line_number}: missing key")
        values[key] = value
    return values


def make_experiment_config(values: Mapping[str, Any], overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
    merged = dict(values)
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    dataset_name = os.path.basename(os.path.normpath(str(merged.get("dataset", "MUTAG"))))
    for key, value in DATASET_DEFAULTS.get(dataset_name.upper(), {}).items():
        merged.setdefault(key, value)
    try:
        return ExperimentConfig(**merged)
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in error['loc']) or 'config'}: {error['msg']}" for error in exc.errors()
        )
        raise ConfigError(f"invalid experiment config: {problems}") from exc


def load_experiment_config(path: Optional[str], overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
    values = parse_config_text(read_file(path)) if path else {}
    return make_experiment_config(values, overrides)
