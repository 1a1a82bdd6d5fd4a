"""Errors - exception hierarchy shared by every package"""

from typing import Optional, Sequence


class KernelPretrainError(Exception):
    """Root of every error raised by this project."""


class DatasetFormatError(KernelPretrainError):
    pass


class DatasetLoadError(DatasetFormatError):
    def __init__(self, path: str, message: str = "required dataset file is missing"):
        self.path = path
        super().__init__(f"{message}: {path}")


class ContractViolation(KernelPretrainError):
    pass


class DegenerateGraphError(KernelPretrainError):
    def __init__(self, graph_id: Optional[int] = None):
        self.graph_id = graph_id
        where = f"graph {graph_id}" if graph_id is not None else "a graph"
        super().__init__(f"{where} has an empty feature map; its kernel cannot be normalized")


class ConfigError(KernelPretrainError):
    pass


class TrainingDivergedError(KernelPretrainError):
    def __init__(self, batch: Sequence, param_norm: float, stage: str = "training"):
        self.batch = list(batch)
        self.param_norm = param_norm
        super().__init__(
            f"{stage} loss became NaN; last batch={self.batch[:20]} "
            f"parameter norm={param_norm:.6g}"
        )


class PairSamplingError(KernelPretrainError):
    pass


class CheckpointFormatError(KernelPretrainError):
    pass
