"""Gram matrices - per-graph feature banks and parallel block computation"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, Hashable, List, Optional, Sequence

import numpy as np
from scipy import sparse

from graphs.graph import Dataset
from kernels.feature_maps import FeatureMap, WLRelabeler, feature_map
from kernels.spec import KernelSpec
from tools.errors import ContractViolation, DegenerateGraphError
from tools.logger import log_stage

# observer(phase, row indices, column indices)
AccessObserver = Callable[[str, Sequence[int], Sequence[int]], None]


@dataclass
class GramMatrix:
    values: np.ndarray
    normalized: bool
    kernel_spec: KernelSpec
    indices: Optional[List[int]] = None

    @property
    def size(self) -> int:
        return self.values.shape[0]

    def is_symmetric(self, rtol: float = 1e-9) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.values)))) if self.values.size else 1.0
        return bool(np.all(np.abs(self.values - self.values.T) <= rtol * scale))

    def eigen_range(self):
        eigenvalues = np.linalg.eigvalsh((self.values + self.values.T) / 2.0)
        return float(eigenvalues[0]), float(eigenvalues[-1])

    def is_psd(self, rtol: float = 1e-8) -> bool:
        smallest, largest = self.eigen_range()
        return smallest >= -rtol * max(largest, 0.0)


class FeatureBank:
    """Feature maps of every graph in a dataset for one kernel run.

    Kernel blocks are dot products of the stored count vectors; every block
    request is reported to the registered observers with a phase tag so
    callers can audit which graphs took part in which phase.
    """

    def __init__(self, dataset: Dataset, spec: KernelSpec, maps: Sequence[FeatureMap]):
        if len(maps) != len(dataset):
            raise ContractViolation("one feature map per graph is required")
        self.dataset = dataset
        self.spec = spec
        self.maps = list(maps)
        self._observers: List[AccessObserver] = []

        vocabulary: Dict[Hashable, int] = {}
        rows, cols, data = [], [], []
        for i, fm in enumerate(self.maps):
            for key, count in fm.items():
                rows.append(i)
                cols.append(vocabulary.setdefault(key, len(vocabulary)))
                data.append(float(count))
        self.vectors = sparse.csr_matrix(
            (np.asarray(data, dtype=np.float64), (rows, cols)),
            shape=(len(self.maps), max(len(vocabulary), 1)),
        )
        self.self_kernels = np.asarray(
            [float(fm.squared_norm()) for fm in self.maps], dtype=np.float64
        )

    @classmethod
    def build(cls, dataset: Dataset, spec: KernelSpec) -> "FeatureBank":
        """Compute every feature map once, single-threaded, with one shared WL table."""
        if len(dataset) == 0:
            raise ContractViolation("cannot build kernel features for an empty dataset")
        relabeler = WLRelabeler()
        maps = [feature_map(g, spec, relabeler) for g in dataset.graphs]
        return cls(dataset, spec, maps)

    def add_observer(self, observer: AccessObserver):
        self._observers.append(observer)

    def _check_normalizable(self, indices: Sequence[int]):
        for i in indices:
            if self.self_kernels[i] <= 0:
                raise DegenerateGraphError(self.dataset.graphs[i].graph_id)

    def _raw_rows(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        return (self.vectors[rows] @ self.vectors[cols].T).toarray()

    def block(
        self,
        rows: Sequence[int],
        cols: Sequence[int],
        phase: str = "",
        workers: int = 1,
    ) -> np.ndarray:
        """Kernel values between graphs `rows` and graphs `cols`."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        for observer in self._observers:
            observer(phase, rows.tolist(), cols.tolist())

        if self.spec.normalize:
            self._check_normalizable(rows.tolist())
            self._check_normalizable(cols.tolist())

        if workers > 1 and len(rows) > 1:
            chunks = [chunk for chunk in np.array_split(rows, workers) if len(chunk)]
            with ThreadPoolExecutor(max_workers=workers) as executor:
                parts = list(executor.map(lambda chunk: self._raw_rows(chunk, cols), chunks))
            raw = np.vstack(parts)
        else:
            raw = self._raw_rows(rows, cols)

        if not self.spec.normalize:
            return raw
        return raw / np.sqrt(np.outer(self.self_kernels[rows], self.self_kernels[cols]))

    def gram(self, indices: Optional[Sequence[int]] = None, phase: str = "", workers: int = 1) -> GramMatrix:
        indices = list(range(len(self.maps))) if indices is None else list(indices)
        values = self.block(indices, indices, phase=phase, workers=workers)
        return GramMatrix(values, self.spec.normalize, self.spec, indices)


def gram_matrix(ds: Dataset, spec: KernelSpec, workers: int = 1) -> GramMatrix:
    """All pairwise kernel values over a dataset (normalized if spec.normalize)."""
    if len(ds) == 0:
        raise ContractViolation("gram_matrix needs a non-empty dataset")
    log_stage("Gram matrix", "start", {"dataset": ds.name, "graphs": len(ds), "kernel": spec.describe()})
    bank = FeatureBank.build(ds, spec)
    gram = bank.gram(workers=workers)
    log_stage("Gram matrix", "complete", {"output": {"size": gram.size, "features": bank.vectors.shape[1]}})
    return gram
