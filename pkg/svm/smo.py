"""C-SVM on a precomputed kernel, solved by sequential minimal optimization.

The solver works on the dual

    min  1/2 a'Qa - e'a    s.t.  y'a = 0,  0 <= a_i <= C,   Q_ij = y_i y_j K_ij

choosing at each step the maximal-violating pair with second-order
information, and stops when the KKT violation gap falls below `tol`.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from tools.errors import ContractViolation

logger = logging.getLogger(__name__)

TAU = 1e-12


@dataclass
class SvmModel:
    support: np.ndarray          # indices into the training Gram
    dual_coef: np.ndarray        # alpha_i * y_i for each support index
    bias: float
    C: float
    alpha: np.ndarray            # full alpha vector, training order
    labels: np.ndarray
    converged: bool = True
    iterations: int = 0

    def dual_objective(self, gram: np.ndarray) -> float:
        """Maximization form: sum(a) - 1/2 sum_ij a_i a_j y_i y_j K_ij."""
        ay = self.alpha * self.labels
        return float(np.sum(self.alpha) - 0.5 * ay @ gram @ ay)

    def decision_values(self, kernel_rows: np.ndarray) -> np.ndarray:
        """f(x) for a block of rows k(x, train_i), one row per probe."""
        kernel_rows = np.atleast_2d(np.asarray(kernel_rows, dtype=np.float64))
        if kernel_rows.shape[1] != self.alpha.shape[0]:
            raise ContractViolation(
                f"kernel row of length {kernel_rows.shape[1]} for a model trained on {self.alpha.shape[0]} points"
            )
        return kernel_rows[:, self.support] @ self.dual_coef + self.bias


def _select_working_set(grad, alpha, y, C, diag, gram) -> Tuple[int, int, float]:
    """Second-order maximal violating pair; returns (i, j, violation gap)."""
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
    minus_y_grad = -y * grad

    if not up.any() or not low.any():
        return -1, -1, 0.0
    up_values = np.where(up, minus_y_grad, -np.inf)
    i = int(np.argmax(up_values))
    g_max = up_values[i]
    low_values = np.where(low, minus_y_grad, np.inf)
    g_min = float(np.min(low_values))

    grad_diff = g_max - minus_y_grad
    candidates = low & (grad_diff > 0)
    if not candidates.any():
        return i, -1, g_max - g_min
    quad = diag[i] + diag - 2.0 * gram[i]
    quad = np.where(quad > 0, quad, TAU)
    objective = np.where(candidates, -(grad_diff * grad_diff) / quad, np.inf)
    j = int(np.argmin(objective))
    return i, j, g_max - g_min


def _update_pair(i, j, alpha, y, C, gram, grad):
    """Analytic two-variable step, clipped to the box."""
    old_i, old_j = alpha[i], alpha[j]
    if y[i] != y[j]:
        quad = gram[i, i] + gram[j, j] - 2.0 * gram[i, j]
        quad = quad if quad > 0 else TAU
        delta = (-grad[i] - grad[j]) / quad
        diff = alpha[i] - alpha[j]
        alpha[i] += delta
        alpha[j] += delta
        if diff > 0:
            if alpha[j] < 0:
                alpha[j] = 0.0
                alpha[i] = diff
        elif alpha[i] < 0:
            alpha[i] = 0.0
            alpha[j] = -diff
        if diff > 0:
            if alpha[i] > C:
                alpha[i] = C
                alpha[j] = C - diff
        elif alpha[j] > C:
            alpha[j] = C
            alpha[i] = C + diff
    else:
        quad = gram[i, i] + gram[j, j] - 2.0 * gram[i, j]
        quad = quad if quad > 0 else TAU
        delta = (grad[i] - grad[j]) / quad
        total = alpha[i] + alpha[j]
        alpha[i] -= delta
        alpha[j] += delta
        if total > C:
            if alpha[i] > C:
                alpha[i] = C
                alpha[j] = total - C
        elif alpha[j] < 0:
            alpha[j] = 0.0
            alpha[i] = total
        if total > C:
            if alpha[j] > C:
                alpha[j] = C
                alpha[i] = total - C
        elif alpha[i] < 0:
            alpha[i] = 0.0
            alpha[j] = total

    delta_i = alpha[i] - old_i
    delta_j = alpha[j] - old_j
    # Q_ik = y_i y_k K_ik
    grad += y * (y[i] * gram[i] * delta_i + y[j] * gram[j] * delta_j)


def _bias(grad, alpha, y, C) -> float:
    y_grad = y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = float(np.mean(y_grad[free]))
    else:
        at_upper = alpha >= C
        upper_candidates = np.concatenate([
            y_grad[at_upper & (y < 0)], y_grad[~at_upper & (y > 0)]
        ])
        lower_candidates = np.concatenate([
            y_grad[at_upper & (y > 0)], y_grad[~at_upper & (y < 0)]
        ])
        ub = float(np.min(upper_candidates)) if upper_candidates.size else np.inf
        lb = float(np.max(lower_candidates)) if lower_candidates.size else -np.inf
        rho = (ub + lb) / 2.0
    return -rho


def smo_train(
    gram: np.ndarray,
    labels: Sequence[int],
    C: float,
    tol: float = 1e-3,
    max_passes: int = 10,
) -> SvmModel:
    """Fit a binary C-SVM on a training Gram with labels in {-1, +1}.

    Stops when the maximal KKT violation is below `tol`, or after
    max_passes * M^2 pair updates (at least 1000), returning the last iterate
    with a warning.
    """
    gram = np.asarray(gram, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    size = y.shape[0]
    if gram.shape != (size, size):
        raise ContractViolation(f"Gram of shape {gram.shape} for {size} labels")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ContractViolation("SVM labels must be -1 or +1")
    if C <= 0:
        raise ContractViolation("C must be positive")

    alpha = np.zeros(size)
    if np.all(y == y[0]):
        # one class only: constant decision equal to that label
        return SvmModel(np.array([], dtype=np.int64), np.array([]), float(y[0]), C, alpha, y, True, 0)

    grad = -np.ones(size)
    diag = np.diag(gram).copy()
    max_iter = max(1000, max_passes * size * size)
    converged = False
    iterations = 0
    while iterations < max_iter:
        i, j, gap = _select_working_set(grad, alpha, y, C, diag, gram)
        if j < 0 or gap < tol:
            converged = True
            break
        _update_pair(i, j, alpha, y, C, gram, grad)
        iterations += 1

    if not converged:
        logger.warning("SMO stopped after %d iterations without reaching tol=%g", iterations, tol)

    alpha = np.clip(alpha, 0.0, C)
    support = np.flatnonzero(alpha > 0)
    return SvmModel(
        support=support,
        dual_coef=alpha[support] * y[support],
        bias=_bias(grad, alpha, y, C),
        C=C,
        alpha=alpha,
        labels=y,
        converged=converged,
        iterations=iterations,
    )


def svm_predict(model: SvmModel, kernel_row: Sequence[float]) -> Tuple[int, float]:
    """Label (+1 on a zero decision value) and decision value for one probe."""
    value = float(model.decision_values(np.asarray(kernel_row, dtype=np.float64))[0])
    return (1 if value >= 0 else -1), value


def kkt_residuals(model: SvmModel, gram: np.ndarray) -> np.ndarray:
    """Per-point KKT violation of the fitted model on its training Gram."""
    margins = model.labels * model.decision_values(gram)
    residual = np.zeros_like(margins)
    at_zero = model.alpha <= 0
    at_c = model.alpha >= model.C
    free = ~at_zero & ~at_c
    residual[at_zero] = np.maximum(0.0, 1.0 - margins[at_zero])
    residual[free] = np.abs(margins[free] - 1.0)
    residual[at_c] = np.maximum(0.0, margins[at_c] - 1.0)
    return residual


@dataclass
class OneVsRestSvm:
    classes: List[int]
    models: List[SvmModel]

    def decision_values(self, kernel_rows: np.ndarray) -> np.ndarray:
        return np.column_stack([m.decision_values(kernel_rows) for m in self.models])

    def predict(self, kernel_rows: np.ndarray) -> np.ndarray:
        """Class ids for a block of kernel rows."""
        if len(self.classes) == 2 and len(self.models) == 1:
            values = self.models[0].decision_values(kernel_rows)
            return np.where(values >= 0, self.classes[1], self.classes[0])
        return np.asarray(self.classes)[np.argmax(self.decision_values(kernel_rows), axis=1)]


def train_multiclass(
    gram: np.ndarray,
    targets: Sequence[int],
    C: float,
    tol: float = 1e-3,
    max_passes: int = 10,
    classes: Optional[Sequence[int]] = None,
) -> OneVsRestSvm:
    """Binary SVM for two classes (second class is +1), one-vs-rest beyond that."""
    targets = np.asarray(targets)
    classes = sorted(set(targets.tolist()) if classes is None else classes)
    if len(classes) <= 2:
        positive = classes[-1]
        labels = np.where(targets == positive, 1, -1)
        if len(classes) == 1:
            classes = [classes[0], classes[0]]
        return OneVsRestSvm(list(classes), [smo_train(gram, labels, C, tol, max_passes)])
    models = [
        smo_train(gram, np.where(targets == c, 1, -1), C, tol, max_passes) for c in classes
    ]
    return OneVsRestSvm(list(classes), models)
