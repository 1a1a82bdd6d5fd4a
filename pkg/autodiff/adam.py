from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from autodiff.params import ParamStore


@dataclass
class AdamState:
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: ParamStore, state: AdamState) -> ParamStore:
    """One bias-corrected Adam update from the gradients currently in `params`."""
    state.step += 1
    correction1 = 1.0 - state.beta1 ** state.step
    correction2 = 1.0 - state.beta2 ** state.step
    for name, param in params.items():
        m = state.first_moment.get(name)
        if m is None:
            m = np.zeros_like(param.values)
            state.first_moment[name] = m
        v = state.second_moment.get(name)
        if v is None:
            v = np.zeros_like(param.values)
            state.second_moment[name] = v
        grad = param.grad
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * grad * grad
        m_hat = m / correction1
        v_hat = v / correction2
        param.values = param.values - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
    return params
