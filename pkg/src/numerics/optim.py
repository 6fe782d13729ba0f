"""
Adam with decoupled weight decay, plus the step learning-rate schedule.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from .params import ParamStore

logger = logging.getLogger(__name__)


@dataclass
class OptimizerState:
    """
    Moment estimates and hyperparameters of :func:`adamw_step`.

    :param lr: Current learning rate.
    :param beta1: Decay of the first moment.
    :param beta2: Decay of the second moment.
    :param eps: Denominator guard.
    :param weight_decay: Decoupled decay coefficient.
    :param step: Number of updates applied so far.
    """

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    step: int = 0
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"Invalid learning rate: {self.lr}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError(f"Invalid betas: ({self.beta1}, {self.beta2})")
        if self.weight_decay < 0:
            raise ValueError(f"Invalid weight decay: {self.weight_decay}")

    @classmethod
    def for_params(cls, params: ParamStore, lr: float, **kwargs) -> "OptimizerState":
        """Creates a state with zero moments for every parameter in ``params``."""
        state = cls(lr=lr, **kwargs)
        for name, entry in params.items():
            state.first_moment[name] = np.zeros_like(entry.value)
            state.second_moment[name] = np.zeros_like(entry.value)
        return state


def adamw_step(params: ParamStore, state: OptimizerState) -> None:
    """
    Applies one bias-corrected Adam update with decoupled weight decay.

    The decay multiplies each parameter by ``1 - lr * weight_decay`` before,
    and independently of, the Adam term, so a zero gradient contracts the
    parameter by exactly that factor.

    :param params: Parameters with populated gradients; updated in place.
    :param state: Optimizer state; moments and step counter are updated in place.
    """
    state.step += 1
    correction1 = 1.0 - state.beta1**state.step
    correction2 = 1.0 - state.beta2**state.step
    decay = 1.0 - state.lr * state.weight_decay

    for name, entry in params.items():
        grad = entry.grad
        m = state.first_moment.setdefault(name, np.zeros_like(entry.value))
        v = state.second_moment.setdefault(name, np.zeros_like(entry.value))
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * grad * grad

        if state.weight_decay:
            entry.value *= decay
        entry.value -= state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)

    logger.debug("adamw step %d applied with lr=%g", state.step, state.lr)


def step_decay_lr(base_lr: float, epoch: int, decay: float = 0.1, every: int = 10) -> float:
    """
    Learning rate for ``epoch`` under ``base_lr * decay ** (epoch // every)``.

    >>> step_decay_lr(3e-4, 9)
    0.0003
    """
    return base_lr * decay ** (epoch // every)
