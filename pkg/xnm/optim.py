"""Adam with bias correction over named parameter tensors."""
import logging
from typing import Dict

import numpy as np

from xnm.autodiff import Tensor
from xnm.errors import GradientError

logger = logging.getLogger(__name__)


class AdamState:
    def __init__(self, lr: float = 0.001, beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.step_count = 0
        # first / second moment estimates, keyed by parameter name
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}

    def set_lr(self, lr: float):
        if lr != self.lr:
            logger.info(f"Learning rate {self.lr:g} -> {lr:g}")
        self.lr = lr


def adam_step(params: Dict[str, Tensor], state: AdamState) -> None:
    """One Adam update of every trainable tensor; gradients are zeroed afterwards"""
    for name, param in params.items():
        if param.requires_grad and param.grad is None:
            raise GradientError(f"Parameter {name} has no gradient")

    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    step_size = state.lr / bc1

    for name, param in params.items():
        if not param.requires_grad:
            continue
        g = param.grad.astype(np.float64)
        if name not in state.m:
            state.m[name] = np.zeros_like(g)
            state.v[name] = np.zeros_like(g)
        m, v = state.m[name], state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        denom = np.sqrt(v / bc2) + state.epsilon
        param.data -= (step_size * m / denom).astype(param.data.dtype)
        param.grad = np.zeros_like(param.data)
