"""Adam mit Bias-Korrektur; der Zustand liegt in den ParamBlocks selbst."""

from __future__ import annotations

from typing import Iterable

import numpy as np

from config.settings import ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON, LEARNING_RATE
from .tensor import DEFAULT_SLOT, ParamBlock


class Adam:
    """Adam-Optimierer; ``slot`` benennt die Momente, die er in jedem Block führt."""

    def __init__(self, lr: float = LEARNING_RATE, beta1: float = ADAM_BETA1,
                 beta2: float = ADAM_BETA2, epsilon: float = ADAM_EPSILON,
                 slot: str = DEFAULT_SLOT):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.slot = slot

    def step(self, blocks: Iterable[ParamBlock]) -> None:
        """Aktualisiert ``blocks`` und leert anschließend deren Gradienten."""
        for block in blocks:
            adam_step(block, self.lr, self.beta1, self.beta2, self.epsilon, self.slot)


def adam_step(block: ParamBlock, lr: float, beta1: float = ADAM_BETA1,
              beta2: float = ADAM_BETA2, epsilon: float = ADAM_EPSILON,
              slot: str = DEFAULT_SLOT) -> None:
    g = block.grad
    state = block.moments_for(slot)
    state.t += 1
    state.m *= beta1
    state.m += (1.0 - beta1) * g
    state.v *= beta2
    state.v += (1.0 - beta2) * (g * g)

    m_hat = state.m / (1.0 - beta1 ** state.t)
    v_hat = state.v / (1.0 - beta2 ** state.t)
    block.data -= lr * m_hat / (np.sqrt(v_hat) + epsilon)
    block.zero_grad()
