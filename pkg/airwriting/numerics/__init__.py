"""Minimaler Reverse-Mode-Kern für 1-D-Sequenzmodelle."""

from .gradcheck import GRADCHECK_TOLERANCE, grad_check, run_gradient_suite
from .layers import (
    activation,
    affine_act,
    conv1d,
    conv1d_transpose,
    gru_forward,
)
from .losses import l1_loss, lsgan_losses, softmax_xent
from .optim import Adam, adam_step
from .tensor import ParamBlock, Tensor, zero_grads

__all__ = [
    "Adam",
    "GRADCHECK_TOLERANCE",
    "ParamBlock",
    "Tensor",
    "activation",
    "adam_step",
    "affine_act",
    "conv1d",
    "conv1d_transpose",
    "grad_check",
    "gru_forward",
    "l1_loss",
    "lsgan_losses",
    "run_gradient_suite",
    "softmax_xent",
    "zero_grads",
]
