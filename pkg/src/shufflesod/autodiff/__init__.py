"""Minimal float64 reverse-mode tensor engine."""
from . import ops
from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import GradCheckReport, grad_check
from .nn import BatchNorm2d, Conv2d, ConvBNAct, LayerNorm, Linear, Module, Parameter, Sequential
from .optim import Adam, AdamState, adam_step
from .tensor import Tensor, as_tensor, backward, grad, is_grad_enabled, no_grad

__all__ = [
    "Adam", "AdamState", "BatchNorm2d", "Conv2d", "ConvBNAct", "GradCheckReport", "LayerNorm",
    "Linear", "Module", "Parameter", "Sequential", "Tensor", "adam_step", "as_tensor", "backward",
    "grad", "grad_check", "is_grad_enabled", "load_checkpoint", "no_grad", "ops", "save_checkpoint",
]
