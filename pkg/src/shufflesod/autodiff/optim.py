"""Adam with independently scheduled parameter groups."""
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8


@dataclass
class AdamState:
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_step(params, grads, state, lr, beta1=BETA1, beta2=BETA2, eps=EPS):
    """One bias-corrected Adam update.

    ``params`` and ``grads`` are parallel lists of arrays; params are
    updated in place and the (mutated) state is returned alongside them.
    """
    if not lr > 0:
        raise ConfigurationError(f"learning rate must be positive, got {lr}")
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    state.step += 1
    c1 = 1.0 - beta1 ** state.step
    c2 = 1.0 - beta2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, state


class Adam:
    """Adam over named groups, e.g. ``{"encoder": [...], "decoder": [...]}``.

    A group whose learning rate is zero is frozen: its step is skipped
    entirely, so parameters stay bit-identical.
    """

    def __init__(self, groups, lrs):
        self.groups = {name: list(params) for name, params in groups.items()}
        self.lrs = dict(lrs)
        for name, lr in self.lrs.items():
            if lr < 0:
                raise ConfigurationError(f"learning rate for {name!r} must be non-negative, got {lr}")
        self.states = {name: AdamState() for name in self.groups}

    def step(self):
        for name, params in self.groups.items():
            lr = self.lrs[name]
            if lr == 0:
                continue
            live = [p for p in params if p.grad is not None]
            if len(live) != len(params):
                # parameters without gradient this step get a zero gradient
                grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in params]
            else:
                grads = [p.grad for p in params]
            adam_step([p.data for p in params], grads, self.states[name], lr)

    def zero_grad(self):
        for params in self.groups.values():
            for p in params:
                p.grad = None
