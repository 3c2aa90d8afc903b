"""Parameter containers and the small set of layers the network is built from."""
import numpy as np

from . import ops
from ..errors import CheckpointError, ConfigurationError
from .tensor import Tensor


class Parameter(Tensor):
    """A leaf tensor that the optimizer updates."""

    def __init__(self, data, name=None):
        super().__init__(data, requires_grad=True, name=name)


class Module:
    """Attribute-walking container, loosely modelled on the torch idiom.

    Parameters, buffers and child modules are discovered in attribute
    insertion order, which fixes the checkpoint entry order.
    """

    _buffer_names = ()

    def __init__(self):
        self.training = True

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def _children(self):
        for name, value in vars(self).items():
            if isinstance(value, (Parameter, Module)):
                yield name, value
            elif isinstance(value, (list, tuple)) and value and all(isinstance(v, Module) for v in value):
                for i, v in enumerate(value):
                    yield f"{name}.{i}", v

    def named_parameters(self, prefix=""):
        for name, value in self._children():
            path = f"{prefix}{name}"
            if isinstance(value, Parameter):
                yield path, value
            else:
                yield from value.named_parameters(path + ".")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix=""):
        for name in self._buffer_names:
            yield f"{prefix}{name}", getattr(self, name)
        for name, value in self._children():
            if isinstance(value, Module):
                yield from value.named_buffers(f"{prefix}{name}.")

    def modules(self):
        yield self
        for _, value in self._children():
            if isinstance(value, Module):
                yield from value.modules()

    def train(self, mode=True):
        for m in self.modules():
            m.training = mode
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def state_dict(self):
        state = {name: p.data for name, p in self.named_parameters()}
        state.update({name: b for name, b in self.named_buffers()})
        return state

    def load_state_dict(self, state):
        """Copy arrays into parameters and buffers in place; shapes must match."""

        targets = {name: p.data for name, p in self.named_parameters()}
        targets.update(dict(self.named_buffers()))
        for name, dest in targets.items():
            if name not in state:
                raise CheckpointError(f"checkpoint is missing parameter {name!r}")
            src = np.asarray(state[name])
            if src.shape != dest.shape:
                raise CheckpointError(
                    f"incompatible parameter {name!r}: checkpoint shape {src.shape}, model shape {dest.shape}")
            dest[...] = src
        extra = [k for k in state if k not in targets]
        if extra:
            raise CheckpointError(f"checkpoint has unexpected parameter {extra[0]!r}")


def _uniform(rng, bound, shape):
    return rng.uniform(-bound, bound, size=shape)


class Linear(Module):
    def __init__(self, rng, n_in, n_out, bias=True):
        super().__init__()
        bound = 1.0 / np.sqrt(n_in)
        self.weight = Parameter(_uniform(rng, bound, (n_in, n_out)))
        self.bias = Parameter(_uniform(rng, bound, (n_out,))) if bias else None

    def forward(self, x):
        return ops.linear(x, self.weight, self.bias)


class LayerNorm(Module):
    def __init__(self, dim):
        super().__init__()
        self.weight = Parameter(np.ones(dim))
        self.bias = Parameter(np.zeros(dim))

    def forward(self, x):
        return ops.layer_norm(x, self.weight, self.bias)


class Conv2d(Module):
    def __init__(self, rng, c_in, c_out, kernel=3, stride=1, bias=True):
        super().__init__()
        if kernel % 2 == 0:
            raise ConfigurationError("conv kernels must be odd-sized")
        fan_in = c_in * kernel * kernel
        bound = 1.0 / np.sqrt(fan_in)
        self.weight = Parameter(_uniform(rng, np.sqrt(6.0) * bound, (c_out, c_in, kernel, kernel)))
        self.bias = Parameter(_uniform(rng, bound, (c_out,))) if bias else None
        self.stride = stride
        self.pad = (kernel - 1) // 2

    def forward(self, x):
        return ops.conv2d(x, self.weight, self.bias, self.stride, self.pad)


class BatchNorm2d(Module):
    _buffer_names = ("running_mean", "running_var")

    def __init__(self, channels):
        super().__init__()
        self.weight = Parameter(np.ones(channels))
        self.bias = Parameter(np.zeros(channels))
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)

    def forward(self, x):
        return ops.batch_norm(x, self.weight, self.bias, self.running_mean,
                              self.running_var, self.training)


class ConvBNAct(Module):
    """Conv -> BatchNorm -> LeakyReLU."""

    def __init__(self, rng, c_in, c_out, kernel=3):
        super().__init__()
        self.conv = Conv2d(rng, c_in, c_out, kernel, bias=False)
        self.bn = BatchNorm2d(c_out)

    def forward(self, x):
        return ops.leaky_relu(self.bn(self.conv(x)))


class Sequential(Module):
    def __init__(self, *layers):
        super().__init__()
        self.layers = list(layers)

    def forward(self, x):
        for layer in self.layers:
            x = layer(x)
        return x
