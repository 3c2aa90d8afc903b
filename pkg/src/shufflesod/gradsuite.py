"""Named finite-difference gradient checks for every differentiable building block.

Each case builds fresh float64 inputs from a seed and hands them to
``grad_check``. Cases containing leaky-ReLU kinks resample their inputs when a
sample point lands on a kink.
"""
from dataclasses import dataclass

import numpy as np

from .autodiff import ops
from .autodiff.gradcheck import grad_check
from .autodiff.nn import BatchNorm2d, LayerNorm
from .autodiff.tensor import Tensor
from .crm import CRMStage
from .model import SaliencyNetwork
from .transformer import AttentionConfig, MultiHeadAttention, TransformerBlock, attention, sr_attention

PRIMITIVE_TOL = 1e-4
COMPOSITE_TOL = 1e-3


@dataclass
class GradCase:
    name: str
    build: object        # rng -> (fn, inputs)
    tol: float = PRIMITIVE_TOL
    max_coords: int | None = None
    kinked: bool = False


def _t(rng, *shape, scale=1.0):
    return Tensor(rng.standard_normal(shape) * scale, requires_grad=True)


def _matmul(rng):
    return (lambda a, b: ops.matmul(a, b)), [_t(rng, 2, 3, 4), _t(rng, 4, 5)]


def _conv2d(rng):
    return (lambda x, w, b: ops.conv2d(x, w, b, stride=1, pad=1)), [_t(rng, 2, 3, 5, 5), _t(rng, 4, 3, 3, 3), _t(rng, 4)]


def _conv2d_strided(rng):
    return (lambda x, w: ops.conv2d(x, w, None, stride=2, pad=1)), [_t(rng, 1, 2, 6, 6), _t(rng, 3, 2, 3, 3)]


def _batch_norm(rng):
    bn = BatchNorm2d(3)
    x, g, b = _t(rng, 4, 3, 3, 3), _t(rng, 3), _t(rng, 3)
    return (lambda x, g, b: ops.batch_norm(x, g, b, bn.running_mean, bn.running_var, True)), [x, g, b]


def _layer_norm(rng):
    ln = LayerNorm(6)
    ln.weight.data[:] = rng.standard_normal(6)
    ln.bias.data[:] = rng.standard_normal(6)
    return (lambda x, g, b: ops.layer_norm(x, g, b)), [_t(rng, 2, 4, 6), ln.weight, ln.bias]


def _activations(rng):
    def fn(x):
        return ops.concat([ops.sigmoid(x), ops.gelu(x), ops.leaky_relu(x), ops.relu(x), ops.exp(x * 0.3)], axis=1)
    return fn, [_t(rng, 2, 3, 4)]


def _softmax(rng):
    return (lambda x: ops.softmax(x, axis=-1)), [_t(rng, 2, 3, 5)]


def _bce(rng):
    target = Tensor((rng.random((2, 1, 4, 4)) > 0.5).astype(float))
    return (lambda z: ops.bce_with_logits(z, target)), [_t(rng, 2, 1, 4, 4, scale=2.0)]


def _shuffle(rng):
    return (lambda x: ops.pixel_shuffle(ops.pixel_unshuffle(x, 2) * 1.5, 2)), [_t(rng, 1, 2, 4, 4)]


def _attention(rng):
    return (lambda q, k, v: attention(q, k, v, heads=2)), [_t(rng, 2, 5, 4), _t(rng, 2, 3, 4), _t(rng, 2, 3, 4)]


def _sr_attention(rng):
    mod = MultiHeadAttention(rng, AttentionConfig(8, heads=2, reduction=2))
    x = _t(rng, 1, 16, 8)
    return (lambda x, w, sr: sr_attention(x, (4, 4), mod)), [x, mod.q.weight, mod.sr.weight]


def _transformer_block(rng):
    blk = TransformerBlock(rng, AttentionConfig(8, heads=2, reduction=2))
    x = _t(rng, 1, 16, 8)
    return (lambda x, w1, w2: blk(x, (4, 4))), [x, blk.mlp.fc1.weight, blk.attn.k.weight]


def _crm_stage(rng):
    stage = CRMStage(rng, in_channels=4, global_channels=2, dim=8, scale=2, heads=2)
    x, g = _t(rng, 2, 4, 4, 4), _t(rng, 2, 2, 4, 4)

    def fn(x, g, w1, w2, w3):
        logits1, logits2, _, _ = stage(x, g)
        return ops.concat([logits1, logits2], axis=1)
    return fn, [x, g, stage.f1.layers[0].conv.weight, stage.f2.conv.weight, stage.head2.weight]


def _full_network(rng):
    net = SaliencyNetwork(rng, side=32, widths=(8, 8, 16, 16), depths=(1, 1, 1, 1), reductions=(2, 1, 1, 1),
                          heads=2, patch=16, global_dim=16, decoder_dim=8)
    img = Tensor(rng.random((2, 3, 32, 32)), requires_grad=True)
    params = dict(net.named_parameters())
    picks = [params["encoder.stage1.embed.proj.weight"], params["branch.head.weight"],
             params["decoder.stage1.head2.weight"]]

    def fn(img, *_):
        out = net(img)
        return ops.concat([out.global_map.logits.reshape((2, -1)),
                           out.stages[0].logits2.reshape((2, -1))], axis=1)
    return fn, [img] + picks


CASES = [
    GradCase("matmul", _matmul),
    GradCase("conv2d", _conv2d),
    GradCase("conv2d_stride2", _conv2d_strided),
    GradCase("batch_norm", _batch_norm),
    GradCase("layer_norm", _layer_norm),
    GradCase("activations", _activations, kinked=True),
    GradCase("softmax", _softmax),
    GradCase("bce_with_logits", _bce),
    GradCase("pixel_shuffle", _shuffle),
    GradCase("attention", _attention),
    GradCase("sr_attention", _sr_attention),
    GradCase("transformer_block", _transformer_block, max_coords=24),
    GradCase("crm_stage", _crm_stage, max_coords=24, kinked=True),
    GradCase("full_network", _full_network, tol=COMPOSITE_TOL, max_coords=8, kinked=True),
]


def run_case(case, seed):
    rng = np.random.default_rng([seed, sum(map(ord, case.name))])
    fn, inputs = case.build(rng)

    # resampling rebuilds modules, so the closure must follow the new inputs
    state = {"fn": fn}

    def call(*xs):
        return state["fn"](*xs)

    def resample_and_rebind(r):
        f, xs = case.build(r)
        state["fn"] = f
        return xs
    return grad_check(call, inputs, tol=case.tol, max_coords=case.max_coords, seed=seed,
                      resample=resample_and_rebind if case.kinked else None)


def run_suite(seeds=range(20), names=None, report=None):
    """Run every case (or those in ``names``) for each seed; returns ``{name: [GradCheckReport]}``."""
    unknown = set(names or ()) - {c.name for c in CASES}
    if unknown:
        raise ValueError(f"unknown gradient cases: {sorted(unknown)}")
    results = {}
    for case in CASES:
        if names and case.name not in names:
            continue
        results[case.name] = [run_case(case, s) for s in seeds]
        if report:
            report(case, results[case.name])
    return results
