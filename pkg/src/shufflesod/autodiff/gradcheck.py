"""Central finite-difference verification of analytic gradients."""
from dataclasses import dataclass

import numpy as np

from .tensor import Tensor, grad, no_grad

STEP = 1e-5


@dataclass
class GradCheckReport:
    errors: list          # max relative error per input
    max_error: float
    passed: bool
    retries: int = 0

    def __str__(self):
        status = "ok" if self.passed else "FAIL"
        return f"{status} max_rel_err={self.max_error:.3e} per_input={[f'{e:.2e}' for e in self.errors]}"


def _scalarize(out, weights):
    return float(np.sum(out.data * weights))


def _check_once(fn, inputs, tol, h, max_coords, rng):
    out = fn(*inputs)
    weights = rng.standard_normal(out.shape)
    seed = weights
    analytic = grad(out, inputs, seed=seed)
    errors = []
    with no_grad():
        for t, a in zip(inputs, analytic):
            flat = t.data.reshape(-1)
            coords = np.arange(flat.size)
            if max_coords is not None and flat.size > max_coords:
                coords = rng.choice(flat.size, size=max_coords, replace=False)
            worst = 0.0
            for i in coords:
                orig = flat[i]
                flat[i] = orig + h
                fp = _scalarize(fn(*inputs), weights)
                flat[i] = orig - h
                fm = _scalarize(fn(*inputs), weights)
                flat[i] = orig
                numeric = (fp - fm) / (2.0 * h)
                err = abs(a.reshape(-1)[i] - numeric) / max(1.0, abs(numeric))
                worst = max(worst, err)
            errors.append(worst)
    max_error = max(errors) if errors else 0.0
    return GradCheckReport(errors, max_error, max_error < tol)


def grad_check(fn, inputs, tol=1e-4, h=STEP, max_coords=None, seed=0,
               resample=None, max_retries=3):
    """Compare reverse-mode gradients of ``fn`` with central differences.

    ``fn`` maps the input tensors to one output tensor; the output is
    contracted with fixed random weights so every component is exercised.
    The reported error per input is ``max |analytic - numeric| / max(1, |numeric|)``.

    If the check fails and ``resample(rng)`` is given, it must return fresh
    inputs (for sample points sitting on a kink); the check is retried up to
    ``max_retries`` times and the number of retries is reported.
    """
    rng = np.random.default_rng(seed)
    inputs = [t if isinstance(t, Tensor) else Tensor(t, requires_grad=True) for t in inputs]
    report = _check_once(fn, inputs, tol, h, max_coords, rng)
    retries = 0
    while not report.passed and resample is not None and retries < max_retries:
        retries += 1
        inputs = resample(rng)
        report = _check_once(fn, inputs, tol, h, max_coords, rng)
    report.retries = retries
    return report
