"""Finite-difference verification of backward rules.

Two entry points:

* ``check_op`` exercises a single primitive in isolation over every input
  coordinate and reports failures under the op's name.
* ``grad_check`` verifies a full model loss against central differences on
  sampled parameter coordinates.

The closure passed to either must be deterministic (no live dropout) and
must rebuild the forward pass on every call.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .engine import Tape, backward

__all__ = ["GradCheckFailure", "GradCheckReport", "check_op", "grad_check"]

_REL_FLOOR = 1e-6


@dataclass
class GradCheckFailure:
    name: str  # op or parameter name
    index: tuple
    analytic: float
    numeric: float
    rel_error: float


@dataclass
class GradCheckReport:
    passed: bool
    max_rel_error: float
    checked: int
    failures: list[GradCheckFailure] = field(default_factory=list)

    def worst(self):
        return max(self.failures, key=lambda f: f.rel_error) if self.failures else None


def _rel_error(analytic, numeric):
    denom = max(abs(analytic), abs(numeric), _REL_FLOOR)
    return abs(analytic - numeric) / denom


def _central_diff(closure, tensor, index, h):
    original = tensor.values[index]
    tensor.values[index] = original + h
    f_plus = closure().item()
    tensor.values[index] = original - h
    f_minus = closure().item()
    tensor.values[index] = original
    return (f_plus - f_minus) / (2.0 * h)


def _check_coords(closure, named_tensors, coords, tol, h):
    with Tape() as tape:
        loss = closure()
    if not np.isfinite(loss.values):
        raise FloatingPointError("grad check closure produced a non-finite loss")
    grads = backward(tape, loss)
    failures = []
    max_err = 0.0
    checked = 0
    for name, tensor, idx_list in coords:
        analytic_full = grads.get(tensor)
        for index in idx_list:
            analytic = 0.0 if analytic_full is None else float(analytic_full[index])
            numeric = _central_diff(closure, tensor, index, h)
            err = _rel_error(analytic, numeric)
            max_err = max(max_err, err)
            checked += 1
            if err > tol:
                failures.append(GradCheckFailure(name, index, analytic, numeric, err))
    return GradCheckReport(not failures, max_err, checked, failures)


def check_op(name, closure, inputs, tol=1e-4, h=1e-5):
    """Verify one primitive against central differences on every coordinate.

    ``closure`` must reduce the op's output to a scalar loss built from the
    ``inputs`` tensors (all marked requires_grad).  Failures carry ``name``
    so a corrupted backward rule is reported against the offending op.
    """
    coords = []
    for i, t in enumerate(inputs):
        idx_list = list(np.ndindex(t.shape)) if t.ndim else [()]
        coords.append((name, t, idx_list))
    return _check_coords(closure, inputs, coords, tol, h)


def grad_check(closure, params, tol=1e-3, h=1e-5, samples_per_param=4, seed=0):
    """Verify a model loss against central differences on sampled coordinates.

    ``params`` maps names to tensors.  Up to ``samples_per_param``
    coordinates are drawn per tensor with a local PRNG, so the check is
    deterministic for a given seed.
    """
    rng = np.random.default_rng(seed)
    coords = []
    for name, tensor in params.items():
        if tensor.ndim == 0:
            coords.append((name, tensor, [()]))
            continue
        total = tensor.size
        k = min(samples_per_param, total)
        flat = rng.choice(total, size=k, replace=False)
        idx_list = [np.unravel_index(f, tensor.shape) for f in sorted(flat)]
        coords.append((name, tensor, idx_list))
    return _check_coords(closure, params, coords, tol, h)
