"""Central-difference gradient verification for scalar losses."""
from __future__ import annotations

from typing import Callable

import numpy as np

from .params import ParamGroup
from .tensor import Tensor, backward


class NondeterministicLossError(RuntimeError):
    pass


def finite_diff_check(loss_fn: Callable[[dict[str, Tensor]], Tensor],
                      group: ParamGroup, step: float = 1e-5) -> float:
    """Return the worst relative error between backprop and central differences.

    ``loss_fn`` must build a scalar loss from a dict of parameter leaves and
    be deterministic; it is re-evaluated twice up front and any value drift
    raises ``NondeterministicLossError``.
    """
    first = loss_fn(group.leaves()).item()
    leaves = group.leaves()
    loss = loss_fn(leaves)
    if loss.item() != first:
        raise NondeterministicLossError("loss_fn is not deterministic")
    backward(loss)
    analytic = group.grads_from(leaves)

    worst = 0.0
    for name, arr in group.items():
        flat = arr.reshape(-1)
        ana = analytic[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            f_plus = loss_fn(group.leaves()).item()
            flat[i] = orig - step
            f_minus = loss_fn(group.leaves()).item()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * step)
            denom = max(abs(ana[i]), abs(numeric), 1e-8)
            err = abs(ana[i] - numeric) / denom
            if err > worst:
                worst = err
    return float(worst)
