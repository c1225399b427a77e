"""Central finite-difference verification of reverse-mode gradients."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


def grad_check(f, leaves, eps=1e-5):
    """Compare analytic gradients of a scalar computation against central
    differences at every element of every leaf.

    ``f`` is a zero-argument callable that rebuilds the computation from the
    current leaf values and returns a scalar Tensor.  Returns the worst
    relative error max(|a-n| / max(|a|,|n|,1)).
    """
    if not (1e-7 <= eps <= 1e-3):
        raise ValueError(f"grad_check: eps={eps} outside [1e-7, 1e-3]")
    leaves = list(leaves)
    for leaf in leaves:
        if not isinstance(leaf, Tensor):
            raise TypeError("grad_check leaves must be Tensors")
        leaf.requires_grad = True
        leaf.zero_grad()

    out = f()
    if out.data.size != 1:
        raise ValueError(f"grad_check: f must be scalar-valued, got shape "
                         f"{out.data.shape}")
    out.backward()
    analytic = [np.zeros_like(leaf.data) if leaf.grad is None else leaf.grad.copy()
                for leaf in leaves]

    # plain forward passes for the numeric side
    flags = [leaf.requires_grad for leaf in leaves]
    for leaf in leaves:
        leaf.requires_grad = False

    worst = 0.0
    try:
        for leaf, an in zip(leaves, analytic):
            flat = leaf.data.reshape(-1)
            aflat = an.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                f_plus = float(f().data)
                flat[i] = orig - eps
                f_minus = float(f().data)
                flat[i] = orig
                numeric = (f_plus - f_minus) / (2.0 * eps)
                denom = max(abs(aflat[i]), abs(numeric), 1.0)
                worst = max(worst, abs(aflat[i] - numeric) / denom)
    finally:
        for leaf, flag in zip(leaves, flags):
            leaf.requires_grad = flag
    return worst
