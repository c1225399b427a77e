"""Small building blocks shared by the deraining and mask networks.

Weights live in flat ``{path: Tensor}`` dicts so checkpoints are just named
arrays.  Freezing a dict drops ``requires_grad`` on every entry; frozen
weights never accumulate gradients.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .autodiff.tensor import _make


def conv_weight(rng, c_out, c_in, k, zero=False) -> Tensor:
    if zero:
        w = np.zeros((c_out, c_in, k, k))
    else:
        w = rng.standard_normal((c_out, c_in, k, k)) / np.sqrt(c_in * k * k)
    return Tensor(w, requires_grad=True)


def dw_weight(rng, c, k, zero=False) -> Tensor:
    if zero:
        w = np.zeros((c, k, k))
    else:
        w = rng.standard_normal((c, k, k)) / np.sqrt(k * k)
    return Tensor(w, requires_grad=True)


def linear_weight(rng, n_out, n_in, zero=False) -> Tensor:
    if zero:
        w = np.zeros((n_out, n_in))
    else:
        w = rng.standard_normal((n_out, n_in)) / np.sqrt(n_in)
    return Tensor(w, requires_grad=True)


def zeros_param(*shape) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True)


def ones_param(*shape) -> Tensor:
    return Tensor(np.ones(shape), requires_grad=True)


def apply_conv(x, w, b=None, stride=1, padding="zero"):
    out = ad.conv2d(x, w, padding=padding, stride=stride)
    if b is not None:
        c = out.shape[0]
        out = ad.add(out, ad.expand(ad.reshape(b, (c, 1, 1)), out.shape))
    return out


def channel_layer_norm(x, gamma, beta):
    """LayerNorm over channels of a (C,H,W) map (channel-last internally)."""
    hwc = ad.transpose(x, (1, 2, 0))
    return ad.transpose(ad.layer_norm(hwc, gamma, beta), (2, 0, 1))


def freeze(params: dict):
    for t in params.values():
        t.requires_grad = False
        t.grad = None


def unfreeze(params: dict):
    for t in params.values():
        t.requires_grad = True


def zero_grads(params: dict):
    for t in params.values():
        t.grad = None


def state_arrays(params: dict) -> dict:
    return {k: t.data for k, t in params.items()}


def load_state(params: dict, arrays: dict):
    missing = set(params) - set(arrays)
    extra = set(arrays) - set(params)
    if missing or extra:
        raise ValueError(f"weight mismatch: missing={sorted(missing)}, "
                         f"unexpected={sorted(extra)}")
    for k, t in params.items():
        arr = np.asarray(arrays[k], dtype=np.float64)
        if arr.shape != t.data.shape:
            raise ValueError(f"weight {k}: shape {arr.shape} != expected "
                             f"{t.data.shape}")
        t.data = arr.copy()


def masked_fill(t, keep_mask: np.ndarray, value: float):
    """Replace entries where ``keep_mask`` is False; gradient flows only
    through kept entries."""
    t = ad.astensor(t)
    data = np.where(keep_mask, t.data, value)

    def grad_fn(g):
        t.accumulate_grad(g * keep_mask)

    return _make(data, (t,), grad_fn)
