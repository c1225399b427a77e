"""Spatial ops: padding, convolution, depthwise convolution, bilinear resize.

All convolutions use cross-correlation semantics with "same" output size at
stride 1.  Inputs are channel-first (C,H,W); kernels are (C_out,C_in,kh,kw)
for conv2d and (C,kh,kw) for depthwise_conv2d.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import Tensor, astensor, _make

_PAD_MODES = ("zero", "reflect")

# reflect-pad scatter maps, keyed by (H, W, pads)
_reflect_maps: dict = {}


def pad2d(x, pads, mode="zero"):
    """Pad the last two axes of a (C,H,W) tensor.

    pads = (top, bottom, left, right).
    """
    x = astensor(x)
    if x.data.ndim != 3:
        raise ValueError("pad2d expects (C,H,W)")
    if mode not in _PAD_MODES:
        raise ValueError(f"pad2d: unknown mode {mode!r}, expected one of {_PAD_MODES}")
    top, bottom, left, right = pads
    if top == bottom == left == right == 0:
        return x
    C, H, W = x.data.shape
    np_mode = "constant" if mode == "zero" else "reflect"
    if mode == "reflect" and (top >= H or bottom >= H or left >= W or right >= W):
        raise ValueError(f"pad2d: reflect padding {pads} too large for {H}x{W}")
    data = np.pad(x.data, ((0, 0), (top, bottom), (left, right)), mode=np_mode)

    if mode == "zero":
        def grad_fn(g):
            x.accumulate_grad(g[:, top:top + H, left:left + W])
    else:
        key = (H, W, (top, bottom, left, right))
        idx = _reflect_maps.get(key)
        if idx is None:
            base = np.arange(H * W, dtype=np.int64).reshape(H, W)
            idx = np.pad(base, ((top, bottom), (left, right)), mode="reflect").ravel()
            _reflect_maps[key] = idx

        def grad_fn(g):
            flat = g.reshape(C, -1)
            buf = np.zeros((C, H * W))
            for c in range(C):
                buf[c] = np.bincount(idx, weights=flat[c], minlength=H * W)
            x.accumulate_grad(buf.reshape(C, H, W))

    return _make(data, (x,), grad_fn)


def _same_pads(kh, kw):
    pt = (kh - 1) // 2
    pl = (kw - 1) // 2
    return pt, kh - 1 - pt, pl, kw - 1 - pl


def conv2d(x, kernel, padding="zero", stride=1):
    """Cross-correlate (C_in,H,W) with (C_out,C_in,kh,kw); same-size at stride 1."""
    x, kernel = astensor(x), astensor(kernel)
    if x.data.ndim != 3:
        raise ValueError(f"conv2d: input must be (C_in,H,W), got ndim={x.data.ndim}")
    if kernel.data.ndim != 4:
        raise ValueError(f"conv2d: kernel must be (C_out,C_in,kh,kw), got "
                         f"ndim={kernel.data.ndim}")
    cin, H, W = x.data.shape
    cout, kcin, kh, kw = kernel.data.shape
    if kcin != cin:
        raise ValueError(f"conv2d: input channel axis 0 has size {cin} but "
                         f"kernel channel axis 1 has size {kcin}")
    padded = pad2d(x, _same_pads(kh, kw), mode=padding)
    Hp, Wp = padded.data.shape[1:]
    if kh > Hp or kw > Wp:
        raise ValueError(f"conv2d: kernel {kh}x{kw} larger than padded input "
                         f"{Hp}x{Wp}")
    return _conv2d_valid(padded, kernel, stride)


def _conv2d_valid(x, kernel, stride):
    x, kernel = astensor(x), astensor(kernel)
    cin, Hp, Wp = x.data.shape
    cout, _, kh, kw = kernel.data.shape
    windows = sliding_window_view(x.data, (kh, kw), axis=(1, 2))[:, ::stride, ::stride]
    Ho, Wo = windows.shape[1], windows.shape[2]
    data = np.einsum("ihwkl,oikl->ohw", windows, kernel.data, optimize=True)

    def grad_fn(g):
        kernel.accumulate_grad(
            np.einsum("ihwkl,ohw->oikl", windows, g, optimize=True))
        gx = np.zeros((cin, Hp, Wp))
        for ki in range(kh):
            he = ki + (Ho - 1) * stride + 1
            for kj in range(kw):
                we = kj + (Wo - 1) * stride + 1
                gx[:, ki:he:stride, kj:we:stride] += np.einsum(
                    "ohw,oi->ihw", g, kernel.data[:, :, ki, kj], optimize=True)
        x.accumulate_grad(gx)

    return _make(data, (x, kernel), grad_fn)


def depthwise_conv2d(x, kernel, padding="reflect"):
    """Per-channel cross-correlation: channel c sees only kernel slice c."""
    x, kernel = astensor(x), astensor(kernel)
    if x.data.ndim != 3 or kernel.data.ndim != 3:
        raise ValueError("depthwise_conv2d expects input (C,H,W) and kernel (C,kh,kw)")
    C, H, W = x.data.shape
    kc, kh, kw = kernel.data.shape
    if kc != C:
        raise ValueError(f"depthwise_conv2d: input has {C} channels but kernel "
                         f"has {kc}")
    padded = pad2d(x, _same_pads(kh, kw), mode=padding)
    Hp, Wp = padded.data.shape[1:]
    windows = sliding_window_view(padded.data, (kh, kw), axis=(1, 2))
    data = np.einsum("chwkl,ckl->chw", windows, kernel.data, optimize=True)

    def grad_fn(g):
        kernel.accumulate_grad(
            np.einsum("chwkl,chw->ckl", windows, g, optimize=True))
        gx = np.zeros((C, Hp, Wp))
        for ki in range(kh):
            for kj in range(kw):
                gx[:, ki:ki + H, kj:kj + W] += g * kernel.data[:, ki:ki + 1, kj:kj + 1]
        padded.accumulate_grad(gx)

    return _make(data, (padded, kernel), grad_fn)


def _resize_axis_weights(n_in, n_out):
    # align-corners=false sampling grid
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1.0)
    i0 = np.floor(src).astype(np.int64)
    i1 = np.minimum(i0 + 1, n_in - 1)
    w1 = src - i0
    return i0, i1, 1.0 - w1, w1


def bilinear_resize(x, out_h, out_w):
    """Bilinear resample of (C,H,W) to (C,out_h,out_w), align-corners=false."""
    x = astensor(x)
    if x.data.ndim != 3:
        raise ValueError("bilinear_resize expects (C,H,W)")
    if out_h < 1 or out_w < 1:
        raise ValueError(f"bilinear_resize: target size {out_h}x{out_w} must be "
                         "at least 1x1")
    C, H, W = x.data.shape
    y0, y1, wy0, wy1 = _resize_axis_weights(H, out_h)
    x0, x1, wx0, wx1 = _resize_axis_weights(W, out_w)

    rows = x.data[:, y0, :] * wy0[None, :, None] + x.data[:, y1, :] * wy1[None, :, None]
    data = rows[:, :, x0] * wx0[None, None, :] + rows[:, :, x1] * wx1[None, None, :]

    def grad_fn(g):
        grows = np.zeros((C, out_h, W))
        np.add.at(grows, (slice(None), slice(None), x0), g * wx0[None, None, :])
        np.add.at(grows, (slice(None), slice(None), x1), g * wx1[None, None, :])
        gx = np.zeros((C, H, W))
        np.add.at(gx, (slice(None), y0, slice(None)), grows * wy0[None, :, None])
        np.add.at(gx, (slice(None), y1, slice(None)), grows * wy1[None, :, None])
        x.accumulate_grad(gx)

    return _make(data, (x,), grad_fn)
