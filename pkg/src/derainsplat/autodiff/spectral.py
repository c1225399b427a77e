"""2D DFT ops over (C,H,W) tensors.

A complex value is a pair of real planes; gradients flow through both.
``fft2`` is the unnormalized forward transform (negative exponent), and
``ifft2`` carries the 1/(H*W) factor, matching numpy's conventions.  Both
work for any H,W >= 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor, astensor, mul, tsqrt, add, _make


@dataclass
class ComplexTensor:
    re: Tensor
    im: Tensor

    @property
    def shape(self):
        return self.re.data.shape


def fft2(x: Tensor) -> ComplexTensor:
    """Per-channel 2D DFT of a real (C,H,W) tensor."""
    x = astensor(x)
    if x.data.ndim != 3:
        raise ValueError("fft2 expects a real (C,H,W) tensor")
    C, H, W = x.data.shape
    if H < 1 or W < 1:
        raise ValueError("fft2: empty tensor")
    n = H * W
    spec = np.fft.fft2(x.data, axes=(-2, -1))

    # adjoint of the unnormalized DFT is n * ifft2
    def grad_re(g):
        x.accumulate_grad(np.real(np.fft.ifft2(g, axes=(-2, -1))) * n)

    def grad_im(g):
        x.accumulate_grad(-np.imag(np.fft.ifft2(g, axes=(-2, -1))) * n)

    re = _make(np.ascontiguousarray(spec.real), (x,), grad_re)
    im = _make(np.ascontiguousarray(spec.imag), (x,), grad_im)
    return ComplexTensor(re, im)


def ifft2(z: ComplexTensor) -> ComplexTensor:
    """Per-channel inverse 2D DFT with 1/(H*W) normalization."""
    if z.re.data.shape != z.im.data.shape:
        raise ValueError("ifft2: real/imag plane shapes differ")
    if z.re.data.ndim != 3:
        raise ValueError("ifft2 expects (C,H,W) planes")
    C, H, W = z.re.data.shape
    if H < 1 or W < 1:
        raise ValueError("ifft2: empty tensor")
    n = H * W
    out = np.fft.ifft2(z.re.data + 1j * z.im.data, axes=(-2, -1))
    zre, zim = z.re, z.im

    # adjoint of (1/n) * conj-DFT is (1/n) * DFT
    def grad_re(g):
        c = np.fft.fft2(g, axes=(-2, -1)) / n
        zre.accumulate_grad(np.real(c))
        zim.accumulate_grad(np.imag(c))

    def grad_im(g):
        c = np.fft.fft2(g, axes=(-2, -1)) / n
        zre.accumulate_grad(-np.imag(c))
        zim.accumulate_grad(np.real(c))

    re = _make(np.ascontiguousarray(out.real), (zre, zim), grad_re)
    im = _make(np.ascontiguousarray(out.imag), (zre, zim), grad_im)
    return ComplexTensor(re, im)


def scale_spectrum(z: ComplexTensor, mask: np.ndarray) -> ComplexTensor:
    """Multiply a spectrum by a fixed real per-frequency mask."""
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != z.re.data.shape[-2:]:
        raise ValueError(f"scale_spectrum: mask shape {mask.shape} != spectrum "
                         f"spatial shape {z.re.data.shape[-2:]}")
    m = Tensor(np.broadcast_to(mask, z.re.data.shape).copy())
    return ComplexTensor(mul(z.re, m), mul(z.im, m))


def magnitude(z: ComplexTensor) -> Tensor:
    """|z| per element (not differentiable at exactly 0)."""
    return tsqrt(add(mul(z.re, z.re), mul(z.im, z.im)))
