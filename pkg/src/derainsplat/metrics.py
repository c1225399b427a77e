"""PSNR and Gaussian-windowed SSIM.

``ssim_map`` is differentiable (Tensor in/out) so the structural term can sit
inside the training objective; ``psnr``/``ssim`` are plain-float metrics.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

PSNR_CAP_DB = 99.0


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """10*log10(peak^2 / MSE), capped at 99 dB (and for MSE < 1e-12)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"psnr: shape mismatch {a.shape} vs {b.shape}")
    if peak <= 0:
        raise ValueError(f"psnr: peak must be positive, got {peak}")
    mse = float(np.mean((a - b) ** 2))
    if mse < 1e-12:
        return PSNR_CAP_DB
    return min(10.0 * np.log10(peak * peak / mse), PSNR_CAP_DB)


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    if size % 2 == 0 or size < 1:
        raise ValueError(f"SSIM window must be odd and positive, got {size}")
    half = (size - 1) / 2.0
    g = np.exp(-((np.arange(size) - half) ** 2) / (2.0 * sigma * sigma))
    w = np.outer(g, g)
    return w / w.sum()


def ssim_map(a, b, window: int = 11, sigma: float = 1.5,
             c1: float = 0.01 ** 2, c2: float = 0.03 ** 2):
    """Per-pixel, per-channel SSIM of two (H,W,3) images (Tensor-valued).

    Local statistics come from a Gaussian window applied per channel with
    zero padding.  Returns a (H,W,3) Tensor in [-1, 1].
    """
    a, b = ad.astensor(a), ad.astensor(b)
    if a.shape != b.shape:
        raise ValueError(f"ssim: shape mismatch {a.shape} vs {b.shape}")
    if a.data.ndim != 3 or a.shape[2] != 3:
        raise ValueError(f"ssim expects (H,W,3) images, got {a.shape}")
    H, W, _ = a.shape
    win = gaussian_window(window, sigma)
    kernel = Tensor(np.broadcast_to(win, (3, window, window)).copy())

    def blur(t):
        return ad.depthwise_conv2d(t, kernel, padding="zero")

    ac = ad.transpose(a, (2, 0, 1))
    bc = ad.transpose(b, (2, 0, 1))
    mu_a = blur(ac)
    mu_b = blur(bc)
    mu_aa = ad.mul(mu_a, mu_a)
    mu_bb = ad.mul(mu_b, mu_b)
    mu_ab = ad.mul(mu_a, mu_b)
    var_a = ad.sub(blur(ad.mul(ac, ac)), mu_aa)
    var_b = ad.sub(blur(ad.mul(bc, bc)), mu_bb)
    cov = ad.sub(blur(ad.mul(ac, bc)), mu_ab)

    num = ad.mul(ad.add(ad.mul(mu_ab, 2.0), c1), ad.add(ad.mul(cov, 2.0), c2))
    den = ad.mul(ad.add(ad.add(mu_aa, mu_bb), c1),
                 ad.add(ad.add(var_a, var_b), c2))
    return ad.transpose(ad.div(num, den), (1, 2, 0))


def ssim(a: np.ndarray, b: np.ndarray, window: int = 11, sigma: float = 1.5,
         c1: float = 0.01 ** 2, c2: float = 0.03 ** 2) -> float:
    """Mean SSIM over pixels and channels (plain float)."""
    m = ssim_map(Tensor(np.asarray(a, dtype=np.float64)),
                 Tensor(np.asarray(b, dtype=np.float64)),
                 window=window, sigma=sigma, c1=c1, c2=c2)
    return float(m.data.mean())
