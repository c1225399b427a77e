"""Masked reconstruction objective.

The photometric term discounts pixels by a soft occlusion mask M:

    l_c  = (1 - w_ssim) * mean((1-M) |render - target|)
         +      w_ssim  * mean((1-M) (1 - SSIM_map))
    loss = l_c + w_reg * sum(M^2)

Raising M buys the photometric term out of a pixel while the quadratic
penalty charges for it; that tension is the whole (unsupervised) training
signal for the mask networks.  The norm is per-pixel L1 with mean reduction,
and the quadratic mask penalty is an unnormalized sum, so the default w_reg
scales like 1/(H*W) to stay resolution-independent.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import autodiff as ad
from .autodiff import Tensor
from .metrics import ssim_map

DEFAULT_LAMBDA_SSIM = 0.2
DEFAULT_REG_SCALE = 0.5  # w_reg = DEFAULT_REG_SCALE / (H*W) when unset


@dataclass
class LossConfig:
    lambda_ssim: float = DEFAULT_LAMBDA_SSIM
    lambda_reg: float = None       # None -> DEFAULT_REG_SCALE / (H*W)
    ssim_window: int = 11
    ssim_sigma: float = 1.5
    ssim_c1: float = 0.01 ** 2
    ssim_c2: float = 0.03 ** 2

    def __post_init__(self):
        if self.lambda_ssim < 0 or (self.lambda_reg is not None
                                    and self.lambda_reg < 0):
            raise ValueError("loss weights must be non-negative")
        if self.ssim_window % 2 == 0:
            raise ValueError(f"ssim_window must be odd, got {self.ssim_window}")

    def effective_lambda_reg(self, height: int, width: int) -> float:
        if self.lambda_reg is not None:
            return self.lambda_reg
        return DEFAULT_REG_SCALE / float(height * width)


@dataclass
class LossBreakdown:
    l_c: float
    l_ssim_term: float
    l_reg: float
    lambda_reg: float
    total: float
    tensor: Tensor  # differentiable total, for backward


def _mask_weight(mask, height, width):
    """(1,H,W) or (H,W) mask -> (H,W,3) weight (1-M)."""
    mask = ad.astensor(mask)
    if mask.data.ndim == 3 and mask.shape[0] == 1:
        m2 = ad.reshape(mask, (height, width))
    elif mask.data.ndim == 2:
        m2 = mask
    else:
        raise ValueError(f"mask must be (1,H,W) or (H,W), got {mask.shape}")
    if m2.shape != (height, width):
        raise ValueError(f"mask spatial size {m2.shape} != image "
                         f"({height},{width})")
    if mask.data.min() < 0.0 or mask.data.max() > 1.0:
        raise ValueError("mask values must lie in [0,1]")
    keep = ad.sub(1.0, m2)
    return ad.expand(ad.reshape(keep, (height, width, 1)), (height, width, 3))


def _photometric_terms(rendered, target, mask, cfg: LossConfig):
    rendered, target = ad.astensor(rendered), ad.astensor(target)
    if rendered.shape != target.shape:
        raise ValueError(f"rendered {rendered.shape} vs target {target.shape} "
                         "shape mismatch")
    H, W, _ = rendered.shape
    keep = _mask_weight(mask, H, W)
    l1_term = ad.tmean(ad.mul(keep, ad.tabs(ad.sub(rendered, target))))
    if cfg.lambda_ssim == 0.0:
        return l1_term, None
    smap = ssim_map(rendered, target, window=cfg.ssim_window,
                    sigma=cfg.ssim_sigma, c1=cfg.ssim_c1, c2=cfg.ssim_c2)
    dssim_term = ad.tmean(ad.mul(keep, ad.sub(1.0, smap)))
    return l1_term, dssim_term


def masked_photometric_loss(rendered, target, mask, cfg: LossConfig = None):
    """Mask-discounted L1 + DSSIM mix; differentiable in rendered and mask."""
    cfg = cfg or LossConfig()
    l1_term, dssim_term = _photometric_terms(rendered, target, mask, cfg)
    out = ad.mul(l1_term, 1.0 - cfg.lambda_ssim)
    if dssim_term is not None:
        out = ad.add(out, ad.mul(dssim_term, cfg.lambda_ssim))
    return out


def mask_reg(mask) -> Tensor:
    """Unnormalized sum of squared mask values."""
    mask = ad.astensor(mask)
    if mask.data.min() < 0.0 or mask.data.max() > 1.0:
        raise ValueError("mask values must lie in [0,1]")
    return ad.tsum(ad.mul(mask, mask))


def total_loss(rendered, target, mask, cfg: LossConfig = None) -> LossBreakdown:
    """Combine the masked photometric term with the mask-size penalty."""
    cfg = cfg or LossConfig()
    rendered = ad.astensor(rendered)
    H, W = rendered.shape[0], rendered.shape[1]
    w_reg = cfg.effective_lambda_reg(H, W)

    l1_term, dssim_term = _photometric_terms(rendered, target, mask, cfg)
    l_c = ad.mul(l1_term, 1.0 - cfg.lambda_ssim)
    if dssim_term is not None:
        l_c = ad.add(l_c, ad.mul(dssim_term, cfg.lambda_ssim))
    l_reg = mask_reg(mask)
    total = ad.add(l_c, ad.mul(l_reg, w_reg))

    return LossBreakdown(
        l_c=l_c.item(),
        l_ssim_term=(cfg.lambda_ssim * dssim_term.item()
                     if dssim_term is not None else 0.0),
        l_reg=l_reg.item(),
        lambda_reg=w_reg,
        total=total.item(),
        tensor=total,
    )
