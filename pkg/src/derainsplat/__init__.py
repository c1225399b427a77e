"""Scene reconstruction from rain-degraded image sets.

Subpackages/modules:
    autodiff     float64 tensors with reverse-mode AD (conv, DFT, resize, ...)
    rainsim      deterministic rain streak / raindrop synthesis
    splats       Gaussian scene representation and differentiable rasterizer
    enhancer     compact deraining network (trained once, then frozen)
    maskpred     frequency-guided occlusion mask predictor
    losses       masked photometric + structural training objective
    metrics      PSNR / SSIM
    manifest     scene description files
    optim        Adam with parameter groups
    reconstruct  the training loop, rendering, and evaluation
    cli          the ``derainsplat`` command line
"""

__version__ = "0.1.0"
