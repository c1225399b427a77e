"""Compact deraining network: encoder of depthwise-conv blocks, attention
bottleneck, decoder of (optionally sparse) attention blocks, with skip
connections and a global residual.

The network predicts a correction to its input and is trained on paired
rainy/clean images; for scene reconstruction it is frozen and applied once
per view.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import nn
from .autodiff import Tensor
from .metrics import psnr
from .optim import Adam


@dataclass
class EnhancerConfig:
    levels: int = 3
    encoder_blocks: tuple = (2, 2, 2)
    bottleneck_blocks: int = 2
    decoder_blocks: tuple = (2, 2, 2)
    base_channels: int = 8
    attention: str = "sparse-topk"      # decoder mode: full | sparse-topk
    topk_fraction: float = 0.5
    kernel_size: int = 3

    def __post_init__(self):
        if len(self.encoder_blocks) != self.levels:
            raise ValueError(f"encoder_blocks has {len(self.encoder_blocks)} "
                             f"entries for {self.levels} levels")
        if len(self.decoder_blocks) != self.levels:
            raise ValueError(f"decoder_blocks has {len(self.decoder_blocks)} "
                             f"entries for {self.levels} levels")
        if self.base_channels % 2 != 0:
            raise ValueError("base_channels must be even")
        if self.attention not in ("full", "sparse-topk"):
            raise ValueError(f"unknown attention mode {self.attention!r}")
        if not (0.0 < self.topk_fraction <= 1.0):
            raise ValueError(f"topk_fraction must be in (0,1], got "
                             f"{self.topk_fraction}")

    def channels(self, level: int) -> int:
        return self.base_channels * (2 ** level)

    def to_dict(self) -> dict:
        return {"levels": self.levels,
                "encoder_blocks": list(self.encoder_blocks),
                "bottleneck_blocks": self.bottleneck_blocks,
                "decoder_blocks": list(self.decoder_blocks),
                "base_channels": self.base_channels,
                "attention": self.attention,
                "topk_fraction": self.topk_fraction,
                "kernel_size": self.kernel_size}

    @classmethod
    def from_dict(cls, d: dict) -> "EnhancerConfig":
        d = dict(d)
        d["encoder_blocks"] = tuple(d["encoder_blocks"])
        d["decoder_blocks"] = tuple(d["decoder_blocks"])
        return cls(**d)


def dwconv_block(x, weights: dict, prefix: str):
    """depthwise conv -> channel LayerNorm -> GELU -> depthwise conv, residual."""
    h = ad.depthwise_conv2d(x, weights[prefix + ".dw1"], padding="reflect")
    h = nn.channel_layer_norm(h, weights[prefix + ".ln_g"], weights[prefix + ".ln_b"])
    h = ad.gelu(h)
    h = ad.depthwise_conv2d(h, weights[prefix + ".dw2"], padding="reflect")
    return ad.add(x, h)


def attention_block(x, weights: dict, prefix: str, mode: str = "full",
                    topk_fraction: float = 1.0):
    """Scaled dot-product self-attention over spatial tokens, residual.

    In sparse-topk mode only the ceil(topk_fraction * HW) largest logits per
    query survive the softmax; gradients flow only through kept entries.
    """
    if not (0.0 < topk_fraction <= 1.0):
        raise ValueError(f"topk_fraction must be in (0,1], got {topk_fraction}")
    C, H, W = x.shape
    tokens = ad.transpose(ad.reshape(x, (C, H * W)), (1, 0))   # (HW,C)
    q = ad.matmul(tokens, weights[prefix + ".wq"])
    k = ad.matmul(tokens, weights[prefix + ".wk"])
    v = ad.matmul(tokens, weights[prefix + ".wv"])
    logits = ad.mul(ad.matmul(q, ad.transpose(k, (1, 0))), 1.0 / np.sqrt(C))
    if mode == "sparse-topk":
        hw = H * W
        keep_n = int(np.ceil(topk_fraction * hw))
        if keep_n < hw:
            thresh = np.partition(logits.data, hw - keep_n, axis=1)[:, hw - keep_n]
            logits = nn.masked_fill(logits, logits.data >= thresh[:, None], -1e30)
    elif mode != "full":
        raise ValueError(f"unknown attention mode {mode!r}")
    attn = ad.softmax(logits, axis=-1)
    out = ad.matmul(ad.matmul(attn, v), weights[prefix + ".wo"])
    return ad.add(x, ad.transpose(ad.reshape(ad.transpose(out, (1, 0)),
                                             (C, H, W)), (0, 1, 2)))


class Enhancer:
    """Owns the weight dict; ``forward`` maps a (3,H,W) Tensor in [0,1] to an
    enhanced image of the same shape."""

    def __init__(self, config: EnhancerConfig = None, seed: int = 0):
        self.config = config or EnhancerConfig()
        self.frozen = False
        self.params: dict = {}
        self._build(np.random.default_rng(seed))

    def _build(self, rng):
        cfg = self.config
        k = cfg.kernel_size
        p = self.params
        p["in_conv.w"] = nn.conv_weight(rng, cfg.channels(0), 3, k)
        p["in_conv.b"] = nn.zeros_param(cfg.channels(0))
        for i in range(cfg.levels):
            c = cfg.channels(i)
            for j in range(cfg.encoder_blocks[i]):
                pre = f"enc{i}.block{j}"
                p[pre + ".dw1"] = nn.dw_weight(rng, c, k)
                p[pre + ".ln_g"] = nn.ones_param(c)
                p[pre + ".ln_b"] = nn.zeros_param(c)
                p[pre + ".dw2"] = nn.dw_weight(rng, c, k)
            if i < cfg.levels - 1:
                p[f"down{i}.w"] = nn.conv_weight(rng, cfg.channels(i + 1), c, k)
                p[f"down{i}.b"] = nn.zeros_param(cfg.channels(i + 1))
        c_deep = cfg.channels(cfg.levels - 1)
        for j in range(cfg.bottleneck_blocks):
            pre = f"mid.block{j}"
            for name in ("wq", "wk", "wv"):
                p[f"{pre}.{name}"] = nn.linear_weight(rng, c_deep, c_deep)
            p[pre + ".wo"] = nn.linear_weight(rng, c_deep, c_deep, zero=True)
        for i in range(cfg.levels):
            c = cfg.channels(i)
            for j in range(cfg.decoder_blocks[i]):
                pre = f"dec{i}.block{j}"
                for name in ("wq", "wk", "wv"):
                    p[f"{pre}.{name}"] = nn.linear_weight(rng, c, c)
                p[pre + ".wo"] = nn.linear_weight(rng, c, c, zero=True)
            if i > 0:
                p[f"up{i}.w"] = nn.conv_weight(rng, cfg.channels(i - 1), c, 1)
                p[f"up{i}.b"] = nn.zeros_param(cfg.channels(i - 1))
        p["out_conv.w"] = nn.conv_weight(rng, 3, cfg.channels(0), k, zero=True)
        p["out_conv.b"] = nn.zeros_param(3)

    def freeze(self):
        nn.freeze(self.params)
        self.frozen = True

    def forward(self, img) -> Tensor:
        cfg = self.config
        img = ad.astensor(img)
        if img.data.ndim != 3 or img.shape[0] != 3:
            raise ValueError(f"enhancer expects (3,H,W), got {img.shape}")
        if img.data.size == 0:
            raise ValueError("empty image")
        _, H, W = img.shape
        mult = 2 ** (cfg.levels - 1)
        pad_h = (-H) % mult
        pad_w = (-W) % mult
        x_in = ad.pad2d(img, (0, pad_h, 0, pad_w), mode="reflect") \
            if (pad_h or pad_w) else img

        w = self.params
        x = nn.apply_conv(x_in, w["in_conv.w"], w["in_conv.b"])
        skips = []
        for i in range(cfg.levels):
            for j in range(cfg.encoder_blocks[i]):
                x = dwconv_block(x, w, f"enc{i}.block{j}")
            skips.append(x)
            if i < cfg.levels - 1:
                x = ad.gelu(nn.apply_conv(x, w[f"down{i}.w"], w[f"down{i}.b"],
                                          stride=2))
        for j in range(cfg.bottleneck_blocks):
            x = attention_block(x, w, f"mid.block{j}", mode="full")
        for i in range(cfg.levels - 1, -1, -1):
            for j in range(cfg.decoder_blocks[i]):
                x = attention_block(x, w, f"dec{i}.block{j}",
                                    mode=cfg.attention,
                                    topk_fraction=cfg.topk_fraction)
            if i > 0:
                up_h, up_w = skips[i - 1].shape[1], skips[i - 1].shape[2]
                x = ad.bilinear_resize(x, up_h, up_w)
                x = nn.apply_conv(x, w[f"up{i}.w"], w[f"up{i}.b"])
                x = ad.add(x, skips[i - 1])
        delta = nn.apply_conv(x, w["out_conv.w"], w["out_conv.b"])
        out = ad.clamp(ad.add(x_in, delta), 0.0, 1.0)
        if pad_h or pad_w:
            out = out[:, :H, :W]
        return out

    def enhance_image(self, image: np.ndarray) -> np.ndarray:
        """Frozen inference on a (H,W,3) array in [0,1]."""
        t = Tensor(np.asarray(image, dtype=np.float64).transpose(2, 0, 1))
        out = self.forward(t)
        return out.data.transpose(1, 2, 0)


def enhance(image: np.ndarray, enhancer: Enhancer) -> np.ndarray:
    return enhancer.enhance_image(image)


@dataclass
class TrainReport:
    epoch_losses: list = field(default_factory=list)
    val_psnrs: list = field(default_factory=list)
    best_epoch: int = -1
    best_val_psnr: float = -np.inf


def train_enhancer(pairs, config: EnhancerConfig = None, *, epochs: int = 8,
                   lr: float = 2e-3, batch_size: int = 4, seed: int = 0,
                   val_fraction: float = 0.1):
    """L1-train on (rainy, clean) pairs; keeps the best-validation weights.

    Returns ``(Enhancer, TrainReport)``; the returned weights are the best
    validation checkpoint and are ready to freeze.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("train_enhancer: empty dataset")
    shape0 = np.asarray(pairs[0][0]).shape
    for r, c in pairs:
        if np.asarray(r).shape != shape0 or np.asarray(c).shape != shape0:
            raise ValueError("train_enhancer: inconsistent image shapes in "
                             "dataset")

    rng = np.random.default_rng(seed)
    n_val = max(1, int(round(val_fraction * len(pairs)))) \
        if len(pairs) > 1 else 0
    order = rng.permutation(len(pairs))
    val_idx = order[:n_val]
    train_idx = order[n_val:] if n_val else order

    model = Enhancer(config, seed=seed)
    opt = Adam({"enhancer": {"params": list(model.params.values()), "lr": lr}})
    report = TrainReport()
    best_state = {k: t.data.copy() for k, t in model.params.items()}

    def to_chw(a):
        return np.asarray(a, dtype=np.float64).transpose(2, 0, 1)

    for epoch in range(epochs):
        perm = rng.permutation(train_idx)
        losses = []
        for start in range(0, len(perm), batch_size):
            chunk = perm[start:start + batch_size]
            loss = None
            for idx in chunk:
                rainy, clean = pairs[idx]
                out = model.forward(Tensor(to_chw(rainy)))
                item = ad.tmean(ad.tabs(ad.sub(out, Tensor(to_chw(clean)))))
                loss = item if loss is None else ad.add(loss, item)
            loss = ad.mul(loss, 1.0 / len(chunk))
            losses.append(loss.item())
            loss.backward()
            opt.step()
            nn.zero_grads(model.params)
        report.epoch_losses.append(float(np.mean(losses)))

        if n_val:
            vals = [psnr(model.enhance_image(pairs[i][0]), pairs[i][1])
                    for i in val_idx]
            val = float(np.mean(vals))
        else:
            val = -report.epoch_losses[-1]
        report.val_psnrs.append(val)
        if val > report.best_val_psnr:
            report.best_val_psnr = val
            report.best_epoch = epoch
            best_state = {k: t.data.copy() for k, t in model.params.items()}

    for k, t in model.params.items():
        t.data = best_state[k]
    return model, report
