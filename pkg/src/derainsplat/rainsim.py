"""Deterministic rain degradation: motion-blur streaks and lens drops.

Streaks: a seeded impulse field is correlated with an oriented motion-blur
kernel and added (clamped) onto the background.  Drops: seeded elliptical
lens regions filled with an inverted, blurred resample of the background,
composited as R = (1-M) * B + D.  Everything is a pure function of its seed,
so one (scene seed, view index) pair always produces the same pixels.

Images are (H,W,3) float64 arrays in [0,1]; single-channel layers are (H,W).
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np
from scipy import ndimage, signal


@dataclass(frozen=True)
class StreakParams:
    n: int          # impulse count
    l: int          # streak length, px
    theta: float    # streak angle, degrees from horizontal
    w: int          # streak thickness, px
    seed: int

    def __post_init__(self):
        if self.n < 0:
            raise ValueError(f"streak count n={self.n} must be >= 0")
        if self.l < 1 or self.w < 1:
            raise ValueError(f"streak length/thickness must be >= 1, got "
                             f"l={self.l}, w={self.w}")


@dataclass
class StreakLayer:
    S: np.ndarray   # (H,W) in [0,1]


@dataclass
class DropField:
    mask: np.ndarray        # (H,W) binary
    appearance: np.ndarray  # (H,W,3), zero outside mask
    seed: int


@dataclass
class SceneRainConfig:
    """Per-scene degradation recipe; all views draw from the same sub-ranges."""
    mode: str = "streak"                 # streak | drop | both
    n_range: tuple = (100, 300)
    l_range: tuple = (20, 40)
    theta_range: tuple = (40.0, 120.0)
    w_range: tuple = (3, 7)
    gain: float = 1.0
    blur_sigma: float = None             # None -> w/2
    drop_count: int = 6
    drop_radius_range: tuple = (4, 10)
    base_seed: int = 0

    def __post_init__(self):
        if self.mode not in ("streak", "drop", "both"):
            raise ValueError(f"unknown rain mode {self.mode!r}")
        for name in ("n_range", "l_range", "theta_range", "w_range",
                     "drop_radius_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} is empty: ({lo}, {hi})")
        if self.l_range[0] < 1 or self.w_range[0] < 1:
            raise ValueError("streak length/thickness ranges must start at >= 1")
        if self.n_range[0] < 0:
            raise ValueError("streak count range must be non-negative")
        if self.drop_radius_range[0] < 1:
            raise ValueError("drop radius range must be positive")

    def view_seed(self, view_index: int) -> int:
        return int(self.base_seed) ^ int(view_index)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SceneRainConfig":
        d = dict(d)
        for name in ("n_range", "l_range", "theta_range", "w_range",
                     "drop_radius_range"):
            if name in d:
                d[name] = tuple(d[name])
        return cls(**d)


def sample_streak_params(config: SceneRainConfig, view_index: int) -> StreakParams:
    """Uniform draw from the scene sub-ranges, keyed by base_seed ^ view_index."""
    seed = config.view_seed(view_index)
    rng = np.random.default_rng(seed)
    n = int(rng.integers(config.n_range[0], config.n_range[1], endpoint=True))
    l = int(rng.integers(config.l_range[0], config.l_range[1], endpoint=True))
    theta = float(rng.uniform(config.theta_range[0], config.theta_range[1]))
    w = int(rng.integers(config.w_range[0], config.w_range[1], endpoint=True))
    return StreakParams(n=n, l=l, theta=theta, w=w, seed=seed)


def gen_noise_layer(params: StreakParams, height: int, width: int) -> np.ndarray:
    """(1,H,W) impulse field with exactly ``n`` distinct unit pixels."""
    if height <= 0 or width <= 0:
        raise ValueError(f"noise layer size must be positive, got "
                         f"{height}x{width}")
    if params.n > height * width:
        raise ValueError(f"streak count n={params.n} exceeds pixel count "
                         f"{height * width}")
    layer = np.zeros(height * width)
    if params.n > 0:
        rng = np.random.default_rng(params.seed)
        pos = rng.choice(height * width, size=params.n, replace=False)
        layer[pos] = 1.0
    return layer.reshape(1, height, width)


def build_motion_kernel(l: int, theta: float, w: int,
                        blur_sigma: float = None) -> np.ndarray:
    """(p,p) motion-blur kernel: a length-l line at ``theta`` degrees through
    the center, thickened by a Gaussian blur for w > 1, normalized to sum 1.
    """
    if l < 1 or w < 1:
        raise ValueError(f"kernel needs l >= 1 and w >= 1, got l={l}, w={w}")
    p = l if l % 2 == 1 else l + 1
    center = (p - 1) / 2.0
    rad = np.deg2rad(theta)
    dr, dc = np.sin(rad), np.cos(rad)
    line = np.zeros((p, p))
    half = (l - 1) / 2.0
    ts = np.linspace(-half, half, num=8 * l + 1)
    rows = np.floor(center + ts * dr + 0.5).astype(np.int64)
    cols = np.floor(center + ts * dc + 0.5).astype(np.int64)
    keep = (rows >= 0) & (rows < p) & (cols >= 0) & (cols < p)
    line[rows[keep], cols[keep]] = 1.0
    if w > 1:
        sigma = blur_sigma if blur_sigma is not None else w / 2.0
        line = ndimage.gaussian_filter(line, sigma=sigma, mode="constant")
    return line / line.sum()


def synth_streaks(background: np.ndarray, params: StreakParams,
                  gain: float = 1.0, blur_sigma: float = None):
    """Additive streak composition: rainy = clamp(B + S), S never negative.

    Returns ``(rainy, StreakLayer)``.
    """
    bg = np.asarray(background, dtype=np.float64)
    if bg.ndim != 3 or bg.shape[2] != 3:
        raise ValueError(f"background must be (H,W,3), got {bg.shape}")
    H, W = bg.shape[:2]
    noise = gen_noise_layer(params, H, W)[0]
    kernel = build_motion_kernel(params.l, params.theta, params.w, blur_sigma)
    streak = signal.correlate(noise, kernel, mode="same", method="direct")
    streak = np.clip(streak * gain, 0.0, 1.0)
    rainy = np.clip(bg + streak[:, :, None], 0.0, 1.0)
    return rainy, StreakLayer(S=streak)


def gen_drop_field(seed: int, height: int, width: int, drop_count: int,
                   radius_range, background: np.ndarray = None,
                   zoom: float = 3.0, blur_sigma: float = 1.2) -> DropField:
    """Seeded elliptical lens-drop field.

    Geometry depends only on the seed, so all views of a scene share drop
    positions.  Appearance samples the supplied background through an
    inverting wide-angle map plus a Gaussian blur (flat gray when no
    background is given).
    """
    r_lo, r_hi = radius_range
    if r_lo < 1:
        raise ValueError("drop radii must be positive")
    if 2 * r_hi * 1.3 >= min(height, width):
        raise ValueError(f"max drop radius {r_hi} does not fit a "
                         f"{height}x{width} image")
    rng = np.random.default_rng(seed)
    mask = np.zeros((height, width))
    appearance = np.zeros((height, width, 3))
    if background is None:
        bg = np.full((height, width, 3), 0.55)
    else:
        bg = np.asarray(background, dtype=np.float64)
        if bg.shape != (height, width, 3):
            raise ValueError(f"background shape {bg.shape} != "
                             f"({height},{width},3)")

    for _ in range(drop_count):
        radius = rng.uniform(r_lo, r_hi)
        ratio = rng.uniform(1.0, 1.3)
        u = np.sqrt(ratio)
        ax_a, ax_b = radius * u, radius / u
        phi = rng.uniform(0.0, np.pi)
        margin = int(np.ceil(max(ax_a, ax_b))) + 1
        cy = rng.uniform(margin, height - margin)
        cx = rng.uniform(margin, width - margin)

        y0, y1 = int(cy - margin), int(np.ceil(cy + margin)) + 1
        x0, x1 = int(cx - margin), int(np.ceil(cx + margin)) + 1
        yy, xx = np.mgrid[y0:y1, x0:x1]
        dy = (yy + 0.5) - cy
        dx = (xx + 0.5) - cx
        lon = (dx * np.cos(phi) + dy * np.sin(phi)) / ax_a
        lat = (-dx * np.sin(phi) + dy * np.cos(phi)) / ax_b
        inside = lon * lon + lat * lat <= 1.0
        if not inside.any():
            continue

        # inverted wide-angle resample of the background under the drop
        sy = np.clip(np.round(cy - dy * zoom - 0.5).astype(np.int64), 0, height - 1)
        sx = np.clip(np.round(cx - dx * zoom - 0.5).astype(np.int64), 0, width - 1)
        patch = bg[sy, sx]
        patch = ndimage.gaussian_filter(patch, sigma=(blur_sigma, blur_sigma, 0),
                                        mode="nearest")
        iy, ix = np.nonzero(inside)
        mask[yy[iy, ix], xx[iy, ix]] = 1.0
        appearance[yy[iy, ix], xx[iy, ix]] = patch[iy, ix]

    return DropField(mask=mask, appearance=appearance, seed=int(seed))


def composite_drops(background: np.ndarray, drops: DropField) -> np.ndarray:
    """R = (1 - M) * B + D; pixels outside drops are bit-identical to B."""
    bg = np.asarray(background, dtype=np.float64)
    if bg.shape[:2] != drops.mask.shape:
        raise ValueError(f"background {bg.shape[:2]} vs drop mask "
                         f"{drops.mask.shape} shape mismatch")
    return (1.0 - drops.mask)[:, :, None] * bg + drops.appearance


def degrade_view(clean: np.ndarray, config: SceneRainConfig, view_index: int):
    """Apply the scene recipe to one view.

    Returns ``(rainy, info)`` where ``info`` records the sampled parameters
    and seeds (for sidecar files and tests).
    """
    img = np.asarray(clean, dtype=np.float64)
    info = {"view_index": int(view_index), "mode": config.mode}
    streak_mask = None
    if config.mode in ("streak", "both"):
        params = sample_streak_params(config, view_index)
        img, layer = synth_streaks(img, params, gain=config.gain,
                                   blur_sigma=config.blur_sigma)
        info["streak_params"] = asdict(params)
        streak_mask = layer.S
    if config.mode in ("drop", "both"):
        clean_arr = np.asarray(clean, dtype=np.float64)
        H, W = clean_arr.shape[:2]
        drops = gen_drop_field(config.base_seed, H, W, config.drop_count,
                               config.drop_radius_range, background=img)
        img = composite_drops(img, drops)
        info["drop_seed"] = drops.seed
    info["streak_layer"] = streak_mask
    return img, info
