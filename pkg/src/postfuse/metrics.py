"""Perceptual similarity metrics: mean SSIM on luma, and PSNR.

SSIM here is the classic single-scale formulation computed on the Rec.601
luma plane with an 11x11 Gaussian window (sigma 1.5), valid-window coverage
only (no padded borders), and population (not sample-corrected) moments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .imageops import validate_image

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class SsimConfig:
    window_size: int = 11
    window_sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 1.0

    def __post_init__(self):
        if self.window_size < 1 or self.window_size % 2 == 0:
            raise ValueError("window_size must be an odd positive integer")
        if self.window_sigma <= 0 or self.k1 <= 0 or self.k2 <= 0:
            raise ValueError("window_sigma, k1, k2 must be positive")
        if self.dynamic_range <= 0:
            raise ValueError("dynamic_range must be positive")


def luma(img) -> np.ndarray:
    """Rec.601 luma plane of an RGB image."""
    img = validate_image(img)
    r, g, b = LUMA_WEIGHTS
    return r * img[..., 0] + g * img[..., 1] + b * img[..., 2]


def _window(cfg: SsimConfig) -> np.ndarray:
    c = (cfg.window_size - 1) / 2.0
    i = np.arange(cfg.window_size, dtype=float)
    k = np.exp(-((i - c) ** 2) / (2.0 * cfg.window_sigma**2))
    return k / k.sum()


def _filter_valid(x: np.ndarray, k: np.ndarray) -> np.ndarray:
    # Separable windowed mean; zero padding then cropping the border leaves
    # exactly the valid-coverage windows.
    half = len(k) // 2
    t = ndimage.convolve1d(x, k, axis=0, mode="constant")
    t = ndimage.convolve1d(t, k, axis=1, mode="constant")
    return t[half : x.shape[0] - half, half : x.shape[1] - half]


def ssim(a, b, cfg: SsimConfig = SsimConfig()) -> float:
    """Mean structural similarity of two equally-sized RGB images in [0, 1].

    Gaussian-weighted local means/variances/covariance on the luma plane over
    all fully-covered window positions; stabilizers c1 = (k1 L)^2 and
    c2 = (k2 L)^2 with L the dynamic range."""
    a = validate_image(a)
    b = validate_image(b)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    if a.shape[0] < cfg.window_size or a.shape[1] < cfg.window_size:
        raise ValueError(
            f"images must be at least {cfg.window_size}x{cfg.window_size} for SSIM"
        )
    ya, yb = luma(a), luma(b)
    k = _window(cfg)
    mu_a = _filter_valid(ya, k)
    mu_b = _filter_valid(yb, k)
    e_aa = _filter_valid(ya * ya, k)
    e_bb = _filter_valid(yb * yb, k)
    e_ab = _filter_valid(ya * yb, k)
    var_a = e_aa - mu_a * mu_a
    var_b = e_bb - mu_b * mu_b
    cov = e_ab - mu_a * mu_b
    c1 = (cfg.k1 * cfg.dynamic_range) ** 2
    c2 = (cfg.k2 * cfg.dynamic_range) ** 2
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def psnr(a, b) -> float:
    """Peak signal-to-noise ratio in dB over all channels (peak = 1.0).

    Identical images give +inf."""
    a = validate_image(a)
    b = validate_image(b)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return -10.0 * math.log10(mse)
