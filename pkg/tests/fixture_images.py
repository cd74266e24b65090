"""Procedural natural-looking test images.

Deterministic from the seed: a smooth low-frequency base, mid-frequency
blobs, fine per-pixel texture and a slight per-channel tint, rescaled to a
target mean luma. Texture and brightness knobs let tests construct images
whose detector features sit where a scenario needs them.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage


def make_natural(
    seed: int,
    size: int = 64,
    texture: float = 0.05,
    brightness: float = 0.42,
    contrast: float = 0.16,
) -> np.ndarray:
    rng = np.random.default_rng(seed)
    h = w = int(size)
    yy, xx = np.mgrid[0:h, 0:w].astype(float) / size

    base = np.zeros((h, w))
    for _ in range(3):
        fx, fy = rng.uniform(0.4, 2.5, 2)
        px, py = rng.uniform(0, 2 * np.pi, 2)
        amp = rng.uniform(0.4, 1.0)
        base += amp * np.cos(2 * np.pi * fx * xx + px) * np.cos(2 * np.pi * fy * yy + py)

    blobs = ndimage.gaussian_filter(rng.normal(0.0, 1.0, (h, w)), sigma=size / 12)
    blobs /= max(1e-9, np.abs(blobs).max())

    plane = base / max(1e-9, np.abs(base).max()) + 0.8 * blobs
    plane = (plane - plane.mean()) / max(1e-9, plane.std())

    tint = rng.uniform(-0.04, 0.04, 3)
    fine = rng.normal(0.0, texture, (h, w, 3))
    img = brightness + contrast * plane[..., None] + tint + fine
    return np.clip(img, 0.02, 0.98)
