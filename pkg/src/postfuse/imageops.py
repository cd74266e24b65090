"""Image I/O plus the four post-processing operators, fused in a fixed order.

Images are float64 RGB arrays of shape (H, W, 3) with values in [0, 1].
The fusion order is fixed: Gaussian blur -> JPEG round-trip -> additive
Gaussian noise -> radial light spot. Only the noise stage consumes
randomness; it takes an explicit numpy Generator so every render is
reproducible from a seed.
"""

from __future__ import annotations

import io

import numpy as np
from PIL import Image as PILImage
from scipy import ndimage

from .params import PostProcParams


def validate_image(img) -> np.ndarray:
    """Check shape/dtype/range and return the array (no copy)."""
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) array, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("image must be non-empty")
    if not np.issubdtype(arr.dtype, np.floating):
        raise ValueError(f"expected a float array, got dtype {arr.dtype}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("image contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("image values must lie in [0, 1]")
    return arr


def image_dims(img) -> tuple[int, int]:
    """(width, height) of an (H, W, 3) array."""
    return img.shape[1], img.shape[0]


def to_uint8(img) -> np.ndarray:
    """Quantize to 8 bits, rounding half up."""
    return np.clip(np.floor(np.asarray(img) * 255.0 + 0.5), 0, 255).astype(np.uint8)


def from_uint8(u8) -> np.ndarray:
    return np.asarray(u8, dtype=np.float64) / 255.0


def load_image(path) -> np.ndarray:
    """Read an image file as float RGB in [0, 1]."""
    with PILImage.open(path) as im:
        return from_uint8(np.asarray(im.convert("RGB"), dtype=np.uint8))


def save_image(img, path) -> None:
    """Write as PNG (8-bit RGB, rounding half up)."""
    validate_image(img)
    PILImage.fromarray(to_uint8(img), "RGB").save(path, format="PNG")


def encode_png(img) -> bytes:
    """PNG bytes for an in-memory image (same quantization as save_image)."""
    validate_image(img)
    buf = io.BytesIO()
    PILImage.fromarray(to_uint8(img), "RGB").save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes) -> np.ndarray:
    with PILImage.open(io.BytesIO(data)) as im:
        return from_uint8(np.asarray(im.convert("RGB"), dtype=np.uint8))


def gaussian_kernel(alpha: int, beta: float) -> np.ndarray:
    """Sampled, normalized 1-D Gaussian: k_i ~ exp(-(i-c)^2 / (2 beta^2)) for
    i = 0..alpha-1 with c the central tap, rescaled to sum to 1."""
    if alpha < 1 or alpha % 2 == 0:
        raise ValueError(f"alpha must be an odd positive integer, got {alpha}")
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    c = (alpha - 1) / 2.0
    i = np.arange(alpha, dtype=float)
    k = np.exp(-((i - c) ** 2) / (2.0 * beta**2))
    return k / k.sum()


def gaussian_blur(img, alpha: int, beta: float) -> np.ndarray:
    """Separable Gaussian blur with an alpha-tap kernel and reflect padding.

    alpha == 1 is the identity (the lone tap normalizes to 1)."""
    img = validate_image(img)
    k = gaussian_kernel(alpha, beta)
    if alpha == 1:
        return img.copy()
    out = ndimage.convolve1d(img, k, axis=0, mode="reflect")
    out = ndimage.convolve1d(out, k, axis=1, mode="reflect")
    return np.clip(out, 0.0, 1.0)


def jpeg_roundtrip(img, phi: int) -> np.ndarray:
    """Encode to JPEG at quality phi (4:2:0 chroma subsampling) and decode.

    The encoder scales the reference quantization tables by 5000/phi for
    phi < 50 and 200 - 2*phi otherwise, so phi maps onto the standard
    quality scale."""
    img = validate_image(img)
    if not isinstance(phi, (int, np.integer)) or not 1 <= phi <= 100:
        raise ValueError(f"phi must be an integer in [1, 100], got {phi!r}")
    buf = io.BytesIO()
    PILImage.fromarray(to_uint8(img), "RGB").save(
        buf, format="JPEG", quality=int(phi), subsampling=2
    )
    buf.seek(0)
    with PILImage.open(buf) as im:
        return from_uint8(np.asarray(im.convert("RGB"), dtype=np.uint8))


def add_gaussian_noise(img, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Add zero-mean Gaussian noise of *variance* sigma, then clip to [0, 1].

    sigma == 0 returns an identical copy without consuming randomness."""
    img = validate_image(img)
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    if sigma == 0:
        return img.copy()
    noisy = img + rng.normal(0.0, np.sqrt(sigma), size=img.shape)
    return np.clip(noisy, 0.0, 1.0)


def apply_light_spot(img, lam_x: int, lam_y: int, theta: float, gamma: int) -> np.ndarray:
    """Radial intensity ramp centred at (lam_x, lam_y): pixels at distance d
    within gamma are scaled by 1 + (theta - 1) * (1 - d / gamma); beyond
    gamma the image is untouched. Output is clipped to [0, 1]."""
    img = validate_image(img)
    w, h = image_dims(img)
    if not 0 <= lam_x < w or not 0 <= lam_y < h:
        raise ValueError(f"spot centre ({lam_x}, {lam_y}) outside {w}x{h} image")
    if not theta > 0:
        raise ValueError(f"theta must be positive, got {theta}")
    if gamma < 1:
        raise ValueError(f"gamma must be a positive integer, got {gamma}")
    ys, xs = np.ogrid[0:h, 0:w]
    d = np.sqrt((xs - lam_x) ** 2 + (ys - lam_y) ** 2)
    gain = 1.0 + (theta - 1.0) * np.maximum(0.0, 1.0 - d / gamma)
    return np.clip(img * gain[..., None], 0.0, 1.0)


def apply_fusion(img, p: PostProcParams, rng: np.random.Generator) -> np.ndarray:
    """Apply all four operators in the fixed order blur -> JPEG -> noise ->
    light spot. `p` must be feasible for this image (spot centre inside)."""
    img = validate_image(img)
    w, h = image_dims(img)
    if not (0 <= p.lam_x < w and 0 <= p.lam_y < h):
        raise ValueError(f"spot centre ({p.lam_x}, {p.lam_y}) outside {w}x{h} image")
    out = gaussian_blur(img, p.alpha, p.beta)
    out = jpeg_roundtrip(out, p.phi)
    out = add_gaussian_noise(out, p.sigma, rng)
    return apply_light_spot(out, p.lam_x, p.lam_y, p.theta, p.gamma)
