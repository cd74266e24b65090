"""Example model script: scores an image by its mean luma.

Bright images get low fake probability, dark ones high — a stand-in showing
the contract: decode the bytes yourself, return one float.
"""

import io

from PIL import Image


def score(image_bytes: bytes) -> float:
    with Image.open(io.BytesIO(image_bytes)) as im:
        gray = im.convert("L")
        pixels = list(gray.getdata())
    mean = sum(pixels) / (255.0 * len(pixels))
    return 1.0 - mean
