"""Post-attack robustness: re-score adversarial images under benign edits.

Four transform families, each swept over a grid of levels: JPEG re-encoding
(quality), additive Gaussian noise (standard deviation — note the attack
pipeline's sigma is a *variance*; levels here are stds and get squared),
rotation (degrees, bilinear, reflect padding, frame preserved) and uniform
resize (scale factor, bilinear).

Identity levels (quality 100, std 0, 0 degrees, factor 1) are exact
passthroughs — no codec or resampler runs — so the attack success rate at
an identity level equals the plain post-attack success rate by construction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .imageops import add_gaussian_noise, jpeg_roundtrip, validate_image
from .oracle import OracleProtocolError, OracleTransportError, QueryLedger, score
from .params import round_half_up

logger = logging.getLogger(__name__)

TRANSFORMS = ("jpeg", "gaussian-noise", "rotation", "resize")

# Default evaluation grids (the identity level is deliberately absent; add it
# explicitly when you want the unperturbed baseline in the same report).
DEFAULT_LEVELS = {
    "jpeg": (50.0, 60.0, 70.0, 80.0, 90.0),
    "gaussian-noise": (1 / 255, 2 / 255, 3 / 255, 4 / 255, 5 / 255),
    "rotation": (2.0, 4.0, 6.0, 8.0, 10.0),
    "resize": (0.5, 0.75, 1.25, 1.5, 1.75),
}

IDENTITY_LEVEL = {"jpeg": 100.0, "gaussian-noise": 0.0, "rotation": 0.0, "resize": 1.0}


def rotate_image(img, degrees: float) -> np.ndarray:
    """Rotate about the centre, bilinear, reflect padding, same frame.

    0 (mod 360) degrees is an exact passthrough."""
    img = validate_image(img)
    if degrees % 360.0 == 0.0:
        return img.copy()
    out = ndimage.rotate(
        img, degrees, axes=(1, 0), reshape=False, order=1, mode="reflect", prefilter=False
    )
    return np.clip(out, 0.0, 1.0)


def resize_image(img, factor: float) -> np.ndarray:
    """Uniform bilinear rescale; output dims round half-up with a floor of 1.

    factor 1.0 is an exact passthrough."""
    img = validate_image(img)
    if factor <= 0:
        raise ValueError(f"resize factor must be positive, got {factor}")
    if factor == 1.0:
        return img.copy()
    h, w = img.shape[:2]
    nh = max(1, round_half_up(h * factor))
    nw = max(1, round_half_up(w * factor))
    out = ndimage.zoom(
        img, (nh / h, nw / w, 1.0), order=1, mode="grid-constant", grid_mode=True
    )
    out = out[:nh, :nw, :]
    return np.clip(out, 0.0, 1.0)


def apply_transform(img, transform: str, level: float, rng=None) -> np.ndarray:
    """One benign edit at one level; identity levels return an exact copy."""
    if transform == "jpeg":
        if level == IDENTITY_LEVEL["jpeg"]:
            return validate_image(img).copy()
        q = int(level)
        if q != level or not 1 <= q <= 100:
            raise ValueError(f"jpeg level must be an integer quality in [1, 100], got {level}")
        return jpeg_roundtrip(img, q)
    if transform == "gaussian-noise":
        if level < 0:
            raise ValueError(f"noise std must be non-negative, got {level}")
        if level == 0:
            return validate_image(img).copy()
        if rng is None:
            raise ValueError("gaussian-noise transform needs an rng")
        return add_gaussian_noise(img, float(level) ** 2, rng)
    if transform == "rotation":
        return rotate_image(img, float(level))
    if transform == "resize":
        return resize_image(img, float(level))
    raise ValueError(f"unknown transform {transform!r}")


@dataclass(frozen=True)
class RobustnessSpec:
    """One transform and the levels to sweep."""

    transform: str
    levels: tuple

    def __post_init__(self):
        if self.transform not in TRANSFORMS:
            raise ValueError(f"unknown transform {self.transform!r}")
        if not self.levels:
            raise ValueError("levels must be non-empty")

    @classmethod
    def default(cls, transform: str) -> "RobustnessSpec":
        return cls(transform, DEFAULT_LEVELS[transform])


def compute_asr(scores) -> float:
    """Attack success rate: fraction of scores strictly below 0.5."""
    scores = list(scores)
    if not scores:
        raise ValueError("cannot compute a success rate over no scores")
    return float(np.mean([1.0 if s < 0.5 else 0.0 for s in scores]))


@dataclass
class Cell:
    name: str
    level: float
    fake_probability: float | None
    error: str | None = None


@dataclass
class RobustnessReport:
    transform: str
    levels: tuple
    asr: dict  # level -> success rate over valid cells (None if none valid)
    avg: float | None  # mean over levels with a valid rate
    n_images: int
    cells: list


def evaluate_robustness(
    records,
    oracle,
    spec: RobustnessSpec,
    seed: int = 0,
    successful_only: bool = False,
) -> RobustnessReport:
    """Re-score every record's adversarial image at every level.

    Noise draws derive from SeedSequence([seed, record index, level index])
    so reports reproduce. An oracle failure marks that one cell invalid (the
    failed query is refunded, so the ledger still bounds real usage); a
    level with no valid cells is excluded from AVG.
    """
    recs = [r for r in records if r.outcome.success or not successful_only]
    if not recs:
        raise ValueError("no records to evaluate")
    ledger = QueryLedger(len(recs) * len(spec.levels))
    cells = []
    asr: dict = {}
    for li, level in enumerate(spec.levels):
        level_scores = []
        for ri, rec in enumerate(recs):
            rng = np.random.Generator(
                np.random.PCG64(np.random.SeedSequence([seed, ri, li]))
            )
            img = apply_transform(rec.outcome.adversarial_image, spec.transform, level, rng)
            try:
                p = score(oracle, img, ledger).fake_probability
            except (OracleProtocolError, OracleTransportError) as exc:
                logger.warning("cell (%s, %s) failed: %s", rec.name, level, exc)
                cells.append(Cell(rec.name, level, None, str(exc)))
                continue
            cells.append(Cell(rec.name, level, p))
            level_scores.append(p)
        asr[level] = compute_asr(level_scores) if level_scores else None
    valid = [v for v in asr.values() if v is not None]
    avg = float(np.mean(valid)) if valid else None
    return RobustnessReport(spec.transform, tuple(spec.levels), asr, avg, len(recs), cells)
