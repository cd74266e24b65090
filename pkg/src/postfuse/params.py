"""Bounded mixed-integer parameter space for the post-processing fusion pipeline.

The eight parameters, in canonical order:

    alpha   blur kernel size (odd integer, pixels)
    beta    blur kernel standard deviation
    phi     JPEG quality factor (integer, 1..100)
    sigma   additive Gaussian noise *variance*
    lam_x   light-spot centre column (integer, 0..width-1)
    lam_y   light-spot centre row (integer, 0..height-1)
    theta   light-spot intensity gain at the centre
    gamma   light-spot radius (integer, pixels)

Every optimizer-facing vector is a float64 array in this order; `clamp_params`
is the single place where raw reals are coerced back into the feasible set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

PARAM_NAMES = ("alpha", "beta", "phi", "sigma", "lam_x", "lam_y", "theta", "gamma")

CONTINUOUS = "continuous"
INTEGER = "integer"
ODD_INTEGER = "odd-integer"

_KINDS = (CONTINUOUS, INTEGER, ODD_INTEGER)


def round_half_up(x: float) -> int:
    """Round to the nearest integer, ties away from the floor (2.5 -> 3)."""
    return int(math.floor(x + 0.5))


def snap_odd(x: float) -> int:
    """Snap to the nearest odd integer, ties toward the larger odd (4.0 -> 5)."""
    return 2 * int(math.floor((x - 1.0) / 2.0 + 0.5)) + 1


@dataclass(frozen=True)
class ParamSpec:
    """Closed interval [lo, hi] plus the coercion kind for one dimension."""

    lo: float
    hi: float
    kind: str = CONTINUOUS

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown param kind {self.kind!r}")
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError("bounds must be finite")
        if self.lo > self.hi:
            raise ValueError(f"empty interval: lo={self.lo} > hi={self.hi}")
        if self.kind in (INTEGER, ODD_INTEGER):
            if self.lo != int(self.lo) or self.hi != int(self.hi):
                raise ValueError("integer-kind bounds must be integral")
        if self.kind == ODD_INTEGER:
            if int(self.lo) % 2 == 0 or int(self.hi) % 2 == 0:
                raise ValueError("odd-integer bounds must themselves be odd")


@dataclass(frozen=True)
class ParamBounds:
    """Per-dimension bounds for the full 8-D search box."""

    alpha: ParamSpec
    beta: ParamSpec
    phi: ParamSpec
    sigma: ParamSpec
    lam_x: ParamSpec
    lam_y: ParamSpec
    theta: ParamSpec
    gamma: ParamSpec

    @classmethod
    def defaults(cls, width: int, height: int) -> "ParamBounds":
        """Default search box for a width x height image.

        Blur kernels 1..13 (odd), JPEG quality 10..100, noise variance up to
        (5/255)^2, spot gain 0.2..1.8, spot radius 30..100 px, spot centre
        anywhere in the image.
        """
        if width < 1 or height < 1:
            raise ValueError("image dimensions must be positive")
        return cls(
            alpha=ParamSpec(1, 13, ODD_INTEGER),
            beta=ParamSpec(0.5, 5.0),
            phi=ParamSpec(10, 100, INTEGER),
            sigma=ParamSpec(1e-4, (5.0 / 255.0) ** 2),
            lam_x=ParamSpec(0, width - 1, INTEGER),
            lam_y=ParamSpec(0, height - 1, INTEGER),
            theta=ParamSpec(0.2, 1.8),
            gamma=ParamSpec(30, 100, INTEGER),
        )

    def spec(self, name: str) -> ParamSpec:
        return getattr(self, name)

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, n) for n in PARAM_NAMES)

    def replace(self, **overrides: ParamSpec) -> "ParamBounds":
        vals = {f.name: getattr(self, f.name) for f in fields(self)}
        vals.update(overrides)
        return ParamBounds(**vals)


@dataclass(frozen=True)
class PostProcParams:
    """One feasible point of the fusion pipeline's parameter space."""

    alpha: int
    beta: float
    phi: int
    sigma: float
    lam_x: int
    lam_y: int
    theta: float
    gamma: int

    def __post_init__(self):
        for name in ("alpha", "phi", "lam_x", "lam_y", "gamma"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool):
                raise TypeError(f"{name} must be an integer, got {v!r}")
        if self.alpha < 1 or self.alpha % 2 == 0:
            raise ValueError(f"alpha must be an odd positive integer, got {self.alpha}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not 1 <= self.phi <= 100:
            raise ValueError(f"phi must lie in [1, 100], got {self.phi}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")
        if self.lam_x < 0 or self.lam_y < 0:
            raise ValueError("light-spot centre must be non-negative")
        if not self.theta > 0:
            raise ValueError(f"theta must be positive, got {self.theta}")
        if self.gamma < 1:
            raise ValueError(f"gamma must be a positive integer, got {self.gamma}")

    def as_array(self) -> np.ndarray:
        """Canonical-order float64 vector."""
        return np.array([float(getattr(self, n)) for n in PARAM_NAMES])

    @classmethod
    def from_array(cls, arr) -> "PostProcParams":
        arr = np.asarray(arr, dtype=float)
        if arr.shape != (8,):
            raise ValueError(f"expected 8 values, got shape {arr.shape}")
        vals = dict(zip(PARAM_NAMES, arr))
        for name in ("alpha", "phi", "lam_x", "lam_y", "gamma"):
            v = vals[name]
            if v != int(v):
                raise ValueError(f"{name} must be integral, got {v}")
            vals[name] = int(v)
        return cls(**vals)


def effective_bounds(bounds: ParamBounds, img_dims: tuple[int, int]):
    """Per-dimension (lo, hi) arrays after intersecting the spot centre with
    the image: lam_x in [0, width-1], lam_y in [0, height-1].

    `img_dims` is (width, height).
    """
    width, height = img_dims
    if width < 1 or height < 1:
        raise ValueError("image dimensions must be positive")
    los, his = [], []
    for name, spec in zip(PARAM_NAMES, bounds.as_tuple()):
        lo, hi = spec.lo, spec.hi
        if name == "lam_x":
            lo, hi = max(lo, 0.0), min(hi, width - 1)
        elif name == "lam_y":
            lo, hi = max(lo, 0.0), min(hi, height - 1)
        if lo > hi:
            raise ValueError(f"bounds for {name} are empty on a {width}x{height} image")
        los.append(lo)
        his.append(hi)
    return np.array(los), np.array(his)


def _coerce(arr: np.ndarray, bounds: ParamBounds, img_dims: tuple[int, int]) -> PostProcParams:
    los, his = effective_bounds(bounds, img_dims)
    clamped = np.minimum(np.maximum(np.asarray(arr, dtype=float), los), his)
    vals = {}
    for i, (name, spec) in enumerate(zip(PARAM_NAMES, bounds.as_tuple())):
        x = float(clamped[i])
        if spec.kind == INTEGER:
            vals[name] = round_half_up(x)
        elif spec.kind == ODD_INTEGER:
            vals[name] = snap_odd(x)
        else:
            vals[name] = x
    return PostProcParams(**vals)


def clamp_params(raw, bounds: ParamBounds, img_dims: tuple[int, int]) -> PostProcParams:
    """Coerce a raw real vector into the feasible set.

    Box-clamp each dimension to its effective interval, then round integer
    dimensions half-up and snap alpha to the nearest odd (ties toward the
    larger odd). Already-feasible points pass through unchanged, so the map
    is a projection: clamp(clamp(x)) == clamp(x).
    """
    arr = np.asarray(raw, dtype=float)
    if arr.shape != (8,):
        raise ValueError(f"expected 8 values, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("raw parameter vector must be finite")
    return _coerce(arr, bounds, img_dims)


def sample_params(
    bounds: ParamBounds, img_dims: tuple[int, int], rng: np.random.Generator
) -> PostProcParams:
    """Draw one feasible point uniformly: per-dimension uniform draws over the
    effective intervals (one 8-vector draw, canonical order), then the same
    coercion as `clamp_params`."""
    los, his = effective_bounds(bounds, img_dims)
    raw = rng.uniform(los, his)
    return _coerce(raw, bounds, img_dims)


def is_feasible(p: PostProcParams, bounds: ParamBounds, img_dims: tuple[int, int]) -> bool:
    """True when every coordinate of `p` sits inside the effective box and has
    the right integrality (alpha odd, the integer dims integral by type)."""
    los, his = effective_bounds(bounds, img_dims)
    arr = p.as_array()
    return bool(np.all(arr >= los) and np.all(arr <= his))
