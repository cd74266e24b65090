"""Black-box detector contract: scoring, query accounting, synthetic detectors.

A detector is anything with a ``fake_probability(img) -> float`` method
returning the probability that the image is machine-generated. All scoring
goes through :func:`score`, which charges a :class:`QueryLedger` unit per
successful evaluation and refunds it when the call fails, so transport
errors never consume budget.

An image counts as adversarial when its fake probability is strictly below
0.5 — the detector's decision flips to "real".
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .imageops import validate_image
from .metrics import luma


class QueryBudgetExhaustedError(RuntimeError):
    """The query ledger has no budget left."""


class OracleProtocolError(RuntimeError):
    """The oracle answered, but not with a usable probability."""


class OracleTransportError(RuntimeError):
    """The oracle could not be reached (retries exhausted)."""


@dataclass(frozen=True)
class DetectorScore:
    """A single validated oracle answer."""

    fake_probability: float

    def __post_init__(self):
        p = self.fake_probability
        if not isinstance(p, float) or not math.isfinite(p) or not 0.0 <= p <= 1.0:
            raise ValueError(f"fake_probability must be a float in [0, 1], got {p!r}")


def is_adversarial(score) -> bool:
    """Strictly below 0.5 flips the detector's decision to 'real'."""
    p = score.fake_probability if isinstance(score, DetectorScore) else float(score)
    return p < 0.5


class QueryLedger:
    """Thread-safe budget counter. `reserve` charges one unit up front;
    `refund` gives it back when the call it covered failed."""

    def __init__(self, budget: int = 1000):
        if budget < 0:
            raise ValueError(f"budget must be non-negative, got {budget}")
        self._budget = int(budget)
        self._used = 0
        self._lock = threading.Lock()

    @property
    def budget(self) -> int:
        return self._budget

    @property
    def used(self) -> int:
        return self._used

    @property
    def remaining(self) -> int:
        return self._budget - self._used

    def reserve(self, n: int = 1) -> None:
        with self._lock:
            if self._used + n > self._budget:
                raise QueryBudgetExhaustedError(
                    f"query budget exhausted ({self._used}/{self._budget} used, "
                    f"{n} more requested)"
                )
            self._used += n

    def refund(self, n: int = 1) -> None:
        with self._lock:
            self._used = max(0, self._used - n)


def score(oracle, img, ledger: QueryLedger) -> DetectorScore:
    """Charge the ledger, query the oracle, validate the answer.

    Any failure (transport, protocol, out-of-range answer) refunds the
    reserved unit and re-raises, leaving the ledger unchanged."""
    ledger.reserve()
    try:
        p = oracle.fake_probability(img)
        try:
            return DetectorScore(float(p))
        except (TypeError, ValueError) as exc:
            raise OracleProtocolError(f"oracle returned invalid probability {p!r}") from exc
    except BaseException:
        ledger.refund()
        raise


# --- synthetic detectors ----------------------------------------------------

HIGHFREQ = "highfreq"
NOISE_VAR = "noise-var"
BRIGHTNESS = "brightness"
COMPOSITE = "composite"

_BASE_KINDS = (HIGHFREQ, NOISE_VAR, BRIGHTNESS)

# (steepness, threshold) used when an identifier names a kind without values.
DEFAULT_PARAMS = {
    HIGHFREQ: (10.0, 0.1),
    NOISE_VAR: (50.0, 0.02),
    BRIGHTNESS: (10.0, 0.5),
}

LAPLACIAN_KERNEL = np.array([[0, 1, 0], [1, -4, 1], [0, 1, 0]], dtype=float)


def sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def _abs_laplacian(img) -> np.ndarray:
    return np.abs(ndimage.convolve(luma(img), LAPLACIAN_KERNEL, mode="reflect"))


def mean_abs_laplacian(img) -> float:
    """High-frequency energy: mean |Laplacian| of the luma plane."""
    return float(_abs_laplacian(img).mean())


def median_abs_laplacian(img) -> float:
    """Robust fine-noise level: median |Laplacian| of the luma plane."""
    return float(np.median(_abs_laplacian(img)))


def mean_luma(img) -> float:
    return float(luma(img).mean())


@dataclass(frozen=True)
class SyntheticDetectorSpec:
    """Configuration of a sigmoid feature detector.

    Base kinds score one feature E through a sigmoid of steepness a around
    threshold t:

      highfreq     sigmoid(a * (E - t)),  E = mean |Laplacian|   (busy
                   high-frequency texture reads as generated; blurring
                   lowers the score)
      noise-var    sigmoid(a * (t - E)),  E = median |Laplacian| (unnaturally
                   clean images read as generated; sensor-like noise lowers
                   the score)
      brightness   sigmoid(a * (t - E)),  E = mean luma          (dim renders
                   read as generated; brightening lowers the score)

    `composite` mixes base detectors: fake probability is the weighted sum of
    the component probabilities, weights positive and summing to 1.
    """

    kind: str
    steepness: float = 10.0
    threshold: float = 0.1
    weights: tuple = ()
    components: tuple = field(default=())

    def __post_init__(self):
        if self.kind == COMPOSITE:
            if not self.components:
                raise ValueError("composite detector needs at least one component")
            if len(self.weights) != len(self.components):
                raise ValueError("weights and components must pair up")
            if any(w <= 0 for w in self.weights):
                raise ValueError("composite weights must be positive")
            if abs(sum(self.weights) - 1.0) > 1e-9:
                raise ValueError("composite weights must sum to 1")
            for c in self.components:
                if not isinstance(c, SyntheticDetectorSpec) or c.kind == COMPOSITE:
                    raise ValueError("components must be base-kind detector specs")
        elif self.kind in _BASE_KINDS:
            if not self.steepness > 0:
                raise ValueError(f"steepness must be positive, got {self.steepness}")
            if self.weights or self.components:
                raise ValueError(f"{self.kind} detector takes no components")
        else:
            raise ValueError(f"unknown detector kind {self.kind!r}")


_FEATURES = {
    HIGHFREQ: mean_abs_laplacian,
    NOISE_VAR: median_abs_laplacian,
    BRIGHTNESS: mean_luma,
}
# +1: probability grows with the feature; -1: probability falls with it.
_ORIENTATION = {HIGHFREQ: 1.0, NOISE_VAR: -1.0, BRIGHTNESS: -1.0}


class SyntheticDetector:
    """Deterministic stand-in oracle built from a SyntheticDetectorSpec."""

    def __init__(self, spec: SyntheticDetectorSpec):
        self.spec = spec
        if spec.kind == COMPOSITE:
            self._components = [SyntheticDetector(c) for c in spec.components]

    def fake_probability(self, img) -> float:
        validate_image(img)
        s = self.spec
        if s.kind == COMPOSITE:
            return float(
                sum(
                    w * d.fake_probability(img)
                    for w, d in zip(s.weights, self._components)
                )
            )
        e = _FEATURES[s.kind](img)
        return sigmoid(s.steepness * _ORIENTATION[s.kind] * (e - s.threshold))

    @property
    def identifier(self) -> str:
        return spec_to_id(self.spec)


def spec_to_id(spec: SyntheticDetectorSpec) -> str:
    """Canonical string identifier; `oracle_from_id` parses it back."""
    if spec.kind == COMPOSITE:
        payload = {
            "weights": list(spec.weights),
            "components": [
                {"kind": c.kind, "a": c.steepness, "t": c.threshold}
                for c in spec.components
            ],
        }
        return "synthetic:composite:" + json.dumps(payload, separators=(",", ":"))
    return f"synthetic:{spec.kind}:a={spec.steepness!r},t={spec.threshold!r}"


def oracle_from_id(identifier: str, token: str | None = None):
    """Build an oracle from its identifier string.

    Synthetic: "synthetic:<kind>" with defaults, or
    "synthetic:<kind>:a=<steepness>,t=<threshold>", or the composite JSON
    form emitted by `spec_to_id`. Remote: "remote:<url>".
    """
    if identifier.startswith("remote:"):
        from .remote import RemoteOracle

        return RemoteOracle(identifier[len("remote:") :], token=token)
    if not identifier.startswith("synthetic:"):
        raise ValueError(f"unrecognized oracle identifier {identifier!r}")
    rest = identifier[len("synthetic:") :]
    kind, _, args = rest.partition(":")
    if kind == COMPOSITE:
        if not args:
            # Equal-weight mixture of the three base kinds at their defaults.
            comps = tuple(
                SyntheticDetectorSpec(k, *DEFAULT_PARAMS[k]) for k in _BASE_KINDS
            )
            spec = SyntheticDetectorSpec(
                COMPOSITE, weights=(1 / 3, 1 / 3, 1 / 3), components=comps
            )
        else:
            payload = json.loads(args)
            comps = tuple(
                SyntheticDetectorSpec(c["kind"], float(c["a"]), float(c["t"]))
                for c in payload["components"]
            )
            spec = SyntheticDetectorSpec(
                COMPOSITE, weights=tuple(float(w) for w in payload["weights"]),
                components=comps,
            )
        return SyntheticDetector(spec)
    if kind not in _BASE_KINDS:
        raise ValueError(f"unknown synthetic detector kind {kind!r}")
    a, t = DEFAULT_PARAMS[kind]
    if args:
        for part in args.split(","):
            key, _, val = part.partition("=")
            if key == "a":
                a = float(val)
            elif key == "t":
                t = float(val)
            else:
                raise ValueError(f"unknown detector argument {key!r}")
    return SyntheticDetector(SyntheticDetectorSpec(kind, a, t))
