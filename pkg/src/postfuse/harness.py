"""Batch attack driver, ablation modes, and the unguided random baseline.

Ablation modes reshape the *search box*, never the pipeline: a disabled
operator has its controlling dimension frozen to the identity value (blur
kernel 1, JPEG quality 100, noise variance 0, spot gain 1), so every
candidate still flows through the same four-stage fusion.

Modes: ``full`` (everything free), ``random`` (same budget, uniform
resampling instead of guided updates), ``only:<OP>`` (one operator free,
the rest frozen), ``without:<OP>`` (one operator frozen, the rest free),
with OP one of GB, JPEG, GN, LS.
"""

from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass

import numpy as np

from .imageops import image_dims, load_image, validate_image
from .metrics import SsimConfig
from .oracle import OracleProtocolError, OracleTransportError, QueryLedger, score
from .params import INTEGER, ODD_INTEGER, ParamBounds, ParamSpec, sample_params
from .pso import (
    AttackOutcome,
    Particle,
    PsoConfig,
    SwarmState,
    _select,
    apply_fusion,
    noise_stream,
    run_attack,
)

logger = logging.getLogger(__name__)

OPS = ("GB", "JPEG", "GN", "LS")

# The bound override that pins an operator at its identity.
_IDENTITY_FREEZE = {
    "GB": {"alpha": ParamSpec(1, 1, ODD_INTEGER)},
    "JPEG": {"phi": ParamSpec(100, 100, INTEGER)},
    "GN": {"sigma": ParamSpec(0.0, 0.0)},
    "LS": {"theta": ParamSpec(1.0, 1.0)},
}


def parse_mode(mode: str) -> tuple[str, str | None]:
    """Split a mode string into (kind, op); raises on anything unknown."""
    if mode in ("full", "random"):
        return mode, None
    kind, _, op = mode.partition(":")
    if kind in ("only", "without") and op in OPS:
        return kind, op
    raise ValueError(f"unknown ablation mode {mode!r}")


def ablation_bounds(bounds: ParamBounds, mode: str) -> ParamBounds:
    """The search box for a mode: identity-freeze the disabled operators."""
    kind, op = parse_mode(mode)
    if kind in ("full", "random"):
        return bounds
    if kind == "only":
        frozen = [o for o in OPS if o != op]
    else:  # without
        frozen = [op]
    overrides = {}
    for o in frozen:
        overrides.update(_IDENTITY_FREEZE[o])
    return bounds.replace(**overrides)


def run_random_attack(img, oracle, cfg: PsoConfig, on_eval=None) -> AttackOutcome:
    """Unguided baseline: the same query budget spent on uniform samples.

    Samples are drawn in blocks of `particles` (each block counts as one
    iteration in the trace, mirroring the swarm's accounting), personal and
    global bests are tracked identically, but no velocity or best-guided
    update ever happens and the full budget is always spent. Output
    selection matches the swarm rule."""
    img = validate_image(img)
    dims = image_dims(img)
    bounds = cfg.bounds if cfg.bounds is not None else ParamBounds.defaults(*dims)
    ledger = QueryLedger(cfg.budget)
    rng = np.random.default_rng(cfg.seed)

    slots: list[Particle | None] = [None] * cfg.particles
    gbest_i = -1
    gbest = (np.inf, None, None)  # fitness, position, eval key
    trace = []
    block = 0
    while ledger.remaining > 0:
        block += 1
        size = min(cfg.particles, ledger.remaining)
        for i in range(size):
            pos = sample_params(bounds, dims, rng)
            x = apply_fusion(img, pos, noise_stream(cfg.seed, i, block))
            f = score(oracle, x, ledger).fake_probability
            if on_eval is not None:
                on_eval(block, i, pos, f)
            p = slots[i]
            if p is None:
                slots[i] = p = Particle(pos, np.zeros(8), f, f, pos, (i, block))
            else:
                p.position, p.fitness = pos, f
                if f < p.best_fitness:
                    p.best_fitness = f
                    p.best_position = pos
                    p.best_eval = (i, block)
            if p.best_fitness < gbest[0]:
                gbest = (p.best_fitness, p.best_position, p.best_eval)
        trace.append((block, gbest[0]))

    particles = [p for p in slots if p is not None]
    swarm = SwarmState(
        particles=particles,
        global_best_position=gbest[1],
        global_best_fitness=gbest[0],
        global_best_eval=gbest[2],
        iteration=block,
        ledger=ledger,
        rng=rng,
        bounds=bounds,
        master_seed=cfg.seed,
    )
    pos, im, fit, sim = _select(swarm, img, SsimConfig())
    return AttackOutcome(
        success=gbest[0] < 0.5,
        selected_params=pos,
        adversarial_image=im,
        final_fitness=fit,
        ssim_to_original=sim,
        queries_used=ledger.used,
        iterations_run=block,
        fitness_trace=trace,
    )


def queries_to_success(outcome: AttackOutcome, particles: int) -> int | None:
    """Queries spent up to and including the first block/iteration whose
    running best dropped below 0.5; None when the run never succeeded."""
    for k, f in outcome.fitness_trace:
        if f < 0.5:
            return k * particles
    return None


@dataclass
class EvalRecord:
    iteration: int
    particle: int
    params: object
    fitness: float


@dataclass
class RunRecord:
    """Everything persisted about one attacked image."""

    name: str
    detector_id: str
    mode: str
    config: PsoConfig
    outcome: AttackOutcome
    evaluations: list
    wall_ms: float


@dataclass
class BatchResult:
    records: list
    skipped: list  # input names that could not be read
    aborted: str | None  # oracle failure that cut the batch short, if any


def derive_image_seed(base_seed: int, index: int) -> int:
    """Stable per-image master seed."""
    return int(np.random.SeedSequence([base_seed, index]).generate_state(1, np.uint64)[0])


def attack_batch(
    inputs,
    oracle,
    cfg: PsoConfig,
    mode: str = "full",
    on_record=None,
) -> BatchResult:
    """Attack a sequence of (name, image-or-path) pairs.

    Each image gets its own master seed derived from cfg.seed and its index,
    and the mode's search box. Unreadable inputs are skipped with a logged
    diagnostic; an oracle protocol/transport failure aborts the batch,
    returning the records finished so far with `aborted` set. `on_record`
    fires after every finished record (useful for incremental persistence).
    """
    kind, _ = parse_mode(mode)
    detector_id = getattr(oracle, "identifier", "")
    records, skipped = [], []
    for idx, (name, item) in enumerate(inputs):
        if isinstance(item, (str, bytes)) or hasattr(item, "__fspath__"):
            try:
                img = load_image(item)
                validate_image(img)
            except Exception as exc:
                logger.warning("skipping unreadable input %s: %s", name, exc)
                skipped.append(name)
                continue
        else:
            img = item
        dims = image_dims(img)
        base = cfg.bounds if cfg.bounds is not None else ParamBounds.defaults(*dims)
        cfg_i = dataclasses.replace(
            cfg, seed=derive_image_seed(cfg.seed, idx), bounds=ablation_bounds(base, mode)
        )
        evals: list[EvalRecord] = []

        def on_eval(iteration, particle, params, fitness):
            evals.append(EvalRecord(iteration, particle, params, fitness))

        start = time.perf_counter()
        try:
            if kind == "random":
                outcome = run_random_attack(img, oracle, cfg_i, on_eval=on_eval)
            else:
                outcome = run_attack(img, oracle, cfg_i, on_eval=on_eval)
        except (OracleProtocolError, OracleTransportError) as exc:
            logger.error("oracle failure on %s, aborting batch: %s", name, exc)
            return BatchResult(records, skipped, str(exc))
        wall_ms = (time.perf_counter() - start) * 1000.0
        rec = RunRecord(name, detector_id, mode, cfg_i, outcome, evals, wall_ms)
        records.append(rec)
        if on_record is not None:
            on_record(rec)
        logger.info(
            "%s: success=%s queries=%d ssim=%.4f",
            name, outcome.success, outcome.queries_used, outcome.ssim_to_original,
        )
    return BatchResult(records, skipped, None)
