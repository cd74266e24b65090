"""Swarm search over the fusion parameter box, driven by detector feedback.

The optimizer minimizes the detector's fake probability of the processed
image. A swarm of `particles` candidate parameter vectors is sampled
uniformly, scored (one oracle query each), and then refined for up to
`iterations` rounds of velocity/position updates with a linearly decaying
inertia weight. The run stops early as soon as any evaluation scores
strictly below 0.5 (the detector calls the image real) or when the query
budget cannot cover another full round.

Randomness is split into two kinds of streams so every scored image can be
reproduced bitwise:

* one *driver* stream (from `seed`) for sampling, velocities and jitter;
* one *noise* stream per (particle, iteration), derived as
  SeedSequence([seed, particle, iteration]), consumed only by the noise
  stage of the render.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .imageops import apply_fusion, image_dims, validate_image
from .metrics import SsimConfig, ssim
from .oracle import QueryLedger, score
from .params import ParamBounds, PostProcParams, clamp_params, sample_params

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PsoConfig:
    """Swarm-search settings.

    epsilon is the per-dimension probability of adding an extra uniform
    [0, 1) kick to a position update — the stochastic escape that keeps the
    swarm from stalling on plateaus. bounds=None derives the default search
    box from the image dimensions at run time.
    """

    particles: int = 100
    iterations: int = 10
    w_min: float = 1.0
    w_max: float = 5.0
    c_p: float = 1.5
    c_total: float = 1.5
    epsilon: float = 0.5
    seed: int = 0
    budget: int = 1000
    bounds: ParamBounds | None = None

    def __post_init__(self):
        if self.particles < 1:
            raise ValueError("particles must be at least 1")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if not 0 <= self.w_min <= self.w_max:
            raise ValueError("need 0 <= w_min <= w_max")
        if self.c_p < 0 or self.c_total < 0:
            raise ValueError("attraction coefficients must be non-negative")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        if self.budget < 1:
            raise ValueError("budget must be at least 1")


@dataclass
class Particle:
    position: PostProcParams
    velocity: np.ndarray
    fitness: float
    best_fitness: float
    best_position: PostProcParams
    best_eval: tuple[int, int]  # (particle index, iteration) of the best render


@dataclass
class SwarmState:
    particles: list
    global_best_position: PostProcParams
    global_best_fitness: float
    global_best_eval: tuple[int, int]
    iteration: int  # rounds completed; the initial sampling pass counts as 1
    ledger: QueryLedger
    rng: np.random.Generator
    bounds: ParamBounds
    master_seed: int


@dataclass
class AttackOutcome:
    """Result of one attack run against one image."""

    success: bool
    selected_params: PostProcParams
    adversarial_image: np.ndarray = field(compare=False)
    final_fitness: float
    ssim_to_original: float
    queries_used: int
    iterations_run: int
    fitness_trace: list  # [(iteration, best fitness so far), ...]

    def __post_init__(self):
        if self.success != (self.final_fitness < 0.5):
            raise ValueError("success flag must match final_fitness < 0.5")
        best = np.inf
        for _, f in self.fitness_trace:
            if f > best:
                raise ValueError("fitness trace must be non-increasing")
            best = f


def inertia(k: int, cfg: PsoConfig) -> float:
    """Linear decay from w_max at k=0 to w_min at k=iterations."""
    return cfg.w_max - (cfg.w_max - cfg.w_min) * (k / cfg.iterations)


def noise_stream(master_seed: int, particle: int, iteration: int) -> np.random.Generator:
    """The reproducible noise-stage RNG for one render."""
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([master_seed, particle, iteration]))
    )


def render(img, p: PostProcParams, master_seed: int, key: tuple[int, int]) -> np.ndarray:
    """Re-create the exact image scored at evaluation `key`."""
    return apply_fusion(img, p, noise_stream(master_seed, key[0], key[1]))


def update_velocity(
    particle: Particle,
    global_best_position: PostProcParams,
    w: float,
    cfg: PsoConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Inertia plus personal and global attraction, with fresh per-dimension
    uniform weights on each attraction term."""
    pos = particle.position.as_array()
    r_p = rng.random(8)
    r_t = rng.random(8)
    return (
        w * particle.velocity
        + cfg.c_p * r_p * (particle.best_position.as_array() - pos)
        + cfg.c_total * r_t * (global_best_position.as_array() - pos)
    )


def update_position(
    particle: Particle,
    velocity: np.ndarray,
    cfg: PsoConfig,
    bounds: ParamBounds,
    img_dims: tuple[int, int],
    rng: np.random.Generator,
) -> PostProcParams:
    """position + velocity + stochastic jitter, re-coerced into the box.

    The jitter adds an independent uniform [0, 1) to each dimension with
    probability epsilon. Two fixed draws (mask, then values) keep RNG
    consumption identical regardless of which dimensions fire.
    """
    mask = rng.random(8) < cfg.epsilon
    kick = np.where(mask, rng.random(8), 0.0)
    raw = particle.position.as_array() + velocity + kick
    return clamp_params(raw, bounds, img_dims)


def init_swarm(
    img,
    oracle,
    cfg: PsoConfig,
    ledger: QueryLedger | None = None,
    rng: np.random.Generator | None = None,
    on_eval=None,
) -> SwarmState:
    """Sample and score the initial swarm (one query per particle).

    Each particle draws its position then its velocity (uniform [-1, 1) per
    dimension); scoring runs in particle order. Counts as iteration 1."""
    img = validate_image(img)
    dims = image_dims(img)
    bounds = cfg.bounds if cfg.bounds is not None else ParamBounds.defaults(*dims)
    if ledger is None:
        ledger = QueryLedger(cfg.budget)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)

    particles = []
    for i in range(cfg.particles):
        pos = sample_params(bounds, dims, rng)
        vel = rng.uniform(-1.0, 1.0, size=8)
        particles.append(Particle(pos, vel, np.nan, np.nan, pos, (i, 1)))

    gbest_i = -1
    gbest_f = np.inf
    for i, p in enumerate(particles):
        x = apply_fusion(img, p.position, noise_stream(cfg.seed, i, 1))
        f = score(oracle, x, ledger).fake_probability
        p.fitness = f
        p.best_fitness = f
        if on_eval is not None:
            on_eval(1, i, p.position, f)
        if f < gbest_f:
            gbest_f = f
            gbest_i = i

    g = particles[gbest_i]
    return SwarmState(
        particles=particles,
        global_best_position=g.best_position,
        global_best_fitness=g.best_fitness,
        global_best_eval=g.best_eval,
        iteration=1,
        ledger=ledger,
        rng=rng,
        bounds=bounds,
        master_seed=cfg.seed,
    )


def step(swarm: SwarmState, img, oracle, cfg: PsoConfig, on_eval=None) -> SwarmState:
    """Run one full update round (one query per particle).

    Particles are processed in index order; the global best refreshes inside
    the loop, so later particles are attracted to bests found earlier in the
    same round. The inertia weight uses the number of rounds already
    completed."""
    dims = image_dims(img)
    w = inertia(swarm.iteration, cfg)
    k_next = swarm.iteration + 1
    rng = swarm.rng
    for i, p in enumerate(swarm.particles):
        vel = update_velocity(p, swarm.global_best_position, w, cfg, rng)
        pos = update_position(p, vel, cfg, swarm.bounds, dims, rng)
        x = apply_fusion(img, pos, noise_stream(swarm.master_seed, i, k_next))
        f = score(oracle, x, swarm.ledger).fake_probability
        p.position = pos
        p.velocity = vel
        p.fitness = f
        if on_eval is not None:
            on_eval(k_next, i, pos, f)
        if f < p.best_fitness:
            p.best_fitness = f
            p.best_position = pos
            p.best_eval = (i, k_next)
        if p.best_fitness < swarm.global_best_fitness:
            swarm.global_best_fitness = p.best_fitness
            swarm.global_best_position = p.best_position
            swarm.global_best_eval = p.best_eval
    swarm.iteration = k_next
    return swarm


def _select(swarm: SwarmState, img, ssim_cfg: SsimConfig):
    """Pick the emitted (params, image, fitness, ssim).

    Success: among particles whose personal best scored below 0.5, re-render
    each recorded best evaluation and keep the one most similar to the
    original (highest SSIM, ties to the lowest particle index). Failure: the
    global best evaluation."""
    if swarm.global_best_fitness < 0.5:
        best = None
        for p in swarm.particles:
            if not p.best_fitness < 0.5:
                continue
            im = render(img, p.best_position, swarm.master_seed, p.best_eval)
            s = ssim(img, im, ssim_cfg)
            if best is None or s > best[3]:
                best = (p.best_position, im, p.best_fitness, s)
        return best
    im = render(img, swarm.global_best_position, swarm.master_seed, swarm.global_best_eval)
    s = ssim(img, im, ssim_cfg)
    return (swarm.global_best_position, im, swarm.global_best_fitness, s)


def select_output(
    swarm: SwarmState, img, ssim_cfg: SsimConfig = SsimConfig()
) -> tuple[PostProcParams, np.ndarray]:
    """Public selection surface; see _select for the rule."""
    pos, im, _, _ = _select(swarm, img, ssim_cfg)
    return pos, im


def run_swarm(img, oracle, cfg: PsoConfig, on_eval=None):
    """Full attack run; returns (outcome, final swarm state)."""
    img = validate_image(img)
    swarm = init_swarm(img, oracle, cfg, on_eval=on_eval)
    trace = [(1, swarm.global_best_fitness)]
    while (
        swarm.iteration < cfg.iterations
        and swarm.global_best_fitness >= 0.5
        and swarm.ledger.remaining >= cfg.particles
    ):
        step(swarm, img, oracle, cfg, on_eval=on_eval)
        trace.append((swarm.iteration, swarm.global_best_fitness))
    pos, im, fit, sim = _select(swarm, img, SsimConfig())
    outcome = AttackOutcome(
        success=swarm.global_best_fitness < 0.5,
        selected_params=pos,
        adversarial_image=im,
        final_fitness=fit,
        ssim_to_original=sim,
        queries_used=swarm.ledger.used,
        iterations_run=swarm.iteration,
        fitness_trace=trace,
    )
    logger.debug(
        "swarm run: success=%s queries=%d iterations=%d best=%.4f",
        outcome.success, outcome.queries_used, outcome.iterations_run,
        swarm.global_best_fitness,
    )
    return outcome, swarm


def run_attack(img, oracle, cfg: PsoConfig, on_eval=None) -> AttackOutcome:
    """Attack one image; the oracle is queried exactly particles-per-round
    times per round, and the run never exceeds cfg.budget queries."""
    outcome, _ = run_swarm(img, oracle, cfg, on_eval=on_eval)
    return outcome
