"""Particle swarm global search.

Velocity blends inertia, attraction to the particle's own best point and
attraction to the swarm-wide best point; the two attraction terms are
scaled componentwise by fresh uniform draws every iteration. Fitness
evaluations within an iteration are independent and may run through a
parallel mapper; all random draws come from per-(seed, iteration,
particle) streams so the evaluation schedule can never change the result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, OptimizationError


@dataclass
class PsoConfig:
    bounds: np.ndarray            # (n, 2) per-dimension [lo, hi]
    particles: int = 20
    max_iterations: int = 100
    omega: float = 0.7
    phi1: float = 1.5
    phi2: float = 1.5
    seed: int = 0

    def __post_init__(self):
        self.bounds = np.atleast_2d(np.asarray(self.bounds, dtype=float))
        if self.bounds.ndim != 2 or self.bounds.shape[1] != 2:
            raise ConfigError(f"bounds must be (n, 2), got {self.bounds.shape}")
        if np.any(self.bounds[:, 0] >= self.bounds[:, 1]):
            raise ConfigError("each lower bound must be strictly below its upper bound")
        if self.particles < 1:
            raise ConfigError("need at least one particle")
        if self.omega < 0 or self.phi1 < 0 or self.phi2 < 0:
            raise ConfigError("omega, phi1 and phi2 must be nonnegative")

    @property
    def n_dims(self) -> int:
        return self.bounds.shape[0]


@dataclass
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    best_position: np.ndarray
    best_fitness: float = math.inf


@dataclass
class Swarm:
    particles: list[Particle]
    best_position: np.ndarray
    best_fitness: float = math.inf
    iteration: int = 0


@dataclass
class IterationRecord:
    iteration: int
    best_fitness: float
    best_position: np.ndarray


@dataclass
class PsoResult:
    best_position: np.ndarray
    best_fitness: float
    history: list[IterationRecord]


def particle_rng(seed: int, iteration: int, index: int) -> np.random.Generator:
    """Independent stream for one particle at one iteration (iteration 0 is
    reserved for swarm initialization)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(iteration, index)))


def velocity_update(particle: Particle, g_best: np.ndarray, config: PsoConfig, rng) -> np.ndarray:
    """New velocity: omega * v + phi1 * R * (pbest - x) + phi2 * C * (gbest - x)
    with R, C diagonal uniform [0, 1) draws (R first, then C)."""
    r = rng.random(config.n_dims)
    c = rng.random(config.n_dims)
    return (
        config.omega * particle.velocity
        + config.phi1 * r * (particle.best_position - particle.position)
        + config.phi2 * c * (g_best - particle.position)
    )


def position_update(position: np.ndarray, velocity: np.ndarray, bounds: np.ndarray):
    """Move by the velocity, clamping each component that leaves its bound
    back onto the bound and zeroing that velocity component."""
    new_pos = position + velocity
    new_vel = velocity.copy()
    lo, hi = bounds[:, 0], bounds[:, 1]
    below = new_pos < lo
    above = new_pos > hi
    new_pos = np.where(below, lo, np.where(above, hi, new_pos))
    new_vel[below | above] = 0.0
    return new_pos, new_vel


def init_swarm(config: PsoConfig, x0=None) -> Swarm:
    """Positions uniform within bounds, velocities zero. When ``x0`` is
    given, particle 0 starts there instead (clipped into the bounds)."""
    lo, hi = config.bounds[:, 0], config.bounds[:, 1]
    particles = []
    for p in range(config.particles):
        rng = particle_rng(config.seed, 0, p)
        pos = lo + rng.random(config.n_dims) * (hi - lo)
        particles.append(Particle(pos, np.zeros(config.n_dims), pos.copy()))
    if x0 is not None:
        start = np.clip(np.asarray(x0, dtype=float), lo, hi)
        if start.shape != (config.n_dims,):
            raise ConfigError(f"x0 must have {config.n_dims} components")
        particles[0].position = start
        particles[0].best_position = start.copy()
    return Swarm(particles, particles[0].position.copy())


def _safe_fitness(objective, x) -> float:
    try:
        value = float(objective(x))
    except Exception:
        return math.inf
    return math.inf if math.isnan(value) else value


def pso_step(swarm: Swarm, objective, config: PsoConfig, mapper=None, rng_factory=None) -> Swarm:
    """One iteration: evaluate all particles (failures score +inf), update
    personal and global bests, then move every particle.

    ``mapper`` maps a list of positions to fitness values in order (used
    for concurrent evaluation); ``rng_factory(iteration, index)`` can
    replace the default per-particle streams in tests.
    """
    positions = [p.position for p in swarm.particles]
    if mapper is None:
        fitness = [_safe_fitness(objective, x) for x in positions]
    else:
        fitness = [f if not math.isnan(f) else math.inf for f in mapper(positions)]

    swarm.iteration += 1
    for p, f in zip(swarm.particles, fitness):
        if f < p.best_fitness:
            p.best_fitness = f
            p.best_position = p.position.copy()
        if f < swarm.best_fitness:
            swarm.best_fitness = f
            swarm.best_position = p.position.copy()

    factory = rng_factory or (lambda it, idx: particle_rng(config.seed, it, idx))
    for idx, p in enumerate(swarm.particles):
        rng = factory(swarm.iteration, idx)
        vel = velocity_update(p, swarm.best_position, config, rng)
        p.position, p.velocity = position_update(p.position, vel, config.bounds)
    return swarm


def pso_run(config: PsoConfig, objective, mapper=None, x0=None) -> PsoResult:
    """Run the full swarm search and return the best point found together
    with the per-iteration global-best history."""
    swarm = init_swarm(config, x0=x0)
    history: list[IterationRecord] = []
    for _ in range(config.max_iterations):
        pso_step(swarm, objective, config, mapper=mapper)
        if swarm.iteration == 1 and not math.isfinite(swarm.best_fitness):
            raise OptimizationError("every particle failed on the first iteration")
        history.append(
            IterationRecord(swarm.iteration, swarm.best_fitness, swarm.best_position.copy())
        )
    return PsoResult(swarm.best_position.copy(), swarm.best_fitness, history)
