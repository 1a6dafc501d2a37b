"""Batch sampling (uniform and informed), the RGG connection radius, and
graph pruning against the current cost bound."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma

from .cspace import ContractError, Scenario, distance, is_valid_config


class SamplerStarvedError(RuntimeError):
    """The rejection cap was exceeded before a valid sample was accepted."""

    def __init__(self, acceptance_rate: float, cap: int):
        self.acceptance_rate = acceptance_rate
        self.cap = cap
        super().__init__(
            f"sampler starved: acceptance rate {acceptance_rate:.2e} after "
            f"{cap} draws (cost bound too tight or free space near-empty)"
        )


@dataclass(frozen=True)
class SamplerConfig:
    batch_size: int = 100
    rng_seed: int = 0
    rejection_cap: int = 10_000

    def __post_init__(self):
        if self.batch_size < 1 or self.rejection_cap < 1:
            raise ContractError("batch_size and rejection_cap must be >= 1")


@dataclass(frozen=True)
class InformedSet:
    """Prolate hyperspheroid {x : |x-a| + |x-b| <= c_i} with foci at the
    start and goal; c_i = inf disables the restriction."""

    focus_a: np.ndarray
    focus_b: np.ndarray
    c_i: float

    def __post_init__(self):
        a = np.asarray(self.focus_a, dtype=float)
        b = np.asarray(self.focus_b, dtype=float)
        object.__setattr__(self, "focus_a", a)
        object.__setattr__(self, "focus_b", b)
        if math.isfinite(self.c_i) and self.c_i < distance(a, b) - 1e-12:
            raise ContractError("informed bound below the start-goal distance")

    def contains(self, q) -> bool:
        if not math.isfinite(self.c_i):
            return True
        return distance(q, self.focus_a) + distance(q, self.focus_b) <= self.c_i


def _rotation_to_world(axis: np.ndarray) -> np.ndarray:
    """Orthonormal matrix whose first column is the unit transverse axis,
    completed deterministically by Gram-Schmidt over the identity."""
    n = len(axis)
    cols = [axis]
    for e in np.eye(n):
        v = e - sum(c * (c @ e) for c in cols)
        norm = np.linalg.norm(v)
        if norm > 1e-9:
            cols.append(v / norm)
        if len(cols) == n:
            break
    return np.stack(cols, axis=1)


def _sample_unit_ball(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.normal(size=dim)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        return np.zeros(dim)
    return v / norm * rng.uniform() ** (1.0 / dim)


def sample_informed(rng: np.random.Generator, informed: InformedSet) -> np.ndarray:
    """One draw from the uniform distribution over the prolate hyperspheroid
    by the direct transformation: unit-ball sample, axis scaling, rotation."""
    a, b, c = informed.focus_a, informed.focus_b, informed.c_i
    c_min = distance(a, b)
    dim = len(a)
    center = 0.5 * (a + b)
    if c_min < 1e-12:
        # foci coincide: plain ball of diameter c
        return center + 0.5 * c * _sample_unit_ball(rng, dim)
    r1 = 0.5 * c
    rk = 0.5 * math.sqrt(max(c * c - c_min * c_min, 0.0))
    radii = np.full(dim, rk)
    radii[0] = r1
    rot = _rotation_to_world((b - a) / c_min)
    return center + rot @ (radii * _sample_unit_ball(rng, dim))


def sample_batch(
    scenario: Scenario,
    cfg: SamplerConfig,
    informed: InformedSet,
    rng: np.random.Generator,
) -> list[np.ndarray]:
    """batch_size valid configurations, restricted to the informed set when
    its bound is finite. Raises SamplerStarvedError past the rejection cap."""
    use_informed = math.isfinite(informed.c_i)
    out = []
    for _ in range(cfg.batch_size):
        for attempt in range(1, cfg.rejection_cap + 1):
            if use_informed:
                q = sample_informed(rng, informed)
                # containment is asserted exactly downstream; reject the
                # rare boundary draw that rounds outside
                if not informed.contains(q):
                    continue
                if np.any(q < scenario.lo) or np.any(q > scenario.hi):
                    continue
            else:
                q = rng.uniform(scenario.lo, scenario.hi)
            if is_valid_config(scenario, q):
                out.append(q)
                break
        else:
            raise SamplerStarvedError(
                acceptance_rate=len(out) / ((len(out) + 1) * cfg.rejection_cap),
                cap=cfg.rejection_cap,
            )
    return out


def unit_ball_measure(dim: int) -> float:
    return math.pi ** (dim / 2.0) / gamma(dim / 2.0 + 1.0)


def connection_radius(
    n_samples: int, dimension: int, free_measure_estimate: float, eta: float = 1.1
) -> float:
    """r-disc RGG radius: eta * 2 * (1 + 1/d)^(1/d)
    * (measure / zeta_d)^(1/d) * (log n / n)^(1/d)."""
    if n_samples < 2:
        raise ContractError("connection radius needs n_samples >= 2")
    d = dimension
    return (
        eta
        * 2.0
        * (1.0 + 1.0 / d) ** (1.0 / d)
        * (free_measure_estimate / unit_ball_measure(d)) ** (1.0 / d)
        * (math.log(n_samples) / n_samples) ** (1.0 / d)
    )


# pruning operates on the tree state and lives next to it
from .bitstar import prune  # noqa: E402,F401
