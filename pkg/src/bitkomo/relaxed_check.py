"""Level-wise edge collision checking with an integer collision penalty.

An edge is discretized into n_d equally spaced interior points (endpoints
are vertices, validated when created). The points are visited coarse to
fine: midpoint first, then quarter points, doubling the checking
resolution each level. A failure at level Lc yields the penalty
cp = L - Lc + 1 where L is the total number of levels; cp = 0 means the
edge passed every point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .cspace import ContractError, Scenario, distance
from . import _kernels


@dataclass(frozen=True)
class EdgeCheckConfig:
    resolution: float
    delta: int = 1

    def __post_init__(self):
        if not self.resolution > 0:
            raise ContractError("edge check resolution must be > 0")
        if self.delta < 0:
            raise ContractError("edge relaxation number must be >= 0")


@dataclass(frozen=True)
class CheckOutcome:
    cp: int
    levels: int
    failed_level: int | None
    points_checked: int


def num_interior_points(q_a, q_b, resolution: float) -> int:
    """Count of equally spaced interior points such that consecutive
    checked states (including the endpoints) are at most resolution apart.
    """
    if not resolution > 0:
        raise ContractError("resolution must be > 0")
    return max(1, math.ceil(distance(q_a, q_b) / resolution) - 1)


def num_levels(n_d: int) -> int:
    return max(1, math.ceil(math.log2(n_d))) if n_d > 1 else 1


@lru_cache(maxsize=4096)
def _level_indices(n_d: int) -> tuple[tuple[int, ...], ...]:
    """Grid indices (1..n_d) per level, in checking order.

    Level l emits the dyadic parameters j/2^l (odd j), each snapped to its
    nearest unvisited grid index i/(n_d+1), ties toward the smaller index.
    The last level instead emits every remaining index so the union over
    levels is the full grid even when n_d is a power of two (where
    2^L - 1 = n_d - 1 dyadic parameters would fall one short).
    """
    levels = num_levels(n_d)
    visited = np.zeros(n_d + 1, dtype=bool)  # 1-based
    out = []
    for level in range(1, levels + 1):
        here = []
        if level == levels:
            here = [i for i in range(1, n_d + 1) if not visited[i]]
            for i in here:
                visited[i] = True
        else:
            denom = 1 << level
            for j in range(1, denom, 2):
                s = j / denom
                best = 0
                best_gap = math.inf
                for i in range(1, n_d + 1):
                    if visited[i]:
                        continue
                    gap = abs(s - i / (n_d + 1))
                    if gap < best_gap:
                        best_gap = gap
                        best = i
                if best == 0:
                    break
                visited[best] = True
                here.append(best)
            here.sort()
        out.append(tuple(here))
    return tuple(out)


def points_at_level(n_d: int, level: int) -> list[float]:
    """Interpolation parameters s in (0, 1) checked at the given level."""
    if n_d < 1:
        raise ContractError("n_d must be >= 1")
    if not 1 <= level <= num_levels(n_d):
        raise ContractError(
            f"level {level} outside [1, {num_levels(n_d)}] for n_d={n_d}"
        )
    return [i / (n_d + 1) for i in _level_indices(n_d)[level - 1]]


def check_edge_relaxed(
    scenario: Scenario, q_a, q_b, cfg: EdgeCheckConfig
) -> CheckOutcome:
    """Check an edge level by level; stop at the first invalid point.

    Both endpoints must already be valid configurations.
    """
    q_a = np.asarray(q_a, dtype=float)
    q_b = np.asarray(q_b, dtype=float)
    n_d = num_interior_points(q_a, q_b, cfg.resolution)
    levels = num_levels(n_d)
    kind, params = scenario.robot_encoding()
    types, ptr, data = scenario._geom
    checked = 0
    for level, indices in enumerate(_level_indices(n_d), start=1):
        svals = np.array([i / (n_d + 1) for i in indices])
        bad = _kernels.first_invalid_on_edge(
            q_a, q_b, svals, kind, params, types, ptr, data
        )
        if bad >= 0:
            checked += bad + 1
            return CheckOutcome(
                cp=levels - level + 1,
                levels=levels,
                failed_level=level,
                points_checked=checked,
            )
        checked += len(svals)
    return CheckOutcome(cp=0, levels=levels, failed_level=None, points_checked=checked)


def check_edge_full(scenario: Scenario, q_a, q_b, resolution: float) -> bool:
    """True iff every grid point of the edge is valid. Semantically equal
    to check_edge_relaxed(...).cp == 0 but checks in plain grid order."""
    q_a = np.asarray(q_a, dtype=float)
    q_b = np.asarray(q_b, dtype=float)
    n_d = num_interior_points(q_a, q_b, resolution)
    svals = np.arange(1, n_d + 1) / (n_d + 1)
    kind, params = scenario.robot_encoding()
    types, ptr, data = scenario._geom
    return (
        _kernels.first_invalid_on_edge(q_a, q_b, svals, kind, params, types, ptr, data)
        < 0
    )
