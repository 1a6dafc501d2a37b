"""Shared fixtures and helpers for the test suite."""

import numpy as np
import pytest

from bitkomo.cspace import Box, Disc, DiscRobot, PlanarArm, Polygon, Scenario


@pytest.fixture
def empty_square():
    """Unit square, disc robot, no obstacles."""
    return Scenario(
        name="empty",
        lo=[0.0, 0.0],
        hi=[1.0, 1.0],
        obstacles=(),
        robot=DiscRobot(radius=0.05),
        start=[0.1, 0.1],
        goal=[0.9, 0.9],
        budget_s=1.0,
    )


@pytest.fixture
def one_disc_square():
    """Unit square with a single disc obstacle in the middle."""
    return Scenario(
        name="one_disc",
        lo=[0.0, 0.0],
        hi=[1.0, 1.0],
        obstacles=(Disc(center=(0.5, 0.5), radius=0.15),),
        robot=DiscRobot(radius=0.05),
        start=[0.1, 0.1],
        goal=[0.9, 0.9],
        budget_s=1.0,
    )


@pytest.fixture
def mixed_obstacles_square():
    """Unit square with one obstacle of every supported type."""
    return Scenario(
        name="mixed",
        lo=[0.0, 0.0],
        hi=[1.0, 1.0],
        obstacles=(
            Disc(center=(0.3, 0.7), radius=0.1),
            Box(lo=(0.55, 0.25), hi=(0.75, 0.45)),
            Polygon(vertices=((0.2, 0.2), (0.35, 0.25), (0.3, 0.4))),
        ),
        robot=DiscRobot(radius=0.04),
        start=[0.05, 0.05],
        goal=[0.95, 0.95],
        budget_s=1.0,
    )


@pytest.fixture
def arm_scenario():
    """3-link arm with one box obstacle."""
    return Scenario(
        name="arm3",
        lo=[-np.pi, -np.pi, -np.pi],
        hi=[np.pi, np.pi, np.pi],
        obstacles=(Box(lo=(0.6, -0.2), hi=(0.8, 0.2)),),
        robot=PlanarArm(base=(0.0, 0.0), link_lengths=(0.3, 0.3, 0.3), link_radius=0.02),
        start=[np.pi / 2, 0.0, 0.0],
        goal=[-np.pi / 2, 0.0, 0.0],
        budget_s=1.0,
    )


def random_scenario(rng: np.random.Generator, with_arm: bool = False) -> Scenario:
    """A random solvable-looking scenario for property tests: obstacles are
    kept away from the start/goal corners (disc robot) or from the base
    (arm) so the scenario constructor accepts them."""
    if with_arm:
        n_links = int(rng.integers(2, 5))
        obstacles = []
        # kept outside the arm's reach (<= 4 * 0.4 = 1.6) so any start/goal
        # configuration is valid; clearances stay finite and differentiable
        for _ in range(rng.integers(1, 4)):
            cx = rng.uniform(2.0, 3.0) * rng.choice([-1.0, 1.0])
            cy = rng.uniform(-2.0, 2.0)
            obstacles.append(Disc(center=(cx, cy), radius=float(rng.uniform(0.05, 0.25))))
        return Scenario(
            name="rand_arm",
            lo=[-np.pi] * n_links,
            hi=[np.pi] * n_links,
            obstacles=tuple(obstacles),
            robot=PlanarArm(
                base=(0.0, 0.0),
                link_lengths=tuple(rng.uniform(0.2, 0.4, size=n_links)),
                link_radius=0.02,
            ),
            start=[0.0] * n_links,
            goal=[0.1] * n_links,
            budget_s=1.0,
        )
    obstacles = []
    for _ in range(rng.integers(1, 6)):
        kind = rng.integers(0, 3)
        cx, cy = rng.uniform(0.25, 0.75, size=2)
        if kind == 0:
            obstacles.append(Disc(center=(cx, cy), radius=float(rng.uniform(0.02, 0.08))))
        elif kind == 1:
            w, h = rng.uniform(0.03, 0.12, size=2)
            obstacles.append(Box(lo=(cx - w, cy - h), hi=(cx + w, cy + h)))
        else:
            r = rng.uniform(0.03, 0.08)
            angles = np.sort(rng.uniform(0, 2 * np.pi, size=5))
            if np.min(np.diff(angles)) < 0.2 or 2 * np.pi - (angles[-1] - angles[0]) < 0.2:
                angles = np.linspace(0, 2 * np.pi, 6)[:-1]
            verts = tuple(
                (cx + r * np.cos(a), cy + r * np.sin(a)) for a in angles
            )
            obstacles.append(Polygon(vertices=verts))
    return Scenario(
        name="rand_disc",
        lo=[0.0, 0.0],
        hi=[1.0, 1.0],
        obstacles=tuple(obstacles),
        robot=DiscRobot(radius=0.03),
        start=[0.05, 0.05],
        goal=[0.95, 0.95],
        budget_s=1.0,
    )
