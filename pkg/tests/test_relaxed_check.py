"""Level-wise edge checking: interior point counts, level construction,
collision penalties, and equivalence with the plain full check."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bitkomo.cspace import Disc, DiscRobot, Scenario, distance
from bitkomo.relaxed_check import (
    CheckOutcome,
    ContractError,
    EdgeCheckConfig,
    check_edge_full,
    check_edge_relaxed,
    num_interior_points,
    num_levels,
    points_at_level,
)

from conftest import random_scenario


def test_num_interior_points_examples():
    # ceil(dist/res) - 1 interior points, floored at 1
    assert num_interior_points([0.0], [1.0], 0.3) == 3   # ceil(3.33) - 1
    assert num_interior_points([0.0], [1.0], 0.125) == 7
    assert num_interior_points([0.0], [1.0], 1.0) == 1   # never zero
    assert num_interior_points([0.0], [1.0], 5.0) == 1
    assert num_interior_points([0.0], [0.0], 0.1) == 1   # zero-length edge
    with pytest.raises(ContractError):
        num_interior_points([0.0], [1.0], 0.0)


def test_num_levels_examples():
    assert [num_levels(n) for n in (1, 2, 3, 4, 7, 8, 16)] == [1, 1, 2, 2, 3, 3, 4]


def test_levels_for_seven_interior_points():
    # the classic dyadic layout: midpoint, quarters, eighths
    assert points_at_level(7, 1) == [4 / 8]
    assert points_at_level(7, 2) == [2 / 8, 6 / 8]
    assert points_at_level(7, 3) == [1 / 8, 3 / 8, 5 / 8, 7 / 8]


def test_levels_cover_grid_exactly_once():
    for n_d in range(1, 65):
        levels = num_levels(n_d)
        seen = []
        for level in range(1, levels + 1):
            pts = points_at_level(n_d, level)
            assert all(0.0 < s < 1.0 for s in pts)
            seen.extend(pts)
        expected = [i / (n_d + 1) for i in range(1, n_d + 1)]
        assert sorted(seen) == pytest.approx(expected)
        assert len(seen) == len(set(seen)) == n_d


def test_points_at_level_rejects_bad_arguments():
    with pytest.raises(ContractError):
        points_at_level(0, 1)
    with pytest.raises(ContractError):
        points_at_level(7, 4)
    with pytest.raises(ContractError):
        points_at_level(7, 0)


def _edge_scenario(blocking, start=(0.05, 0.5), goal=(0.95, 0.5)):
    """Unit-strip scenario with a tiny robot; obstacles block chosen points
    of the edge from (0.1, 0.5) to (0.9, 0.5)."""
    return Scenario(
        name="edge", lo=[0.0, 0.0], hi=[1.0, 1.0],
        obstacles=tuple(blocking),
        robot=DiscRobot(radius=0.004),
        start=start, goal=goal,
    )


# edge of length 0.8 checked at resolution 0.1 -> n_d = 7, L = 3;
# interior point i sits at x = 0.1 + 0.8 * i / 8
EDGE_A = np.array([0.1, 0.5])
EDGE_B = np.array([0.9, 0.5])
CFG = EdgeCheckConfig(resolution=0.1, delta=1)


def _blocker(i):
    """A disc that invalidates exactly interior point i of the 7."""
    x = 0.1 + 0.8 * i / 8
    return Disc(center=(x, 0.5), radius=0.02)


def test_cp_zero_on_free_edge():
    s = _edge_scenario([])
    out = check_edge_relaxed(s, EDGE_A, EDGE_B, CFG)
    assert out == CheckOutcome(cp=0, levels=3, failed_level=None, points_checked=7)


def test_cp_is_three_when_midpoint_fails():
    s = _edge_scenario([_blocker(4)])
    out = check_edge_relaxed(s, EDGE_A, EDGE_B, CFG)
    # failure at level 1 of 3: cp = L - Lc + 1 = 3
    assert out.cp == 3 and out.failed_level == 1 and out.points_checked == 1


def test_cp_is_two_when_quarter_fails():
    s = _edge_scenario([_blocker(6)])
    out = check_edge_relaxed(s, EDGE_A, EDGE_B, CFG)
    # level 2 checks s = 2/8 then 6/8; the midpoint passed first
    assert out.cp == 2 and out.failed_level == 2 and out.points_checked == 3


def test_cp_is_one_when_only_finest_level_fails():
    s = _edge_scenario([_blocker(3)])
    out = check_edge_relaxed(s, EDGE_A, EDGE_B, CFG)
    # level 3 checks 1/8, 3/8, 5/8, 7/8; failure on its second point
    assert out.cp == 1 and out.failed_level == 3 and out.points_checked == 5


def test_early_exit_skips_remaining_points():
    s = _edge_scenario([_blocker(4), _blocker(2), _blocker(6)])
    out = check_edge_relaxed(s, EDGE_A, EDGE_B, CFG)
    assert out.points_checked == 1  # midpoint fails immediately


def test_checked_spacing_never_exceeds_resolution():
    rng = np.random.default_rng(5)
    for _ in range(100):
        qa, qb = rng.uniform(0, 1, size=(2, 2))
        res = rng.uniform(0.01, 0.5)
        n_d = num_interior_points(qa, qb, res)
        spacing = distance(qa, qb) / (n_d + 1)
        assert spacing <= res + 1e-12


def test_full_check_equivalent_to_cp_zero():
    rng = np.random.default_rng(123)
    agree = 0
    for _ in range(40):
        s = random_scenario(rng)
        cfg = EdgeCheckConfig(resolution=float(rng.uniform(0.02, 0.1)), delta=1)
        for _ in range(50):
            qa = rng.uniform(s.lo, s.hi)
            qb = rng.uniform(s.lo, s.hi)
            full = check_edge_full(s, qa, qb, cfg.resolution)
            relaxed = check_edge_relaxed(s, qa, qb, cfg)
            assert full == (relaxed.cp == 0)
            agree += 1
    assert agree == 2000


def test_config_validation():
    with pytest.raises(ContractError):
        EdgeCheckConfig(resolution=0.0)
    with pytest.raises(ContractError):
        EdgeCheckConfig(resolution=0.1, delta=-1)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 500))
def test_cp_bounded_by_levels(n_d):
    # every reachable cp lies in [0, L]; L grows like log2
    L = num_levels(n_d)
    assert L == max(1, math.ceil(math.log2(n_d))) if n_d > 1 else L == 1
    assert sum(len(points_at_level(n_d, l)) for l in range(1, L + 1)) == n_d
