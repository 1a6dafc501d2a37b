"""Anytime optimal motion planning that interleaves batch-informed tree
search with banded trajectory optimization through relaxed edge checking."""

from importlib import resources

from .cspace import (
    Box,
    ContractError,
    Disc,
    DiscRobot,
    PlanarArm,
    Polygon,
    Scenario,
    ScenarioError,
    distance,
    forward_kinematics,
    interpolate,
    is_valid_config,
    load_scenario,
    serialize_scenario,
    signed_clearance,
)
from .komo import AlParams, OptResult, TrajectoryProblem, build_problem, optimize, path_cost
from .planner import (
    PlanResult,
    PlannerParams,
    TerminationCondition,
    penalized_edge_cost,
    plan,
    validate_path,
)
from .relaxed_check import (
    CheckOutcome,
    EdgeCheckConfig,
    check_edge_full,
    check_edge_relaxed,
)

__version__ = "0.1.0"


def bundled_scenario(name: str) -> Scenario:
    """Load one of the packaged scenarios: disc_rooms, random_boxes,
    planar_arm_7."""
    text = resources.files("bitkomo.scenarios").joinpath(f"{name}.yaml").read_text()
    return load_scenario(text)
