"""Configuration spaces: scenario definitions, validity and clearance queries.

Scenarios are immutable after loading and safe to share across concurrent
planning runs. Configurations are plain float64 numpy vectors.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import _kernels


class ContractError(ValueError):
    """An operation was called outside its documented preconditions."""


class ScenarioError(ValueError):
    """A scenario document failed to parse or violates its invariants."""


# ---------------------------------------------------------------------------
# obstacle / robot types


@dataclass(frozen=True)
class Disc:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ScenarioError("disc obstacle radius must be > 0")


@dataclass(frozen=True)
class Box:
    lo: tuple[float, float]
    hi: tuple[float, float]

    def __post_init__(self):
        if not (self.lo[0] < self.hi[0] and self.lo[1] < self.hi[1]):
            raise ScenarioError("box obstacle must satisfy lo < hi componentwise")


@dataclass(frozen=True)
class Polygon:
    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] < 3 or v.shape[1] != 2:
            raise ScenarioError("polygon needs at least 3 planar vertices")
        n = v.shape[0]
        for i in range(n):
            a, b, c = v[i], v[(i + 1) % n], v[(i + 2) % n]
            cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
            if cross <= 0:
                raise ScenarioError(
                    "polygon vertices must be strictly convex and counter-clockwise"
                )


Obstacle = Disc | Box | Polygon


@dataclass(frozen=True)
class DiscRobot:
    radius: float

    dimension = 2

    def __post_init__(self):
        if not self.radius > 0:
            raise ScenarioError("disc robot radius must be > 0")


@dataclass(frozen=True)
class PlanarArm:
    base: tuple[float, float]
    link_lengths: tuple[float, ...]
    link_radius: float

    def __post_init__(self):
        if len(self.link_lengths) < 1 or any(l <= 0 for l in self.link_lengths):
            raise ScenarioError("planar arm link lengths must all be > 0")
        if not self.link_radius > 0:
            raise ScenarioError("planar arm link radius must be > 0")

    @property
    def dimension(self) -> int:
        return len(self.link_lengths)


RobotModel = DiscRobot | PlanarArm


@dataclass(frozen=True, eq=False)
class Scenario:
    """A planning problem: bounds (doubling as joint limits), obstacles,
    robot, and validated start/goal configurations."""

    name: str
    lo: np.ndarray
    hi: np.ndarray
    obstacles: tuple[Obstacle, ...]
    robot: RobotModel
    start: np.ndarray
    goal: np.ndarray
    budget_s: float | None = None
    _geom: tuple = field(init=False, repr=False, compare=False)
    _robot_enc: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "start", np.asarray(self.start, dtype=float))
        object.__setattr__(self, "goal", np.asarray(self.goal, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ScenarioError("bounds lo/hi must be matching 1-D arrays")
        if not np.all(lo < hi):
            raise ScenarioError("bounds must satisfy lo < hi componentwise")
        if len(lo) != self.robot.dimension:
            raise ScenarioError(
                f"bounds dimension {len(lo)} does not match robot "
                f"dimension {self.robot.dimension}"
            )
        object.__setattr__(self, "_geom", _flatten_obstacles(self.obstacles))
        if isinstance(self.robot, DiscRobot):
            enc = (_kernels.ROBOT_DISC, np.array([self.robot.radius]))
        else:
            r = self.robot
            enc = (
                _kernels.ROBOT_ARM,
                np.array([r.base[0], r.base[1], r.link_radius, *r.link_lengths]),
            )
        object.__setattr__(self, "_robot_enc", enc)
        for label, q in (("start", self.start), ("goal", self.goal)):
            if q.shape != lo.shape:
                raise ScenarioError(f"{label} dimension does not match bounds")
            if not is_valid_config(self, q):
                raise ScenarioError(f"{label} not in free space")

    @property
    def dimension(self) -> int:
        return len(self.lo)

    def diagonal(self) -> float:
        return float(np.linalg.norm(self.hi - self.lo))

    def robot_encoding(self) -> tuple[int, np.ndarray]:
        return self._robot_enc

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return (
            self.name == other.name
            and np.array_equal(self.lo, other.lo)
            and np.array_equal(self.hi, other.hi)
            and self.obstacles == other.obstacles
            and self.robot == other.robot
            and np.array_equal(self.start, other.start)
            and np.array_equal(self.goal, other.goal)
            and self.budget_s == other.budget_s
        )


def _flatten_obstacles(obstacles):
    types = []
    data = []
    ptr = [0]
    for ob in obstacles:
        if isinstance(ob, Disc):
            types.append(_kernels.OBS_DISC)
            data.extend([ob.center[0], ob.center[1], ob.radius])
        elif isinstance(ob, Box):
            types.append(_kernels.OBS_BOX)
            data.extend([ob.lo[0], ob.lo[1], ob.hi[0], ob.hi[1]])
        elif isinstance(ob, Polygon):
            types.append(_kernels.OBS_POLY)
            for vx, vy in ob.vertices:
                data.extend([vx, vy])
        else:
            raise ScenarioError(f"unknown obstacle type {type(ob).__name__}")
        ptr.append(len(data))
    return (
        np.asarray(types, dtype=np.int64),
        np.asarray(ptr, dtype=np.int64),
        np.asarray(data, dtype=float),
    )


# ---------------------------------------------------------------------------
# queries


def _check_dim(scenario: Scenario, q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (scenario.dimension,):
        raise ContractError(
            f"configuration dimension {q.shape} does not match scenario "
            f"dimension {scenario.dimension}"
        )
    return q


def is_valid_config(scenario: Scenario, q) -> bool:
    """True iff q is within bounds and the robot at q is collision free
    (zero clearance counts as valid)."""
    q = _check_dim(scenario, q)
    if not np.all(np.isfinite(q)):
        return False
    if np.any(q < scenario.lo) or np.any(q > scenario.hi):
        return False
    kind, params = scenario.robot_encoding()
    types, ptr, data = scenario._geom
    return bool(_kernels.config_free(q, kind, params, types, ptr, data))


def signed_clearance(scenario: Scenario, q) -> tuple[float, np.ndarray]:
    """Minimum signed distance from the robot body to the obstacle set and
    its gradient with respect to q.

    Positive means separated, negative penetrating. At ties between
    obstacles the gradient follows the first minimizer in list order. With
    no obstacles the clearance is +inf with a zero gradient.
    """
    q = _check_dim(scenario, q)
    kind, params = scenario.robot_encoding()
    types, ptr, data = scenario._geom
    grad = np.zeros_like(q)
    d = _kernels.clearance_and_grad(q, kind, params, types, ptr, data, grad)
    if d >= 1e300:
        return math.inf, grad
    return float(d), grad


def distance(q_a, q_b) -> float:
    """Euclidean metric between configurations."""
    q_a = np.asarray(q_a, dtype=float)
    q_b = np.asarray(q_b, dtype=float)
    if q_a.shape != q_b.shape:
        raise ContractError("configuration dimensions do not match")
    return float(np.linalg.norm(q_a - q_b))

def interpolate(q_a, q_b, s: float) -> np.ndarray:
    """Straight-line interpolation (1-s) q_a + s q_b for s in [0, 1]."""
    if not 0.0 <= s <= 1.0:
        raise ContractError(f"interpolation parameter {s} outside [0, 1]")
    q_a = np.asarray(q_a, dtype=float)
    q_b = np.asarray(q_b, dtype=float)
    return (1.0 - s) * q_a + s * q_b


def forward_kinematics(robot: PlanarArm, q) -> np.ndarray:
    """Workspace segments of a planar chain, shape (n_links, 2, 2):
    segments[i] = [proximal joint, distal joint]."""
    q = np.asarray(q, dtype=float)
    if q.shape != (robot.dimension,):
        raise ContractError("configuration dimension does not match link count")
    angles = np.cumsum(q)
    steps = np.asarray(robot.link_lengths)[:, None] * np.stack(
        [np.cos(angles), np.sin(angles)], axis=1
    )
    joints = np.vstack([np.asarray(robot.base, dtype=float), steps]).cumsum(axis=0)
    return np.stack([joints[:-1], joints[1:]], axis=1)


# ---------------------------------------------------------------------------
# scenario document I/O (YAML; see README for the grammar)


def _require(doc: dict, key: str):
    if key not in doc:
        raise ScenarioError(f"scenario document missing field '{key}'")
    return doc[key]


def _parse_obstacle(rec: dict, index: int) -> Obstacle:
    try:
        kind = rec["type"]
        if kind == "disc":
            return Disc(center=tuple(map(float, rec["center"])), radius=float(rec["radius"]))
        if kind == "box":
            return Box(lo=tuple(map(float, rec["lo"])), hi=tuple(map(float, rec["hi"])))
        if kind == "polygon":
            return Polygon(
                vertices=tuple(tuple(map(float, v)) for v in rec["vertices"])
            )
    except KeyError as exc:
        raise ScenarioError(f"obstacle {index}: missing field {exc}") from exc
    raise ScenarioError(f"obstacle {index}: unknown type '{rec.get('type')}'")


def _parse_robot(rec: dict) -> RobotModel:
    kind = _require(rec, "type")
    if kind == "disc":
        return DiscRobot(radius=float(_require(rec, "radius")))
    if kind == "planar_arm":
        return PlanarArm(
            base=tuple(map(float, _require(rec, "base"))),
            link_lengths=tuple(map(float, _require(rec, "link_lengths"))),
            link_radius=float(_require(rec, "link_radius")),
        )
    raise ScenarioError(f"unknown robot type '{kind}'")


def load_scenario(text: str) -> Scenario:
    """Parse a scenario document (YAML). Raises ScenarioError with line or
    field diagnostics on malformed input, and rejects invalid start/goal."""
    try:
        doc = yaml.safe_load(io.StringIO(text))
    except yaml.YAMLError as exc:
        raise ScenarioError(f"scenario parse error: {exc}") from exc
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a key/value mapping")
    bounds = _require(doc, "bounds")
    lo = np.array([float(b[0]) for b in bounds])
    hi = np.array([float(b[1]) for b in bounds])
    dim = int(doc.get("dimension", len(lo)))
    if dim != len(lo):
        raise ScenarioError(
            f"declared dimension {dim} does not match bounds length {len(lo)}"
        )
    obstacles = tuple(
        _parse_obstacle(rec, i) for i, rec in enumerate(doc.get("obstacles", []))
    )
    budget = doc.get("budget_s")
    return Scenario(
        name=str(_require(doc, "name")),
        lo=lo,
        hi=hi,
        obstacles=obstacles,
        robot=_parse_robot(_require(doc, "robot")),
        start=np.array([float(x) for x in _require(doc, "start")]),
        goal=np.array([float(x) for x in _require(doc, "goal")]),
        budget_s=float(budget) if budget is not None else None,
    )


def serialize_scenario(scenario: Scenario) -> str:
    """Inverse of load_scenario: load(serialize(s)) == s."""
    obstacles = []
    for ob in scenario.obstacles:
        if isinstance(ob, Disc):
            obstacles.append(
                {"type": "disc", "center": [float(c) for c in ob.center],
                 "radius": float(ob.radius)}
            )
        elif isinstance(ob, Box):
            obstacles.append({"type": "box", "lo": [float(c) for c in ob.lo],
                              "hi": [float(c) for c in ob.hi]})
        else:
            obstacles.append(
                {"type": "polygon",
                 "vertices": [[float(c) for c in v] for v in ob.vertices]}
            )
    if isinstance(scenario.robot, DiscRobot):
        robot = {"type": "disc", "radius": float(scenario.robot.radius)}
    else:
        robot = {
            "type": "planar_arm",
            "base": [float(c) for c in scenario.robot.base],
            "link_lengths": [float(l) for l in scenario.robot.link_lengths],
            "link_radius": float(scenario.robot.link_radius),
        }
    doc = {
        "name": scenario.name,
        "dimension": scenario.dimension,
        "bounds": [[float(a), float(b)] for a, b in zip(scenario.lo, scenario.hi)],
        "robot": robot,
        "obstacles": obstacles,
        "start": [float(x) for x in scenario.start],
        "goal": [float(x) for x in scenario.goal],
    }
    if scenario.budget_s is not None:
        doc["budget_s"] = scenario.budget_s
    return yaml.safe_dump(doc, sort_keys=False)

def num_clearance_rows(scenario: Scenario) -> int:
    """Number of robot-body/obstacle pairs: one clearance row each in the
    trajectory optimizer (n_obs for a disc robot, n_links * n_obs for the
    arm)."""
    n_obs = len(scenario.obstacles)
    if isinstance(scenario.robot, PlanarArm):
        return n_obs * len(scenario.robot.link_lengths)
    return n_obs


def clearance_rows(scenario: Scenario, W) -> tuple[np.ndarray, np.ndarray]:
    """Per-pair signed clearances and gradients for a batch of
    configurations W of shape (T, n). Returns (d, g) with d of shape
    (T, P) and g of shape (T, P, n); P = num_clearance_rows(scenario).

    Each row is smooth wherever the contact point is unique, unlike the
    min over pairs returned by signed_clearance.
    """
    W = np.ascontiguousarray(W, dtype=float)
    if W.ndim != 2 or W.shape[1] != len(scenario.lo):
        raise ContractError("W must be (T, n) with n matching the scenario")
    P = num_clearance_rows(scenario)
    d = np.empty((W.shape[0], P))
    g = np.empty((W.shape[0], P, W.shape[1]))
    if P == 0:
        return d, g
    kind, params = scenario.robot_encoding()
    types, ptr, data = scenario._geom
    _kernels.clearance_rows_batch(W, kind, params, types, ptr, data, d, g)
    return d, g
