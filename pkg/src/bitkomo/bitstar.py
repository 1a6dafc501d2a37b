"""Batch-informed tree search core: vertex/edge queues, lazy expansion,
tree insertion with rewiring, pruning, and solution extraction.

Queues are binary heaps with lazy deletion; entries carry a monotone
insertion sequence number so ties break deterministically.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .cspace import ContractError, Scenario, distance


class Node:
    """A configuration in the search graph: either a tree vertex or an
    unconnected sample. ghat/h are the Euclidean lower bounds from the
    start and to the goal."""

    __slots__ = (
        "q", "ghat", "h", "in_tree", "parent", "children", "g", "edge_cost",
        "removed", "expanded_batch",
    )

    def __init__(self, q: np.ndarray, ghat: float, h: float):
        self.q = q
        self.ghat = ghat
        self.h = h
        self.in_tree = False
        self.parent: Node | None = None
        self.children: list[Node] = []
        self.g = math.inf
        self.edge_cost = 0.0
        self.removed = False
        self.expanded_batch = -1


@dataclass
class CostLedger:
    c_i: float
    c_best: float
    c_max: float


@dataclass
class EdgeCandidate:
    source: Node
    target: Node
    c_hat: float
    queue_key: float


@dataclass
class PlannerState:
    scenario: Scenario
    start: Node
    goal: Node
    nodes: list[Node] = field(default_factory=list)
    coords: np.ndarray | None = None
    q_v: list = field(default_factory=list)
    q_e: list = field(default_factory=list)
    seq: int = 0
    batch_id: int = 0

    @property
    def goal_vertex(self) -> Node | None:
        return self.goal if self.goal.in_tree else None

    def tree_vertices(self) -> list[Node]:
        return [n for n in self.nodes if n.in_tree and not n.removed]

    def unconnected(self) -> list[Node]:
        return [n for n in self.nodes if not n.in_tree and not n.removed]

    def next_seq(self) -> int:
        self.seq += 1
        return self.seq

    def rebuild_coords(self) -> None:
        self.coords = np.stack([n.q for n in self.nodes])


def init_state(scenario: Scenario) -> tuple[PlannerState, CostLedger]:
    """Tree = {start}, unconnected = {goal}, costs at infinity, penalty
    unit c_max = 3x the Euclidean diagonal of the bounds box."""
    d_sg = distance(scenario.start, scenario.goal)
    start = Node(scenario.start.copy(), ghat=0.0, h=d_sg)
    start.in_tree = True
    start.g = 0.0
    goal = Node(scenario.goal.copy(), ghat=d_sg, h=0.0)
    state = PlannerState(scenario=scenario, start=start, goal=goal)
    state.nodes = [start, goal]
    state.rebuild_coords()
    qv_push(state, start)
    ledger = CostLedger(c_i=math.inf, c_best=math.inf, c_max=3.0 * scenario.diagonal())
    return state, ledger


# ---------------------------------------------------------------------------
# queues


def qv_push(state: PlannerState, v: Node) -> None:
    heapq.heappush(state.q_v, (v.g + v.h, state.next_seq(), v))


def _qv_clean(state: PlannerState) -> None:
    """Drop stale head entries; reinsert vertices whose key changed."""
    q = state.q_v
    while q:
        key, _seq, v = q[0]
        if v.removed or not v.in_tree or v.expanded_batch == state.batch_id:
            heapq.heappop(q)
            continue
        cur = v.g + v.h
        if key != cur:
            heapq.heappop(q)
            heapq.heappush(q, (cur, state.next_seq(), v))
            continue
        return


def qv_best_value(state: PlannerState) -> float:
    _qv_clean(state)
    return state.q_v[0][0] if state.q_v else math.inf


def qe_best_value(state: PlannerState) -> float:
    return state.q_e[0][0] if state.q_e else math.inf


def qe_pop_best(state: PlannerState) -> EdgeCandidate | None:
    while state.q_e:
        key, _seq, source, target, c_hat = heapq.heappop(state.q_e)
        if source.removed or target.removed or not source.in_tree:
            continue
        return EdgeCandidate(source=source, target=target, c_hat=c_hat, queue_key=key)
    return None


# ---------------------------------------------------------------------------
# expansion and insertion


def expand_next_vertex(state: PlannerState, ledger: CostLedger, radius: float) -> None:
    """Pop the best vertex and enqueue every in-radius edge that could
    improve the solution bound (and, for rewires, the target's cost)."""
    _qv_clean(state)
    if not state.q_v:
        raise ContractError("expand_next_vertex on an empty vertex queue")
    _key, _seq, v = heapq.heappop(state.q_v)
    v.expanded_batch = state.batch_id
    dists = np.linalg.norm(state.coords - v.q, axis=1)
    for i in np.nonzero(dists <= radius)[0]:
        x = state.nodes[i]
        if x is v or x is state.start or x.removed:
            continue
        c_hat = float(dists[i])
        key = v.g + c_hat + x.h
        if key >= ledger.c_i:
            continue
        if x.in_tree and v.g + c_hat >= x.g:
            continue
        heapq.heappush(state.q_e, (key, state.next_seq(), v, x, c_hat))


def edge_addition_helps(state: PlannerState, ledger: CostLedger, e: EdgeCandidate) -> bool:
    """Admissible re-check after queue staleness: the Euclidean lower bound
    through this edge must beat the current tree cost bound (strictly)."""
    return e.source.ghat + e.c_hat + e.target.h < ledger.c_i


def edge_improves_cost(state: PlannerState, ledger: CostLedger,
                       e: EdgeCandidate, c_edge: float) -> bool:
    """The edge actually lowers costs given its (possibly penalized) cost:
    it must beat the bound through real g-values, and beat the target's
    current cost-to-come when the target is already in the tree."""
    if e.source.g + c_edge + e.target.h >= ledger.c_i:
        return False
    if e.target.in_tree and e.source.g + c_edge >= e.target.g:
        return False
    return True


def add_edge_to_tree(state: PlannerState, ledger: CostLedger,
                     e: EdgeCandidate, c_edge: float) -> None:
    """Insert or rewire; g-updates propagate eagerly to all descendants."""
    v, x = e.source, e.target
    if x.in_tree:
        x.parent.children.remove(x)
    else:
        x.in_tree = True
    x.parent = v
    x.edge_cost = c_edge
    v.children.append(x)
    x.g = v.g + c_edge
    stack = list(x.children)
    while stack:
        c = stack.pop()
        c.g = c.parent.g + c.edge_cost
        stack.extend(c.children)
    qv_push(state, x)


def get_best_path(state: PlannerState) -> list[np.ndarray]:
    """Configurations from start to goal along parent links."""
    v = state.goal_vertex
    if v is None:
        raise ContractError("no goal vertex: no solution in the tree")
    path = []
    while v is not None:
        path.append(v.q)
        v = v.parent
    path.reverse()
    return path


# ---------------------------------------------------------------------------
# pruning


def prune(state: PlannerState, scenario: Scenario, c_i: float) -> PlannerState:
    """Remove every node whose Euclidean bound ghat + h exceeds c_i.

    Tree vertices under a removed ancestor that still pass the bound are
    demoted to unconnected samples. The start (and the goal, whose bound
    equals the start-goal distance) are never removed. Mutates and returns
    state; idempotent for a fixed c_i.
    """
    if math.isinf(c_i):
        return state
    for n in state.nodes:
        if n.removed or n is state.start:
            continue
        if not n.in_tree:
            if n.ghat + n.h > c_i:
                n.removed = True
            continue
    # walk the tree top-down so ancestors are decided before descendants
    stack = list(state.start.children)
    while stack:
        v = stack.pop()
        stack.extend(v.children)
        if v.ghat + v.h > c_i or v.parent.removed or not v.parent.in_tree:
            _drop_from_tree(v)
            if v.ghat + v.h > c_i:
                v.removed = True
    state.nodes = [n for n in state.nodes if not n.removed]
    state.rebuild_coords()
    return state


def remove_edge(state: PlannerState, child: Node) -> None:
    """Remove the tree edge into child (e.g. found colliding on a finer
    check after insertion): child and its whole subtree are demoted to
    unconnected samples. The configurations stay available for
    reconnection along other edges."""
    if not child.in_tree or child.parent is None:
        raise ContractError("remove_edge needs a non-root tree vertex")
    stack = [child]
    subtree = []
    while stack:
        v = stack.pop()
        subtree.append(v)
        stack.extend(v.children)
    for v in subtree:
        _drop_from_tree(v)


def _drop_from_tree(v: Node) -> None:
    if v.parent is not None and v in v.parent.children:
        v.parent.children.remove(v)
    v.parent = None
    v.children = []
    v.in_tree = False
    v.g = math.inf
    v.edge_cost = 0.0
