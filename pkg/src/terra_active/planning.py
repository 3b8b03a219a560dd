"""Budgeted adaptive informative path planning.

The information criterion scores a pose by summing, over its footprint,
per-cell uncertainty discounted by how often the cell already appeared in
training footprints; unexplored cells earn a constant exploration bonus.
Five planners optimize it under a travel-time budget: a pre-planned coverage
sweep, a local gradient-style follower, a frontier planner, a receding-horizon
evolutionary optimizer, and a Monte Carlo tree search planner.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .mapping import MapSnapshot
from .world import GridBounds, Pose, clamp_pose, footprint_origin

ES_OFFSPRING = 16
ES_GENERATIONS = 50


@dataclass(frozen=True)
class PlannerConfig:
    """Shared planner knobs; unused fields are ignored by simpler planners."""

    side_cells: int = 20
    exploration_bonus: float = 1.0  # uncertainty assigned to unknown space
    speed: float = 2.0  # meters / second
    measure_time: float = 1.0  # seconds per image
    candidate_grid_step: int = 10  # cells between candidate poses
    horizon: int = 3  # lookahead poses for the optimization planner
    mcts_iterations: int = 120
    mcts_uct_constant: float = 0.7
    rollout_depth: int = 1
    local_step: float = 10.0  # meters per move of the local planner
    rng_seed: int = 0
    frontier_cost_normalized: bool = False

    def __post_init__(self):
        if self.exploration_bonus <= 0:
            raise ValueError("exploration_bonus must be positive")
        if self.speed <= 0:
            raise ValueError("speed must be positive")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.side_cells < 1:
            raise ValueError("side_cells must be at least 1")
        if self.mcts_iterations < 1:
            raise ValueError("mcts_iterations must be at least 1")
        if self.rollout_depth < 0:
            raise ValueError("rollout_depth must be nonnegative")


@dataclass
class BudgetState:
    """Remaining mission budget and where the robot currently is."""

    budget_total: float
    spent: float = 0.0
    current_pose: Pose = Pose(0.0, 0.0)

    def __post_init__(self):
        if not 0.0 <= self.spent <= self.budget_total:
            raise ValueError("spent must lie in [0, budget_total]")

    @property
    def remaining(self) -> float:
        return self.budget_total - self.spent

    def affords(self, cost: float) -> bool:
        return self.spent + cost <= self.budget_total + 1e-9

    def charge(self, cost: float, new_pose: Pose) -> None:
        if not self.affords(cost):
            raise ValueError("charge exceeds budget")
        self.spent += cost
        self.current_pose = new_pose


@dataclass
class Path:
    """An ordered pose sequence of variable length."""

    poses: list[Pose] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.poses)


def travel_cost(src: Pose, dst: Pose, config: PlannerConfig) -> float:
    """Seconds to fly between poses and take one image."""
    return src.distance_to(dst) / config.speed + config.measure_time


def _footprint_window(pose: Pose, config: PlannerConfig, bounds: GridBounds):
    r0, c0 = footprint_origin(pose, config.side_cells, bounds)
    f = config.side_cells
    return slice(r0, r0 + f), slice(c0, c0 + f)


def info_value(
    snapshot: MapSnapshot,
    pose: Pose,
    config: PlannerConfig,
    hypothetical_counts: np.ndarray | None = None,
) -> float:
    """Information value of imaging at a pose, given the current map.

    Sums u(v) / (1 + counts(v)) over the footprint, where u is the mapped
    uncertainty for explored cells and the exploration bonus otherwise.
    hypothetical_counts lets multi-step planners discount cells already
    covered earlier in a candidate path.
    """
    rows, cols = _footprint_window(pose, config, snapshot.bounds)
    u = np.where(
        snapshot.explored[rows, cols],
        snapshot.uncertainty_mean[rows, cols],
        config.exploration_bonus,
    )
    denom = 1.0 + snapshot.train_counts[rows, cols]
    if hypothetical_counts is not None:
        denom = denom + hypothetical_counts[rows, cols]
    return float(np.sum(u / denom))


def path_info_value(
    snapshot: MapSnapshot, poses: list[Pose], config: PlannerConfig
) -> float:
    """Information value of a pose sequence with view-overlap discounting.

    Each pose is scored against counts hypothetically incremented by every
    earlier footprint in the sequence, so re-viewing the same cells pays off
    less and less.
    """
    h, w = snapshot.explored.shape
    hyp = np.zeros((h, w), dtype=np.int64)
    total = 0.0
    for pose in poses:
        total += info_value(snapshot, pose, config, hyp)
        rows, cols = _footprint_window(pose, config, snapshot.bounds)
        hyp[rows, cols] += 1
    return total


def _axis_positions(extent_m: float, side_m: float, step_m: float) -> list[float]:
    """Positions from side_m/2 to extent_m - side_m/2 spaced step_m apart,
    with the far end appended when the stride does not land on it."""
    lo = side_m / 2.0
    hi = extent_m - side_m / 2.0
    positions = [lo]
    x = lo
    while x + step_m <= hi + 1e-9:
        x += step_m
        positions.append(x)
    if hi - positions[-1] > 1e-9:
        positions.append(hi)
    return positions


def candidate_poses(bounds: GridBounds, config: PlannerConfig) -> list[Pose]:
    """Fixed candidate grid over the valid pose region, row-major order."""
    side_m = config.side_cells * bounds.cell_size
    step_m = config.candidate_grid_step * bounds.cell_size
    xs = _axis_positions(bounds.width_m, side_m, step_m)
    ys = _axis_positions(bounds.height_m, side_m, step_m)
    return [Pose(x, y) for y in ys for x in xs]


def plan_coverage(bounds: GridBounds, side_cells: int, start_corner: Pose) -> Path:
    """Boustrophedon sweep covering the whole world.

    Rows are one footprint apart (last row clamped flush with the border),
    traversed serpentine starting from the corner nearest start_corner.
    """
    side_m = side_cells * bounds.cell_size
    if side_m > bounds.width_m or side_m > bounds.height_m:
        raise ValueError("footprint does not fit inside the world")
    xs = _axis_positions(bounds.width_m, side_m, side_m)
    ys = _axis_positions(bounds.height_m, side_m, side_m)
    if start_corner.x > bounds.width_m / 2.0:
        xs = xs[::-1]
    if start_corner.y > bounds.height_m / 2.0:
        ys = ys[::-1]
    poses = []
    for i, y in enumerate(ys):
        row_xs = xs if i % 2 == 0 else xs[::-1]
        poses.extend(Pose(x, y) for x in row_xs)
    return Path(poses=poses)


_SECTOR_DIRS = [
    (math.cos(k * math.pi / 4.0), math.sin(k * math.pi / 4.0)) for k in range(8)
]


def frontier_mask(snapshot: MapSnapshot) -> np.ndarray:
    """Cells that are explored and 4-adjacent to at least one unexplored cell."""
    explored = snapshot.explored
    unexplored = ~explored
    adj = np.zeros_like(explored)
    adj[:-1, :] |= unexplored[1:, :]
    adj[1:, :] |= unexplored[:-1, :]
    adj[:, :-1] |= unexplored[:, 1:]
    adj[:, 1:] |= unexplored[:, :-1]
    return explored & adj


def plan_local(
    snapshot: MapSnapshot,
    current_pose: Pose,
    config: PlannerConfig,
    previous_heading: int | None = None,
) -> tuple[Pose, int]:
    """Move one step toward the most informative sector of the current view.

    The footprint is split into 8 directional sectors around the pose; the
    robot moves local_step meters along the argmax of mean per-cell score.
    Exact ties keep the previous heading if it is among the winners, else the
    smallest sector index. Returns the clamped next pose and chosen sector.
    """
    bounds = snapshot.bounds
    pose = clamp_pose(current_pose, config.side_cells, bounds)
    rows, cols = _footprint_window(pose, config, bounds)
    u = np.where(
        snapshot.explored[rows, cols],
        snapshot.uncertainty_mean[rows, cols],
        config.exploration_bonus,
    )
    score = u / (1.0 + snapshot.train_counts[rows, cols])

    rr = (np.arange(rows.start, rows.stop) + 0.5) * bounds.cell_size - pose.y
    cc = (np.arange(cols.start, cols.stop) + 0.5) * bounds.cell_size - pose.x
    dy, dx = np.meshgrid(rr, cc, indexing="ij")
    dist = np.hypot(dx, dy)
    sector = np.mod(np.round(np.arctan2(dy, dx) / (math.pi / 4.0)), 8).astype(np.int64)

    off_center = dist > 1e-12  # the cell under the robot has no direction
    sums = np.bincount(sector[off_center], weights=score[off_center], minlength=8)
    counts = np.bincount(sector[off_center], minlength=8)
    means = np.where(counts > 0, sums / np.maximum(counts, 1), -np.inf)

    best = means.max()
    winners = [k for k in range(8) if means[k] == best]
    if previous_heading in winners:
        heading = previous_heading
    else:
        heading = winners[0]

    dx_dir, dy_dir = _SECTOR_DIRS[heading]
    target = Pose(pose.x + config.local_step * dx_dir, pose.y + config.local_step * dy_dir)
    return clamp_pose(target, config.side_cells, bounds), heading


def detect_frontiers(snapshot: MapSnapshot, candidate_stride: int | None = None) -> list[Pose]:
    """Candidate poses along the frontiers of explored space.

    A frontier cell is explored and 4-adjacent to at least one unexplored
    cell; clusters are 8-connected components, enumerated by their first cell
    in row-major order so downstream tie-breaks are deterministic. Each
    cluster's first candidate is its medoid (the cluster cell nearest the
    centroid): a closed ring around an explored patch has its centroid inside
    already explored space, so the raw centroid would send the robot nowhere
    new. Clusters much longer than candidate_stride cells additionally yield
    evenly strided cells, giving the planner a real choice of directions on a
    single wrap-around boundary. With a stride, candidates are pushed half a
    stride toward the unknown side of their frontier cell so the camera
    footprint lands mostly on new terrain instead of re-imaging the boundary.
    """
    frontier = frontier_mask(snapshot)
    if not frontier.any():
        return []
    unexplored = ~snapshot.explored

    h, w = frontier.shape
    seen = np.zeros_like(frontier)
    cand_cells: list[tuple[int, int]] = []
    for r0, c0 in np.argwhere(frontier):
        if seen[r0, c0]:
            continue
        queue = deque([(int(r0), int(c0))])
        seen[r0, c0] = True
        cells = []
        while queue:
            r, c = queue.popleft()
            cells.append((r, c))
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    nr, nc = r + dr, c + dc
                    if 0 <= nr < h and 0 <= nc < w and frontier[nr, nc] and not seen[nr, nc]:
                        seen[nr, nc] = True
                        queue.append((nr, nc))
        arr = np.array(cells, dtype=np.float64)
        centroid = arr.mean(axis=0)
        cand_cells.append(cells[int(np.argmin(((arr - centroid) ** 2).sum(axis=1)))])
        if candidate_stride is not None and len(cells) > candidate_stride:
            cand_cells.extend(sorted(cells)[::candidate_stride])

    cell = snapshot.bounds.cell_size
    poses = []
    for r, c in cand_cells:
        x = (c + 0.5) * cell
        y = (r + 0.5) * cell
        if candidate_stride is not None:
            # normal toward unknown space, averaged over unexplored 4-neighbors
            push = np.zeros(2)
            for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                nr, nc = r + dr, c + dc
                if 0 <= nr < h and 0 <= nc < w and unexplored[nr, nc]:
                    push += (dc, dr)
            norm = np.hypot(*push)
            if norm > 0:
                # half a stride out: the footprint's trailing edge stays on the
                # frontier, growing explored space without leaving slivers
                x += push[0] / norm * candidate_stride / 2.0 * cell
                y += push[1] / norm * candidate_stride / 2.0 * cell
        poses.append(Pose(x, y))
    return poses


def plan_frontier(
    snapshot: MapSnapshot, budget: BudgetState, config: PlannerConfig
) -> Pose | None:
    """Next-best frontier by training-data information value.

    Scores are raw information by default (the frontier with the most to
    teach wins regardless of distance); frontier_cost_normalized divides by
    travel cost instead, trading reach for budget thrift. Falls back to the
    best affordable candidate-grid pose when no frontier is reachable;
    returns None (mission end) when nothing is affordable at all.
    """
    bounds = snapshot.bounds
    frontier_cands = [
        clamp_pose(p, config.side_cells, bounds)
        for p in detect_frontiers(snapshot, candidate_stride=config.side_cells)
    ]
    best_pose = None
    best_key = (-np.inf, -np.inf)
    for pose in frontier_cands:
        cost = travel_cost(budget.current_pose, pose, config)
        if not budget.affords(cost):
            continue
        value = info_value(snapshot, pose, config)
        score = value / cost if config.frontier_cost_normalized else value
        if (score, -cost) > best_key:
            best_key = (score, -cost)
            best_pose = pose
    if best_pose is not None:
        return best_pose

    for pose in candidate_poses(bounds, config):
        cost = travel_cost(budget.current_pose, pose, config)
        if not budget.affords(cost):
            continue
        value = info_value(snapshot, pose, config)
        if (value, -cost) > best_key:
            best_key = (value, -cost)
            best_pose = pose
    return best_pose


def _greedy_sequence(
    snapshot: MapSnapshot, budget: BudgetState, config: PlannerConfig
) -> list[Pose]:
    """Sequential argmax over the candidate grid with overlap discounting."""
    h, w = snapshot.explored.shape
    hyp = np.zeros((h, w), dtype=np.int64)
    cands = candidate_poses(snapshot.bounds, config)
    seq: list[Pose] = []
    pose = budget.current_pose
    spent = budget.spent
    for _ in range(config.horizon):
        best_pose = None
        best_key = (-np.inf, -np.inf)
        best_cost = 0.0
        for cand in cands:
            cost = travel_cost(pose, cand, config)
            if spent + cost > budget.budget_total + 1e-9:
                continue
            value = info_value(snapshot, cand, config, hyp)
            if (value, -cost) > best_key:
                best_key = (value, -cost)
                best_pose = cand
                best_cost = cost
        if best_pose is None:
            break
        seq.append(best_pose)
        spent += best_cost
        pose = best_pose
        rows, cols = _footprint_window(best_pose, config, snapshot.bounds)
        hyp[rows, cols] += 1
    return seq


def _truncate_affordable(
    poses: list[Pose], budget: BudgetState, config: PlannerConfig
) -> list[Pose]:
    spent = budget.spent
    pose = budget.current_pose
    kept = []
    for p in poses:
        cost = travel_cost(pose, p, config)
        if spent + cost > budget.budget_total + 1e-9:
            break
        kept.append(p)
        spent += cost
        pose = p
    return kept


def plan_optimization(
    snapshot: MapSnapshot, budget: BudgetState, config: PlannerConfig
) -> Pose | None:
    """Receding-horizon pose-sequence optimization via a (1+lambda) ES.

    Starts from the greedy sequential argmax, perturbs whole sequences with
    Gaussian noise (step halved whenever a generation brings no improvement),
    repairs infeasible offspring by truncation, and executes only the first
    pose of the best sequence found.
    """
    parent = _greedy_sequence(snapshot, budget, config)
    if not parent:
        return None
    bounds = snapshot.bounds
    rng = np.random.default_rng(config.rng_seed)
    parent_value = path_info_value(snapshot, parent, config)
    sigma = config.side_cells * bounds.cell_size

    for _ in range(ES_GENERATIONS):
        improved = False
        base = np.array([[p.x, p.y] for p in parent])
        for _ in range(ES_OFFSPRING):
            jitter = rng.normal(0.0, sigma, size=base.shape)
            child = [
                clamp_pose(Pose(x, y), config.side_cells, bounds) for x, y in base + jitter
            ]
            child = _truncate_affordable(child, budget, config)
            if not child:
                continue
            value = path_info_value(snapshot, child, config)
            if value > parent_value:
                parent = child
                parent_value = value
                improved = True
        if not improved:
            sigma /= 2.0
    return parent[0]


class _TreeNode:
    __slots__ = ("pose", "spent", "depth", "parent", "children", "untried", "visits", "total")

    def __init__(self, pose, spent, depth, parent, untried):
        self.pose = pose
        self.spent = spent
        self.depth = depth
        self.parent = parent
        self.children: list[_TreeNode] = []
        self.untried = untried  # candidate indices not yet expanded, in order
        self.visits = 0
        self.total = 0.0

    @property
    def mean(self) -> float:
        return self.total / self.visits if self.visits else 0.0


def plan_sampling(
    snapshot: MapSnapshot, budget: BudgetState, config: PlannerConfig
) -> Pose | None:
    """Monte Carlo tree search over the affordable candidate grid.

    UCT tree policy (unvisited children expand first in candidate order), one
    expansion per iteration, uniform-random rollouts to the planning horizon
    of 1 + rollout_depth poses, mean backup. Rewards are path information
    values normalized by exploration_bonus * footprint_area * path length.
    The final choice maximizes visit count, then mean reward, then the
    cheaper hop, then candidate order.
    """
    cands = candidate_poses(snapshot.bounds, config)
    horizon = 1 + config.rollout_depth
    rng = np.random.default_rng(config.rng_seed)
    normalizer_cell = config.exploration_bonus * config.side_cells**2

    def affordable_from(pose: Pose, spent: float) -> list[int]:
        return [
            i
            for i, c in enumerate(cands)
            if spent + travel_cost(pose, c, config) <= budget.budget_total + 1e-9
        ]

    root = _TreeNode(
        budget.current_pose,
        budget.spent,
        0,
        None,
        affordable_from(budget.current_pose, budget.spent),
    )
    if not root.untried:
        return None

    def tree_path(node: _TreeNode) -> list[Pose]:
        poses = []
        while node.parent is not None:
            poses.append(node.pose)
            node = node.parent
        return poses[::-1]

    for _ in range(config.mcts_iterations):
        node = root
        # selection: descend through fully expanded, non-terminal nodes
        while node.depth < horizon and not node.untried and node.children:
            parent_visits = node.visits
            best = None
            best_key = (-np.inf, -np.inf)
            for child in node.children:
                score = child.mean + config.mcts_uct_constant * math.sqrt(
                    math.log(parent_visits) / child.visits
                )
                key = (score, node.spent - child.spent)  # ties: cheaper hop first
                if key > best_key:
                    best_key = key
                    best = child
            node = best
        # expansion: one node per iteration
        if node.depth < horizon and node.untried:
            idx = node.untried.pop(0)
            pose = cands[idx]
            spent = node.spent + travel_cost(node.pose, pose, config)
            child = _TreeNode(
                pose,
                spent,
                node.depth + 1,
                node,
                affordable_from(pose, spent) if node.depth + 1 < horizon else [],
            )
            node.children.append(child)
            node = child
        # rollout: uniform random affordable poses out to the horizon
        poses = tree_path(node)
        pose, spent = node.pose, node.spent
        for _ in range(horizon - node.depth):
            options = affordable_from(pose, spent)
            if not options:
                break
            idx = int(rng.integers(len(options)))
            nxt = cands[options[idx]]
            spent += travel_cost(pose, nxt, config)
            pose = nxt
            poses.append(nxt)
        reward = path_info_value(snapshot, poses, config) / (normalizer_cell * len(poses))
        # backup: mean of rollout rewards along the path
        while node is not None:
            node.visits += 1
            node.total += reward
            node = node.parent

    best = None
    best_key = None
    for child in root.children:
        key = (child.visits, child.mean, root.spent - child.spent)
        if best is None or key > best_key:
            best = child
            best_key = key
    return best.pose


class CoveragePlanner:
    """Consumes a precomputed sweep; never replans, never repeats a pose."""

    def __init__(self, bounds: GridBounds, config: PlannerConfig, start_pose: Pose):
        self._config = config
        self._poses = plan_coverage(bounds, config.side_cells, start_pose).poses
        self._next = 0

    def next_pose(self, snapshot: MapSnapshot, budget: BudgetState) -> Pose | None:
        if self._next >= len(self._poses):
            return None
        pose = self._poses[self._next]
        if not budget.affords(travel_cost(budget.current_pose, pose, self._config)):
            return None  # left for a later mission with fresh budget
        self._next += 1
        return pose


class LocalPlanner:
    """Steps toward the best sector of the current footprint."""

    def __init__(self, config: PlannerConfig):
        self._config = config
        self._heading: int | None = None

    def next_pose(self, snapshot: MapSnapshot, budget: BudgetState) -> Pose | None:
        pose, heading = plan_local(snapshot, budget.current_pose, self._config, self._heading)
        if not budget.affords(travel_cost(budget.current_pose, pose, self._config)):
            return None
        self._heading = heading
        return pose


class FrontierPlanner:
    def __init__(self, config: PlannerConfig):
        self._config = config

    def next_pose(self, snapshot: MapSnapshot, budget: BudgetState) -> Pose | None:
        return plan_frontier(snapshot, budget, self._config)


class OptimizationPlanner:
    def __init__(self, config: PlannerConfig):
        self._config = config

    def next_pose(self, snapshot: MapSnapshot, budget: BudgetState) -> Pose | None:
        return plan_optimization(snapshot, budget, self._config)


class SamplingPlanner:
    def __init__(self, config: PlannerConfig):
        self._config = config

    def next_pose(self, snapshot: MapSnapshot, budget: BudgetState) -> Pose | None:
        return plan_sampling(snapshot, budget, self._config)


PLANNER_KINDS = ("coverage", "local", "frontier", "optimization", "sampling")


def make_planner(kind: str, config: PlannerConfig, bounds: GridBounds, start_pose: Pose):
    if kind == "coverage":
        return CoveragePlanner(bounds, config, start_pose)
    if kind == "local":
        return LocalPlanner(config)
    if kind == "frontier":
        return FrontierPlanner(config)
    if kind == "optimization":
        return OptimizationPlanner(config)
    if kind == "sampling":
        return SamplingPlanner(config)
    raise ValueError(f"unknown planner kind: {kind}")
