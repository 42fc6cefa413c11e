"""Seeded scenario generation, observations, rewards and the replanning loop.

A scenario describes a road as a reference path (the road centerline) with
parallel lanelets given by lateral offset and half width, static obstacles in
curvilinear coordinates, a start state, a goal band in arc length, and a
desired cruise speed. Episodes replan every 0.1 s with perfect tracking: the
ego state jumps to the selected trajectory's state at the replanning horizon.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np

from .curvilinear import ReferencePath, build_reference_path
from .errors import GenerationRetryExceeded, NegativeProgress, ProjectionFailed
from .planner import (DEFAULT_NEIGHBORHOODS, CostWeights, FeasibilityLimits,
                      GoalSpec, NeighborhoodLevel, OrientedBox, PlanContext,
                      box_clearance, boxes_intersect, clamp_goal,
                      neighborhood_goals, plan_cycle, uniform_goal_grid)
from .trajectory import CurvilinearState, Status

SCENARIO_FORMAT_VERSION = 1
OBS_WINDOW = (-20.0, 100.0)


# ---------------------------------------------------------------------------
# scenario model


@dataclass(frozen=True)
class Lanelet:
    center_offset: float
    half_width: float

    @property
    def band(self):
        return (self.center_offset - self.half_width,
                self.center_offset + self.half_width)


@dataclass(frozen=True)
class Obstacle:
    s: float
    d: float
    length: float
    width: float
    heading: float  # relative to the reference tangent


@dataclass(frozen=True)
class GoalRegion:
    s_min: float
    s_max: float


@dataclass(frozen=True)
class Scenario:
    id: str
    seed: int
    reference_waypoints: np.ndarray
    lanelets: tuple
    obstacles: tuple
    start: CurvilinearState
    goal: GoalRegion
    v_desired: float

    def road_band(self):
        lo = min(l.band[0] for l in self.lanelets)
        hi = max(l.band[1] for l in self.lanelets)
        return lo, hi

    def to_dict(self):
        return {
            "format": SCENARIO_FORMAT_VERSION,
            "id": self.id,
            "seed": self.seed,
            "reference_waypoints": [[float(x), float(y)]
                                    for x, y in self.reference_waypoints],
            "lanelets": [{"center_offset": l.center_offset,
                          "half_width": l.half_width} for l in self.lanelets],
            "obstacles": [{"s": o.s, "d": o.d, "length": o.length,
                           "width": o.width, "heading": o.heading}
                          for o in self.obstacles],
            "start": {"s": self.start.s, "d": self.start.d,
                      "s_dot": self.start.s_dot, "d_dot": self.start.d_dot,
                      "s_ddot": self.start.s_ddot, "d_ddot": self.start.d_ddot},
            "goal": {"s_min": self.goal.s_min, "s_max": self.goal.s_max},
            "v_desired": self.v_desired,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"

    @staticmethod
    def from_dict(data):
        if data.get("format") != SCENARIO_FORMAT_VERSION:
            raise ValueError(f"unsupported scenario format {data.get('format')!r}")
        start = data["start"]
        return Scenario(
            id=data["id"], seed=int(data["seed"]),
            reference_waypoints=np.asarray(data["reference_waypoints"], dtype=float),
            lanelets=tuple(Lanelet(l["center_offset"], l["half_width"])
                           for l in data["lanelets"]),
            obstacles=tuple(Obstacle(o["s"], o["d"], o["length"], o["width"],
                                     o["heading"]) for o in data["obstacles"]),
            start=CurvilinearState(start["s"], start["d"], start["s_dot"],
                                   start["d_dot"], start["s_ddot"],
                                   start["d_ddot"]),
            goal=GoalRegion(data["goal"]["s_min"], data["goal"]["s_max"]),
            v_desired=float(data["v_desired"]),
        )

    @staticmethod
    def load(path):
        with open(path, encoding="utf-8") as fh:
            return Scenario.from_dict(json.load(fh))

    def save(self, path):
        Path(path).write_text(self.to_json(), encoding="utf-8")


@dataclass(frozen=True)
class ScenarioParams:
    """Knobs of the scenario generator."""

    obstacle_count: tuple = (1, 3)
    path_length: tuple = (150.0, 250.0)
    lane_count: int = 2
    lane_width: float = 3.5
    start_speed: tuple = (8.0, 12.0)
    v_desired_range: tuple = (8.0, 12.0)
    max_curvature: float = 0.04
    max_heading_swing: float = 1.0  # rad, keeps roads free of self-approach
    goal_band_length: float = 15.0
    obstacle_clearance_s: float = 25.0  # pairwise and to start/goal
    obstacle_length: float = 4.5
    obstacle_width: float = 2.0
    waypoint_spacing: float = 1.0


def _round9(value):
    return round(float(value), 9)


def _generate_waypoints(rng, length, params):
    """Integrate a smooth random curvature profile into a 2-D polyline."""
    n_knots = int(rng.integers(4, 7))
    knot_s = np.linspace(0.0, length, n_knots)
    knot_k = rng.uniform(-params.max_curvature, params.max_curvature, n_knots)
    knot_k[0] = 0.0  # roads begin straight, matching the straight start state

    s = np.arange(0.0, length, params.waypoint_spacing)
    s = np.append(s, length)
    kappa = np.interp(s, knot_s, knot_k)
    theta = np.concatenate(
        ([0.0], np.cumsum(0.5 * (kappa[1:] + kappa[:-1]) * np.diff(s))))
    swing = np.max(np.abs(theta))
    if swing > params.max_heading_swing:
        kappa *= params.max_heading_swing / swing
        theta = np.concatenate(
            ([0.0], np.cumsum(0.5 * (kappa[1:] + kappa[:-1]) * np.diff(s))))
    dx = np.cos(theta)
    dy = np.sin(theta)
    x = np.concatenate(([0.0], np.cumsum(0.5 * (dx[1:] + dx[:-1]) * np.diff(s))))
    y = np.concatenate(([0.0], np.cumsum(0.5 * (dy[1:] + dy[:-1]) * np.diff(s))))
    return np.column_stack([np.round(x, 9), np.round(y, 9)])


def lane_offsets(params: ScenarioParams):
    """Lane centerline offsets, symmetric around the road centerline."""
    n = params.lane_count
    return [(i - (n - 1) / 2.0) * params.lane_width for i in range(n)]


def generate_scenario(seed, params: ScenarioParams = ScenarioParams()) -> Scenario:
    """Deterministically generate one scenario from a seed."""
    rng = np.random.default_rng(seed)
    length = rng.uniform(*params.path_length)
    waypoints = _generate_waypoints(rng, length, params)

    offsets = lane_offsets(params)
    half = params.lane_width / 2.0
    lanelets = tuple(Lanelet(_round9(c), _round9(half)) for c in offsets)

    ego_lane = int(rng.integers(0, params.lane_count))
    start = CurvilinearState(s=0.0, d=_round9(offsets[ego_lane]),
                             s_dot=_round9(rng.uniform(*params.start_speed)),
                             d_dot=0.0, s_ddot=0.0, d_ddot=0.0)
    v_desired = _round9(rng.uniform(*params.v_desired_range))

    s_min = length - rng.uniform(30.0, 45.0)
    goal = GoalRegion(_round9(s_min), _round9(s_min + params.goal_band_length))

    gap = params.obstacle_clearance_s
    lo = start.s + gap
    hi = s_min - gap
    if hi - lo < 5.0:
        raise GenerationRetryExceeded(seed, "no room for obstacles between "
                                            "start and goal")
    n_obs = int(rng.integers(params.obstacle_count[0],
                             params.obstacle_count[1] + 1))
    while n_obs > 1 and (hi - lo) - gap * (n_obs - 1) < 5.0:
        n_obs -= 1
    free = (hi - lo) - gap * (n_obs - 1)
    u = np.sort(rng.uniform(0.0, free, n_obs))
    s_positions = lo + u + gap * np.arange(n_obs)

    obstacles = []
    for i, s_pos in enumerate(s_positions):
        lane = ego_lane if i == 0 else int(rng.integers(0, params.lane_count))
        d = offsets[lane] + rng.uniform(-0.5, 0.5)
        heading = rng.uniform(-0.1, 0.1)
        obstacles.append(Obstacle(_round9(s_pos), _round9(d),
                                  params.obstacle_length, params.obstacle_width,
                                  _round9(heading)))

    scenario = Scenario(id=f"scn-{seed:08d}", seed=int(seed),
                        reference_waypoints=waypoints, lanelets=lanelets,
                        obstacles=tuple(obstacles), start=start, goal=goal,
                        v_desired=v_desired)
    issues = validate_scenario(scenario)
    if issues:
        raise GenerationRetryExceeded(seed, "; ".join(issues))
    return scenario


def validate_scenario(scenario: Scenario):
    """Return a list of violated scenario invariants (empty when valid)."""
    issues = []
    s_vals = sorted(o.s for o in scenario.obstacles)
    for a, b in zip(s_vals, s_vals[1:]):
        if b - a < 25.0 - 1e-9:
            issues.append(f"obstacles {a:.1f} and {b:.1f} closer than 25 m")
    for o in scenario.obstacles:
        if abs(o.s - scenario.start.s) < 20.0 or abs(o.s - scenario.goal.s_min) < 20.0:
            issues.append(f"obstacle at s={o.s:.1f} within 20 m of start or goal")
        if not any(l.band[0] <= o.d <= l.band[1] for l in scenario.lanelets):
            issues.append(f"obstacle at d={o.d:.2f} outside all lanelet bands")
    if not any(l.band[0] <= scenario.start.d <= l.band[1] for l in scenario.lanelets):
        issues.append("start offset outside all lanelet bands")
    poly = scenario.reference_waypoints
    total = float(np.sum(np.hypot(*np.diff(poly, axis=0).T)))
    if scenario.goal.s_max > total + 1e-6:
        issues.append("goal band extends beyond the path")
    return issues


# ---------------------------------------------------------------------------
# simulation configuration


@dataclass(frozen=True)
class SimConfig:
    """Numeric defaults of the simulation and planning pipeline."""

    limits: FeasibilityLimits = FeasibilityLimits()
    weights: CostWeights = CostWeights()  # v_desired is taken from the scenario
    neighborhoods: dict = field(default_factory=lambda: dict(DEFAULT_NEIGHBORHOODS))
    dt: float = 0.1
    replan_dt: float = 0.1
    timeout_cycles: int = 300
    ego_length: float = 4.5
    ego_width: float = 2.0
    d_norm: float = 5.0  # lateral action bound, normalizes the reward deviation
    reward_abs_deviation: bool = False
    resample_step: float = 0.5
    curvature_margin: float = 0.1
    d_dom_margin: float = 1.0
    oracle_grid: tuple = (40, 20)


def scenario_path(scenario: Scenario, cfg: SimConfig = SimConfig()) -> ReferencePath:
    """Build the reference path; the projection half-width hugs the road."""
    lo, hi = scenario.road_band()
    d_dom = max(abs(lo), abs(hi)) + cfg.d_dom_margin
    return build_reference_path(scenario.reference_waypoints, cfg.resample_step,
                                domain_half_width=d_dom,
                                curvature_margin=cfg.curvature_margin)


def obstacle_boxes(scenario: Scenario, path: ReferencePath):
    """Static obstacle rectangles in Cartesian coordinates."""
    boxes = []
    for o in scenario.obstacles:
        x, y, theta, _, _ = path.interpolate(o.s)
        cx = x - o.d * np.sin(theta)
        cy = y + o.d * np.cos(theta)
        boxes.append(OrientedBox(float(cx), float(cy), float(theta + o.heading),
                                 o.length, o.width))
    return tuple(boxes)


# ---------------------------------------------------------------------------
# observation and reward


@dataclass
class Observation:
    """Structured curvilinear observation; the two sets carry no ordering."""

    ego: np.ndarray           # [s_dot, d_dot, d, heading misalignment, kappa, progress]
    obstacle_set: np.ndarray  # rows [delta_s, d, length, width]
    lanelet_set: np.ndarray   # rows [center offset - ego d, half width, remaining]
    reward: float


def progress_of(scenario: Scenario, s):
    """Normalized progress: 0 at the start, 1 at the goal-band entry."""
    return (s - scenario.start.s) / (scenario.goal.s_min - scenario.start.s)


def build_observation(scenario: Scenario, ego_state: CurvilinearState,
                      last_reward, path: Optional[ReferencePath] = None) -> Observation:
    if path is None:
        path = scenario_path(scenario)
    if not (0.0 <= ego_state.s <= path.total_length):
        raise ProjectionFailed(f"ego s={ego_state.s:.2f} outside [0, "
                               f"{path.total_length:.2f}]")
    kappa = float(path.curvature_at(ego_state.s))
    misalign = math.atan2(ego_state.d_dot,
                          ego_state.s_dot * (1.0 - kappa * ego_state.d))
    progress = max(progress_of(scenario, ego_state.s), 0.0)
    ego = np.array([ego_state.s_dot, ego_state.d_dot, ego_state.d,
                    misalign, kappa, progress])

    rows = [[o.s - ego_state.s, o.d, o.length, o.width]
            for o in scenario.obstacles
            if OBS_WINDOW[0] <= o.s - ego_state.s <= OBS_WINDOW[1]]
    obstacle_set = np.array(rows, dtype=float).reshape(len(rows), 4)
    remaining = path.total_length - ego_state.s
    lanelet_set = np.array([[l.center_offset - ego_state.d, l.half_width, remaining]
                            for l in scenario.lanelets], dtype=float)
    return Observation(ego=ego, obstacle_set=obstacle_set,
                       lanelet_set=lanelet_set, reward=float(last_reward))


def compute_reward(p_t, d_t, abs_deviation=False):
    """Path-following reward: sgn(p) * (1 - d)^2, sign flips past the goal.

    p_t is the normalized progress (>= 0); d_t the normalized lateral
    deviation already clamped to [-1, 1]. With abs_deviation the magnitude of
    d_t is used, bounding the reward to [-1, 1].
    """
    if p_t < 0.0:
        raise NegativeProgress(f"p_t = {p_t}")
    sign = 1.0 if p_t <= 1.0 else -1.0
    dev = abs(d_t) if abs_deviation else d_t
    return sign * (1.0 - dev) ** 2


# ---------------------------------------------------------------------------
# episode loop


class OutcomeStatus(Enum):
    SUCCESS = "Success"
    COLLISION = "Collision"
    OFF_ROAD = "OffRoad"
    EMPTY_FEASIBLE_SET = "EmptyFeasibleSet"
    TIMEOUT = "Timeout"


@dataclass(frozen=True)
class UniformSampling:
    """Baseline action: a full uniform terminal grid each cycle."""

    d_count: int
    s_dot_count: int


@dataclass(frozen=True)
class GuidedSampling:
    """Guided action: neighborhood of a proposed goal."""

    proposal: GoalSpec
    level: NeighborhoodLevel


@dataclass
class CycleRecord:
    samples_generated: int
    drivable_count: int
    cycle_time_us: dict
    executed_s: float
    executed_d: float
    status_counts: dict
    reward: float
    proposal_clamped: bool = False


@dataclass
class EpisodeState:
    scenario: Scenario
    path: ReferencePath
    context: PlanContext
    boxes: tuple
    road_band: tuple
    ego: CurvilinearState
    t: int = 0
    cumulative_reward: float = 0.0
    min_clearance: float = math.inf
    terminal: Optional[OutcomeStatus] = None
    clamp_count: int = 0

    @property
    def s_start(self):
        return self.scenario.start.s


@dataclass
class EpisodeOutcome:
    status: OutcomeStatus
    steps: int
    min_obstacle_distance: float
    cumulative_reward: float
    per_cycle: list
    clamp_count: int = 0


def _ego_box(state: EpisodeState, x, y, psi, cfg: SimConfig):
    return OrientedBox(float(x), float(y), float(psi),
                       cfg.ego_length, cfg.ego_width)


def _pose_of(state: EpisodeState, ego: CurvilinearState):
    x, y, theta, kappa, _ = state.path.interpolate(ego.s)
    px = x - ego.d * np.sin(theta)
    py = y + ego.d * np.cos(theta)
    psi = theta + math.atan2(ego.d_dot, ego.s_dot * (1.0 - kappa * ego.d))
    return float(px), float(py), float(psi)


def init_episode(scenario: Scenario, cfg: SimConfig = SimConfig()) -> EpisodeState:
    path = scenario_path(scenario, cfg)
    boxes = obstacle_boxes(scenario, path)
    weights = replace(cfg.weights, v_desired=scenario.v_desired)
    ctx = PlanContext(path=path, obstacles=boxes, limits=cfg.limits,
                      weights=weights, ego_length=cfg.ego_length,
                      ego_width=cfg.ego_width, dt=cfg.dt)
    state = EpisodeState(scenario=scenario, path=path, context=ctx, boxes=boxes,
                         road_band=scenario.road_band(), ego=scenario.start)
    if boxes:
        x, y, psi = _pose_of(state, state.ego)
        ego_box = _ego_box(state, x, y, psi, cfg)
        state.min_clearance = min(box_clearance(ego_box, b) for b in boxes)
    return state


def step_episode(state: EpisodeState, action, cfg: SimConfig = SimConfig()) -> CycleRecord:
    """Run one replanning cycle and advance the episode state in place."""
    if state.terminal is not None:
        raise RuntimeError("episode is already terminal")

    clamped = False
    if isinstance(action, UniformSampling):
        goals = uniform_goal_grid(action.d_count, action.s_dot_count)
    else:
        proposal, clamped = clamp_goal(action.proposal)
        if clamped:
            state.clamp_count += 1
        goals = neighborhood_goals(proposal, cfg.neighborhoods[action.level])

    result = plan_cycle(state.context, state.ego, goals)
    counts = {status.name: count for status, count in result.counts.items()}
    record = CycleRecord(samples_generated=result.n_generated,
                         drivable_count=result.counts[Status.DRIVABLE],
                         cycle_time_us=result.cycle_time.as_dict(),
                         executed_s=state.ego.s, executed_d=state.ego.d,
                         status_counts=counts, reward=0.0,
                         proposal_clamped=clamped)

    if result.best is None:
        state.terminal = OutcomeStatus.EMPTY_FEASIBLE_SET
        return record

    idx = int(round(cfg.replan_dt / cfg.dt))
    cl = result.best.curvilinear_states
    state.ego = CurvilinearState(float(cl.s[idx]), float(cl.d[idx]),
                                 float(cl.s_dot[idx]), float(cl.d_dot[idx]),
                                 float(cl.s_ddot[idx]), float(cl.d_ddot[idx]))
    record.executed_s, record.executed_d = state.ego.s, state.ego.d

    cart = result.best.cartesian_states
    x, y, psi = float(cart.x[idx]), float(cart.y[idx]), float(cart.psi[idx])
    ego_box = _ego_box(state, x, y, psi, cfg)
    if state.boxes:
        state.min_clearance = min(state.min_clearance,
                                  min(box_clearance(ego_box, b) for b in state.boxes))

    # progress can dip epsilon-negative through numerics near standstill
    p_t = max(progress_of(state.scenario, state.ego.s), 0.0)
    d_t = min(max(state.ego.d / cfg.d_norm, -1.0), 1.0)
    reward = compute_reward(p_t, d_t, cfg.reward_abs_deviation)
    record.reward = reward
    state.cumulative_reward += reward
    state.t += 1

    lo, hi = state.road_band
    goal = state.scenario.goal
    in_band = any(l.band[0] <= state.ego.d <= l.band[1]
                  for l in state.scenario.lanelets)
    if any(boxes_intersect(ego_box, b) for b in state.boxes):
        state.terminal = OutcomeStatus.COLLISION
    elif not lo <= state.ego.d <= hi:
        state.terminal = OutcomeStatus.OFF_ROAD
    elif goal.s_min <= state.ego.s <= goal.s_max and in_band:
        state.terminal = OutcomeStatus.SUCCESS
    elif state.t >= cfg.timeout_cycles:
        state.terminal = OutcomeStatus.TIMEOUT
    return record


def run_episode(scenario: Scenario, sampler, cfg: SimConfig = SimConfig(),
                proposer=None, episode_index=0, collect_cycles=True) -> EpisodeOutcome:
    """Loop step_episode until a terminal status is reached.

    sampler is either a UniformSampling grid (baselines) or a
    NeighborhoodLevel (guided modes, requires a proposer).
    """
    if not isinstance(sampler, (UniformSampling, NeighborhoodLevel)):
        raise TypeError("sampler must be UniformSampling or a NeighborhoodLevel")
    guided = isinstance(sampler, NeighborhoodLevel)
    if guided and proposer is None:
        raise ValueError("guided sampling needs a proposer")

    state = init_episode(scenario, cfg)
    if proposer is not None:
        proposer.begin_episode(scenario, state, cfg, episode_index)

    records = []
    last_reward = 0.0
    while state.terminal is None:
        if guided:
            obs = build_observation(scenario, state.ego, last_reward, state.path)
            proposal = proposer.propose(obs, state.ego)
            action = GuidedSampling(proposal, sampler)
        else:
            action = sampler
        step_t = state.t
        record = step_episode(state, action, cfg)
        last_reward = record.reward
        if collect_cycles:
            records.append(record)
        if proposer is not None:
            done = state.terminal is not None
            proposer.feedback(episode_index, step_t, record.reward, done,
                              state.terminal.value if done else None)

    return EpisodeOutcome(status=state.terminal, steps=state.t,
                          min_obstacle_distance=state.min_clearance,
                          cumulative_reward=state.cumulative_reward,
                          per_cycle=records, clamp_count=state.clamp_count)
