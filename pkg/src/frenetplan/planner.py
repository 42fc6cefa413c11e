"""Candidate-set construction, filtering, cost evaluation and selection.

A planning cycle takes a set of terminal goals, generates one jerk-optimal
candidate per goal, and classifies each candidate in three stages:

  1. validity    - all curvilinear samples inside the projection domain
  2. feasibility - acceleration, curvature, curvature rate, yaw rate bounds
  3. collision   - oriented-rectangle overlap against static obstacles

Survivors are drivable; the weighted-cost argmin is returned with a
deterministic tie-break (lowest |goal d|, then lowest index).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

import numpy as np

from .curvilinear import ReferencePath
from .errors import NotDrivable
from .trajectory import (CurvilinearState, Status, TrajectoryBatch,
                         generate_batch, materialize)

# terminal goal-state domain: lateral offset, longitudinal velocity, fixed
# horizon and terminal lateral velocity
D_BOUNDS = (-5.0, 5.0)
S_DOT_BOUNDS = (0.0, 15.0)
TAU_FIXED = 1.5
D_DOT_TERMINAL = 0.0

DEFAULT_EGO_LENGTH = 4.5
DEFAULT_EGO_WIDTH = 2.0


@dataclass(frozen=True)
class GoalSpec:
    """Terminal condition (d, s_dot, tau, d_dot) for one candidate."""

    d: float
    s_dot: float
    tau: float = TAU_FIXED
    d_dot: float = D_DOT_TERMINAL

    def in_domain(self):
        return (D_BOUNDS[0] <= self.d <= D_BOUNDS[1]
                and S_DOT_BOUNDS[0] <= self.s_dot <= S_DOT_BOUNDS[1])


def clamp_goal(g: GoalSpec):
    """Clamp a goal into the action domain; returns (goal, was_clamped)."""
    d = min(max(g.d, D_BOUNDS[0]), D_BOUNDS[1])
    s_dot = min(max(g.s_dot, S_DOT_BOUNDS[0]), S_DOT_BOUNDS[1])
    clamped = (d != g.d) or (s_dot != g.s_dot)
    return (replace(g, d=d, s_dot=s_dot) if clamped else g), clamped


class NeighborhoodLevel(Enum):
    NONE = "None"
    N1 = "N1"
    N2 = "N2"
    N3 = "N3"


@dataclass(frozen=True)
class NeighborhoodSpec:
    """Local goal grid centered on a proposal."""

    level: NeighborhoodLevel
    d_half_width: float
    s_dot_half_width: float
    d_count: int
    s_dot_count: int

    _SIZES = {NeighborhoodLevel.NONE: 1, NeighborhoodLevel.N1: 9,
              NeighborhoodLevel.N2: 125, NeighborhoodLevel.N3: 343}

    def __post_init__(self):
        if self.d_count * self.s_dot_count != self._SIZES[self.level]:
            raise ValueError(
                f"{self.level.value} grid must have "
                f"{self._SIZES[self.level]} goals, got "
                f"{self.d_count}x{self.s_dot_count}")


# N2 (125 candidates) mirrors the benchmark's neighborhood-sampling variant;
# N1/N3 sizes are calibrated choices and stay configurable
DEFAULT_NEIGHBORHOODS = {
    NeighborhoodLevel.NONE: NeighborhoodSpec(NeighborhoodLevel.NONE, 0.0, 0.0, 1, 1),
    NeighborhoodLevel.N1: NeighborhoodSpec(NeighborhoodLevel.N1, 1.0, 1.0, 3, 3),
    NeighborhoodLevel.N2: NeighborhoodSpec(NeighborhoodLevel.N2, 2.0, 2.0, 25, 5),
    NeighborhoodLevel.N3: NeighborhoodSpec(NeighborhoodLevel.N3, 3.0, 3.0, 49, 7),
}


def _axis(lo, hi, n):
    if n == 1:
        return np.array([(lo + hi) / 2.0])
    return np.linspace(lo, hi, n)


def uniform_goal_grid(d_count, s_dot_count):
    """Cartesian product of evenly spaced goals over the full action domain."""
    if d_count < 1 or s_dot_count < 1:
        raise ValueError("grid counts must be >= 1")
    d_vals = _axis(*D_BOUNDS, d_count)
    s_vals = _axis(*S_DOT_BOUNDS, s_dot_count)
    return [GoalSpec(float(d), float(sd)) for d in d_vals for sd in s_vals]


def neighborhood_goals(g: GoalSpec, spec: NeighborhoodSpec):
    """Goal grid centered on g, clamped to the domain, deduplicated."""
    g, _ = clamp_goal(g)
    if spec.level == NeighborhoodLevel.NONE:
        return [g]
    d_vals = np.clip(_axis(g.d - spec.d_half_width, g.d + spec.d_half_width,
                           spec.d_count), *D_BOUNDS)
    s_vals = np.clip(_axis(g.s_dot - spec.s_dot_half_width,
                           g.s_dot + spec.s_dot_half_width,
                           spec.s_dot_count), *S_DOT_BOUNDS)
    out, seen = [], set()
    for d in d_vals:
        for sd in s_vals:
            key = (float(d), float(sd))
            if key not in seen:
                seen.add(key)
                out.append(GoalSpec(*key))
    return out


@dataclass(frozen=True)
class FeasibilityLimits:
    """Kinematic bounds checked per sample in Cartesian coordinates."""

    a_max: float = 8.0
    kappa_max: float = 0.2
    kappa_dot_max: float = 0.4
    psi_dot_max: float = 1.0

    def __post_init__(self):
        if min(self.a_max, self.kappa_max, self.kappa_dot_max, self.psi_dot_max) <= 0:
            raise ValueError("feasibility limits must be strictly positive")


@dataclass(frozen=True)
class CostWeights:
    """Weights of the cost terms plus the desired cruise speed."""

    lat_jerk: float = 0.002
    lon_jerk: float = 0.002
    deviation: float = 1.0
    velocity: float = 1.0
    obstacle: float = 2.0
    v_desired: float = 10.0
    obstacle_eps: float = 0.1

    def __post_init__(self):
        if max(self.lat_jerk, self.lon_jerk, self.deviation,
               self.velocity, self.obstacle) <= 0:
            raise ValueError("at least one cost weight must be positive")


COST_TERMS = ("lat_jerk", "lon_jerk", "deviation", "velocity", "obstacle")


@dataclass(frozen=True)
class OrientedBox:
    """Rectangle with center, heading and full length/width."""

    cx: float
    cy: float
    heading: float
    length: float
    width: float

    def corners(self):
        c, s = np.cos(self.heading), np.sin(self.heading)
        hl, hw = self.length / 2.0, self.width / 2.0
        offs = np.array([[hl, hw], [hl, -hw], [-hl, -hw], [-hl, hw]])
        rot = np.array([[c, -s], [s, c]])
        return np.array([self.cx, self.cy]) + offs @ rot.T


def _sat_separated_on_axis(ax, ay, tx, ty, cos_e, sin_e, he_l, he_w, box, eps=0.0):
    dist = np.abs(tx * ax + ty * ay)
    r_e = he_l * np.abs(cos_e * ax + sin_e * ay) + he_w * np.abs(-sin_e * ax + cos_e * ay)
    cb, sb = np.cos(box.heading), np.sin(box.heading)
    r_b = (box.length / 2.0) * np.abs(cb * ax + sb * ay) \
        + (box.width / 2.0) * np.abs(-sb * ax + cb * ay)
    return dist > r_e + r_b + eps


def _collision_mask(x, y, psi, obstacles, ego_length, ego_width):
    """Separating-axis overlap of ego rectangles at (x, y, psi) vs obstacles."""
    he_l, he_w = ego_length / 2.0, ego_width / 2.0
    cos_e, sin_e = np.cos(psi), np.sin(psi)
    hit = np.zeros(np.shape(x), dtype=bool)
    for box in obstacles:
        tx, ty = box.cx - x, box.cy - y
        cb, sb = np.cos(box.heading), np.sin(box.heading)
        sep = _sat_separated_on_axis(cos_e, sin_e, tx, ty, cos_e, sin_e, he_l, he_w, box)
        sep |= _sat_separated_on_axis(-sin_e, cos_e, tx, ty, cos_e, sin_e, he_l, he_w, box)
        sep |= _sat_separated_on_axis(cb, sb, tx, ty, cos_e, sin_e, he_l, he_w, box)
        sep |= _sat_separated_on_axis(-sb, cb, tx, ty, cos_e, sin_e, he_l, he_w, box)
        hit |= ~sep
    return hit


def boxes_intersect(a: OrientedBox, b: OrientedBox) -> bool:
    """Separating-axis test for one pair of oriented rectangles."""
    return bool(_collision_mask(np.array(a.cx), np.array(a.cy),
                                np.array(a.heading), [b], a.length, a.width))


def _segment_distance(p1, p2, q1, q2):
    """Minimum distance between two 2-D segments."""
    def point_seg(p, a, b):
        ab = b - a
        denom = float(ab @ ab)
        t = 0.0 if denom == 0.0 else float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
        return float(np.hypot(*(p - (a + t * ab))))

    return min(point_seg(p1, q1, q2), point_seg(p2, q1, q2),
               point_seg(q1, p1, p2), point_seg(q2, p1, p2))


def box_clearance(a: OrientedBox, b: OrientedBox) -> float:
    """Exact distance between two rectangle boundaries; 0 when they overlap."""
    if boxes_intersect(a, b):
        return 0.0
    ca, cb = a.corners(), b.corners()
    best = np.inf
    for i in range(4):
        for j in range(4):
            best = min(best, _segment_distance(ca[i], ca[(i + 1) % 4],
                                               cb[j], cb[(j + 1) % 4]))
    return best


def check_collision(candidate, obstacles, ego_length=DEFAULT_EGO_LENGTH,
                    ego_width=DEFAULT_EGO_WIDTH) -> bool:
    """True iff any sampled ego pose intersects any obstacle rectangle."""
    cart = candidate.cartesian_states
    return bool(np.any(_collision_mask(cart.x, cart.y, cart.psi, obstacles,
                                       ego_length, ego_width)))


def _point_box_distances(x, y, obstacles):
    """Distance from points to the nearest obstacle boundary (inf if none)."""
    best = np.full(np.shape(x), np.inf)
    for box in obstacles:
        cb, sb = np.cos(box.heading), np.sin(box.heading)
        dx, dy = x - box.cx, y - box.cy
        rel_x = cb * dx + sb * dy
        rel_y = -sb * dx + cb * dy
        ox = np.maximum(np.abs(rel_x) - box.length / 2.0, 0.0)
        oy = np.maximum(np.abs(rel_y) - box.width / 2.0, 0.0)
        best = np.minimum(best, np.hypot(ox, oy))
    return best


def min_obstacle_distance(x, y, obstacles, ego_width=DEFAULT_EGO_WIDTH):
    """Cost proxy: center-to-boundary distance minus half ego width, floored at 0."""
    d = _point_box_distances(x, y, obstacles)
    return np.maximum(d - ego_width / 2.0, 0.0) if np.ndim(d) else max(d - ego_width / 2.0, 0.0)


@dataclass
class PhaseTimings:
    """Planner pipeline time per phase, microseconds."""

    generation: float = 0.0
    validity: float = 0.0
    feasibility: float = 0.0
    collision: float = 0.0
    cost: float = 0.0

    @property
    def total(self):
        return (self.generation + self.validity + self.feasibility
                + self.collision + self.cost)

    def as_dict(self):
        return {"generation": self.generation, "validity": self.validity,
                "feasibility": self.feasibility, "collision": self.collision,
                "cost": self.cost, "total": self.total}


@dataclass
class PlanningResult:
    """Outcome of one planning cycle over a candidate set."""

    best: Optional[object]
    counts: dict
    candidates: Optional[list]
    cycle_time: PhaseTimings
    statuses: np.ndarray = field(default=None, repr=False)
    costs: np.ndarray = field(default=None, repr=False)

    @property
    def n_generated(self):
        return int(sum(self.counts.values()))


def _deviation_integrals(lat_coeffs, tau):
    """Exact integral of d(t)^2 over [0, tau] from quintic coefficients."""
    n = lat_coeffs.shape[-1]
    i = np.arange(n)
    powers = i[:, None] + i[None, :] + 1
    moment = tau ** powers / powers
    return np.einsum("ki,kj,ij->k", lat_coeffs, lat_coeffs, moment)


def _evaluate_batch(batch: TrajectoryBatch, path, obstacles, limits, weights,
                    ego_length, ego_width, prior_invalid=None):
    """Classify every row of a batch and cost the drivable ones.

    Returns (statuses (K,), costs (K,), breakdown dict of (K,) arrays,
    timings). Masks are evaluated on all rows; stage precedence (validity,
    then feasibility, then collision) decides the final classification, which
    matches checking each stage only on the survivors of the previous one.
    """
    k = len(batch)
    timings = PhaseTimings()
    cart = batch.cart

    t0 = time.perf_counter()
    invalid = ~batch.domain_ok
    if prior_invalid is not None:
        invalid |= prior_invalid
    t1 = time.perf_counter()

    infeasible = (
        (np.max(cart.a, axis=-1) > limits.a_max)
        | (np.max(np.abs(cart.kappa), axis=-1) > limits.kappa_max)
        | (np.max(np.abs(cart.kappa_dot), axis=-1) > limits.kappa_dot_max)
        | (np.max(np.abs(cart.psi_dot), axis=-1) > limits.psi_dot_max))
    t2 = time.perf_counter()

    colliding = np.any(_collision_mask(cart.x, cart.y, cart.psi, obstacles,
                                       ego_length, ego_width), axis=-1)
    t3 = time.perf_counter()

    statuses = np.full(k, Status.DRIVABLE, dtype=np.int8)
    statuses[colliding] = Status.COLLIDING
    statuses[infeasible] = Status.INFEASIBLE
    statuses[invalid] = Status.INVALID

    dev = _deviation_integrals(batch.lat_coeffs, batch.tau) / batch.tau
    vel = (batch.goal_s_dot - weights.v_desired) ** 2
    obs_dist = np.min(min_obstacle_distance(cart.x, cart.y, obstacles, ego_width),
                      axis=-1) if obstacles else np.full(k, np.inf)
    obs_term = np.where(np.isfinite(obs_dist),
                        1.0 / (obs_dist + weights.obstacle_eps), 0.0)
    breakdown = {"lat_jerk": batch.jerk_lat, "lon_jerk": batch.jerk_lon,
                 "deviation": dev, "velocity": vel, "obstacle": obs_term}
    totals = (weights.lat_jerk * batch.jerk_lat + weights.lon_jerk * batch.jerk_lon
              + weights.deviation * dev + weights.velocity * vel
              + weights.obstacle * obs_term)
    costs = np.where(statuses == Status.DRIVABLE, totals, np.inf)
    t4 = time.perf_counter()

    timings.validity = (t1 - t0) * 1e6
    timings.feasibility = (t2 - t1) * 1e6
    timings.collision = (t3 - t2) * 1e6
    timings.cost = (t4 - t3) * 1e6
    return statuses, costs, breakdown, timings


def _select_index(statuses, costs, goal_d):
    """Argmin cost among drivable rows; ties by lowest |goal d| then index."""
    drivable = np.flatnonzero(statuses == Status.DRIVABLE)
    if drivable.size == 0:
        return None
    order = np.lexsort((drivable, np.abs(goal_d[drivable]), costs[drivable]))
    return int(drivable[order[0]])


def _counts_from_statuses(statuses):
    return {status: int(np.sum(statuses == status)) for status in Status}


@dataclass(frozen=True)
class PlanContext:
    """Immutable per-scenario planning context shared across cycles."""

    path: ReferencePath
    obstacles: tuple
    limits: FeasibilityLimits
    weights: CostWeights
    ego_length: float = DEFAULT_EGO_LENGTH
    ego_width: float = DEFAULT_EGO_WIDTH
    dt: float = 0.1


def plan_cycle(ctx: PlanContext, x0: CurvilinearState, goals,
               retain_candidates=False) -> PlanningResult:
    """Generate, filter and select over a goal list in one vectorized pass."""
    if not goals:
        raise ValueError("goal set must be nonempty")
    tau = goals[0].tau
    t0 = time.perf_counter()
    batch = generate_batch(x0, [g.d for g in goals], [g.s_dot for g in goals],
                           tau, ctx.dt, ctx.path)
    t1 = time.perf_counter()
    statuses, costs, breakdown, timings = _evaluate_batch(
        batch, ctx.path, ctx.obstacles, ctx.limits, ctx.weights,
        ctx.ego_length, ctx.ego_width)
    timings.generation = (t1 - t0) * 1e6

    best_i = _select_index(statuses, costs, batch.goal_d)
    best = None
    if best_i is not None:
        best = materialize(batch, best_i, goals[best_i])
        best.mark(Status.DRIVABLE)
        best.total_cost = float(costs[best_i])
        best.cost_breakdown = {k: float(v[best_i]) for k, v in breakdown.items()}

    candidates = None
    if retain_candidates:
        candidates = [materialize(batch, i, g) for i, g in enumerate(goals)]
        _apply_classification(candidates, statuses, costs, breakdown)
    return PlanningResult(best=best, counts=_counts_from_statuses(statuses),
                          candidates=candidates, cycle_time=timings,
                          statuses=statuses, costs=costs)


def _apply_classification(candidates, statuses, costs, breakdown):
    for i, cand in enumerate(candidates):
        status = Status(int(statuses[i]))
        if cand.status == Status.UNCHECKED:
            cand.mark(status)
        if status == Status.DRIVABLE:
            cand.total_cost = float(costs[i])
            cand.cost_breakdown = {k: float(v[i]) for k, v in breakdown.items()}


def filter_and_select(candidates, path, obstacles, limits, weights,
                      ego_length=DEFAULT_EGO_LENGTH,
                      ego_width=DEFAULT_EGO_WIDTH) -> PlanningResult:
    """Run the three-stage filter and cost selection over candidate objects."""
    if not candidates:
        raise ValueError("candidate set must be nonempty")
    t0 = time.perf_counter()
    cl = candidates[0].curvilinear_states
    batch = TrajectoryBatch(
        goal_d=np.array([c.goal.d for c in candidates]),
        goal_s_dot=np.array([c.goal.s_dot for c in candidates]),
        tau=candidates[0].goal.tau, dt=candidates[0].dt,
        lat_coeffs=np.stack([c.lat.c for c in candidates]),
        lon_coeffs=np.stack([c.lon.c for c in candidates]),
        cl=type(cl)(*[np.stack([getattr(c.curvilinear_states, f) for c in candidates])
                      for f in ("s", "d", "s_dot", "d_dot", "s_ddot", "d_ddot")]),
        cart=type(candidates[0].cartesian_states)(
            *[np.stack([getattr(c.cartesian_states, f) for c in candidates])
              for f in ("x", "y", "psi", "v", "a", "kappa", "kappa_dot", "psi_dot")]),
        domain_ok=_domain_ok_rows(candidates, path),
        jerk_lat=np.array([c.jerk_lat_sq_integral for c in candidates]),
        jerk_lon=np.array([c.jerk_lon_sq_integral for c in candidates]))
    t1 = time.perf_counter()

    prior_invalid = np.array([c.status == Status.INVALID for c in candidates])
    statuses, costs, breakdown, timings = _evaluate_batch(
        batch, path, obstacles, limits, weights, ego_length, ego_width,
        prior_invalid=prior_invalid)
    timings.generation = (t1 - t0) * 1e6
    _apply_classification(candidates, statuses, costs, breakdown)

    best_i = _select_index(statuses, costs, batch.goal_d)
    best = candidates[best_i] if best_i is not None else None
    return PlanningResult(best=best, counts=_counts_from_statuses(statuses),
                          candidates=candidates, cycle_time=timings,
                          statuses=statuses, costs=costs)


def _domain_ok_rows(candidates, path):
    s = np.stack([c.curvilinear_states.s for c in candidates])
    d = np.stack([c.curvilinear_states.d for c in candidates])
    kappa = path.interpolate(s)[3]
    return np.all(path.domain.contains(s, d, kappa), axis=-1)


def evaluate_cost(candidate, weights: CostWeights, obstacles,
                  ego_width=DEFAULT_EGO_WIDTH):
    """Weighted cost of a drivable candidate; also stores the breakdown."""
    if candidate.status != Status.DRIVABLE:
        raise NotDrivable(f"candidate status is {candidate.status.name}")
    tau = candidate.goal.tau
    cart = candidate.cartesian_states
    dev = float(_deviation_integrals(candidate.lat.c[None, :], tau)[0]) / tau
    vel = (candidate.goal.s_dot - weights.v_desired) ** 2
    if obstacles:
        dist = float(np.min(min_obstacle_distance(cart.x, cart.y, obstacles,
                                                  ego_width)))
        obs_term = 1.0 / (dist + weights.obstacle_eps)
    else:
        obs_term = 0.0
    breakdown = {"lat_jerk": candidate.jerk_lat_sq_integral,
                 "lon_jerk": candidate.jerk_lon_sq_integral,
                 "deviation": dev, "velocity": vel, "obstacle": obs_term}
    total = sum(getattr(weights, name) * breakdown[name] for name in COST_TERMS)
    candidate.total_cost = float(total)
    candidate.cost_breakdown = breakdown
    return candidate.total_cost, breakdown
