"""Jerk-optimal polynomial boundary-value problems and trajectory candidates.

The lateral motion d(t) is the unique quintic matching position, velocity and
acceleration at both ends; the longitudinal motion s(t) is the unique quartic
matching the start state plus terminal velocity and acceleration (terminal
position free). Both minimize the integral of squared jerk over the horizon
among all sufficiently smooth functions with the same boundary values.

Candidate sets within one planning cycle share the horizon and start state, so
generation is implemented over coefficient batches; the single-candidate
operations are thin wrappers over the same kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import TYPE_CHECKING, Optional

import numpy as np

from .curvilinear import ReferencePath
from .errors import NonpositiveHorizon

if TYPE_CHECKING:  # pragma: no cover
    from .planner import GoalSpec

DEFAULT_DT = 0.1
_V_EPS = 1e-6


class Status(IntEnum):
    UNCHECKED = 0
    INVALID = 1
    INFEASIBLE = 2
    COLLIDING = 3
    DRIVABLE = 4


@dataclass(frozen=True)
class CurvilinearState:
    """Full curvilinear ego state (s, d, s_dot, d_dot, s_ddot, d_ddot)."""

    s: float
    d: float
    s_dot: float
    d_dot: float
    s_ddot: float = 0.0
    d_ddot: float = 0.0

    def as_array(self):
        return np.array([self.s, self.d, self.s_dot, self.d_dot,
                         self.s_ddot, self.d_ddot])


def sample_count(tau, dt):
    """floor(tau/dt) + 1 samples on the uniform grid t = 0, dt, ..."""
    return int(math.floor(tau / dt + 1e-9)) + 1


def _poly_batch_eval(coeffs, t):
    """Evaluate ascending-power coefficient rows (K, n) on a grid t (T,)."""
    powers = np.vander(t, coeffs.shape[-1], increasing=True)  # (T, n)
    return coeffs @ powers.T


def _poly_derivative(coeffs):
    return coeffs[..., 1:] * np.arange(1, coeffs.shape[-1])


class _PolyCoeffs:
    """Ascending-power polynomial with boundary-value evaluation helpers."""

    __slots__ = ("c",)

    def __init__(self, c):
        self.c = np.asarray(c, dtype=float)
        self.c.setflags(write=False)

    def value(self, t):
        return np.polyval(self.c[::-1], t)

    def velocity(self, t):
        return np.polyval(_poly_derivative(self.c)[::-1], t)

    def acceleration(self, t):
        return np.polyval(_poly_derivative(_poly_derivative(self.c))[::-1], t)

    def jerk(self, t):
        d3 = _poly_derivative(_poly_derivative(_poly_derivative(self.c)))
        return np.polyval(d3[::-1], t)

    def __iter__(self):
        return iter(self.c)

    def __getattr__(self, name):
        if name.startswith("c") and name[1:].isdigit():
            idx = int(name[1:])
            if idx < len(self.c):
                return float(self.c[idx])
        raise AttributeError(name)


class QuinticCoeffs(_PolyCoeffs):
    """Coefficients c0..c5 of the lateral polynomial d(t)."""


class QuarticCoeffs(_PolyCoeffs):
    """Coefficients c0..c4 of the longitudinal polynomial s(t)."""


def _quintic_batch(d0, d0_dot, d0_ddot, d_end, d_end_dot, d_end_ddot, tau):
    """Solve the quintic BVP for arrays of end conditions; returns (K, 6)."""
    if tau <= 0:
        raise NonpositiveHorizon(f"tau = {tau}")
    d_end = np.atleast_1d(np.asarray(d_end, dtype=float))
    d_end_dot = np.broadcast_to(np.asarray(d_end_dot, dtype=float), d_end.shape)
    d_end_ddot = np.broadcast_to(np.asarray(d_end_ddot, dtype=float), d_end.shape)
    c0, c1, c2 = float(d0), float(d0_dot), 0.5 * float(d0_ddot)
    t2, t3, t4, t5 = tau ** 2, tau ** 3, tau ** 4, tau ** 5
    a_mat = np.array([[t3, t4, t5],
                      [3 * t2, 4 * t3, 5 * t4],
                      [6 * tau, 12 * t2, 20 * t3]])
    rhs = np.stack([d_end - (c0 + c1 * tau + c2 * t2),
                    d_end_dot - (c1 + 2 * c2 * tau),
                    d_end_ddot - 2 * c2])
    high = np.linalg.solve(a_mat, rhs)  # (3, K)
    k = d_end.shape[0]
    out = np.empty((k, 6))
    out[:, 0], out[:, 1], out[:, 2] = c0, c1, c2
    out[:, 3:] = high.T
    return out


def _quartic_batch(s0, s0_dot, s0_ddot, s_end_dot, s_end_ddot, tau):
    """Solve the quartic BVP (terminal position free); returns (K, 5)."""
    if tau <= 0:
        raise NonpositiveHorizon(f"tau = {tau}")
    s_end_dot = np.atleast_1d(np.asarray(s_end_dot, dtype=float))
    s_end_ddot = np.broadcast_to(np.asarray(s_end_ddot, dtype=float), s_end_dot.shape)
    c0, c1, c2 = float(s0), float(s0_dot), 0.5 * float(s0_ddot)
    t2, t3 = tau ** 2, tau ** 3
    a_mat = np.array([[3 * t2, 4 * t3],
                      [6 * tau, 12 * t2]])
    rhs = np.stack([s_end_dot - (c1 + 2 * c2 * tau),
                    s_end_ddot - 2 * c2])
    high = np.linalg.solve(a_mat, rhs)
    k = s_end_dot.shape[0]
    out = np.empty((k, 5))
    out[:, 0], out[:, 1], out[:, 2] = c0, c1, c2
    out[:, 3:] = high.T
    return out


def solve_quintic(d0, d0_dot, d0_ddot, d_end, d_end_dot, d_end_ddot, tau) -> QuinticCoeffs:
    """Jerk-optimal quintic through six boundary values over (0, tau]."""
    return QuinticCoeffs(_quintic_batch(d0, d0_dot, d0_ddot,
                                        d_end, d_end_dot, d_end_ddot, tau)[0])


def solve_quartic(s0, s0_dot, s0_ddot, s_end_dot, s_end_ddot, tau) -> QuarticCoeffs:
    """Jerk-optimal quartic through five boundary values (end position free)."""
    return QuarticCoeffs(_quartic_batch(s0, s0_dot, s0_ddot,
                                        s_end_dot, s_end_ddot, tau)[0])


def squared_jerk_integral_quintic(coeffs, tau):
    """Exact integral of the squared third derivative of a quintic."""
    c = np.asarray(coeffs if not isinstance(coeffs, _PolyCoeffs) else coeffs.c)
    c3, c4, c5 = c[..., 3], c[..., 4], c[..., 5]
    return (36 * c3 ** 2 * tau + 144 * c3 * c4 * tau ** 2
            + (192 * c4 ** 2 + 240 * c3 * c5) * tau ** 3
            + 720 * c4 * c5 * tau ** 4 + 720 * c5 ** 2 * tau ** 5)


def squared_jerk_integral_quartic(coeffs, tau):
    """Exact integral of the squared third derivative of a quartic."""
    c = np.asarray(coeffs if not isinstance(coeffs, _PolyCoeffs) else coeffs.c)
    c3, c4 = c[..., 3], c[..., 4]
    return 36 * c3 ** 2 * tau + 144 * c3 * c4 * tau ** 2 + 192 * c4 ** 2 * tau ** 3


@dataclass
class CurvilinearStates:
    s: np.ndarray
    d: np.ndarray
    s_dot: np.ndarray
    d_dot: np.ndarray
    s_ddot: np.ndarray
    d_ddot: np.ndarray

    def __len__(self):
        return self.s.shape[-1]


@dataclass
class CartesianStates:
    x: np.ndarray
    y: np.ndarray
    psi: np.ndarray
    v: np.ndarray
    a: np.ndarray
    kappa: np.ndarray
    kappa_dot: np.ndarray
    psi_dot: np.ndarray

    def __len__(self):
        return self.x.shape[-1]


def cartesian_kinematics(path: ReferencePath, cl: CurvilinearStates, dt) -> CartesianStates:
    """Closed-form curvilinear-to-Cartesian kinematic transformation.

    Velocity and acceleration are assembled in the tangent/normal frame of the
    foot point: with A = s_dot * (1 - kappa*d),

        v_vec = A t + d_dot n
        a_vec = (dA/dt - d_dot s_dot kappa) t + (d_ddot + A s_dot kappa) n

    from which speed, heading, acceleration magnitude, path curvature
    (cross(v, a)/|v|^3) and yaw rate (kappa * |v|) follow. kappa_dot is the
    time derivative of the curvature sequence. Arc lengths outside [0, L] are
    evaluated clipped; validity is judged separately.
    """
    x0, y0, theta, kappa_r, kappa_rate = path.interpolate(cl.s)
    sin_t, cos_t = np.sin(theta), np.cos(theta)
    x = x0 - cl.d * sin_t
    y = y0 + cl.d * cos_t

    one_kd = 1.0 - kappa_r * cl.d
    vt = cl.s_dot * one_kd
    v = np.hypot(vt, cl.d_dot)
    psi = theta + np.arctan2(cl.d_dot, vt)

    dvt = (cl.s_ddot * one_kd
           - cl.s_dot * (kappa_rate * cl.s_dot * cl.d + kappa_r * cl.d_dot))
    a_t = dvt - cl.d_dot * cl.s_dot * kappa_r
    a_n = cl.d_ddot + vt * cl.s_dot * kappa_r
    a = np.hypot(a_t, a_n)

    slow = v < _V_EPS
    kappa = np.where(slow, 0.0,
                     (vt * a_n - cl.d_dot * a_t) / np.maximum(v, _V_EPS) ** 3)
    psi_dot = kappa * v
    if kappa.shape[-1] >= 2:
        kappa_dot = np.gradient(kappa, dt, axis=-1)
    else:
        kappa_dot = np.zeros_like(kappa)
    return CartesianStates(x, y, psi, v, a, kappa, kappa_dot, psi_dot)


def finite_difference_check(cart: CartesianStates, dt, rel_tol=0.05, abs_tol=1e-3):
    """Cross-validate curvature and yaw rate against finite differences.

    Recomputes kappa from the (x, y) sequence and psi_dot from the heading
    sequence; returns (ok, max_kappa_err, max_psi_dot_err) judged at interior
    samples against max(abs_tol, rel_tol * |reference|).
    """
    if len(cart) < 5:
        return True, 0.0, 0.0
    xd = np.gradient(cart.x, dt, axis=-1)
    yd = np.gradient(cart.y, dt, axis=-1)
    xdd = np.gradient(xd, dt, axis=-1)
    ydd = np.gradient(yd, dt, axis=-1)
    speed_sq = xd ** 2 + yd ** 2
    kappa_fd = (xd * ydd - yd * xdd) / np.maximum(speed_sq, _V_EPS) ** 1.5
    psi_dot_fd = np.gradient(np.unwrap(cart.psi, axis=-1), dt, axis=-1)

    interior = slice(2, -2)
    k_err = np.abs(cart.kappa[..., interior] - kappa_fd[..., interior])
    k_tol = np.maximum(abs_tol, rel_tol * np.abs(kappa_fd[..., interior]))
    p_err = np.abs(cart.psi_dot[..., interior] - psi_dot_fd[..., interior])
    p_tol = np.maximum(abs_tol, rel_tol * np.abs(psi_dot_fd[..., interior]))
    ok = bool(np.all(k_err <= k_tol) and np.all(p_err <= p_tol))
    return ok, float(np.max(k_err)), float(np.max(p_err))


@dataclass
class TrajectoryBatch:
    """Shared-horizon candidate set as stacked arrays (K rows, T samples)."""

    goal_d: np.ndarray
    goal_s_dot: np.ndarray
    tau: float
    dt: float
    lat_coeffs: np.ndarray
    lon_coeffs: np.ndarray
    cl: CurvilinearStates
    cart: CartesianStates
    domain_ok: np.ndarray
    jerk_lat: np.ndarray
    jerk_lon: np.ndarray

    def __len__(self):
        return self.lat_coeffs.shape[0]


def generate_batch(x0: CurvilinearState, goal_d, goal_s_dot, tau, dt,
                   path: ReferencePath) -> TrajectoryBatch:
    """Generate time-sampled candidates for all goals in one shot."""
    goal_d = np.atleast_1d(np.asarray(goal_d, dtype=float))
    goal_s_dot = np.atleast_1d(np.asarray(goal_s_dot, dtype=float))
    lat = _quintic_batch(x0.d, x0.d_dot, x0.d_ddot, goal_d, 0.0, 0.0, tau)
    lon = _quartic_batch(x0.s, x0.s_dot, x0.s_ddot, goal_s_dot, 0.0, tau)

    t = np.arange(sample_count(tau, dt)) * dt
    lat_v = _poly_derivative(lat)
    lat_a = _poly_derivative(lat_v)
    lon_v = _poly_derivative(lon)
    lon_a = _poly_derivative(lon_v)
    cl = CurvilinearStates(
        s=_poly_batch_eval(lon, t), d=_poly_batch_eval(lat, t),
        s_dot=_poly_batch_eval(lon_v, t), d_dot=_poly_batch_eval(lat_v, t),
        s_ddot=_poly_batch_eval(lon_a, t), d_ddot=_poly_batch_eval(lat_a, t))

    kappa_r = path.interpolate(cl.s)[3]
    domain_ok = np.all(path.domain.contains(cl.s, cl.d, kappa_r), axis=-1)
    cart = cartesian_kinematics(path, cl, dt)
    return TrajectoryBatch(
        goal_d=goal_d, goal_s_dot=goal_s_dot, tau=tau, dt=dt,
        lat_coeffs=lat, lon_coeffs=lon, cl=cl, cart=cart, domain_ok=domain_ok,
        jerk_lat=squared_jerk_integral_quintic(lat, tau),
        jerk_lon=squared_jerk_integral_quartic(lon, tau))


@dataclass
class TrajectoryCandidate:
    """One analytic candidate with its sampled states and evaluation results."""

    goal: "GoalSpec"
    lat: QuinticCoeffs
    lon: QuarticCoeffs
    dt: float
    curvilinear_states: CurvilinearStates
    cartesian_states: CartesianStates
    jerk_lat_sq_integral: float
    jerk_lon_sq_integral: float
    status: Status = Status.UNCHECKED
    cost_breakdown: Optional[dict] = None
    total_cost: float = math.inf
    index: int = field(default=0, compare=False)

    def mark(self, status: Status):
        """Status moves forward only: UNCHECKED -> terminal classification."""
        if self.status not in (Status.UNCHECKED, status):
            raise ValueError(f"cannot move status {self.status.name} -> {status.name}")
        self.status = status

    def __len__(self):
        return len(self.curvilinear_states)


def materialize(batch: TrajectoryBatch, i, goal) -> TrajectoryCandidate:
    """Build a candidate object from row i of a batch."""
    cl = CurvilinearStates(batch.cl.s[i], batch.cl.d[i], batch.cl.s_dot[i],
                           batch.cl.d_dot[i], batch.cl.s_ddot[i], batch.cl.d_ddot[i])
    cart = CartesianStates(batch.cart.x[i], batch.cart.y[i], batch.cart.psi[i],
                           batch.cart.v[i], batch.cart.a[i], batch.cart.kappa[i],
                           batch.cart.kappa_dot[i], batch.cart.psi_dot[i])
    cand = TrajectoryCandidate(
        goal=goal, lat=QuinticCoeffs(batch.lat_coeffs[i]),
        lon=QuarticCoeffs(batch.lon_coeffs[i]), dt=batch.dt,
        curvilinear_states=cl, cartesian_states=cart,
        jerk_lat_sq_integral=float(batch.jerk_lat[i]),
        jerk_lon_sq_integral=float(batch.jerk_lon[i]), index=i)
    if not batch.domain_ok[i]:
        cand.mark(Status.INVALID)
    return cand


def generate_candidate(x0: CurvilinearState, g, path: ReferencePath,
                       dt=DEFAULT_DT) -> TrajectoryCandidate:
    """Plan one candidate toward goal g; out-of-domain samples mark it INVALID."""
    batch = generate_batch(x0, [g.d], [g.s_dot], g.tau, dt, path)
    return materialize(batch, 0, g)


def generate_candidates(x0: CurvilinearState, goals, path: ReferencePath,
                        dt=DEFAULT_DT) -> list:
    """Batch API used by the planner: one candidate per goal, shared horizon."""
    if not goals:
        return []
    tau = goals[0].tau
    batch = generate_batch(x0, [g.d for g in goals], [g.s_dot for g in goals],
                           tau, dt, path)
    return [materialize(batch, i, g) for i, g in enumerate(goals)]


def kinematics_of(candidate: TrajectoryCandidate, path: ReferencePath,
                  validate=False) -> CartesianStates:
    """Recompute Cartesian kinematics from the candidate's curvilinear states.

    Any sample outside the projection domain marks the candidate INVALID. With
    validate=True the finite-difference cross-check is enforced.
    """
    cl = candidate.curvilinear_states
    kappa_r = path.interpolate(cl.s)[3]
    if not np.all(path.domain.contains(cl.s, cl.d, kappa_r)):
        if candidate.status == Status.UNCHECKED:
            candidate.mark(Status.INVALID)
    cart = cartesian_kinematics(path, cl, candidate.dt)
    if validate:
        ok, k_err, p_err = finite_difference_check(cart, candidate.dt)
        if not ok:
            raise ValueError(
                f"kinematics cross-check failed: kappa err {k_err:.2e}, "
                f"psi_dot err {p_err:.2e}")
    candidate.cartesian_states = cart
    return cart
