"""Arc-length-parameterized reference paths and the curvilinear <-> Cartesian mapping.

A reference path is stored as a polyline resampled at (near-)uniform arc-length
spacing. Between vertices, position is interpolated linearly in s and the
tangent angle is interpolated linearly in s; the left unit normal at s is
derived from the interpolated angle. The forward map

    phi(s, d) = path(s) + d * n(s)

is bijective on the projection domain as long as |kappa(s)| * d_max < 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DegenerateSegment, OutOfDomain, ProjectionFailed, TooFewWaypoints

DEFAULT_RESAMPLE_STEP = 0.5
DEFAULT_CURVATURE_MARGIN = 0.1
DEFAULT_DOMAIN_HALF_WIDTH = 8.0


@dataclass(frozen=True)
class CurvilinearPoint:
    """Longitudinal arc length s and signed lateral offset d (positive left)."""

    s: float
    d: float


@dataclass(frozen=True)
class ProjectionDomain:
    """Region where the curvilinear <-> Cartesian mapping is bijective."""

    s_min: float
    s_max: float
    d_max: float
    curvature_margin: float = DEFAULT_CURVATURE_MARGIN

    def contains(self, s, d, kappa):
        """Membership test; accepts scalars or arrays."""
        return (
            (np.abs(d) <= self.d_max)
            & (s >= self.s_min)
            & (s <= self.s_max)
            & (np.abs(d * kappa) <= 1.0 - self.curvature_margin)
        )


class ReferencePath:
    """Immutable resampled reference path with per-vertex frame quantities.

    Vertices are spaced uniformly in arc length (the requested resample step is
    shrunk slightly so that it divides the total length exactly). All arrays
    are read-only; instances can be shared freely across workers.
    """

    def __init__(self, vertices, arc_lengths, tangents, curvatures,
                 domain_half_width, curvature_margin=DEFAULT_CURVATURE_MARGIN):
        self.vertices = np.asarray(vertices, dtype=float)
        self.arc_lengths = np.asarray(arc_lengths, dtype=float)
        self.tangents = np.asarray(tangents, dtype=float)
        self.curvatures = np.asarray(curvatures, dtype=float)
        self.total_length = float(self.arc_lengths[-1])
        self.domain_half_width = float(domain_half_width)

        tx, ty = self.tangents[:, 0], self.tangents[:, 1]
        self.theta = np.unwrap(np.arctan2(ty, tx))
        # dkappa/ds is needed by the closed-form Cartesian kinematics
        self.curvature_rates = np.gradient(self.curvatures, self.arc_lengths,
                                           edge_order=2)
        self.step = float(self.arc_lengths[1] - self.arc_lengths[0])
        self.domain = ProjectionDomain(0.0, self.total_length,
                                       self.domain_half_width, curvature_margin)
        self._check_invariants()
        for arr in (self.vertices, self.arc_lengths, self.tangents,
                    self.curvatures, self.theta, self.curvature_rates):
            arr.setflags(write=False)

    def _check_invariants(self):
        if self.arc_lengths[0] != 0.0 or np.any(np.diff(self.arc_lengths) <= 0):
            raise ValueError("arc lengths must be strictly increasing from 0")
        norms = np.hypot(self.tangents[:, 0], self.tangents[:, 1])
        if np.max(np.abs(norms - 1.0)) > 1e-9:
            raise ValueError("tangents must have unit norm")
        if np.max(np.abs(self.curvatures)) * self.domain_half_width >= 1.0:
            raise ValueError("|kappa| * domain_half_width must stay below 1 "
                             "for the projection to be bijective")

    # -- interpolation -----------------------------------------------------

    def _locate(self, s):
        """Segment index and local weight for (clipped) arc-length values."""
        s = np.clip(s, 0.0, self.total_length)
        idx = np.clip((s / self.step).astype(int), 0, len(self.arc_lengths) - 2)
        w = (s - self.arc_lengths[idx]) / self.step
        return idx, w

    def interpolate(self, s):
        """Return (x, y, theta, kappa, kappa_rate) at arc length s (vectorized).

        Values outside [0, L] are evaluated at the clipped arc length; domain
        checks are the caller's responsibility.
        """
        idx, w = self._locate(np.asarray(s, dtype=float))
        wc = w[..., None] if np.ndim(w) else w
        pos = self.vertices[idx] + wc * (self.vertices[idx + 1] - self.vertices[idx])
        theta = self.theta[idx] + w * (self.theta[idx + 1] - self.theta[idx])
        kappa = self.curvatures[idx] + w * (self.curvatures[idx + 1] - self.curvatures[idx])
        kappa_rate = self.curvature_rates[idx] + w * (
            self.curvature_rates[idx + 1] - self.curvature_rates[idx])
        return pos[..., 0], pos[..., 1], theta, kappa, kappa_rate

    def curvature_at(self, s):
        return self.interpolate(s)[3]


def build_reference_path(waypoints, resample_step=DEFAULT_RESAMPLE_STEP,
                         domain_half_width=DEFAULT_DOMAIN_HALF_WIDTH,
                         curvature_margin=DEFAULT_CURVATURE_MARGIN) -> ReferencePath:
    """Resample a waypoint polyline at uniform arc-length spacing.

    Tangents and curvatures are computed by central differences on the
    resampled polyline; the total length agrees with the input polyline
    length to well within 1%.
    """
    pts = np.asarray(waypoints, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 4:
        raise TooFewWaypoints(f"need at least 4 waypoints, got {len(pts)}")
    seg_len = np.hypot(*np.diff(pts, axis=0).T)
    if np.any(seg_len < 1e-9):
        raise DegenerateSegment("consecutive waypoints coincide")

    s_in = np.concatenate(([0.0], np.cumsum(seg_len)))
    total = float(s_in[-1])
    n_seg = max(int(np.ceil(total / resample_step)), 4)
    s_new = np.linspace(0.0, total, n_seg + 1)
    x = np.interp(s_new, s_in, pts[:, 0])
    y = np.interp(s_new, s_in, pts[:, 1])

    dx = np.gradient(x, s_new, edge_order=2)
    dy = np.gradient(y, s_new, edge_order=2)
    norm = np.hypot(dx, dy)
    tangents = np.stack([dx / norm, dy / norm], axis=1)
    theta = np.unwrap(np.arctan2(dy, dx))
    curvature = np.gradient(theta, s_new, edge_order=2)

    return ReferencePath(np.stack([x, y], axis=1), s_new, tangents, curvature,
                         domain_half_width, curvature_margin)


def domain_contains(path: ReferencePath, p: CurvilinearPoint) -> bool:
    """True iff p passes the projection-domain membership test."""
    if not (0.0 <= p.s <= path.total_length):
        return False
    kappa = path.curvature_at(p.s)
    return bool(path.domain.contains(p.s, p.d, kappa))


def to_cartesian(path: ReferencePath, p: CurvilinearPoint):
    """Map an in-domain curvilinear point to Cartesian coordinates."""
    if not domain_contains(path, p):
        raise OutOfDomain(f"(s={p.s:.3f}, d={p.d:.3f}) outside projection domain")
    x, y, theta, _, _ = path.interpolate(p.s)
    return np.array([x - p.d * np.sin(theta), y + p.d * np.cos(theta)])


def to_cartesian_batch(path: ReferencePath, s, d):
    """Vectorized forward map without domain checks (s is clipped to [0, L])."""
    x, y, theta, _, _ = path.interpolate(s)
    return x - d * np.sin(theta), y + d * np.cos(theta)


def to_curvilinear(path: ReferencePath, point) -> CurvilinearPoint:
    """Invert the forward map: coarse nearest-vertex scan plus root refinement.

    The foot point solves (q - path(s)) . t(s) = 0; with d read off along the
    interpolated normal, phi(psi(q)) reproduces q up to the root residual.
    """
    q = np.asarray(point, dtype=float)
    d2 = np.sum((path.vertices - q) ** 2, axis=1)
    i0 = int(np.argmin(d2))

    def foot_residual(s):
        x, y, theta, _, _ = path.interpolate(s)
        return (q[0] - x) * np.cos(theta) + (q[1] - y) * np.sin(theta)

    # scan a local window of vertices for a sign change bracketing the root
    lo_i = max(i0 - 4, 0)
    hi_i = min(i0 + 4, len(path.arc_lengths) - 1)
    s_grid = path.arc_lengths[lo_i:hi_i + 1]
    residuals = np.array([foot_residual(s) for s in s_grid])

    s_star = None
    hit = np.flatnonzero(np.abs(residuals) <= 1e-10)
    if hit.size:
        s_star = float(s_grid[hit[0]])
    else:
        signs = np.sign(residuals)
        change = np.flatnonzero(signs[:-1] * signs[1:] < 0)
        if change.size:
            k = change[0]
            s_star = brentq(foot_residual, s_grid[k], s_grid[k + 1],
                            xtol=1e-12, rtol=1e-15)
    if s_star is None:
        raise ProjectionFailed(f"no foot point near ({q[0]:.2f}, {q[1]:.2f})")

    x, y, theta, _, _ = path.interpolate(s_star)
    d = -(q[0] - x) * np.sin(theta) + (q[1] - y) * np.cos(theta)
    p = CurvilinearPoint(float(s_star), float(d))
    if not domain_contains(path, p):
        raise ProjectionFailed(
            f"foot point (s={p.s:.3f}, d={p.d:.3f}) outside projection domain")
    return p
