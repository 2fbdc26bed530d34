"""Sublevel sets of the threat as halfspace intersections, membership tests,
and projections.

The epsilon-sublevel set at a query is the intersection of one halfspace
{z : <z, u_i> <= eps * g_i} per unsafe direction. Since every offset is
strictly positive, 0 is interior and the set is a nonempty convex body.

Projection comes in three strengths:
  lazy_project        rescale delta by eps / threat(delta); exact on the
                      boundary ray thanks to linear growth, O(m d)
  greedy_project      near-exact Euclidean projection by farthest-move dual
                      coordinate ascent (each step projects onto, or retracts
                      from, the single halfspace with the largest correction)
  project_intersection_linf
                      alternating projections between an l-inf ball and the
                      sublevel set; returns a feasible point of the
                      intersection, not the nearest one
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyDirectionSet,
    NonPositiveEpsilon,
    NonUnitDirection,
)
from .index import UnsafeDirectionSet
from .threat import pd_threat


@dataclass(frozen=True)
class SublevelSet:
    """Halfspace representation: <z, units[i]> <= offsets[i], offsets > 0."""

    units: np.ndarray    # (m, d) unit normals, in direction order
    offsets: np.ndarray  # (m,) eps * g, strictly positive
    epsilon: float
    x: np.ndarray        # origin context: query input
    y: int               # origin context: query label

    def __len__(self):
        return self.units.shape[0]

    @property
    def d(self):
        return self.units.shape[1]


@dataclass(frozen=True)
class ProjectionResult:
    point: np.ndarray
    iterations: int
    converged: bool
    max_violation: float  # residual max(<z,u> - b, 0) at exit


def build_sublevel(dirs: UnsafeDirectionSet, epsilon) -> SublevelSet:
    """Halfspaces in direction order with offsets eps * g."""
    if epsilon <= 0.0:
        raise NonPositiveEpsilon(f"epsilon must be > 0, got {epsilon}")
    if len(dirs) == 0:
        raise EmptyDirectionSet("cannot build a sublevel set from no directions")
    return SublevelSet(
        units=dirs.units,
        offsets=float(epsilon) * dirs.g,
        epsilon=float(epsilon),
        x=dirs.x,
        y=dirs.y,
    )


def contains(sset: SublevelSet, delta, tol=1e-9) -> bool:
    """True iff <delta, u> <= b * (1 + tol) for every halfspace."""
    delta = np.asarray(delta, dtype=np.float64).reshape(-1)
    if delta.shape[0] != sset.d:
        raise DimensionMismatch(
            f"delta has dimension {delta.shape[0]}, set expects {sset.d}"
        )
    return bool(np.all(sset.units @ delta <= sset.offsets * (1.0 + tol)))


def lazy_project(dirs: UnsafeDirectionSet, delta, epsilon) -> np.ndarray:
    """Scale delta back onto the epsilon level set when its threat exceeds
    epsilon; otherwise return it unchanged. Output threat is
    min(threat(delta), epsilon) by linear growth."""
    if epsilon <= 0.0:
        raise NonPositiveEpsilon(f"epsilon must be > 0, got {epsilon}")
    delta = np.asarray(delta, dtype=np.float64).reshape(-1)
    t, _ = pd_threat(dirs, delta)
    if t <= epsilon:
        return delta.copy()
    return delta * (float(epsilon) / t)


def halfspace_project(u, b, delta) -> np.ndarray:
    """Exact Euclidean projection onto {z : <z, u> <= b} for unit u."""
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    if abs(np.linalg.norm(u) - 1.0) > 1e-6:
        raise NonUnitDirection(f"|u| = {np.linalg.norm(u)}, expected 1")
    delta = np.asarray(delta, dtype=np.float64).reshape(-1)
    if delta.shape[0] != u.shape[0]:
        raise DimensionMismatch("u and delta dimensions differ")
    excess = float(u @ delta) - float(b)
    if excess <= 0.0:
        return delta.copy()
    return delta - excess * u


def greedy_project(sset: SublevelSet, delta, max_iters=1000, tol=None) -> ProjectionResult:
    """Euclidean projection onto the halfspace intersection.

    Each iteration applies the single-halfspace correction with the largest
    magnitude. A per-halfspace multiplier records accumulated corrections so
    an earlier over-projection can be undone, which is what makes the limit
    the exact nearest point rather than just a feasible one; with a single
    halfspace the first step reproduces halfspace_project and the method
    stops. Iterations stop when the largest correction falls below tol.

    Non-convergence is reported through the converged flag, never raised.
    """
    if max_iters < 1:
        raise ValueError(f"max_iters must be >= 1, got {max_iters}")
    z = np.asarray(delta, dtype=np.float64).reshape(-1).copy()
    if z.shape[0] != sset.d:
        raise DimensionMismatch(f"delta has dimension {z.shape[0]}, set expects {sset.d}")
    if tol is None:
        tol = 1e-7 * max(1.0, float(np.linalg.norm(z)))
    U, b = sset.units, sset.offsets
    lam = np.zeros(len(sset))
    converged = False
    iterations = 0
    for it in range(1, max_iters + 1):
        iterations = it
        viol = U @ z - b
        moves = np.maximum(viol, -lam)  # dual coordinate updates, sign included
        j = int(np.argmax(np.abs(moves)))
        step = float(moves[j])
        if abs(step) <= tol:
            converged = True
            break
        lam[j] += step
        z -= step * U[j]
    residual = float(np.max(np.maximum(U @ z - b, 0.0)))
    return ProjectionResult(point=z, iterations=iterations, converged=converged,
                            max_violation=residual)


def project_intersection_linf(sset: SublevelSet, delta, linf_radius,
                              max_iters=200, tol=None) -> ProjectionResult:
    """Alternate between the l-inf ball (coordinate clamp) and the sublevel
    set (greedy_project) until the iterate lies in both within tol.

    Both sets are convex and contain 0, so the intersection is nonempty and
    alternating projections converge to a feasible point. The composite is a
    feasible-point finder, not an exact nearest-point map.
    """
    if linf_radius <= 0.0:
        raise NonPositiveEpsilon(f"linf_radius must be > 0, got {linf_radius}")
    z = np.asarray(delta, dtype=np.float64).reshape(-1).copy()
    if z.shape[0] != sset.d:
        raise DimensionMismatch(f"delta has dimension {z.shape[0]}, set expects {sset.d}")
    if tol is None:
        tol = 1e-7 * max(1.0, float(np.linalg.norm(z)))
    r = float(linf_radius)
    converged = False
    iterations = 0
    residual = np.inf
    for it in range(1, max_iters + 1):
        iterations = it
        z = np.clip(z, -r, r)
        inner = greedy_project(sset, z, max_iters=1000, tol=tol * 0.1)
        z = inner.point
        box_excess = float(np.max(np.abs(z))) - r
        residual = max(inner.max_violation, box_excess, 0.0)
        if box_excess <= tol and inner.max_violation <= tol:
            converged = True
            break
    return ProjectionResult(point=z, iterations=iterations, converged=converged,
                            max_violation=float(residual))
