"""Greedy k-center selection over cosine similarity.

The selection objective for a candidate subset A of a point set S is

    f(A) = min over x in S of  max over a in A of  <x, a> / (|x| |a|),

a discrete k-center problem. The greedy heuristic seeds the subset with one
uniformly sampled element and then repeatedly adds the point with the lowest
maximum similarity to the current selection (the farthest-first traversal in
angular distance, which carries the classical 2-approximation guarantee).
Cost is O(k |S| d) with the running-maximum update below.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, ZeroVector


@dataclass(frozen=True)
class KCenterResult:
    """Greedy selection in insertion order.

    Any prefix of selected_ids is exactly the result of a smaller-k run with
    the same seed, which downstream calibration relies on.
    """

    selected_ids: np.ndarray  # (min(k, n),) int64, greedy insertion order
    objective: float          # achieved f(A)
    seed: int


def _unit_rows(points):
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise EmptyInput("need a nonempty 2-D point array")
    norms = np.linalg.norm(pts, axis=1)
    if np.any(norms == 0.0):
        raise ZeroVector(f"point {int(np.argmin(norms))} has zero norm")
    return pts / norms[:, None]


def greedy_kcenter(points, k, seed) -> KCenterResult:
    """Select min(k, |points|) rows by farthest-first traversal.

    The initial element is drawn uniformly from `seed`; every later argmin
    breaks ties toward the lowest row index, so identical inputs give
    identical selections. Scaling any point by a positive factor does not
    change the outcome (cosine objective).
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    unit = _unit_rows(points)
    n = unit.shape[0]
    rng = np.random.default_rng(seed)
    first = int(rng.integers(n))

    selected = [first]
    # max cosine similarity of every point to the selection so far
    maxsim = unit @ unit[first]
    while len(selected) < min(k, n):
        cand = maxsim.copy()
        cand[selected] = np.inf  # never reselect an index
        nxt = int(np.argmin(cand))
        selected.append(nxt)
        np.maximum(maxsim, unit @ unit[nxt], out=maxsim)
    return KCenterResult(
        selected_ids=np.asarray(selected, dtype=np.int64),
        objective=float(maxsim.min()),
        seed=int(seed),
    )


def objective_f(points, subset_ids) -> float:
    """f(A) evaluated directly: min over points of max similarity to A."""
    unit = _unit_rows(points)
    subset = np.asarray(subset_ids, dtype=np.int64)
    if subset.size == 0:
        raise EmptyInput("subset must be nonempty")
    sims = unit @ unit[subset].T
    return float(sims.max(axis=1).min())
