"""Exact threat machinery on synthetic 2D tasks with known labeling rules.

A task is a union of axis-aligned rectangles plus a piecewise-linear decision
rule given as oriented boundary segments: a point takes the left or right
label of whichever segment is nearest (left = positive cross product with the
segment direction). For a single full-width segment this is exactly the
"above/below the line" rule; chained segments give polyline boundaries.

Directions at a query are sampled uniformly on the circle. A direction is
unsafe when marching from the query at grid-step granularity reaches an
in-domain point of a different label before leaving the domain; the
normalization g* is the distance to that first label change, refined by
bisection between the bracketing steps (the labeling rule itself is exact,
so the remaining error is the chance of missing a sliver thinner than one
step, plus the angular sampling). Domain exit terminates a ray: points
outside the domain carry no label.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InvariantViolation, IoError, PointOutsideDomain

BISECT_ITERS = 30


# ---------------------------------------------------------------------------
# task definition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticTask2D:
    """Bounded 2D domain with a piecewise-linear labeling rule."""

    rects: np.ndarray        # (R, 4) [xmin, ymin, xmax, ymax]
    seg_p0: np.ndarray       # (S, 2)
    seg_p1: np.ndarray       # (S, 2)
    seg_left: np.ndarray     # (S,) label on the left of p0 -> p1
    seg_right: np.ndarray    # (S,) label on the right
    num_classes: int

    def __post_init__(self):
        rects = np.asarray(self.rects, dtype=np.float64).reshape(-1, 4)
        if rects.shape[0] == 0:
            raise InvariantViolation("task needs at least one domain rectangle")
        if np.any(rects[:, 0] >= rects[:, 2]) or np.any(rects[:, 1] >= rects[:, 3]):
            raise InvariantViolation("degenerate rectangle in task domain")
        p0 = np.asarray(self.seg_p0, dtype=np.float64).reshape(-1, 2)
        p1 = np.asarray(self.seg_p1, dtype=np.float64).reshape(-1, 2)
        if p0.shape[0] == 0:
            raise InvariantViolation("task needs at least one boundary segment")
        if np.any(np.linalg.norm(p1 - p0, axis=1) == 0.0):
            raise InvariantViolation("zero-length boundary segment")
        left = np.asarray(self.seg_left, dtype=np.int64)
        right = np.asarray(self.seg_right, dtype=np.int64)
        labs = np.concatenate([left, right])
        if labs.min() < 0 or labs.max() >= self.num_classes:
            raise InvariantViolation("segment labels outside {0..C-1}")
        for name, val in (("rects", rects), ("seg_p0", p0), ("seg_p1", p1),
                          ("seg_left", left), ("seg_right", right)):
            val = val.copy()
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    def contains(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        r = self.rects
        ok = (
            (pts[:, None, 0] >= r[None, :, 0])
            & (pts[:, None, 0] <= r[None, :, 2])
            & (pts[:, None, 1] >= r[None, :, 1])
            & (pts[:, None, 1] <= r[None, :, 3])
        )
        return ok.any(axis=1)

    def labels(self, pts):
        """Label of each point: side of the nearest boundary segment."""
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        p0, p1 = self.seg_p0, self.seg_p1
        seg = p1 - p0                                  # (S, 2)
        seg_len2 = np.sum(seg * seg, axis=1)           # (S,)
        diff = pts[:, None, :] - p0[None, :, :]        # (m, S, 2)
        t = np.clip(np.einsum("msk,sk->ms", diff, seg) / seg_len2, 0.0, 1.0)
        closest = p0[None, :, :] + t[:, :, None] * seg[None, :, :]
        dist2 = np.sum((pts[:, None, :] - closest) ** 2, axis=2)
        j = np.argmin(dist2, axis=1)                   # nearest segment per point
        cross = seg[j, 0] * (pts[:, 1] - p0[j, 1]) - seg[j, 1] * (pts[:, 0] - p0[j, 0])
        return np.where(cross > 0.0, self.seg_left[j], self.seg_right[j]).astype(np.int64)

    def label_one(self, p):
        return int(self.labels(np.asarray(p, dtype=np.float64)[None, :])[0])

    @property
    def bbox(self):
        r = self.rects
        return (
            float(r[:, 0].min()), float(r[:, 1].min()),
            float(r[:, 2].max()), float(r[:, 3].max()),
        )


def default_binary_task() -> SyntheticTask2D:
    """Unit-square domain split by a gentle two-segment polyline; label 1
    above the boundary, 0 below."""
    return SyntheticTask2D(
        rects=np.array([[0.0, 0.0, 1.0, 1.0]]),
        seg_p0=np.array([[0.0, 0.55], [0.45, 0.40]]),
        seg_p1=np.array([[0.45, 0.40], [1.0, 0.60]]),
        seg_left=np.array([1, 1]),
        seg_right=np.array([0, 0]),
        num_classes=2,
    )


def save_task(task: SyntheticTask2D, path):
    doc = {
        "rects": task.rects.tolist(),
        "segments": [
            {
                "p0": task.seg_p0[i].tolist(),
                "p1": task.seg_p1[i].tolist(),
                "left": int(task.seg_left[i]),
                "right": int(task.seg_right[i]),
            }
            for i in range(task.seg_p0.shape[0])
        ],
        "num_classes": int(task.num_classes),
    }
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_task(path) -> SyntheticTask2D:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvariantViolation(f"unparseable task file: {exc}") from exc
    segs = doc["segments"]
    return SyntheticTask2D(
        rects=np.asarray(doc["rects"], dtype=np.float64),
        seg_p0=np.asarray([s["p0"] for s in segs], dtype=np.float64),
        seg_p1=np.asarray([s["p1"] for s in segs], dtype=np.float64),
        seg_left=np.asarray([s["left"] for s in segs], dtype=np.int64),
        seg_right=np.asarray([s["right"] for s in segs], dtype=np.int64),
        num_classes=int(doc["num_classes"]),
    )


# ---------------------------------------------------------------------------
# grid oracle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridOracle:
    """Discretization parameters plus a node label cache for one task.

    resolution is cells per axis (>= 16); marching steps along rays use the
    smaller cell edge. angular is the number of sampled directions (>= 64).
    """

    task: SyntheticTask2D
    resolution: int
    angular: int
    node_labels: np.ndarray = field(init=False)   # (res+1, res+1), -1 off-domain
    node_xy: tuple = field(init=False)

    def __post_init__(self):
        if self.resolution < 16:
            raise InvariantViolation(f"resolution must be >= 16, got {self.resolution}")
        if self.angular < 64:
            raise InvariantViolation(f"angular samples must be >= 64, got {self.angular}")
        x0, y0, x1, y1 = self.task.bbox
        xs = np.linspace(x0, x1, self.resolution + 1)
        ys = np.linspace(y0, y1, self.resolution + 1)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        labels = np.full(pts.shape[0], -1, dtype=np.int64)
        inside = self.task.contains(pts)
        labels[inside] = self.task.labels(pts[inside])
        present = np.unique(labels[labels >= 0])
        if present.size < self.task.num_classes:
            raise InvariantViolation(
                f"only classes {present.tolist()} appear on the grid; "
                "every labeled region must be nonempty"
            )
        grid = labels.reshape(self.resolution + 1, self.resolution + 1)
        grid.setflags(write=False)
        object.__setattr__(self, "node_labels", grid)
        object.__setattr__(self, "node_xy", (xs, ys))

    @property
    def step(self):
        x0, y0, x1, y1 = self.task.bbox
        return min((x1 - x0), (y1 - y0)) / self.resolution

    @property
    def directions(self):
        theta = 2.0 * np.pi * np.arange(self.angular) / self.angular
        return np.column_stack([np.cos(theta), np.sin(theta)])

    @property
    def tau_grid(self):
        """Reported discretization tolerance: one step term plus one angular
        term, both relative."""
        x0, y0, x1, y1 = self.task.bbox
        diag = float(np.hypot(x1 - x0, y1 - y0))
        return 4.0 * self.step / diag + 2.0 * np.pi / self.angular


@dataclass(frozen=True)
class ExactDirections:
    """Sampled unsafe directions and boundary distances at one query."""

    x: np.ndarray
    label: int
    units: np.ndarray        # (m, 2) unsafe subset of the sampled circle
    g_star: np.ndarray       # (m,) bisected distance to the first label change
    bracket_width: float     # residual bisection bracket
    sampled: int             # total directions sampled

    def __len__(self):
        return self.units.shape[0]


def exact_unsafe_directions(task: SyntheticTask2D, oracle: GridOracle, x) -> ExactDirections:
    """Classify every sampled direction at x and estimate g* for the unsafe
    ones.

    March x + t u at step granularity until the first out-of-domain point;
    a direction is unsafe iff some visited in-domain point has a different
    label. g* is refined by bisection (exact labels) between the last
    same-label step and the first differing one.
    """
    x = np.asarray(x, dtype=np.float64).reshape(2)
    if not bool(task.contains(x[None, :])[0]):
        raise PointOutsideDomain(f"{x.tolist()} is outside the task domain")
    y0 = task.label_one(x)
    dirs = oracle.directions
    step = oracle.step
    x0, b0, x1, b1 = task.bbox
    diag = float(np.hypot(x1 - x0, b1 - b0))
    n_steps = int(np.ceil(diag / step)) + 1
    ts = step * np.arange(1, n_steps + 1)

    pts = x[None, None, :] + ts[None, :, None] * dirs[:, None, :]
    flat = pts.reshape(-1, 2)
    inside = task.contains(flat)
    lab = np.full(flat.shape[0], -1, dtype=np.int64)
    if inside.any():
        lab[inside] = task.labels(flat[inside])
    inside = inside.reshape(dirs.shape[0], n_steps)
    lab = lab.reshape(dirs.shape[0], n_steps)

    outside = ~inside
    exit_idx = np.where(outside.any(axis=1), outside.argmax(axis=1), n_steps)
    changed = inside & (lab != y0)
    chg_idx = np.where(changed.any(axis=1), changed.argmax(axis=1), n_steps)
    unsafe = chg_idx < exit_idx

    rows = np.nonzero(unsafe)[0]
    if rows.size == 0:
        return ExactDirections(x=x, label=y0, units=np.zeros((0, 2)),
                               g_star=np.zeros(0), bracket_width=0.0,
                               sampled=int(dirs.shape[0]))

    hi = ts[chg_idx[rows]]
    lo = hi - step  # t=0 (the query itself) backs the first step's bracket
    u = dirs[rows]
    for _ in range(BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        p = x[None, :] + mid[:, None] * u
        same = task.contains(p) & (task.labels(p) == y0)
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
    g = 0.5 * (lo + hi)
    return ExactDirections(x=x, label=y0, units=u, g_star=g,
                           bracket_width=float(step / 2 ** BISECT_ITERS),
                           sampled=int(dirs.shape[0]))


def threat_from_directions(dirs: ExactDirections, delta) -> float:
    """Max over unsafe directions of the clamped scaled displacement."""
    delta = np.asarray(delta, dtype=np.float64).reshape(2)
    if len(dirs) == 0:
        return 0.0  # the query's class region absorbs every sampled ray
    scores = np.maximum(dirs.units @ delta, 0.0) / dirs.g_star
    return float(scores.max())


def exact_pd_threat(task: SyntheticTask2D, oracle: GridOracle, x, delta) -> float:
    return threat_from_directions(exact_unsafe_directions(task, oracle, x), delta)


# ---------------------------------------------------------------------------
# executable 1-robustness check
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RobustnessReport:
    pairs: list              # (x, xt, threat) triples
    min_threat: float
    violations: int          # pairs with threat <= 1 - tau_grid
    tau_grid: float
    skipped_degenerate: int


def sample_domain_points(task: SyntheticTask2D, rng, count):
    x0, y0, x1, y1 = task.bbox
    out = np.empty((0, 2))
    while out.shape[0] < count:
        cand = rng.random((2 * count + 16, 2))
        cand[:, 0] = x0 + cand[:, 0] * (x1 - x0)
        cand[:, 1] = y0 + cand[:, 1] * (y1 - y0)
        cand = cand[task.contains(cand)]
        out = np.vstack([out, cand])
    return out[:count]


def one_robustness_check(task: SyntheticTask2D, oracle: GridOracle, num_pairs, seed) -> RobustnessReport:
    """Sample cross-label pairs (x, xt) and evaluate the exact threat of
    xt - x at x. Violations (threat <= 1 - tau_grid) are reported, not
    raised; same-label draws are discarded and coincident pairs skipped.
    """
    if task.num_classes < 2:
        raise InvariantViolation("1-robustness check needs at least two classes")
    rng = np.random.default_rng(seed)
    tau = oracle.tau_grid
    pairs = []
    skipped = 0
    min_threat = np.inf
    violations = 0
    while len(pairs) < num_pairs:
        batch = sample_domain_points(task, rng, 4 * (num_pairs - len(pairs)) + 8)
        labs = task.labels(batch)
        half = batch.shape[0] // 2
        for a, b in zip(range(half), range(half, 2 * half)):
            if len(pairs) >= num_pairs:
                break
            if labs[a] == labs[b]:
                continue
            delta = batch[b] - batch[a]
            if np.linalg.norm(delta) <= 1e-12:
                skipped += 1
                continue
            t = exact_pd_threat(task, oracle, batch[a], delta)
            pairs.append((batch[a].copy(), batch[b].copy(), t))
            min_threat = min(min_threat, t)
            if t <= 1.0 - tau:
                violations += 1
    return RobustnessReport(
        pairs=pairs,
        min_threat=float(min_threat),
        violations=violations,
        tau_grid=float(tau),
        skipped_degenerate=skipped,
    )


# ---------------------------------------------------------------------------
# sublevel field maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FieldResult:
    x: np.ndarray
    epsilon: float
    points: np.ndarray       # (m, 2) in-domain grid points p
    threat: np.ndarray       # (m,) exact threat of p - x at x


def sublevel_field(task: SyntheticTask2D, oracle: GridOracle, x, epsilon, grid) -> FieldResult:
    """Exact threat of p - x for p on a (grid+1)^2 lattice over the domain.

    Emitted for plotting level sets; rows are restricted to in-domain p.
    """
    x = np.asarray(x, dtype=np.float64).reshape(2)
    dirs = exact_unsafe_directions(task, oracle, x)
    x0, y0, x1, y1 = task.bbox
    xs = np.linspace(x0, x1, int(grid) + 1)
    ys = np.linspace(y0, y1, int(grid) + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    pts = pts[task.contains(pts)]
    if len(dirs) == 0:
        threat = np.zeros(pts.shape[0])
    else:
        proj = np.maximum((pts - x) @ dirs.units.T, 0.0)
        threat = (proj / dirs.g_star).max(axis=1)
    return FieldResult(x=x, epsilon=float(epsilon), points=pts, threat=threat)
