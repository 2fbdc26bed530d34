"""Representative-index construction, observed unsafe directions, and
calibration of the per-class subset size k.

For a query input x with label y, every indexed point xt of a class c != y
defines an unsafe direction u = (xt - x)/|xt - x| with approximate
normalization g = beta * |xt - x|. Threat evaluation consumes these as
parallel arrays. Candidates closer to x than TAU_DUP are skipped (their
direction is undefined) and counted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    AllDirectionsDegenerate,
    DimensionMismatch,
    EmptyClass,
    InvalidBeta,
    LabelOutOfRange,
)
from .formats import LabeledDataset, RepresentativeIndex, dataset_hash
from .kcenter import greedy_kcenter

# duplicate threshold (L2): a candidate this close to the query is skipped
TAU_DUP = 1e-9

# calibration samples at most this many cross-label pairs
MAX_CALIBRATION_PAIRS = 10_000


@dataclass(frozen=True)
class UnsafeDirectionSet:
    """Observed unsafe directions at one query point, as parallel arrays.

    Rows are sorted by (source_class, source_id) so a plain argmax over
    scores realizes the documented attribution tie-break. All rows have unit
    norm and strictly positive normalization.
    """

    x: np.ndarray             # (d,) query input
    y: int                    # query label
    units: np.ndarray         # (m, d) unit directions
    g: np.ndarray             # (m,) normalizations beta * |xt - x|
    source_class: np.ndarray  # (m,) class of each direction's origin
    source_ids: np.ndarray    # (m,) row ids into the source dataset
    skipped: int              # candidates dropped by the duplicate threshold

    def __len__(self):
        return self.units.shape[0]

    @property
    def d(self):
        return self.units.shape[1]


def _class_blocks(train: LabeledDataset, k, seed):
    """Greedy per-class selections; empty classes yield empty blocks."""
    vectors, ids = [], []
    data = train.data.astype(np.float64)
    for c in range(train.num_classes):
        rows = train.class_indices(c)
        if rows.size == 0:
            vectors.append(np.zeros((0, train.d), dtype=np.float32))
            ids.append(np.zeros(0, dtype=np.uint64))
            continue
        res = greedy_kcenter(data[rows], k, seed ^ c)
        chosen = rows[res.selected_ids]
        vectors.append(train.data[chosen])
        ids.append(chosen.astype(np.uint64))
    return vectors, ids


def build_index(train: LabeledDataset, k, beta, seed) -> RepresentativeIndex:
    """Select min(k, |S_c|) representatives per class via greedy k-center.

    Per-class seeds are derived as seed ^ c so selections are independent of
    each other but reproducible. Requires every class nonempty.
    """
    if not 0.0 < float(beta) < 1.0:
        raise InvalidBeta(f"beta must lie strictly inside (0, 1), got {beta}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    for c in range(train.num_classes):
        if train.class_indices(c).size == 0:
            raise EmptyClass(f"class {c} has no training points")
    vectors, ids = _class_blocks(train, k, seed)
    return RepresentativeIndex(
        class_vectors=tuple(vectors),
        class_ids=tuple(ids),
        k=int(k),
        beta=float(beta),
        seed=int(seed),
        d=train.d,
        source_dataset_hash=dataset_hash(train),
    )


def unsafe_directions(index: RepresentativeIndex, x, y, prefix=None) -> UnsafeDirectionSet:
    """Materialize the observed unsafe directions at (x, y).

    `prefix` restricts every class block to its first `prefix` entries
    (greedy insertion order), which evaluates the index a smaller k would
    have produced.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != index.d:
        raise DimensionMismatch(f"query has dimension {x.shape[0]}, index expects {index.d}")
    y = int(y)
    if not 0 <= y < index.num_classes:
        raise LabelOutOfRange(f"label {y} outside [0, {index.num_classes})")

    units, gs, classes, ids = [], [], [], []
    skipped = 0
    for c in range(index.num_classes):
        if c == y:
            continue
        block = index.class_vectors[c]
        if prefix is not None:
            block = block[:prefix]
        if block.shape[0] == 0:
            continue
        block_ids = index.class_ids[c][: block.shape[0]]
        diffs = block.astype(np.float64) - x
        norms = np.linalg.norm(diffs, axis=1)
        keep = norms > TAU_DUP
        skipped += int(np.count_nonzero(~keep))
        if not keep.any():
            continue
        units.append(diffs[keep] / norms[keep, None])
        gs.append(index.beta * norms[keep])
        classes.append(np.full(int(keep.sum()), c, dtype=np.int64))
        ids.append(block_ids[keep].astype(np.uint64))

    if not units:
        raise AllDirectionsDegenerate(
            f"no usable unsafe directions at this query ({skipped} skipped)"
        )
    units = np.concatenate(units)
    gs = np.concatenate(gs)
    classes = np.concatenate(classes)
    ids = np.concatenate(ids)
    order = np.lexsort((ids, classes))
    return UnsafeDirectionSet(
        x=x,
        y=y,
        units=units[order],
        g=gs[order],
        source_class=classes[order],
        source_ids=ids[order],
        skipped=skipped,
    )


@dataclass(frozen=True)
class CalibrationResult:
    """Outcome of the k calibration sweep.

    k_min is the smallest k whose minimum cross-pair threat exceeds 1, or
    None when no k <= k_max qualifies (a distinguished result, not an
    error). curve[k-1] is the minimum over sampled cross-label training
    pairs of the observed threat with per-class prefix k.
    """

    k_min: int | None
    curve: np.ndarray         # (k_max,) min cross-pair threat per k
    pairs_sampled: int
    sampled: bool             # True when the full pair set was subsampled
    beta: float
    seed: int
    k_max: int

    def rows(self):
        return [(k + 1, float(v), self.pairs_sampled) for k, v in enumerate(self.curve)]


def _cross_pairs(labels, rng, max_pairs):
    """Ordered cross-label pairs (i, j); uniform sample when too many."""
    n = labels.shape[0]
    counts = np.bincount(labels)
    total = n * n - int((counts.astype(np.int64) ** 2).sum())
    if total <= max_pairs:
        i_all, j_all = np.nonzero(labels[:, None] != labels[None, :])
        return i_all, j_all, False
    out_i = np.empty(max_pairs, dtype=np.int64)
    out_j = np.empty(max_pairs, dtype=np.int64)
    filled = 0
    while filled < max_pairs:
        draw = max_pairs - filled
        ci = rng.integers(n, size=2 * draw + 16)
        cj = rng.integers(n, size=2 * draw + 16)
        ok = labels[ci] != labels[cj]
        take = min(int(ok.sum()), draw)
        out_i[filled : filled + take] = ci[ok][:take]
        out_j[filled : filled + take] = cj[ok][:take]
        filled += take
    return out_i, out_j, True


def calibrate_k(train: LabeledDataset, beta, seed, k_max,
                max_pairs=MAX_CALIBRATION_PAIRS) -> CalibrationResult:
    """Sweep nested greedy prefixes k = 1..k_max and find the smallest k for
    which every sampled cross-label training displacement scores above 1.

    The sweep evaluates, for each sampled ordered pair (x, y), (xt, c != y),
    the observed threat of xt - x at x under the prefix-k index; the curve
    records the minimum across pairs. Pairs closer than TAU_DUP are skipped.
    """
    if not 0.0 < float(beta) < 1.0:
        raise InvalidBeta(f"beta must lie strictly inside (0, 1), got {beta}")
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    labels = train.labels.astype(np.int64)
    nonempty = np.unique(labels)
    if nonempty.size < 2:
        raise EmptyClass("calibration needs at least two nonempty classes")

    vectors, _ = _class_blocks(train, k_max, seed)
    blocks = [v.astype(np.float64) for v in vectors]
    rng = np.random.default_rng(seed)
    pi, pj, sampled = _cross_pairs(labels, rng, max_pairs)

    data = train.data.astype(np.float64)
    curve = np.full(k_max, np.inf)
    beta = float(beta)
    # group pairs by the label of x so each group scans one direction stack
    for y in nonempty:
        sel = labels[pi] == y
        if not sel.any():
            continue
        xs = data[pi[sel]]                      # (P, d)
        deltas = data[pj[sel]] - xs             # (P, d)
        norms_d = np.linalg.norm(deltas, axis=1)
        live = norms_d > TAU_DUP
        if not live.any():
            continue
        xs, deltas = xs[live], deltas[live]
        stack, pos = [], []
        for c in nonempty:
            if c == y or blocks[c].shape[0] == 0:
                continue
            stack.append(blocks[c])
            pos.append(np.arange(blocks[c].shape[0]))
        if not stack:
            continue
        B = np.concatenate(stack)               # (M, d)
        pos = np.concatenate(pos)               # block-local position of each row
        # inner products <delta, b - x> and distances |b - x| without forming
        # the (P, M, d) difference tensor
        inner = deltas @ B.T - np.sum(deltas * xs, axis=1, keepdims=True)
        dist2 = (
            np.sum(B * B, axis=1)[None, :]
            - 2.0 * (xs @ B.T)
            + np.sum(xs * xs, axis=1)[:, None]
        )
        d2 = np.maximum(dist2, 0.0)
        # <delta, u> / g with u = (b - x)/|b - x| and g = beta |b - x| is
        # <delta, b - x> / (beta |b - x|^2)
        scores = np.where(
            d2 > TAU_DUP**2, np.maximum(inner, 0.0) / np.maximum(beta * d2, 1e-300), -np.inf
        )
        # per prefix position: best score across classes, then running max
        col_best = np.full((scores.shape[0], k_max), -np.inf)
        for j in range(k_max):
            cols = pos == j
            if cols.any():
                col_best[:, j] = scores[:, cols].max(axis=1)
        prefix_best = np.maximum.accumulate(col_best, axis=1)
        curve = np.minimum(curve, prefix_best.min(axis=0))

    qualifying = np.nonzero(curve > 1.0)[0]
    k_min = int(qualifying[0]) + 1 if qualifying.size else None
    return CalibrationResult(
        k_min=k_min,
        curve=curve,
        pairs_sampled=int(pi.shape[0]),
        sampled=sampled,
        beta=beta,
        seed=int(seed),
        k_max=int(k_max),
    )
