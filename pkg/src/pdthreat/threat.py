"""Threat evaluation: projected displacement and its masked/weighted
variants, lp baselines, per-input Lipschitz constants, and batch statistics.

The core score of a perturbation delta at a query with unsafe directions
(u_i, g_i) is max_i max(<delta, u_i>, 0) / g_i. The masked variant restricts
the inner product to coordinates selected by a boolean mask (normalizations
unchanged); the weighted variant rescales each normalization by the relative
class distance W(y, c_i), floored at W_FLOOR so a zero weight cannot send the
threat to infinity.

All evaluators are pure over immutable inputs. They return the arg-max
direction's provenance so a positive threat can always be attributed to one
source point; exact ties resolve to the lowest (class, source id) pair.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyDirectionSet,
    EmptyMask,
    ShapeMismatch,
    WeightOutOfRange,
)
from .formats import LabeledDataset, MaskSet, WeightMatrix
from .index import RepresentativeIndex, UnsafeDirectionSet, unsafe_directions

# floor on relative class weights inside 1/g; keeps PD-W finite when the
# weight construction maps the nearest class to exactly 0
W_FLOOR = 1e-3

METRICS = ("pd", "pds", "pdw", "linf", "l2")


@dataclass(frozen=True)
class Attribution:
    """Provenance of the arg-max unsafe direction."""

    source_class: int
    source_id: int


@dataclass(frozen=True)
class ThreatRecord:
    """One evaluated (input, perturbation) pair, ready for report emission."""

    input_id: int
    metric: str
    threat: float
    attribution: Attribution | None = None
    weight: float | None = None   # W(y, attributed class), pdw only


def _check_delta(dirs: UnsafeDirectionSet, delta):
    if len(dirs) == 0:
        raise EmptyDirectionSet("no unsafe directions to evaluate against")
    delta = np.asarray(delta, dtype=np.float64).reshape(-1)
    if delta.shape[0] != dirs.d:
        raise DimensionMismatch(
            f"perturbation has dimension {delta.shape[0]}, directions expect {dirs.d}"
        )
    return delta


def _max_with_attribution(dirs, scores):
    i = int(np.argmax(scores))
    t = float(scores[i])
    if t <= 0.0:
        return 0.0, None
    return t, Attribution(int(dirs.source_class[i]), int(dirs.source_ids[i]))


def pd_threat(dirs: UnsafeDirectionSet, delta):
    """Projected displacement threat of delta; (threat, attribution).

    Zero with no attribution when delta has nonpositive inner product with
    every unsafe direction.
    """
    delta = _check_delta(dirs, delta)
    scores = np.maximum(dirs.units @ delta, 0.0) / dirs.g
    return _max_with_attribution(dirs, scores)


def pd_s_threat(dirs: UnsafeDirectionSet, delta, mask):
    """Segmented variant: inner products restricted to masked coordinates.

    The mask selects coordinates (1 = keep); normalizations are unchanged,
    so a full mask reproduces pd_threat exactly.
    """
    delta = _check_delta(dirs, delta)
    bits = np.asarray(getattr(mask, "bits", mask))
    if bits.shape != (dirs.d,):
        raise DimensionMismatch(f"mask has shape {bits.shape}, expected ({dirs.d},)")
    if not np.any(bits):
        raise EmptyMask("mask selects no coordinates")
    masked = delta * (bits != 0)
    scores = np.maximum(dirs.units @ masked, 0.0) / dirs.g
    return _max_with_attribution(dirs, scores)


def _weight_array(weights, num_classes_needed):
    w = weights.w if isinstance(weights, WeightMatrix) else np.asarray(weights)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise DimensionMismatch(f"weight matrix must be square, got {w.shape}")
    if w.shape[0] < num_classes_needed:
        raise DimensionMismatch(
            f"weight matrix covers {w.shape[0]} classes, need {num_classes_needed}"
        )
    w = np.asarray(w, dtype=np.float64)
    if w.size and (w.min() < 0.0 or w.max() > 1.0):
        raise WeightOutOfRange(f"weights outside [0, 1]: range [{w.min()}, {w.max()}]")
    return w


def pd_w_threat(dirs: UnsafeDirectionSet, delta, y, weights):
    """Weighted variant: each normalization is scaled by W(y, source class).

    With W identically 1 this equals pd_threat; weights below 1 amplify the
    threat of directions toward nearby classes.
    """
    delta = _check_delta(dirs, delta)
    y = int(y)
    w = _weight_array(weights, int(dirs.source_class.max()) + 1)
    if not 0 <= y < w.shape[0]:
        raise DimensionMismatch(f"label {y} outside weight matrix of size {w.shape[0]}")
    scale = np.maximum(w[y, dirs.source_class], W_FLOOR)
    scores = np.maximum(dirs.units @ delta, 0.0) / (dirs.g * scale)
    return _max_with_attribution(dirs, scores)


def lp_threat(delta, p):
    """Baseline lp threat; p is 2 or math.inf."""
    delta = np.asarray(delta, dtype=np.float64).reshape(-1)
    if p == 2:
        return float(np.linalg.norm(delta))
    if p == math.inf:
        return float(np.max(np.abs(delta))) if delta.size else 0.0
    raise ValueError(f"p must be 2 or inf, got {p}")


def lipschitz_constant(dirs: UnsafeDirectionSet):
    """Lipschitz constant of the threat w.r.t. l2 perturbations: max 1/g."""
    if len(dirs) == 0:
        raise EmptyDirectionSet("no unsafe directions")
    return float(np.max(1.0 / dirs.g))


# ---------------------------------------------------------------------------
# batch evaluation
# ---------------------------------------------------------------------------

def _mask_for(masks, i, d, n):
    if masks is None:
        return None
    ms = masks if isinstance(masks, MaskSet) else MaskSet(np.asarray(masks))
    if ms.d != d:
        raise DimensionMismatch(f"masks have dimension {ms.d}, data has {d}")
    if ms.n_masks == 1:
        return ms[0]
    if ms.n_masks != n:
        raise ShapeMismatch(f"{ms.n_masks} masks for {n} inputs; expected 1 or {n}")
    return ms[i]


def precompute_directions(index: RepresentativeIndex, inputs: LabeledDataset,
                          threads=1):
    """Materialize one UnsafeDirectionSet per input row.

    Pass the result to evaluate_batch when scoring many perturbations of the
    same inputs (e.g. one corruption grid), so direction construction is paid
    once instead of per corruption.
    """
    x = inputs.data.astype(np.float64)

    def one(i):
        return unsafe_directions(index, x[i], int(inputs.labels[i]))

    ids = range(inputs.n)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, ids))
    return [one(i) for i in ids]


def evaluate_batch(metric, inputs: LabeledDataset, perturbed: LabeledDataset,
                   index: RepresentativeIndex | None = None, masks=None,
                   weights=None, threads=1, directions=None):
    """Evaluate one metric on every (input, perturbed) row pair.

    Rows are paired positionally: delta_i = perturbed_i - inputs_i. For the
    pd-family metrics the unsafe directions are materialized once per input,
    or reused from `directions` (see precompute_directions). Results come
    back in input order regardless of thread count.
    """
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    if inputs.n != perturbed.n or inputs.d != perturbed.d:
        raise ShapeMismatch(
            f"inputs are {inputs.n}x{inputs.d}, perturbed are {perturbed.n}x{perturbed.d}"
        )
    if metric in ("pd", "pds", "pdw") and index is None and directions is None:
        raise ValueError(f"metric {metric!r} requires an index or precomputed directions")
    if metric == "pds" and masks is None:
        raise ValueError("metric 'pds' requires masks")
    if metric == "pdw" and weights is None:
        raise ValueError("metric 'pdw' requires a weight matrix")
    if directions is not None and len(directions) != inputs.n:
        raise ShapeMismatch(f"{len(directions)} direction sets for {inputs.n} inputs")

    x = inputs.data.astype(np.float64)
    deltas = perturbed.data.astype(np.float64) - x
    w_arr = _weight_array(weights, inputs.num_classes) if metric == "pdw" else None

    def one(i):
        if metric == "linf":
            return ThreatRecord(i, metric, lp_threat(deltas[i], math.inf))
        if metric == "l2":
            return ThreatRecord(i, metric, lp_threat(deltas[i], 2))
        if directions is not None:
            dirs = directions[i]
        else:
            dirs = unsafe_directions(index, x[i], int(inputs.labels[i]))
        if metric == "pd":
            t, attr = pd_threat(dirs, deltas[i])
            return ThreatRecord(i, metric, t, attr)
        if metric == "pds":
            t, attr = pd_s_threat(dirs, deltas[i], _mask_for(masks, i, inputs.d, inputs.n))
            return ThreatRecord(i, metric, t, attr)
        t, attr = pd_w_threat(dirs, deltas[i], int(inputs.labels[i]), w_arr)
        wv = float(w_arr[int(inputs.labels[i]), attr.source_class]) if attr else None
        return ThreatRecord(i, metric, t, attr, weight=wv)

    ids = range(inputs.n)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, ids))
    return [one(i) for i in ids]


def avg_threat(metric, inputs, perturbed, index=None, masks=None, weights=None,
               threads=1):
    """Mean threat of delta_i = perturbed_i - inputs_i under `metric`."""
    records = evaluate_batch(metric, inputs, perturbed, index=index, masks=masks,
                             weights=weights, threads=threads)
    if not records:
        return 0.0
    return float(np.mean([r.threat for r in records]))
