"""Relative class-distance construction.

Raw class distances come from three sources: mean Euclidean distance between
representative subsets, shortest-path distance between mapped vertices of a
class hierarchy, and externally supplied matrices (e.g. perceptual distances
computed elsewhere and ingested as PDW1 files). Each raw matrix is rescaled
row-wise to [0, 1] over the off-diagonal entries, and multiple sources
combine by the squared elementwise minimum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyPartsList, SizeMismatch, UnmappedClass
from .formats import HierarchyTree, RepresentativeIndex, WeightMatrix


@dataclass(frozen=True)
class RawDistanceMatrix:
    """Unnormalized C x C nonnegative class distances."""

    values: np.ndarray  # (C, C) float64
    source: str         # "euclidean" | "hierarchy" | "external"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise SizeMismatch(f"distance matrix must be square, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise SizeMismatch("distance matrix contains NaN or Inf")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def num_classes(self):
        return self.values.shape[0]


def euclidean_distance_matrix(index: RepresentativeIndex) -> RawDistanceMatrix:
    """Mean L2 distance between every pair of class blocks.

    Entry (y, c) averages |a - b| over all count_y * count_c pairs drawn
    from block y and block c; no sampling. The diagonal is the mean
    intra-block distance (computed for completeness, unused downstream).
    """
    blocks = [v.astype(np.float64) for v in index.class_vectors]
    for c, b in enumerate(blocks):
        if b.shape[0] == 0:
            raise ValueError(f"class {c} has an empty block; build the index first")
    C = len(blocks)
    out = np.zeros((C, C))
    sq = [np.sum(b * b, axis=1) for b in blocks]
    for y in range(C):
        for c in range(y, C):
            d2 = sq[y][:, None] - 2.0 * (blocks[y] @ blocks[c].T) + sq[c][None, :]
            mean = float(np.sqrt(np.maximum(d2, 0.0)).mean())
            out[y, c] = mean
            out[c, y] = mean
    return RawDistanceMatrix(values=out, source="euclidean")


def _lca_depth(tree: HierarchyTree, a, b, depths, paths):
    pa, pb = paths[a], paths[b]
    bset = set(pb)
    for v in pa:  # first common vertex on the upward walk is the LCA
        if v in bset:
            return depths[v]
    raise UnmappedClass(f"no common ancestor for {a!r} and {b!r}")


def lca_distance_matrix(tree: HierarchyTree) -> RawDistanceMatrix:
    """Tree path length between mapped class vertices.

    dist(v1, v2) = depth(v1) + depth(v2) - 2 * depth(LCA(v1, v2)), the length
    of the minimal path connecting the two vertices. Class ids must cover
    0..C-1 exactly.
    """
    if not tree.leaf_map:
        raise UnmappedClass("hierarchy has an empty leaf map")
    C = max(tree.leaf_map) + 1
    missing = [c for c in range(C) if c not in tree.leaf_map]
    if missing:
        raise UnmappedClass(f"class ids without a vertex: {missing}")
    names = [tree.leaf_map[c] for c in range(C)]
    depths = {}
    paths = {}
    for name in set(names):
        paths[name] = tree.ancestors(name)
        for i, v in enumerate(reversed(paths[name])):
            depths.setdefault(v, i)
    out = np.zeros((C, C))
    for y in range(C):
        for c in range(y + 1, C):
            lca_d = _lca_depth(tree, names[y], names[c], depths, paths)
            dist = depths[names[y]] + depths[names[c]] - 2 * lca_d
            out[y, c] = dist
            out[c, y] = dist
    return RawDistanceMatrix(values=out, source="hierarchy")


def relative_weights(raw: RawDistanceMatrix) -> WeightMatrix:
    """Row-wise min-max rescaling to [0, 1] over the off-diagonal entries.

    For each row y the nearest other class maps to 0 and the farthest to 1;
    rows with zero range map to all ones (no amplification). The diagonal is
    set to 1 and is never consulted by threat evaluation.
    """
    v = raw.values
    C = v.shape[0]
    if C < 2:
        raise SizeMismatch("need at least two classes to rescale")
    out = np.ones((C, C))
    off = ~np.eye(C, dtype=bool)
    for y in range(C):
        row = v[y, off[y]]
        lo, hi = float(row.min()), float(row.max())
        if hi - lo == 0.0:
            continue  # degenerate row stays all ones
        out[y, off[y]] = (v[y, off[y]] - lo) / (hi - lo)
    return WeightMatrix(np.clip(out, 0.0, 1.0))


def combine_weights(parts) -> WeightMatrix:
    """Squared elementwise minimum across weight matrices.

    Absent sources are simply omitted from the list; a single part combines
    to its elementwise square.
    """
    parts = list(parts)
    if not parts:
        raise EmptyPartsList("need at least one weight matrix")
    arrays = []
    for p in parts:
        w = p.w if isinstance(p, WeightMatrix) else np.asarray(p, dtype=np.float64)
        arrays.append(np.asarray(w, dtype=np.float64))
    C = arrays[0].shape[0]
    for a in arrays:
        if a.shape != (C, C):
            raise SizeMismatch(f"expected ({C}, {C}) matrices, got {a.shape}")
    combined = np.min(np.stack(arrays), axis=0) ** 2
    return WeightMatrix(combined)
