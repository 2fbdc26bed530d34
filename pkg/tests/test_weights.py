from collections import deque

import numpy as np
import pytest

import pdthreat as pt
from pdthreat import errors
from pdthreat.weights import RawDistanceMatrix


# --- independent oracles --------------------------------------------------------

def bfs_tree_distance(parent, a, b):
    """Shortest path length on the undirected tree graph."""
    adj = {}
    for child, par in parent.items():
        if child == par:
            continue
        adj.setdefault(child, set()).add(par)
        adj.setdefault(par, set()).add(child)
    if a == b:
        return 0
    seen = {a}
    queue = deque([(a, 0)])
    while queue:
        node, dist = queue.popleft()
        for nxt in adj.get(node, ()):
            if nxt == b:
                return dist + 1
            if nxt not in seen:
                seen.add(nxt)
                queue.append((nxt, dist + 1))
    raise AssertionError("disconnected tree")


def random_tree(rng, n_nodes):
    names = [f"n{i}" for i in range(n_nodes)]
    parent = {names[0]: names[0]}
    for i in range(1, n_nodes):
        parent[names[i]] = names[int(rng.integers(0, i))]
    n_classes = int(rng.integers(2, min(8, n_nodes)))
    chosen = rng.choice(n_nodes, size=n_classes, replace=False)
    leaf_map = {c: names[int(v)] for c, v in enumerate(chosen)}
    return pt.HierarchyTree(parent=parent, root=names[0], leaf_map=leaf_map)


def naive_euclidean(index):
    C = index.num_classes
    out = np.zeros((C, C))
    for y in range(C):
        for c in range(C):
            total, count = 0.0, 0
            for a in index.class_vectors[y].astype(np.float64):
                for b in index.class_vectors[c].astype(np.float64):
                    total += float(np.linalg.norm(a - b))
                    count += 1
            out[y, c] = total / count
    return out


# --- euclidean_distance_matrix -----------------------------------------------------

def singleton_index(points):
    points = np.asarray(points, dtype=np.float32)
    return pt.RepresentativeIndex(
        class_vectors=tuple(points[i : i + 1] for i in range(len(points))),
        class_ids=tuple(np.array([i], dtype=np.uint64) for i in range(len(points))),
        k=1, beta=0.5, seed=0, d=points.shape[1],
    )


def test_euclidean_two_singletons():
    index = singleton_index([[0.0, 0.0], [3.0, 0.0]])
    raw = pt.euclidean_distance_matrix(index)
    assert raw.values[0, 1] == pytest.approx(3.0)
    assert raw.values[1, 0] == pytest.approx(3.0)


def test_euclidean_diagonal_is_intra_mean():
    rng = np.random.default_rng(1)
    pts = rng.normal(size=(3, 4)).astype(np.float32)
    index = pt.RepresentativeIndex(
        class_vectors=(pts, pts[:1]),
        class_ids=(np.arange(3, dtype=np.uint64), np.array([9], dtype=np.uint64)),
        k=3, beta=0.5, seed=0, d=4,
    )
    raw = pt.euclidean_distance_matrix(index)
    manual = np.mean([
        np.linalg.norm(pts[i].astype(np.float64) - pts[j].astype(np.float64))
        for i in range(3) for j in range(3)
    ])
    assert raw.values[0, 0] == pytest.approx(manual, abs=1e-6)


def test_euclidean_matches_quadruple_loop():
    rng = np.random.default_rng(2)
    index = pt.RepresentativeIndex(
        class_vectors=tuple(rng.normal(size=(2, 5)).astype(np.float32) for _ in range(3)),
        class_ids=tuple(np.arange(2, dtype=np.uint64) for _ in range(3)),
        k=2, beta=0.5, seed=0, d=5,
    )
    raw = pt.euclidean_distance_matrix(index)
    assert raw.values == pytest.approx(naive_euclidean(index), abs=1e-5)


# --- lca_distance_matrix -------------------------------------------------------------

def test_lca_self_distance_zero():
    tree = pt.HierarchyTree(
        parent={"root": "root", "a": "root", "b": "root"},
        root="root", leaf_map={0: "a", 1: "b"})
    raw = pt.lca_distance_matrix(tree)
    assert raw.values[0, 0] == 0.0 and raw.values[1, 1] == 0.0


def test_lca_siblings_distance_two():
    tree = pt.HierarchyTree(
        parent={"root": "root", "mid": "root", "a": "mid", "b": "mid"},
        root="root", leaf_map={0: "a", 1: "b"})
    raw = pt.lca_distance_matrix(tree)
    assert raw.values[0, 1] == 2.0


def test_lca_matches_bfs_oracle_on_random_trees():
    rng = np.random.default_rng(3)
    for _ in range(20):
        tree = random_tree(rng, int(rng.integers(10, 101)))
        raw = pt.lca_distance_matrix(tree)
        C = raw.num_classes
        for y in range(C):
            for c in range(C):
                expect = bfs_tree_distance(tree.parent, tree.leaf_map[y], tree.leaf_map[c])
                assert raw.values[y, c] == expect


def test_lca_metric_properties():
    rng = np.random.default_rng(4)
    tree = random_tree(rng, 60)
    raw = pt.lca_distance_matrix(tree).values
    C = raw.shape[0]
    assert np.array_equal(raw, raw.T)
    assert np.all(np.diag(raw) == 0)
    for a in range(C):
        for b in range(C):
            for c in range(C):
                assert raw[a, c] <= raw[a, b] + raw[b, c]


def test_lca_unmapped_class_rejected():
    tree = pt.HierarchyTree(
        parent={"root": "root", "a": "root"},
        root="root", leaf_map={0: "a", 2: "root"})  # id 1 missing
    with pytest.raises(errors.UnmappedClass):
        pt.lca_distance_matrix(tree)


# --- relative_weights -----------------------------------------------------------------

def test_relative_endpoints():
    raw = RawDistanceMatrix(values=np.array([
        [0.0, 1.0, 3.0],
        [1.0, 0.0, 3.0],
        [3.0, 1.0, 0.0],
    ]), source="external")
    w = pt.relative_weights(raw)
    assert w.w[0, 1] == 0.0 and w.w[0, 2] == 1.0
    assert w.w[1, 0] == 0.0 and w.w[1, 2] == 1.0
    assert w.w[2, 1] == 0.0 and w.w[2, 0] == 1.0
    assert np.all(np.diag(w.w) == 1.0)


def test_relative_constant_row_maps_to_ones():
    raw = RawDistanceMatrix(values=np.full((3, 3), 2.0), source="external")
    w = pt.relative_weights(raw)
    assert np.all(w.w == 1.0)


def test_relative_range_and_order_preserved():
    rng = np.random.default_rng(5)
    vals = rng.uniform(1.0, 9.0, size=(5, 5))
    raw = RawDistanceMatrix(values=vals, source="external")
    w = pt.relative_weights(raw).w.astype(np.float64)
    off = ~np.eye(5, dtype=bool)
    for y in range(5):
        row_in = vals[y, off[y]]
        row_out = w[y, off[y]]
        assert row_out.min() == pytest.approx(0.0)
        assert row_out.max() == pytest.approx(1.0)
        assert np.array_equal(np.argsort(row_in), np.argsort(row_out))


# --- combine_weights -------------------------------------------------------------------

def test_combine_single_part_squares():
    w = pt.WeightMatrix(np.array([[1.0, 0.5], [0.4, 1.0]]))
    out = pt.combine_weights([w])
    assert out.w[0, 1] == pytest.approx(0.25)
    assert out.w[1, 0] == pytest.approx(0.16, abs=1e-7)


def test_combine_two_constants():
    a = pt.WeightMatrix(np.full((2, 2), 0.5))
    b = pt.WeightMatrix(np.ones((2, 2)))
    assert np.allclose(pt.combine_weights([a, b]).w, 0.25)


def test_combine_matches_naive():
    rng = np.random.default_rng(6)
    parts = [pt.WeightMatrix(rng.uniform(size=(4, 4))) for _ in range(3)]
    out = pt.combine_weights(parts).w.astype(np.float64)
    for y in range(4):
        for c in range(4):
            expect = min(float(p.w[y, c]) for p in parts) ** 2
            assert out[y, c] == pytest.approx(expect, abs=1e-6)


def test_combine_monotone():
    rng = np.random.default_rng(7)
    base = [rng.uniform(size=(3, 3)) for _ in range(2)]
    out_before = pt.combine_weights([pt.WeightMatrix(b) for b in base]).w.copy()
    bumped = [b.copy() for b in base]
    bumped[0][1, 2] = min(1.0, bumped[0][1, 2] + 0.3)
    out_after = pt.combine_weights([pt.WeightMatrix(b) for b in bumped]).w
    assert np.all(out_after >= out_before - 1e-12)


def test_combine_errors():
    with pytest.raises(errors.EmptyPartsList):
        pt.combine_weights([])
    with pytest.raises(errors.SizeMismatch):
        pt.combine_weights([pt.WeightMatrix(np.ones((2, 2))),
                            pt.WeightMatrix(np.ones((3, 3)))])


def test_external_matrix_ingestion_path(tmp_path):
    # externally computed distances arrive as raw PDW1, get rescaled, and
    # drive the weighted threat
    rng = np.random.default_rng(8)
    raw_values = rng.uniform(0.0, 40.0, size=(3, 3))
    path = tmp_path / "ext.pdw"
    pt.save_weights(raw_values, path)
    raw = RawDistanceMatrix(values=pt.load_weights_raw(path), source="external")
    w = pt.relative_weights(raw)
    assert w.w.min() >= 0.0 and w.w.max() <= 1.0
    from conftest import make_dirs
    units = rng.normal(size=(4, 6))
    units /= np.linalg.norm(units, axis=1, keepdims=True)
    dirs = make_dirs(units, rng.uniform(0.5, 2.0, size=4),
                     classes=[1, 1, 2, 2], ids=range(4))
    t, _ = pt.pd_w_threat(dirs, rng.normal(size=6), 0, w)
    assert t >= 0.0


# --- full pipeline ----------------------------------------------------------------------

def test_pipeline_euclidean_to_threat_weights(blobs, blob_index):
    raw = pt.euclidean_distance_matrix(blob_index)
    w = pt.relative_weights(raw)
    combined = pt.combine_weights([w])
    x = blobs.data[0].astype(np.float64)
    dirs = pt.unsafe_directions(blob_index, x, 0)
    delta = np.full(blobs.d, 0.05)
    t_pd, _ = pt.pd_threat(dirs, delta)
    t_pdw, _ = pt.pd_w_threat(dirs, delta, 0, combined)
    assert t_pdw >= t_pd - 1e-12
