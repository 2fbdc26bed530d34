#!/usr/bin/env python3
"""Relative class-weight construction demo.

Builds the demo blob index, derives Euclidean relative weights from it, adds
hierarchy-based weights from a tiny three-leaf tree, combines both by the
squared elementwise minimum, and writes every stage as PDW1 (plus the
hierarchy file). An externally computed distance matrix can be dropped in as
a third source via --external.
"""

import argparse
from pathlib import Path

import numpy as np

import pdthreat as pt


def demo_tree():
    parent = {
        "root": "root",
        "fauna": "root",
        "flora": "root",
        "canine": "fauna",
        "feline": "fauna",
        "conifer": "flora",
        "fern": "flora",
    }
    return pt.HierarchyTree(
        parent=parent, root="root",
        leaf_map={0: "canine", 1: "feline", 2: "conifer", 3: "fern"})


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--outdir", type=Path, default=Path("out/weights"))
    ap.add_argument("--external", type=Path,
                    help="optional PDW1 raw distance matrix to fold in")
    ap.add_argument("--seed", type=int, default=424242)
    args = ap.parse_args()
    args.outdir.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(args.seed)
    centers = rng.uniform(0.3, 0.7, size=(4, 16))
    rows = np.concatenate([
        np.clip(centers[c] + rng.normal(0, 0.05, size=(30, 16)), 0, 1)
        for c in range(4)
    ])
    ds = pt.LabeledDataset(data=rows.astype(np.float32),
                           labels=np.repeat(np.arange(4), 30).astype(np.uint32),
                           num_classes=4, image_domain=True)
    index = pt.build_index(ds, k=5, beta=0.5, seed=1)

    parts = []
    raw_euc = pt.euclidean_distance_matrix(index)
    w_euc = pt.relative_weights(raw_euc)
    pt.save_weights(raw_euc.values, args.outdir / "raw_euclidean.pdw")
    pt.save_weights(w_euc, args.outdir / "w_euclidean.pdw")
    parts.append(w_euc)
    print("euclidean raw:\n", np.round(raw_euc.values, 3))

    tree = demo_tree()
    pt.save_hierarchy(tree, args.outdir / "hierarchy.txt")
    raw_lca = pt.lca_distance_matrix(tree)
    w_lca = pt.relative_weights(raw_lca)
    pt.save_weights(w_lca, args.outdir / "w_hierarchy.pdw")
    parts.append(w_lca)
    print("hierarchy raw:\n", raw_lca.values)

    if args.external:
        raw_ext = pt.RawDistanceMatrix(values=pt.load_weights_raw(args.external),
                                       source="external")
        w_ext = pt.relative_weights(raw_ext)
        pt.save_weights(w_ext, args.outdir / "w_external.pdw")
        parts.append(w_ext)
        print(f"external matrix folded in from {args.external}")

    combined = pt.combine_weights(parts)
    pt.save_weights(combined, args.outdir / "w_combined.pdw")
    print("combined (squared min):\n", np.round(combined.w.astype(float), 3))
    print(f"wrote PDW1 stages to {args.outdir}")


if __name__ == "__main__":
    main()
