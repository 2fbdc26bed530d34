import numpy as np
import pytest
from hypothesis import HealthCheck, settings

import pdthreat as pt

settings.register_profile(
    "ci",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


def make_blobs(n_per_class=20, d=8, num_classes=3, seed=0, spread=0.05,
               image_domain=True):
    """Well-separated Gaussian blobs clipped into [0, 1]^d."""
    rng = np.random.default_rng(seed)
    centers = rng.uniform(0.25, 0.75, size=(num_classes, d))
    rows, labels = [], []
    for c in range(num_classes):
        pts = centers[c] + rng.normal(0.0, spread, size=(n_per_class, d))
        rows.append(np.clip(pts, 0.0, 1.0))
        labels.append(np.full(n_per_class, c))
    return pt.LabeledDataset(
        data=np.concatenate(rows).astype(np.float32),
        labels=np.concatenate(labels).astype(np.uint32),
        num_classes=num_classes,
        image_domain=image_domain,
    )


@pytest.fixture
def blobs():
    return make_blobs()


@pytest.fixture
def blob_index(blobs):
    return pt.build_index(blobs, k=4, beta=0.5, seed=11)


def make_dirs(units, g, classes=None, ids=None, x=None, y=0):
    """Hand-built UnsafeDirectionSet for unit tests; rows sorted by
    (class, id) like the production constructor."""
    units = np.asarray(units, dtype=np.float64)
    m, d = units.shape
    g = np.asarray(g, dtype=np.float64)
    classes = np.asarray(classes if classes is not None else np.ones(m), dtype=np.int64)
    ids = np.asarray(ids if ids is not None else np.arange(m), dtype=np.uint64)
    order = np.lexsort((ids, classes)) if m else np.arange(0)
    return pt.UnsafeDirectionSet(
        x=np.zeros(d) if x is None else np.asarray(x, dtype=np.float64),
        y=y,
        units=units[order],
        g=g[order],
        source_class=classes[order],
        source_ids=ids[order],
        skipped=0,
    )
