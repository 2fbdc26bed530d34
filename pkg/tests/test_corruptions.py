import numpy as np
import pytest

import pdthreat as pt
from pdthreat import corruptions, errors
from pdthreat.corruptions import CorruptionSpec

from conftest import make_blobs, make_dirs


def spec(style, severity, seed=0, h=8, w=8, c=1):
    return CorruptionSpec(style=style, severity=severity, seed=seed,
                          height=h, width=w, channels=c)


def test_deterministic_given_spec_and_input():
    rng = np.random.default_rng(0)
    x = rng.random(64)
    for style in corruptions.STYLES:
        s = spec(style, 3)
        assert np.array_equal(corruptions.apply(s, x), corruptions.apply(s, x))


def test_determinism_is_position_independent():
    # the same vector corrupts identically wherever it sits in a batch
    rng = np.random.default_rng(1)
    x = rng.random(64).astype(np.float32)
    ds_front = pt.LabeledDataset(
        data=np.stack([x, rng.random(64).astype(np.float32)]),
        labels=np.array([0, 0], dtype=np.uint32), num_classes=1, image_domain=True)
    ds_back = pt.LabeledDataset(
        data=np.stack([rng.random(64).astype(np.float32), x]),
        labels=np.array([0, 0], dtype=np.uint32), num_classes=1, image_domain=True)
    s = spec("gaussian_noise", 2, seed=5)
    out_front = corruptions.apply_dataset(s, ds_front)
    out_back = corruptions.apply_dataset(s, ds_back)
    assert np.array_equal(out_front.data[0], out_back.data[1])


def test_outputs_clipped_to_unit_interval():
    rng = np.random.default_rng(2)
    x = rng.random(64)
    for style in corruptions.STYLES:
        for sev in corruptions.SEVERITIES:
            out = corruptions.apply(spec(style, sev), x)
            assert out.min() >= 0.0 and out.max() <= 1.0


def test_gaussian_moment_check():
    # interior input avoids clipping: E|out - x| tracks sigma * sqrt(d)
    x = np.full(16 * 16, 0.5)
    sev = 2
    sigma = 0.04 * sev
    norms = [
        np.linalg.norm(corruptions.apply(spec("gaussian_noise", sev, seed=s, h=16, w=16), x) - x)
        for s in range(200)
    ]
    expect = sigma * np.sqrt(16 * 16)
    assert np.mean(norms) == pytest.approx(expect, rel=0.05)


def test_brightness_closed_form_interior():
    x = np.full(64, 0.3)
    for sev in (1, 2, 3):
        out = corruptions.apply(spec("brightness", sev), x)
        assert out == pytest.approx(np.full(64, 0.3 + 0.1 * sev))


def test_contrast_pulls_toward_midpoint():
    x = np.linspace(0.1, 0.9, 64)
    out = corruptions.apply(spec("contrast", 2), x)
    assert out == pytest.approx(0.5 + 0.7 * (x - 0.5))


def test_linf_severity_ordering_deterministic_styles():
    rng = np.random.default_rng(3)
    x = rng.uniform(0.2, 0.8, size=64)
    for style in ("brightness", "contrast"):
        norms = [
            np.max(np.abs(corruptions.apply(spec(style, s), x) - x))
            for s in corruptions.SEVERITIES
        ]
        assert all(norms[i + 1] >= norms[i] - 1e-12 for i in range(4))


def test_cutout_support_exactly_on_cut_tiles():
    rng = np.random.default_rng(4)
    x = rng.uniform(0.2, 1.0, size=64)  # strictly positive pixels
    s = spec("checkerboard_cutout", 1)
    out = corruptions.apply(s, x)
    cut = corruptions.cutout_mask(s).astype(bool)
    delta = out - x
    assert np.all(delta[cut] == -x[cut])
    assert np.all(delta[~cut] == 0.0)


def test_cutout_disjoint_mask_gives_zero_masked_threat():
    rng = np.random.default_rng(5)
    x = rng.uniform(0.2, 1.0, size=64)
    s = spec("checkerboard_cutout", 2)
    delta = corruptions.apply(s, x) - x
    keep = 1 - corruptions.cutout_mask(s)  # foreground disjoint from the cut tiles
    units = rng.normal(size=(5, 64))
    units /= np.linalg.norm(units, axis=1, keepdims=True)
    dirs = make_dirs(units, rng.uniform(0.5, 2.0, size=5))
    t, attr = pt.pd_s_threat(dirs, delta, keep)
    assert t == 0.0 and attr is None


def test_pixelate_block_means():
    x = np.arange(16, dtype=np.float64).reshape(4, 4) / 16.0
    out = corruptions.apply(spec("pixelate", 1, h=4, w=4), x.ravel()).reshape(4, 4)
    # severity 1 -> 2x2 blocks replaced by their mean
    for bi in range(2):
        for bj in range(2):
            block = x[2 * bi : 2 * bi + 2, 2 * bj : 2 * bj + 2]
            assert np.allclose(out[2 * bi : 2 * bi + 2, 2 * bj : 2 * bj + 2], block.mean())


def test_box_blur_preserves_constant_images():
    x = np.full(64, 0.7)
    out = corruptions.apply(spec("box_blur", 3), x)
    assert out == pytest.approx(x)


def test_geometry_mismatch_rejected():
    with pytest.raises(errors.GeometryMismatch):
        corruptions.apply(spec("brightness", 1, h=4, w=4), np.zeros(64))


def test_not_image_domain_rejected():
    ds = pt.LabeledDataset(
        data=np.zeros((2, 64), dtype=np.float32),
        labels=np.zeros(2, dtype=np.uint32),
        num_classes=1,
        image_domain=False,
    )
    with pytest.raises(errors.NotImageDomain):
        corruptions.apply_dataset(spec("brightness", 1), ds)


def test_apply_dataset_records_provenance():
    ds = make_blobs(n_per_class=3, d=64, num_classes=2, seed=6)
    out = corruptions.apply_dataset(spec("contrast", 4, seed=9), ds)
    assert out.meta["corruption_style"] == "contrast"
    assert out.meta["corruption_severity"] == 4
    assert out.meta["corruption_seed"] == 9
    assert out.image_domain


def test_severity_parameter_monotone_for_noise():
    # expected displacement grows with severity for the stochastic styles
    x = np.full(256, 0.5)
    means = []
    for sev in corruptions.SEVERITIES:
        norms = [
            np.linalg.norm(corruptions.apply(spec("gaussian_noise", sev, seed=s, h=16, w=16), x) - x)
            for s in range(30)
        ]
        means.append(np.mean(norms))
    assert all(means[i + 1] > means[i] for i in range(4))
