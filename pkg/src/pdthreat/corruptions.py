"""Simplified severity-parameterized corruption generators.

These reproduce the shape of a corruption-vs-threat comparison pipeline at
desk scale; the severity-to-parameter maps are fixed affine tables (below)
and make no claim of visual fidelity to any published corruption benchmark.

Outputs are deterministic given (spec, x): stochastic styles derive their
random stream from the seed, the style, the severity, and a content hash of
x, so the same input corrupts identically regardless of its position in a
batch. All outputs are clipped to [0, 1]^d.

Severity tables (s = 1..5):
  gaussian_noise        sigma = 0.04 * s
  impulse_noise         flip fraction = 0.03 * s, flipped pixels set to 0 or 1
  box_blur              kernel size = 2s + 1 (uniform box, nearest edges)
  brightness            additive shift = 0.1 * s
  contrast              values pulled toward 0.5 by factor 1 - 0.15 * s
  pixelate              block size = s + 1 (block mean, nearest upsample)
  checkerboard_cutout   2s tiles per axis, alternating tiles zeroed
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import GeometryMismatch, NotImageDomain
from .formats import LabeledDataset

STYLES = (
    "gaussian_noise",
    "impulse_noise",
    "box_blur",
    "brightness",
    "contrast",
    "pixelate",
    "checkerboard_cutout",
)

# style -> report category (mirrors the usual corruption groupings)
STYLE_CATEGORY = {
    "gaussian_noise": "noise",
    "impulse_noise": "noise",
    "box_blur": "blur",
    "brightness": "digital",
    "contrast": "digital",
    "pixelate": "compression",
    "checkerboard_cutout": "occlusion",
}

SEVERITIES = (1, 2, 3, 4, 5)


@dataclass(frozen=True)
class CorruptionSpec:
    style: str
    severity: int
    seed: int
    height: int
    width: int
    channels: int = 1

    def __post_init__(self):
        if self.style not in STYLES:
            raise ValueError(f"unknown style {self.style!r}; choose from {STYLES}")
        if self.severity not in SEVERITIES:
            raise ValueError(f"severity must be 1..5, got {self.severity}")
        if min(self.height, self.width, self.channels) < 1:
            raise GeometryMismatch("geometry must be positive")

    @property
    def d(self):
        return self.height * self.width * self.channels


def _rng_for(spec: CorruptionSpec, x32: np.ndarray):
    content = hashlib.blake2b(x32.tobytes(), digest_size=8).digest()
    h64 = int.from_bytes(content, "little")
    return np.random.default_rng(
        [spec.seed, STYLES.index(spec.style), spec.severity, h64]
    )


def _block_mean_upsample(img, b):
    h, w, c = img.shape
    # block means via reduceat handle edges that do not divide evenly
    row_starts = np.arange(0, h, b)
    col_starts = np.arange(0, w, b)
    sums = np.add.reduceat(np.add.reduceat(img, row_starts, axis=0), col_starts, axis=1)
    rows_per = np.diff(np.append(row_starts, h))
    cols_per = np.diff(np.append(col_starts, w))
    means = sums / (rows_per[:, None, None] * cols_per[None, :, None])
    return means[np.arange(h) // b][:, np.arange(w) // b]


def apply(spec: CorruptionSpec, x) -> np.ndarray:
    """Corrupt one input vector in [0,1]^d; returns a new vector in [0,1]^d."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != spec.d:
        raise GeometryMismatch(
            f"input has d={x.shape[0]} but geometry "
            f"{spec.height}x{spec.width}x{spec.channels} implies {spec.d}"
        )
    img = x.reshape(spec.height, spec.width, spec.channels)
    s = spec.severity

    if spec.style == "gaussian_noise":
        rng = _rng_for(spec, np.asarray(x, dtype=np.float32))
        out = img + rng.normal(0.0, 0.04 * s, size=img.shape)
    elif spec.style == "impulse_noise":
        rng = _rng_for(spec, np.asarray(x, dtype=np.float32))
        flip = rng.random(img.shape) < 0.03 * s
        values = rng.integers(0, 2, size=img.shape).astype(np.float64)
        out = np.where(flip, values, img)
    elif spec.style == "box_blur":
        size = 2 * s + 1
        out = ndimage.uniform_filter(img, size=(size, size, 1), mode="nearest")
    elif spec.style == "brightness":
        out = img + 0.1 * s
    elif spec.style == "contrast":
        out = 0.5 + (1.0 - 0.15 * s) * (img - 0.5)
    elif spec.style == "pixelate":
        out = _block_mean_upsample(img, s + 1)
    else:  # checkerboard_cutout
        tiles = 2 * s
        tile_h = max(1, round(spec.height / tiles))
        tile_w = max(1, round(spec.width / tiles))
        ti = (np.arange(spec.height) // tile_h)[:, None]
        tj = (np.arange(spec.width) // tile_w)[None, :]
        cut = ((ti + tj) % 2 == 1)[:, :, None]
        out = np.where(cut, 0.0, img)

    return np.clip(out, 0.0, 1.0).reshape(-1)


def cutout_mask(spec: CorruptionSpec) -> np.ndarray:
    """Coordinates zeroed by checkerboard_cutout at this spec (1 = cut)."""
    tiles = 2 * spec.severity
    tile_h = max(1, round(spec.height / tiles))
    tile_w = max(1, round(spec.width / tiles))
    ti = (np.arange(spec.height) // tile_h)[:, None]
    tj = (np.arange(spec.width) // tile_w)[None, :]
    cut = ((ti + tj) % 2 == 1)[:, :, None]
    return np.broadcast_to(cut, (spec.height, spec.width, spec.channels)).reshape(-1).astype(np.uint8)


def apply_dataset(spec: CorruptionSpec, ds: LabeledDataset) -> LabeledDataset:
    """Corrupt every row of an image-domain dataset.

    The output records the corruption style, severity, and seed in its file
    header so downstream reports can group by them.
    """
    if not ds.image_domain:
        raise NotImageDomain("corruptions apply only to image_domain datasets")
    if spec.d != ds.d:
        raise GeometryMismatch(f"geometry implies d={spec.d}, dataset has d={ds.d}")
    rows = np.stack([apply(spec, ds.data[i]) for i in range(ds.n)]) if ds.n else ds.data
    meta = dict(ds.meta)
    meta.update(
        corruption_style=spec.style,
        corruption_severity=spec.severity,
        corruption_seed=spec.seed,
    )
    return LabeledDataset(
        data=np.asarray(rows, dtype=np.float32).reshape(ds.n, ds.d),
        labels=ds.labels,
        num_classes=ds.num_classes,
        image_domain=True,
        meta=meta,
    )
