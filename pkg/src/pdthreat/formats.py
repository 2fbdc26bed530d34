"""Core value types and their on-disk formats.

Binary layout shared by all formats: 4-byte magic, little-endian u32 header
length, a UTF-8 JSON header, then a payload whose layout is fixed by the
magic/version. Numeric payloads are IEEE-754 32-bit little-endian floats;
labels, counts, and mask bytes are unsigned little-endian integers. Files
written on any platform load identically, and deserialize(serialize(x)) is
bit-identical to x.

Formats:
  PDT1  labeled dataset   header {version, n, d, num_classes, dtype, image_domain}
                          payload n*d f32 row-major, then n u32 labels
  PDM1  boolean mask set  header {version, n_masks, d}; payload n_masks*d u8 in {0,1}
  PDW1  C x C weights     header {version, C}; payload C*C f32 row-major
                          (row = label of the perturbed input, column = class
                          of the unsafe direction)
  PDX1  representative    header {version, num_classes, k, d, beta, seed,
        index             source_dataset_hash, class_counts}; payload per class:
                          count u64 source ids, then count*d f32 vectors
  hierarchy               UTF-8 text, one "child<TAB>parent" per line, root as
                          "root<TAB>root", then a "#leafmap" section mapping
                          "class_id<TAB>node_name"

Unknown JSON header keys are preserved in `meta` and written back verbatim,
so provenance annotations (e.g. corruption style) survive round trips.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadMagic,
    HeaderMismatch,
    InvariantViolation,
    IoError,
    LabelOutOfRange,
    MalformedTree,
    NonFiniteValue,
)

MAGIC_DATASET = b"PDT1"
MAGIC_MASKS = b"PDM1"
MAGIC_WEIGHTS = b"PDW1"
MAGIC_INDEX = b"PDX1"


def _frozen_array(a, dtype):
    out = np.ascontiguousarray(a, dtype=dtype)
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# value types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LabeledDataset:
    """n points in R^d with class labels in {0..C-1}.

    Immutable after construction; arrays are stored read-only so instances
    are safe to share across threads.
    """

    data: np.ndarray          # (n, d) float32
    labels: np.ndarray        # (n,) uint32
    num_classes: int
    image_domain: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise InvariantViolation(f"data must be 2-D, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise NonFiniteValue("dataset contains NaN or Inf entries")
        labels = np.asarray(self.labels)
        if labels.ndim != 1 or labels.shape[0] != data.shape[0]:
            raise InvariantViolation("labels must be one per data row")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise LabelOutOfRange(
                f"labels must lie in [0, {self.num_classes}), "
                f"got range [{labels.min()}, {labels.max()}]"
            )
        if self.image_domain and data.size and (data.min() < 0.0 or data.max() > 1.0):
            raise InvariantViolation("image_domain dataset has entries outside [0, 1]")
        object.__setattr__(self, "data", _frozen_array(data, "<f4"))
        object.__setattr__(self, "labels", _frozen_array(labels, "<u4"))

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def d(self):
        return self.data.shape[1]

    def class_indices(self, c):
        return np.nonzero(self.labels == np.uint32(c))[0]


@dataclass(frozen=True)
class BooleanMask:
    """A {0,1}-valued coordinate selector of dimension d."""

    bits: np.ndarray  # (d,) uint8

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 1:
            raise InvariantViolation("mask bits must be 1-D")
        if bits.size and not np.isin(bits, (0, 1)).all():
            raise InvariantViolation("mask bits must be 0 or 1")
        object.__setattr__(self, "bits", _frozen_array(bits, "<u1"))

    @property
    def d(self):
        return self.bits.shape[0]


@dataclass(frozen=True)
class MaskSet:
    """n_masks boolean masks sharing one dimension d (PDM1 payload)."""

    masks: np.ndarray  # (n_masks, d) uint8

    def __post_init__(self):
        masks = np.asarray(self.masks)
        if masks.ndim != 2:
            raise InvariantViolation("mask set must be 2-D")
        if masks.size and not np.isin(masks, (0, 1)).all():
            raise InvariantViolation("mask bits must be 0 or 1")
        object.__setattr__(self, "masks", _frozen_array(masks, "<u1"))

    @property
    def n_masks(self):
        return self.masks.shape[0]

    @property
    def d(self):
        return self.masks.shape[1]

    def __getitem__(self, i) -> BooleanMask:
        return BooleanMask(self.masks[i])


@dataclass(frozen=True)
class WeightMatrix:
    """Relative class distances W(y, c) in [0, 1].

    Row y is the label of the input under perturbation, column c the class of
    the unsafe direction. The diagonal is never consulted by threat
    evaluation. Tiny floating overshoot outside [0,1] is clamped; anything
    larger is rejected.
    """

    w: np.ndarray  # (C, C) float32

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise InvariantViolation(f"weight matrix must be square, got {w.shape}")
        if not np.all(np.isfinite(w)):
            raise NonFiniteValue("weight matrix contains NaN or Inf")
        if w.size and (w.min() < -1e-6 or w.max() > 1.0 + 1e-6):
            raise InvariantViolation(
                f"weights must lie in [0, 1], got range [{w.min()}, {w.max()}]"
            )
        object.__setattr__(self, "w", _frozen_array(np.clip(w, 0.0, 1.0), "<f4"))

    @property
    def num_classes(self):
        return self.w.shape[0]


@dataclass(frozen=True)
class RepresentativeIndex:
    """Per-class representative subsets with their source row ids.

    Block c holds min(k, |S_c|) vectors in greedy insertion order, so any
    prefix of a block is itself a valid smaller selection.
    """

    class_vectors: tuple     # per class: (count_c, d) float32
    class_ids: tuple         # per class: (count_c,) uint64 rows of the source dataset
    k: int
    beta: float
    seed: int
    d: int
    source_dataset_hash: str = ""

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise InvariantViolation(f"beta must lie in (0, 1), got {self.beta}")
        if len(self.class_vectors) != len(self.class_ids):
            raise InvariantViolation("vector blocks and id blocks must pair up")
        vecs, ids = [], []
        for c, (v, i) in enumerate(zip(self.class_vectors, self.class_ids)):
            v = np.asarray(v, dtype=np.float64).reshape(-1, self.d)
            i = np.asarray(i)
            if v.shape[0] != i.shape[0]:
                raise InvariantViolation(f"class {c}: ids do not match vectors")
            if not np.all(np.isfinite(v)):
                raise NonFiniteValue(f"class {c}: non-finite vectors")
            vecs.append(_frozen_array(v, "<f4"))
            ids.append(_frozen_array(i, "<u8"))
        object.__setattr__(self, "class_vectors", tuple(vecs))
        object.__setattr__(self, "class_ids", tuple(ids))

    @property
    def num_classes(self):
        return len(self.class_vectors)

    @property
    def class_counts(self):
        return [int(v.shape[0]) for v in self.class_vectors]


@dataclass(frozen=True)
class HierarchyTree:
    """Rooted tree over named vertices with a class-id -> vertex leaf map."""

    parent: dict            # child name -> parent name; root maps to itself
    root: str
    leaf_map: dict          # class id (int) -> vertex name

    def __post_init__(self):
        if self.root not in self.parent or self.parent[self.root] != self.root:
            raise MalformedTree("root must map to itself in the parent table")
        roots = [v for v, p in self.parent.items() if v == p]
        if len(roots) != 1:
            raise MalformedTree(f"expected exactly one root, found {roots}")
        for v in self.parent:
            # walk to the root; a revisit means a cycle, a missing parent a break
            seen = {v}
            cur = v
            while cur != self.root:
                nxt = self.parent.get(cur)
                if nxt is None:
                    raise MalformedTree(f"vertex {cur!r} has no parent entry")
                if nxt in seen:
                    raise MalformedTree(f"cycle through vertex {nxt!r}")
                seen.add(nxt)
                cur = nxt
        for cid, name in self.leaf_map.items():
            if name not in self.parent:
                raise MalformedTree(f"leaf map points class {cid} at unknown vertex {name!r}")

    def depth(self, name):
        d = 0
        cur = name
        while cur != self.root:
            cur = self.parent[cur]
            d += 1
        return d

    def ancestors(self, name):
        """Path from `name` up to and including the root."""
        path = [name]
        cur = name
        while cur != self.root:
            cur = self.parent[cur]
            path.append(cur)
        return path


# ---------------------------------------------------------------------------
# chunk helpers
# ---------------------------------------------------------------------------

def _write_file(path, blob):
    try:
        with open(path, "wb") as fh:
            fh.write(blob)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _read_file(path):
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


def _pack(magic, header: dict, payload: bytes) -> bytes:
    hdr = json.dumps(header, separators=(",", ":")).encode("utf-8")
    return magic + struct.pack("<I", len(hdr)) + hdr + payload


def _unpack(blob, magic):
    if len(blob) < 8 or blob[:4] != magic:
        raise BadMagic(f"expected magic {magic!r}, got {blob[:4]!r}")
    (hlen,) = struct.unpack("<I", blob[4:8])
    if 8 + hlen > len(blob):
        raise HeaderMismatch("declared header length exceeds file size")
    try:
        header = json.loads(blob[8 : 8 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise HeaderMismatch(f"unparseable JSON header: {exc}") from exc
    return header, blob[8 + hlen :]


def _require(header, key):
    if key not in header:
        raise HeaderMismatch(f"header missing required key {key!r}")
    return header[key]


def _extras(header, known):
    return {k: v for k, v in header.items() if k not in known}


# ---------------------------------------------------------------------------
# PDT1 dataset
# ---------------------------------------------------------------------------

_DATASET_KEYS = ("version", "n", "d", "num_classes", "dtype", "image_domain")


def dataset_to_bytes(ds: LabeledDataset) -> bytes:
    header = {
        "version": 1,
        "n": ds.n,
        "d": ds.d,
        "num_classes": int(ds.num_classes),
        "dtype": "f32",
        "image_domain": bool(ds.image_domain),
    }
    header.update(ds.meta)
    payload = ds.data.tobytes(order="C") + ds.labels.tobytes(order="C")
    return _pack(MAGIC_DATASET, header, payload)


def dataset_from_bytes(blob) -> LabeledDataset:
    header, payload = _unpack(blob, MAGIC_DATASET)
    n = int(_require(header, "n"))
    d = int(_require(header, "d"))
    if _require(header, "dtype") != "f32":
        raise HeaderMismatch(f"unsupported dtype {header['dtype']!r}")
    expect = n * d * 4 + n * 4
    if len(payload) != expect:
        raise HeaderMismatch(
            f"payload holds {len(payload)} bytes but header declares {expect}"
        )
    data = np.frombuffer(payload[: n * d * 4], dtype="<f4").reshape(n, d)
    labels = np.frombuffer(payload[n * d * 4 :], dtype="<u4")
    return LabeledDataset(
        data=data,
        labels=labels,
        num_classes=int(_require(header, "num_classes")),
        image_domain=bool(_require(header, "image_domain")),
        meta=_extras(header, _DATASET_KEYS),
    )


def save_dataset(ds: LabeledDataset, path):
    _write_file(path, dataset_to_bytes(ds))


def load_dataset(path) -> LabeledDataset:
    return dataset_from_bytes(_read_file(path))


def dataset_hash(ds: LabeledDataset) -> str:
    """SHA-256 of the canonical serialized bytes; stable across platforms."""
    return hashlib.sha256(dataset_to_bytes(ds)).hexdigest()


# ---------------------------------------------------------------------------
# PDM1 mask set
# ---------------------------------------------------------------------------

def save_masks(ms: MaskSet, path):
    header = {"version": 1, "n_masks": ms.n_masks, "d": ms.d}
    _write_file(path, _pack(MAGIC_MASKS, header, ms.masks.tobytes(order="C")))


def load_masks(path) -> MaskSet:
    header, payload = _unpack(_read_file(path), MAGIC_MASKS)
    n_masks = int(_require(header, "n_masks"))
    d = int(_require(header, "d"))
    if len(payload) != n_masks * d:
        raise HeaderMismatch(
            f"payload holds {len(payload)} bytes but header declares {n_masks * d}"
        )
    masks = np.frombuffer(payload, dtype="<u1").reshape(n_masks, d)
    return MaskSet(masks=masks)


# ---------------------------------------------------------------------------
# PDW1 weight / raw-distance matrix
# ---------------------------------------------------------------------------

def save_weights(w, path):
    """Write a C x C float matrix. Accepts WeightMatrix or a raw ndarray;
    raw matrices (e.g. externally computed class distances) need not lie in
    [0, 1]."""
    values = w.w if isinstance(w, WeightMatrix) else np.asarray(w)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise InvariantViolation(f"weight payload must be square, got {values.shape}")
    if not np.all(np.isfinite(values)):
        raise NonFiniteValue("weight payload contains NaN or Inf")
    arr = np.ascontiguousarray(values, dtype="<f4")
    header = {"version": 1, "C": int(arr.shape[0])}
    _write_file(path, _pack(MAGIC_WEIGHTS, header, arr.tobytes(order="C")))


def load_weights_raw(path) -> np.ndarray:
    """Read a PDW1 payload as a raw (C, C) float32 array, no range check."""
    header, payload = _unpack(_read_file(path), MAGIC_WEIGHTS)
    c = int(_require(header, "C"))
    if len(payload) != c * c * 4:
        raise HeaderMismatch(
            f"payload holds {len(payload)} bytes but header declares {c * c * 4}"
        )
    if not np.all(np.isfinite(np.frombuffer(payload, dtype="<f4"))):
        raise NonFiniteValue("weight payload contains NaN or Inf")
    return np.frombuffer(payload, dtype="<f4").reshape(c, c).copy()


def load_weight_matrix(path) -> WeightMatrix:
    return WeightMatrix(load_weights_raw(path))


# ---------------------------------------------------------------------------
# PDX1 representative index
# ---------------------------------------------------------------------------

def save_index(index: RepresentativeIndex, path):
    header = {
        "version": 1,
        "num_classes": index.num_classes,
        "k": int(index.k),
        "d": int(index.d),
        "beta": float(index.beta),
        "seed": int(index.seed),
        "source_dataset_hash": index.source_dataset_hash,
        "class_counts": index.class_counts,
    }
    parts = []
    for ids, vecs in zip(index.class_ids, index.class_vectors):
        parts.append(ids.tobytes(order="C"))
        parts.append(vecs.tobytes(order="C"))
    _write_file(path, _pack(MAGIC_INDEX, header, b"".join(parts)))


def load_index(path) -> RepresentativeIndex:
    header, payload = _unpack(_read_file(path), MAGIC_INDEX)
    d = int(_require(header, "d"))
    counts = _require(header, "class_counts")
    if len(counts) != int(_require(header, "num_classes")):
        raise HeaderMismatch("class_counts length disagrees with num_classes")
    expect = sum(int(c) * (8 + d * 4) for c in counts)
    if len(payload) != expect:
        raise HeaderMismatch(
            f"payload holds {len(payload)} bytes but header declares {expect}"
        )
    ids, vecs = [], []
    off = 0
    for c in counts:
        c = int(c)
        ids.append(np.frombuffer(payload[off : off + c * 8], dtype="<u8"))
        off += c * 8
        vecs.append(np.frombuffer(payload[off : off + c * d * 4], dtype="<f4").reshape(c, d))
        off += c * d * 4
    return RepresentativeIndex(
        class_vectors=tuple(vecs),
        class_ids=tuple(ids),
        k=int(_require(header, "k")),
        beta=float(_require(header, "beta")),
        seed=int(_require(header, "seed")),
        d=d,
        source_dataset_hash=str(header.get("source_dataset_hash", "")),
    )


# ---------------------------------------------------------------------------
# hierarchy text format
# ---------------------------------------------------------------------------

def save_hierarchy(tree: HierarchyTree, path):
    lines = [f"{child}\t{parent}" for child, parent in tree.parent.items()]
    lines.append("#leafmap")
    lines.extend(f"{cid}\t{name}" for cid, name in sorted(tree.leaf_map.items()))
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_hierarchy(path) -> HierarchyTree:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    parent = {}
    leaf_map = {}
    in_leafmap = False
    for lineno, line in enumerate(raw.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line == "#leafmap":
            in_leafmap = True
            continue
        fields = line.split("\t")
        if len(fields) != 2:
            raise MalformedTree(f"line {lineno}: expected two tab-separated fields")
        if in_leafmap:
            try:
                cid = int(fields[0])
            except ValueError as exc:
                raise MalformedTree(f"line {lineno}: class id must be an integer") from exc
            if cid in leaf_map:
                raise MalformedTree(f"class {cid} mapped twice in leaf map")
            leaf_map[cid] = fields[1]
        else:
            if fields[0] in parent:
                raise MalformedTree(f"vertex {fields[0]!r} has two parent entries")
            parent[fields[0]] = fields[1]
    roots = [v for v, p in parent.items() if v == p]
    if len(roots) != 1:
        raise MalformedTree(f"expected exactly one root line, found {len(roots)}")
    return HierarchyTree(parent=parent, root=roots[0], leaf_map=leaf_map)
