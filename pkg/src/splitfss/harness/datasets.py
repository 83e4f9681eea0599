"""Dataset loading: IDX files (MNIST/FMNIST distribution format) and a
deterministic synthetic stand-in for offline runs."""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np

from ..errors import BadMagic, TruncatedFile
from ..ring import FixedConfig, encode

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class Dataset:
    """Images encoded to fixed point, labels as plain class indices.

    Labels stay client-side; nothing here is ever serialized toward a
    server except through the protocol paths under test.
    """

    images: np.ndarray  # uint64 ring elements, [N, C, H, W]
    labels: np.ndarray  # int64 class indices, [N]
    cfg: FixedConfig
    name: str = "dataset"

    @property
    def size(self) -> int:
        return self.images.shape[0]


def _read_idx_header(raw: bytes, path: str, expect_magic: int, ndim: int):
    if len(raw) < 4 * (1 + ndim):
        raise TruncatedFile(f"{path}: header truncated")
    magic = struct.unpack_from(">I", raw, 0)[0]
    if magic != expect_magic:
        raise BadMagic(f"{path}: magic 0x{magic:08x}, expected 0x{expect_magic:08x}")
    dims = struct.unpack_from(f">{ndim}I", raw, 4)
    return dims, 4 * (1 + ndim)


def load_idx(
    images_path: str,
    labels_path: str,
    limit: int | None = None,
    cfg: FixedConfig = FixedConfig(),
    name: str = "idx",
) -> Dataset:
    """Parse big-endian IDX image/label files; pixels scaled to [0, 1]
    and encoded.  limit truncates deterministically from the front."""
    with open(images_path, "rb") as fh:
        raw = fh.read()
    (count, rows, cols), offset = _read_idx_header(raw, images_path, IDX_IMAGES_MAGIC, 3)
    need = count * rows * cols
    if len(raw) - offset < need:
        raise TruncatedFile(f"{images_path}: {len(raw) - offset} payload bytes, need {need}")
    pixels = np.frombuffer(raw, dtype=np.uint8, count=need, offset=offset)
    pixels = pixels.reshape(count, 1, rows, cols)

    with open(labels_path, "rb") as fh:
        raw = fh.read()
    (lcount,), offset = _read_idx_header(raw, labels_path, IDX_LABELS_MAGIC, 1)
    if lcount != count:
        raise TruncatedFile(f"{labels_path}: {lcount} labels for {count} images")
    if len(raw) - offset < lcount:
        raise TruncatedFile(f"{labels_path}: label payload truncated")
    labels = np.frombuffer(raw, dtype=np.uint8, count=lcount, offset=offset).astype(np.int64)

    if limit is not None:
        pixels = pixels[:limit]
        labels = labels[:limit]
    images = np.asarray(encode(pixels.astype(np.float64) / 255.0, cfg), dtype=np.uint64)
    return Dataset(images=images, labels=labels, cfg=cfg, name=name)


def load_idx_pair(data_dir: str, split: str, limit=None, cfg=FixedConfig(), name="mnist"):
    """Load <split>-images-idx3-ubyte / <split>-labels-idx1-ubyte from a
    directory (the stock MNIST/FMNIST file names, 'train' or 't10k')."""
    images = os.path.join(data_dir, f"{split}-images-idx3-ubyte")
    labels = os.path.join(data_dir, f"{split}-labels-idx1-ubyte")
    return load_idx(images, labels, limit=limit, cfg=cfg, name=name)


def gen_synthetic(
    n: int,
    shape=(1, 28, 28),
    classes: int = 10,
    seed: int = 0,
    cfg: FixedConfig = FixedConfig(),
    noise: float = 0.25,
) -> Dataset:
    """Deterministic class-separable blobs: each class has a fixed
    template in [0, 1]; samples blend template with uniform noise."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5EED]))
    templates = rng.uniform(0.0, 1.0, size=(classes, *shape))
    labels = rng.integers(0, classes, size=n)
    blend = rng.uniform(0.0, 1.0, size=(n, *shape))
    raw = (1.0 - noise) * templates[labels] + noise * blend
    images = np.asarray(encode(raw, cfg), dtype=np.uint64)
    return Dataset(images=images, labels=labels.astype(np.int64), cfg=cfg, name="synthetic")
