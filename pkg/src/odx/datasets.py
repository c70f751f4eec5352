"""Synthetic training sets of controlled pixel diversity, and image-directory datasets.

Ordered by entropy: ``flat`` (one palette colour per image) < ``stripes``
(two-colour bars) < ``texture`` (per-pixel colours from a large palette).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from odx.errors import ConfigurationError, DimensionError, ParameterError
from odx.images import image_files, load_image_dir
from odx.layers import Tensor

DATASET_KINDS = ("flat", "stripes", "texture")

# Palettes are fixed across seeds so labels mean the same thing in every dataset.
_PALETTE_SEED = 20190101
PALETTE_SIZES = {"flat": 4, "stripes": 16, "texture": 256}
CLASS_COUNTS = {"flat": 4, "stripes": 2, "texture": 4}


@dataclass
class ToyDataset:
    """Images in [0, 1] of one common shape, with optional class labels."""

    name: str
    images: list[Tensor]
    labels: list[int] | None = None
    entropy_knob: int = 0
    classes: int | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if not self.images:
            raise ParameterError(f"dataset {self.name!r} has no images")
        shape = self.images[0].shape
        for i, img in enumerate(self.images):
            if img.shape != shape:
                raise DimensionError(f"{self.name}[{i}]: shape {img.shape} differs from {shape}")
        if self.labels is not None:
            if len(self.labels) != len(self.images):
                raise ConfigurationError("labels and images differ in length")
            if self.classes is None:
                self.classes = max(self.labels) + 1
            if any(not 0 <= y < self.classes for y in self.labels):
                raise ConfigurationError(f"labels must lie in [0, {self.classes})")

    def __len__(self) -> int:
        return len(self.images)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.images[0].shape

    @property
    def class_count(self) -> int | None:
        return self.classes if self.labels is not None else None

    def stacked(self) -> Tensor:
        return np.stack(self.images)

    @classmethod
    def from_directory(cls, path: str | Path) -> ToyDataset:
        """Images directly in path, or one subdirectory per class (sorted by name)."""
        path = Path(path)
        if not path.is_dir():
            raise FileNotFoundError(f"dataset directory not found: {path}")
        class_dirs = sorted(p for p in path.iterdir() if p.is_dir() and image_files(p))
        if not class_dirs:
            return cls(path.name, load_image_dir(path))
        images: list[Tensor] = []
        labels: list[int] = []
        for label, sub in enumerate(class_dirs):
            batch = load_image_dir(sub, images[0].shape if images else None)
            images.extend(batch)
            labels.extend([label] * len(batch))
        return cls(path.name, images, labels, classes=len(class_dirs))


def _palette(size: int, channels: int) -> np.ndarray:
    rng = np.random.default_rng([_PALETTE_SEED, size, channels])
    return rng.integers(0, 256, size=(size, channels)).astype(np.float64) / 255.0


def _flat(rng: np.random.Generator, shape: tuple[int, ...]) -> tuple[Tensor, int]:
    c, h, w = shape
    palette = _palette(PALETTE_SIZES["flat"], c)
    idx = int(rng.integers(len(palette)))
    return np.broadcast_to(palette[idx][:, None, None], shape).copy(), idx


def _stripes(rng: np.random.Generator, shape: tuple[int, ...]) -> tuple[Tensor, int]:
    c, h, w = shape
    palette = _palette(PALETTE_SIZES["stripes"], c)
    a, b = rng.choice(len(palette), size=2, replace=False)
    orientation = int(rng.integers(2))
    width = int(rng.integers(1, 3))
    coord = np.arange(h)[:, None] if orientation == 0 else np.arange(w)[None, :]
    mask = np.broadcast_to((coord // width) % 2 == 0, (h, w))
    img = np.where(mask[None], palette[a][:, None, None], palette[b][:, None, None])
    return img, orientation


def _texture(rng: np.random.Generator, shape: tuple[int, ...]) -> tuple[Tensor, int]:
    c, h, w = shape
    palette = _palette(PALETTE_SIZES["texture"], c)
    groups = CLASS_COUNTS["texture"]
    group = int(rng.integers(groups))
    per_group = len(palette) // groups
    idx = rng.integers(group * per_group, (group + 1) * per_group, size=(h, w))
    return palette[idx].transpose(2, 0, 1), group


_MAKERS = {"flat": _flat, "stripes": _stripes, "texture": _texture}


def make_toy_dataset(
    kind: str,
    count: int,
    shape: tuple[int, ...] = (3, 8, 8),
    seed: int = 0,
    labeled: bool = False,
) -> ToyDataset:
    if kind not in _MAKERS:
        raise ConfigurationError(f"unknown dataset {kind!r} (expected {', '.join(DATASET_KINDS)})")
    if count < 1:
        raise ParameterError(f"dataset count must be >= 1, got {count}")
    shape = tuple(int(s) for s in shape)
    if len(shape) != 3 or min(shape) < 1:
        raise DimensionError(f"dataset shape must be (C, H, W), got {shape}")
    rng = np.random.default_rng(seed)
    images, labels = [], []
    for _ in range(count):
        img, label = _MAKERS[kind](rng, shape)
        images.append(img)
        labels.append(label)
    return ToyDataset(
        name=kind,
        images=images,
        labels=labels if labeled else None,
        entropy_knob=PALETTE_SIZES[kind],
        classes=CLASS_COUNTS[kind] if labeled else None,
    )
