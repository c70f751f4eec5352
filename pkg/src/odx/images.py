"""Binary PPM (P6) / PGM (P5) images as (C, H, W) float tensors in [0, 1]."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from odx.errors import DimensionError, FormatError
from odx.layers import Tensor
from odx.storage import atomic_write_bytes

IMAGE_SUFFIXES = (".ppm", ".pgm")
_MAGIC_CHANNELS = {b"P6": 3, b"P5": 1}


def _header_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """First count whitespace-separated header tokens and the payload offset."""
    tokens: list[bytes] = []
    pos = 0
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise FormatError("truncated image header", pos)
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates the header from the raster
    if pos >= n or not data[pos : pos + 1].isspace():
        raise FormatError("missing whitespace after image header", pos)
    return tokens, pos + 1


def decode_image(data: bytes, source: str = "<image>") -> Tensor:
    channels = _MAGIC_CHANNELS.get(data[:2])
    if channels is None:
        raise FormatError(f"{source}: not a binary PPM/PGM file", 0)
    tokens, offset = _header_tokens(data, 4)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise FormatError(f"{source}: non-numeric image header", 2) from None
    if width < 1 or height < 1:
        raise FormatError(f"{source}: empty image {width}x{height}", 2)
    if maxval != 255:
        raise FormatError(f"{source}: only maxval 255 is supported, got {maxval}", 2)
    size = width * height * channels
    if len(data) - offset < size:
        raise FormatError(f"{source}: raster is shorter than {width}x{height}", len(data))
    raster = np.frombuffer(data, dtype=np.uint8, count=size, offset=offset)
    return raster.reshape(height, width, channels).transpose(2, 0, 1).astype(np.float64) / 255.0


def encode_image(image: Tensor) -> bytes:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        img = img[None]
    if img.ndim != 3 or img.shape[0] not in (1, 3):
        raise DimensionError(f"expected a (1|3, H, W) image, got shape {img.shape}")
    c, h, w = img.shape
    raster = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8).transpose(1, 2, 0)
    magic = b"P6" if c == 3 else b"P5"
    return magic + f"\n{w} {h}\n255\n".encode("ascii") + raster.tobytes()


def read_image(path: str | Path) -> Tensor:
    path = Path(path)
    return decode_image(path.read_bytes(), str(path))


def write_image(image: Tensor, path: str | Path) -> None:
    atomic_write_bytes(Path(path), encode_image(image))


def image_files(directory: str | Path) -> list[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"image directory not found: {directory}")
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def load_image_dir(
    directory: str | Path, shape: tuple[int, ...] | None = None
) -> list[Tensor]:
    """All PPM/PGM images of a directory in file-name order, of one common shape."""
    files = image_files(directory)
    if not files:
        raise FormatError(f"no .ppm/.pgm images in {directory}")
    images: list[Tensor] = []
    expected = None if shape is None else tuple(shape)
    for path in files:
        img = read_image(path)
        if expected is None:
            expected = img.shape
        elif img.shape != expected:
            raise DimensionError(f"{path}: image shape {img.shape} differs from {tuple(expected)}")
        images.append(img)
    return images
