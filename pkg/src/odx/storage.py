"""Artifact files: atomic writes, deterministic JSON, latent-vector CSV."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Any

import numpy as np

from odx import __version__
from odx.errors import DimensionError, FormatError


def atomic_write_bytes(path: Path, data: bytes) -> None:
    """Write via a temp file in the target directory, then rename over path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def dump_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def write_json(path: Path, data: dict[str, Any]) -> None:
    """Write a report; every report carries the odx version string."""
    atomic_write_text(path, dump_json({"odx_version": __version__, **data}))


def format_latents(vectors: list[np.ndarray]) -> str:
    rows = [np.asarray(v, dtype=np.float64).ravel() for v in vectors]
    if rows and any(r.size != rows[0].size for r in rows):
        raise DimensionError("latent vectors have different lengths")
    # repr of a Python float is the shortest string that parses back exactly
    return "".join(",".join(repr(float(x)) for x in r) + "\n" for r in rows)


def write_latents(vectors: list[np.ndarray], path: Path) -> None:
    try:
        atomic_write_text(Path(path), format_latents(vectors))
    except OSError as e:
        raise OSError(f"cannot write latents to {path}: {e.strerror or e}") from e


def parse_latents(text: str, source: str = "<csv>") -> list[np.ndarray]:
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            rows.append(np.array([float(tok) for tok in line.split(",")], dtype=np.float64))
        except ValueError:
            raise FormatError(f"{source}:{lineno}: not a row of decimal floats") from None
    if rows and any(r.size != rows[0].size for r in rows):
        raise FormatError(f"{source}: rows have different lengths")
    return rows


def read_latents(path: Path) -> list[np.ndarray]:
    path = Path(path)
    return parse_latents(path.read_text(encoding="utf-8"), str(path))
