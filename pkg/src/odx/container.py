"""GTC weight container: magic, JSON manifest, raw float32 payload.

Layout: bytes 0-7 ``GTCv0001``; bytes 8-11 little-endian uint32 manifest
length L; L bytes of UTF-8 JSON; then the payload of concatenated
little-endian float32 tensors, row-major, at manifest offsets relative to the
payload start.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any

import numpy as np

from odx.errors import ConfigurationError, FormatError
from odx.layers import PARAM_NAMES, LayerSpec
from odx.models import DiscriminatorModel, GeneratorModel
from odx.priors import PriorSpec
from odx.storage import atomic_write_bytes

MAGIC = b"GTCv0001"
_HEADER = len(MAGIC) + 4


def _layer_entry(
    layer: LayerSpec, prefix: str, tensors: list[tuple[str, np.ndarray]]
) -> dict[str, Any]:
    entry = layer.hyperparameters()
    names = {}
    for pname in PARAM_NAMES.get(layer.kind, ()):
        tname = f"{prefix}.{pname}"
        names[pname] = tname
        tensors.append((tname, layer.params[pname]))
    if names:
        entry["tensors"] = names
    return entry


def _manifest(model: GeneratorModel | DiscriminatorModel) -> tuple[dict[str, Any], bytes]:
    tensors: list[tuple[str, np.ndarray]] = []
    if isinstance(model, GeneratorModel):
        manifest: dict[str, Any] = {
            "model_kind": "generator",
            "latent_dim": model.latent_dim,
            "prior": model.prior.short_name,
            "class_count": model.class_count,
            "output_shape": list(model.output_shape),
            "output_map": model.output_map,
            "layers": [
                _layer_entry(layer, f"layers.{i}", tensors)
                for i, layer in enumerate(model.layers)
            ],
        }
    else:
        manifest = {
            "model_kind": "discriminator",
            "input_shape": list(model.input_shape),
            "class_count": model.class_count,
            "layers": [
                _layer_entry(layer, f"layers.{i}", tensors)
                for i, layer in enumerate(model.layers)
            ],
            "source_head": _layer_entry(model.source_head, "source", tensors),
            "class_head": None
            if model.class_head is None
            else _layer_entry(model.class_head, "class", tensors),
        }
    entries = []
    chunks = []
    offset = 0
    for name, value in tensors:
        raw = np.ascontiguousarray(value, dtype="<f4").tobytes()
        entries.append(
            {
                "name": name,
                "shape": list(value.shape),
                "dtype": "f32",
                "offset": offset,
                "byte_length": len(raw),
            }
        )
        chunks.append(raw)
        offset += len(raw)
    manifest["tensors"] = entries
    return manifest, b"".join(chunks)


def to_bytes(model: GeneratorModel | DiscriminatorModel) -> bytes:
    manifest, payload = _manifest(model)
    text = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + struct.pack("<I", len(text)) + text + payload


def save_model(model: GeneratorModel | DiscriminatorModel, path: str | Path) -> None:
    atomic_write_bytes(Path(path), to_bytes(model))


# -- reading -------------------------------------------------------------------


def _read_tensors(manifest: dict[str, Any], payload: bytes, base: int) -> dict[str, np.ndarray]:
    entries = manifest.get("tensors")
    if not isinstance(entries, list):
        raise FormatError("manifest has no tensor list", base)
    spans = []
    out: dict[str, np.ndarray] = {}
    for e in entries:
        try:
            name, shape = e["name"], tuple(int(s) for s in e["shape"])
            offset, length = int(e["offset"]), int(e["byte_length"])
        except (KeyError, TypeError, ValueError):
            raise FormatError(f"malformed tensor entry: {e!r}", base) from None
        if e.get("dtype") != "f32":
            raise FormatError(f"tensor {name}: unsupported dtype {e.get('dtype')!r}", base + offset)
        if length != 4 * int(np.prod(shape)):
            raise FormatError(
                f"tensor {name}: byte_length {length} does not match shape {list(shape)}",
                base + offset,
            )
        if offset < 0 or offset + length > len(payload):
            raise FormatError(f"tensor {name} runs past the end of the payload", base + offset)
        spans.append((offset, offset + length, name))
        out[name] = (
            np.frombuffer(payload, dtype="<f4", count=length // 4, offset=offset)
            .astype(np.float64)
            .reshape(shape)
        )
    spans.sort()
    for (_, end, a), (start, _, b) in zip(spans, spans[1:]):
        if start < end:
            raise FormatError(f"tensors {a} and {b} overlap", base + start)
    return out


def _build_layer(entry: dict[str, Any], tensors: dict[str, np.ndarray], base: int) -> LayerSpec:
    try:
        params = {p: tensors[t] for p, t in entry.get("tensors", {}).items()}
    except KeyError as e:
        raise FormatError(f"layer references missing tensor {e}", base) from None
    try:
        return LayerSpec(
            kind=entry["kind"],
            params=params,
            stride=entry.get("stride", 1),
            padding=entry.get("padding", 0),
            eps=entry.get("eps", 1e-5),
            class_count=entry.get("class_count", 0),
            shape=tuple(entry.get("shape", ())),
            factor=entry.get("factor", 1),
        )
    except (KeyError, ConfigurationError) as e:
        raise FormatError(f"bad layer entry: {e}", base) from None


def from_bytes(data: bytes) -> GeneratorModel | DiscriminatorModel:
    if len(data) < _HEADER:
        raise FormatError("file shorter than the GTC header", len(data))
    if data[: len(MAGIC)] != MAGIC:
        raise FormatError("bad magic bytes, not a GTC container", 0)
    (length,) = struct.unpack("<I", data[len(MAGIC) : _HEADER])
    if _HEADER + length > len(data):
        raise FormatError(f"manifest length {length} exceeds file size", len(MAGIC))
    try:
        manifest = json.loads(data[_HEADER : _HEADER + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"unreadable manifest: {e}", _HEADER) from None
    base = _HEADER + length
    tensors = _read_tensors(manifest, data[base:], base)
    try:
        layers = [_build_layer(e, tensors, base) for e in manifest["layers"]]
        if manifest["model_kind"] == "generator":
            return GeneratorModel(
                layers=layers,
                latent_dim=int(manifest["latent_dim"]),
                prior=PriorSpec.named(manifest["prior"]),
                output_shape=tuple(manifest["output_shape"]),
                class_count=manifest.get("class_count"),
                output_map=manifest.get("output_map", "tanh01"),
            )
        if manifest["model_kind"] == "discriminator":
            class_head = manifest.get("class_head")
            return DiscriminatorModel(
                layers=layers,
                input_shape=tuple(manifest["input_shape"]),
                source_head=_build_layer(manifest["source_head"], tensors, base),
                class_head=None if class_head is None else _build_layer(class_head, tensors, base),
            )
    except KeyError as e:
        raise FormatError(f"manifest is missing {e}", _HEADER) from None
    except (ConfigurationError, ValueError) as e:
        if isinstance(e, FormatError):
            raise
        raise FormatError(f"manifest describes an invalid model: {e}", _HEADER) from None
    raise FormatError(f"unknown model kind {manifest.get('model_kind')!r}", _HEADER)


def load_model(path: str | Path) -> GeneratorModel | DiscriminatorModel:
    return from_bytes(Path(path).read_bytes())


def load_generator(path: str | Path) -> GeneratorModel:
    model = load_model(path)
    if not isinstance(model, GeneratorModel):
        raise FormatError(f"{path} holds a discriminator, not a generator")
    return model
