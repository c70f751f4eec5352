"""Seeded model construction: architecture presets, JSON architecture files, MLP pairs.

An architecture is a list of layer descriptions such as
``{"kind": "dense", "out": 64}`` or
``{"kind": "conv_transpose", "out_channels": 16, "kernel": 4, "stride": 2, "padding": 1}``.
Input sizes are inferred along the chain; weights are Glorot-uniform, biases
zero, and every tensor is rounded onto the float32 grid.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from odx.errors import ConfigurationError, DimensionError
from odx.layers import LayerSpec
from odx.models import DiscriminatorModel, GeneratorModel
from odx.priors import PriorSpec

PRESETS = ("mlp", "dcgan", "upsample")

LayerDesc = dict[str, Any]


def glorot(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _build_layer(desc: LayerDesc, shape: tuple[int, ...], rng: np.random.Generator) -> LayerSpec:
    kind = desc.get("kind")
    if kind == "dense":
        if len(shape) != 1:
            raise DimensionError(f"dense layer needs a flat input, got {shape}")
        fan_in, fan_out = shape[0], int(desc["out"])
        params = {
            "weight": glorot(rng, (fan_out, fan_in), fan_in, fan_out),
            "bias": np.zeros(fan_out),
        }
        return LayerSpec("dense", params)
    if kind in ("conv", "conv_transpose"):
        if len(shape) != 3:
            raise DimensionError(f"{kind} layer needs a (C, H, W) input, got {shape}")
        cin, cout, k = shape[0], int(desc["out_channels"]), int(desc["kernel"])
        wshape = (cout, cin, k, k) if kind == "conv" else (cin, cout, k, k)
        params = {
            "weight": glorot(rng, wshape, cin * k * k, cout * k * k),
            "bias": np.zeros(cout),
        }
        return LayerSpec(
            kind, params, stride=int(desc.get("stride", 1)), padding=int(desc.get("padding", 0))
        )
    if kind == "batchnorm_inference":
        c = shape[0]
        params = {
            "gamma": rng.uniform(0.9, 1.1, c),
            "beta": rng.uniform(-0.1, 0.1, c),
            "running_mean": rng.uniform(-0.1, 0.1, c),
            "running_var": rng.uniform(0.5, 1.5, c),
        }
        return LayerSpec(kind, params, eps=float(desc.get("eps", 1e-5)))
    if kind == "reshape":
        return LayerSpec(kind, shape=tuple(desc["shape"]))
    if kind == "upsample_nearest":
        return LayerSpec(kind, factor=int(desc.get("factor", 2)))
    if kind == "concat_onehot":
        return LayerSpec(kind, class_count=int(desc["class_count"]))
    return LayerSpec(kind)


def build_layers(
    descs: list[LayerDesc], input_shape: tuple[int, ...], rng: np.random.Generator
) -> list[LayerSpec]:
    layers = []
    shape = tuple(input_shape)
    for i, desc in enumerate(descs):
        try:
            layer = _build_layer(desc, shape, rng)
            shape = layer.output_shape(shape)
        except KeyError as e:
            raise ConfigurationError(f"layer {i} ({desc.get('kind')}): missing field {e}") from None
        except DimensionError as e:
            raise DimensionError(f"layer {i} ({desc.get('kind')}): {e}") from None
        layers.append(layer)
    return layers


def mlp_generator_arch(output_shape: tuple[int, ...], hidden: int = 64) -> list[LayerDesc]:
    return [
        {"kind": "dense", "out": hidden},
        {"kind": "relu"},
        {"kind": "dense", "out": hidden},
        {"kind": "relu"},
        {"kind": "dense", "out": int(np.prod(output_shape))},
        {"kind": "reshape", "shape": list(output_shape)},
        {"kind": "tanh"},
    ]


def dcgan_arch(output_shape: tuple[int, ...], width: int = 32) -> list[LayerDesc]:
    c, h, w = output_shape
    if h % 4 or w % 4:
        raise ConfigurationError(f"dcgan preset needs H and W divisible by 4, got {h}x{w}")
    return [
        {"kind": "dense", "out": width * (h // 4) * (w // 4)},
        {"kind": "reshape", "shape": [width, h // 4, w // 4]},
        {"kind": "batchnorm_inference"},
        {"kind": "relu"},
        {"kind": "conv_transpose", "out_channels": width // 2, "kernel": 4, "stride": 2, "padding": 1},
        {"kind": "batchnorm_inference"},
        {"kind": "relu"},
        {"kind": "conv_transpose", "out_channels": c, "kernel": 4, "stride": 2, "padding": 1},
        {"kind": "tanh"},
    ]


def upsample_arch(output_shape: tuple[int, ...], width: int = 16) -> list[LayerDesc]:
    c, h, w = output_shape
    if h % 2 or w % 2:
        raise ConfigurationError(f"upsample preset needs even H and W, got {h}x{w}")
    return [
        {"kind": "dense", "out": width * (h // 2) * (w // 2)},
        {"kind": "reshape", "shape": [width, h // 2, w // 2]},
        {"kind": "relu"},
        {"kind": "upsample_nearest", "factor": 2},
        {"kind": "conv", "out_channels": c, "kernel": 3, "stride": 1, "padding": 1},
        {"kind": "tanh"},
    ]


def preset_arch(name: str, output_shape: tuple[int, ...]) -> list[LayerDesc]:
    if name == "mlp":
        return mlp_generator_arch(output_shape)
    if name == "dcgan":
        return dcgan_arch(output_shape)
    if name == "upsample":
        return upsample_arch(output_shape)
    raise ConfigurationError(f"unknown preset {name!r} (expected one of {', '.join(PRESETS)})")


def load_arch_file(path: str | Path) -> tuple[list[LayerDesc], tuple[int, ...] | None]:
    """Layer list and optional output_shape from a JSON architecture file."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"{path}: invalid JSON: {e}") from None
    if isinstance(data, list):
        return data, None
    if not isinstance(data, dict) or not isinstance(data.get("layers"), list):
        raise ConfigurationError(f"{path}: expected a layer list or an object with 'layers'")
    shape = data.get("output_shape")
    return data["layers"], None if shape is None else tuple(int(s) for s in shape)


def init_random(
    arch: str | list[LayerDesc],
    latent_dim: int,
    prior: PriorSpec | None = None,
    class_count: int | None = None,
    seed: int = 0,
    output_shape: tuple[int, ...] = (3, 8, 8),
) -> GeneratorModel:
    """Seeded generator from a preset name, an architecture file path or a layer list."""
    prior = prior or PriorSpec()
    if isinstance(arch, str):
        if arch in PRESETS:
            descs = preset_arch(arch, tuple(output_shape))
        else:
            descs, file_shape = load_arch_file(arch)
            output_shape = file_shape or output_shape
    else:
        descs = list(arch)
    if class_count:
        descs = [{"kind": "concat_onehot", "class_count": class_count}, *descs]
    rng = np.random.default_rng(seed)
    layers = build_layers(descs, (latent_dim,), rng)
    return GeneratorModel(
        layers=layers,
        latent_dim=latent_dim,
        prior=prior,
        output_shape=tuple(output_shape),
        class_count=class_count,
    )


def mlp_discriminator(
    input_shape: tuple[int, ...],
    hidden: int,
    rng: np.random.Generator,
    class_count: int | None = None,
) -> DiscriminatorModel:
    """Flatten, two dense/relu blocks, a one-logit source head and an optional class head."""
    flat = int(np.prod(input_shape))
    trunk = build_layers(
        [
            {"kind": "reshape", "shape": [flat]},
            {"kind": "dense", "out": hidden},
            {"kind": "relu"},
            {"kind": "dense", "out": hidden},
            {"kind": "relu"},
        ],
        tuple(input_shape),
        rng,
    )
    (source,) = build_layers([{"kind": "dense", "out": 1}], (hidden,), rng)
    class_head = None
    if class_count:
        (class_head,) = build_layers([{"kind": "dense", "out": class_count}], (hidden,), rng)
    return DiscriminatorModel(trunk, tuple(input_shape), source, class_head)
