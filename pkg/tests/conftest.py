"""Shared test fixtures."""

from __future__ import annotations

import numpy as np
import pytest

from odx.config import AttackConfig
from odx.layers import LayerSpec
from odx.models import GeneratorModel
from odx.presets import init_random
from odx.priors import PriorSpec

NORMAL = PriorSpec("standard_normal")
UNIFORM = PriorSpec("uniform_sym")


# ---------------------------------------------------------------------------
# Model builders
# ---------------------------------------------------------------------------


def dense(w: np.ndarray, b: np.ndarray | None = None) -> LayerSpec:
    w = np.asarray(w, dtype=np.float64)
    return LayerSpec("dense", {"weight": w, "bias": np.zeros(w.shape[0]) if b is None else b})


def dense_tanh_model(w: np.ndarray, prior: PriorSpec = NORMAL) -> GeneratorModel:
    """(tanh(W z) + 1) / 2 with zero bias."""
    w = np.asarray(w, dtype=np.float64)
    return GeneratorModel(
        layers=[dense(w), LayerSpec("tanh")],
        latent_dim=w.shape[1],
        prior=prior,
        output_shape=(w.shape[0],),
    )


def linear_model(w: np.ndarray) -> GeneratorModel:
    w = np.asarray(w, dtype=np.float64)
    return GeneratorModel(
        layers=[dense(w)],
        latent_dim=w.shape[1],
        output_shape=(w.shape[0],),
        output_map="identity",
    )


def random_layer(kind: str, rng: np.random.Generator, cin: int = 2, cout: int = 3) -> LayerSpec:
    """A randomly weighted conv-family or batchnorm layer for gradient checks."""
    if kind == "conv":
        return LayerSpec(
            "conv",
            {"weight": rng.normal(0, 0.5, (cout, cin, 3, 3)), "bias": rng.normal(0, 0.1, cout)},
            stride=1,
            padding=1,
        )
    if kind == "conv_transpose":
        return LayerSpec(
            "conv_transpose",
            {"weight": rng.normal(0, 0.5, (cin, cout, 4, 4)), "bias": rng.normal(0, 0.1, cout)},
            stride=2,
            padding=1,
        )
    return LayerSpec(
        "batchnorm_inference",
        {
            "gamma": rng.uniform(0.5, 1.5, cin),
            "beta": rng.normal(0, 0.1, cin),
            "running_mean": rng.normal(0, 0.1, cin),
            "running_var": rng.uniform(0.5, 1.5, cin),
        },
    )


def small_generator(
    arch: str = "mlp",
    latent_dim: int = 8,
    prior: PriorSpec = NORMAL,
    class_count: int | None = None,
    seed: int = 0,
    shape: tuple[int, ...] = (1, 4, 4),
) -> GeneratorModel:
    return init_random(arch, latent_dim, prior, class_count, seed, shape)


def quick_config(prior: PriorSpec = NORMAL, **overrides) -> AttackConfig:
    overrides.setdefault("max_iters", 60)
    return AttackConfig.for_prior(prior, **overrides)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def mlp_model() -> GeneratorModel:
    return small_generator("mlp", latent_dim=8, seed=3)


@pytest.fixture
def dcgan_model() -> GeneratorModel:
    return small_generator("dcgan", latent_dim=6, seed=5, shape=(2, 8, 8))
