"""Adversarial training of toy MLP generator/discriminator pairs.

The discriminator step minimizes the binary cross entropy of real-vs-fake
(plus the class cross entropy of both halves for ACGAN); the generator step
uses the non-saturating loss -log D(G(z)) (plus the class cross entropy of
its samples for ACGAN).
"""

from __future__ import annotations

import sys
from typing import Any

import numpy as np
from scipy.special import expit, log_softmax, softmax

from odx.config import TrainConfig
from odx.datasets import ToyDataset
from odx.errors import ConfigurationError, DimensionError, ParameterError, TrainingDivergedError
from odx.layers import Tensor
from odx.models import DiscriminatorModel, GeneratorModel
from odx.optim import Adam
from odx.presets import build_layers, mlp_discriminator, mlp_generator_arch
from odx.priors import PriorSpec

DIVERGENCE_LIMIT = 1e6

TrainLog = list[dict[str, Any]]


def _softplus(x: Tensor) -> Tensor:
    return np.logaddexp(0.0, x)


def _class_ce(logits: Tensor, y: np.ndarray) -> tuple[float, Tensor]:
    """Mean cross entropy and its gradient with respect to the logits."""
    b = logits.shape[0]
    loss = -float(np.mean(log_softmax(logits, axis=1)[np.arange(b), y]))
    grad = softmax(logits, axis=1)
    grad[np.arange(b), y] -= 1.0
    return loss, grad / b


def _add(total: dict[str, Tensor], grads: dict[str, Tensor]) -> None:
    for k, v in grads.items():
        total[k] = total[k] + v if k in total else v


def _check(values: dict[str, float], iteration: int) -> None:
    for name, v in values.items():
        if not np.isfinite(v) or abs(v) > DIVERGENCE_LIMIT:
            raise TrainingDivergedError(f"training diverged at iteration {iteration}: {name}={v}")


def _init_models(
    shape: tuple[int, ...], cfg: TrainConfig, class_count: int | None, rng: np.random.Generator
) -> tuple[GeneratorModel, DiscriminatorModel]:
    descs = mlp_generator_arch(shape, cfg.hidden)
    if class_count:
        descs = [{"kind": "concat_onehot", "class_count": class_count}, *descs]
    gen = GeneratorModel(
        layers=build_layers(descs, (cfg.latent_dim,), rng),
        latent_dim=cfg.latent_dim,
        prior=cfg.prior_spec,
        output_shape=shape,
        class_count=class_count,
    )
    disc = mlp_discriminator(shape, cfg.hidden, rng, class_count)
    return gen, disc


def _latents(prior: PriorSpec, rng: np.random.Generator, batch: int, dim: int) -> Tensor:
    return prior.sample(rng, batch * dim).reshape(batch, dim)


def _train(
    dataset: ToyDataset,
    cfg: TrainConfig,
    class_count: int | None,
    history: TrainLog | None,
) -> tuple[GeneratorModel, DiscriminatorModel]:
    if len(dataset.shape) != 3:
        raise DimensionError(f"training images must be (C, H, W), got {dataset.shape}")
    init_seq, loop_seq = np.random.SeedSequence(cfg.seed).spawn(2)
    gen, disc = _init_models(dataset.shape, cfg, class_count, np.random.default_rng(init_seq))
    rng = np.random.default_rng(loop_seq)
    data = dataset.stacked()
    labels = None if class_count is None else np.asarray(dataset.labels, dtype=np.int64)
    b1, b2 = cfg.betas
    opt_g = Adam(lr=cfg.lr_g, beta1=b1, beta2=b2)
    opt_d = Adam(lr=cfg.lr_d, beta1=b1, beta2=b2)
    b = cfg.batch_size
    tag = "acgan" if class_count else "gan"
    print(f"[train] {tag} on {dataset.name}: {len(dataset)} images, {cfg.iterations} iterations",
          file=sys.stderr)

    for it in range(1, cfg.iterations + 1):
        idx = rng.integers(len(dataset), size=b)
        x_real = data[idx]
        y_real = None if labels is None else labels[idx]
        z = _latents(gen.prior, rng, b, gen.latent_dim)
        y_fake = None if class_count is None else rng.integers(class_count, size=b)
        x_fake, g_cache = gen.forward_batch(z, y_fake)

        # discriminator step
        s_real, c_real, cache_real = disc.forward_logits(x_real)
        s_fake, c_fake, cache_fake = disc.forward_logits(x_fake)
        l_source = float(np.mean(_softplus(-s_real)) + np.mean(_softplus(s_fake)))
        d_real_cls = d_fake_cls = None
        l_class = 0.0
        if class_count:
            ce_r, d_real_cls = _class_ce(c_real, y_real)
            ce_f, d_fake_cls = _class_ce(c_fake, y_fake)
            l_class = ce_r + ce_f
        grads: dict[str, Tensor] = {}
        _, g = disc.backward(cache_real, (expit(s_real) - 1.0) / b, d_real_cls)
        _add(grads, g)
        _, g = disc.backward(cache_fake, expit(s_fake) / b, d_fake_cls)
        _add(grads, g)
        opt_d.step(disc.parameters(), grads)

        # generator step against the updated discriminator
        s_gen, c_gen, cache_gen = disc.forward_logits(x_fake)
        l_g = float(np.mean(_softplus(-s_gen)))
        d_gen_cls = None
        if class_count:
            ce_g, d_gen_cls = _class_ce(c_gen, y_fake)
            l_g += ce_g
        dx, _ = disc.backward(cache_gen, (expit(s_gen) - 1.0) / b, d_gen_cls, need_grads=False)
        _, g_grads = gen.backward_batch(g_cache, dx)
        opt_g.step(gen.parameters(), g_grads)

        record = {"iteration": it, "L_D": l_source + l_class, "L_G": l_g}
        if class_count:
            record.update({"L_source": l_source, "L_class": l_class})
        _check(record, it)
        if it % cfg.log_every == 0 or it == cfg.iterations:
            if history is not None:
                history.append(record)
            print(f"[train] it={it:5d} L_D={record['L_D']:.4f} L_G={l_g:.4f}", file=sys.stderr)

    return gen.quantized(), disc.quantized()


def train_gan(
    dataset: ToyDataset, cfg: TrainConfig, history: TrainLog | None = None
) -> tuple[GeneratorModel, DiscriminatorModel]:
    """Unconditional GAN; log records are appended to history when given."""
    if cfg.class_count:
        raise ConfigurationError("class_count is set; use train_acgan for conditional training")
    return _train(dataset, cfg, None, history)


def train_acgan(
    dataset: ToyDataset, cfg: TrainConfig, history: TrainLog | None = None
) -> tuple[GeneratorModel, DiscriminatorModel]:
    if dataset.labels is None:
        raise ConfigurationError(f"dataset {dataset.name!r} has no labels; ACGAN needs classes")
    class_count = cfg.class_count or dataset.class_count
    if class_count != dataset.class_count:
        raise ConfigurationError(
            f"class_count {class_count} does not match the dataset's {dataset.class_count}"
        )
    if class_count < 2:
        raise ConfigurationError("ACGAN needs at least two classes")
    return _train(dataset, cfg, class_count, history)


def sample(
    model: GeneratorModel, n: int, seed: int = 0, y: int | None = None
) -> list[Tensor]:
    """n generator outputs on prior draws seeded by seed."""
    if n < 1:
        raise ParameterError(f"sample count must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    out, _ = model.forward_batch(_latents(model.prior, rng, n, model.latent_dim), y)
    return list(out)
