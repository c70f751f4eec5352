"""Latent search: force a fixed generator to emit a target image.

The loss is d(target, G(z[, y])) + rho(z), where rho is the weighted squared
deviation of the first k raw sample moments of z from the prior's. Adam
descends the loss; clipping projects the iterate after every update, and the
best iterate seen is returned.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.special import softmax

from odx.config import AttackConfig
from odx.errors import DimensionError, ParameterError
from odx.layers import Tensor
from odx.models import GeneratorModel, backward_input, forward
from odx.optim import Adam
from odx.priors import PriorSpec, theoretical_moment
from odx.state import SearchTracker

_LOG_FLOOR = 1e-12


@dataclass
class AttackResult:
    """Outcome of one latent search."""

    z_hat: Tensor
    x_hat: Tensor
    best_loss: float
    distance_value: float
    penalty_value: float
    trajectory: list[tuple[int, float]] = field(default_factory=list)
    y: int | None = None
    iterations_run: int = 0
    best_iteration: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "best_loss": self.best_loss,
            "distance_value": self.distance_value,
            "penalty_value": self.penalty_value,
            "iterations_run": self.iterations_run,
            "best_iteration": self.best_iteration,
            "y": self.y,
            "trajectory": [[i, loss] for i, loss in self.trajectory],
        }


# -- distances -------------------------------------------------------------


def _same_shape(a: Tensor, b: Tensor) -> tuple[Tensor, Tensor]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def _softmax(x: Tensor) -> Tensor:
    return softmax(x.ravel())


def distance_mse(a: Tensor, b: Tensor) -> float:
    a, b = _same_shape(a, b)
    return float(np.mean((a - b) ** 2))


def distance_xe(target: Tensor, generated: Tensor) -> float:
    """Cross entropy between softmaxes of the flattened images."""
    target, generated = _same_shape(target, generated)
    p = _softmax(target)
    q = np.maximum(_softmax(generated), _LOG_FLOOR)
    return float(-np.sum(p * np.log(q)))


def _distance_and_grad(kind: str, target: Tensor, generated: Tensor) -> tuple[float, Tensor]:
    """Distance value and its gradient with respect to the generated image."""
    if kind == "mse":
        diff = generated - target
        return float(np.mean(diff**2)), 2.0 * diff / diff.size
    p = _softmax(target)
    q = _softmax(generated)
    value = float(-np.sum(p * np.log(np.maximum(q, _LOG_FLOOR))))
    # softmax probabilities of [0, 1] images never reach the log floor
    return value, (q - p).reshape(generated.shape)


# -- moment penalty ----------------------------------------------------------


def _check_penalty_args(z: Tensor, k: int, omega: tuple[float, ...]) -> Tensor:
    z = np.asarray(z, dtype=np.float64).ravel()
    if z.size == 0:
        raise ParameterError("moment penalty of an empty vector")
    if len(omega) != k:
        raise ParameterError(f"omega has {len(omega)} weights, k is {k}")
    return z


def moment_penalty(z: Tensor, prior: PriorSpec, k: int, omega: tuple[float, ...]) -> float:
    z = _check_penalty_args(z, k, omega)
    total = 0.0
    for i in range(1, k + 1):
        gap = theoretical_moment(prior, i) - float(np.mean(z**i))
        total += omega[i - 1] * gap * gap
    return total


def moment_penalty_grad(
    z: Tensor, prior: PriorSpec, k: int, omega: tuple[float, ...]
) -> Tensor:
    """d rho / d z_j = sum_i omega_i * 2 (mu~(i) - mu(i)) * i z_j^(i-1) / n."""
    z = _check_penalty_args(z, k, omega)
    n = z.size
    grad = np.zeros_like(z)
    for i in range(1, k + 1):
        gap = float(np.mean(z**i)) - theoretical_moment(prior, i)
        grad += omega[i - 1] * 2.0 * gap * i * z ** (i - 1) / n
    return grad


# -- loss ----------------------------------------------------------------------


def latent_loss(
    target: Tensor,
    z: Tensor,
    model: GeneratorModel,
    cfg: AttackConfig,
    y: int | None = None,
) -> tuple[float, float, float]:
    """(loss, distance_value, penalty_value) with loss = distance + penalty."""
    generated = forward(model, z, y)
    target, generated = _same_shape(target, generated)
    d = distance_mse(target, generated) if cfg.distance == "mse" else distance_xe(target, generated)
    rho = moment_penalty(z, model.prior, cfg.k, cfg.omega)
    return d + rho, d, rho


def latent_loss_and_grad(
    target: Tensor,
    z: Tensor,
    model: GeneratorModel,
    cfg: AttackConfig,
    y: int | None = None,
) -> tuple[float, float, float, Tensor]:
    generated = forward(model, z, y)
    target, generated = _same_shape(target, generated)
    d, d_img = _distance_and_grad(cfg.distance, target, generated)
    rho = moment_penalty(z, model.prior, cfg.k, cfg.omega)
    grad = backward_input(model, z, y, d_img)
    if cfg.k:
        grad = grad + moment_penalty_grad(z, model.prior, cfg.k, cfg.omega)
    return d + rho, d, rho, grad


# -- clipping -----------------------------------------------------------------


def clip_hard(z: Tensor) -> Tensor:
    return np.clip(np.asarray(z, dtype=np.float64), -1.0, 1.0)


def clip_stochastic(z: Tensor, rng: np.random.Generator) -> Tensor:
    """Resample every coordinate outside [-1, 1] uniformly inside it."""
    z = np.array(z, dtype=np.float64)
    out = np.abs(z) > 1.0
    count = int(out.sum())
    if count:
        z[out] = rng.uniform(-1.0, 1.0, count)
    return z


def _apply_clipping(z: Tensor, mode: str, rng: np.random.Generator) -> Tensor:
    if mode == "hard":
        return clip_hard(z)
    if mode == "stochastic":
        return clip_stochastic(z, rng)
    return z


# -- search ----------------------------------------------------------------------


def search(
    model: GeneratorModel,
    target: Tensor,
    cfg: AttackConfig,
    y: int | None = None,
) -> AttackResult:
    """Adam descent on the latent loss from a prior draw seeded by cfg.seed."""
    target = np.asarray(target, dtype=np.float64)
    if target.shape != model.output_shape:
        raise DimensionError(
            f"target shape {target.shape} differs from model output {model.output_shape}"
        )
    rng = np.random.default_rng(cfg.seed)
    z = model.prior.sample(rng, model.latent_dim)
    if cfg.clipping != "none":
        z = _apply_clipping(z, cfg.clipping, rng)
    beta1, beta2, eps = cfg.adam
    opt = Adam(lr=cfg.eta, beta1=beta1, beta2=beta2, epsilon=eps)
    tracker = SearchTracker(max_iters=cfg.max_iters, record_stride=cfg.record_stride)

    while True:
        loss, d, rho, grad = latent_loss_and_grad(target, z, model, cfg, y)
        tracker.record(z, loss, d, rho)
        if tracker.is_done():
            break
        params = {"z": z}
        opt.step(params, {"z": grad})
        z = _apply_clipping(params["z"], cfg.clipping, rng)
        tracker.advance()

    z_hat = tracker.best_z
    distance, penalty = tracker.best_parts
    return AttackResult(
        z_hat=z_hat,
        x_hat=forward(model, z_hat, y),
        best_loss=distance + penalty,
        distance_value=distance,
        penalty_value=penalty,
        trajectory=tracker.trajectory(),
        y=y,
        iterations_run=tracker.iterations_run,
        best_iteration=tracker.best_iteration,
    )


def initial_latent(model: GeneratorModel, cfg: AttackConfig) -> Tensor:
    """The z_0 that search(model, ..., cfg) starts from."""
    rng = np.random.default_rng(cfg.seed)
    z = model.prior.sample(rng, model.latent_dim)
    return _apply_clipping(z, cfg.clipping, rng)


def attack_seed(base_seed: int, index: int, y: int | None = None) -> int:
    """Independent per-attack seed for batch runs."""
    words = [base_seed, index] if y is None else [base_seed, index, y + 1]
    return int(np.random.SeedSequence(words).generate_state(1, dtype=np.uint64)[0])


def with_seed(cfg: AttackConfig, seed: int) -> AttackConfig:
    return dataclasses.replace(cfg, seed=seed)


def interpolate(z_a: Tensor, z_b: Tensor, steps: int) -> list[Tensor]:
    """z(t) = (1-t) z_a + t z_b on an even grid of t from 0 to 1."""
    z_a = np.asarray(z_a, dtype=np.float64)
    z_b = np.asarray(z_b, dtype=np.float64)
    if steps < 2:
        raise ParameterError(f"interpolation needs steps >= 2, got {steps}")
    if z_a.shape != z_b.shape:
        raise DimensionError(f"latent lengths differ: {z_a.shape} vs {z_b.shape}")
    frames = [z_a.copy()]
    for s in range(1, steps - 1):
        t = s / (steps - 1)
        frames.append((1.0 - t) * z_a + t * z_b)
    frames.append(z_b.copy())
    return frames


def render_frames(model: GeneratorModel, latents: list[Tensor], y: int | None = None) -> list[Tensor]:
    """G over an interpolation path, one image per latent."""
    z = np.stack([np.asarray(v, dtype=np.float64).ravel() for v in latents])
    out, _ = model.forward_batch(z, y)
    return list(out)
