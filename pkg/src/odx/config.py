"""Attack and training configuration, with defaults taken from the attack protocol."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass
from typing import Any

from odx.errors import ConfigurationError
from odx.priors import PriorSpec

DISTANCES = ("mse", "xe")
CLIPPINGS = ("none", "hard", "stochastic")

DEFAULT_LR = 0.01
DEFAULT_ALPHA = 0.05
DEFAULT_ITERS = 2000
DEFAULT_TEST = "ad"
# Penalized moments per prior: 4 for the normal prior, 6 for the uniform one.
DEFAULT_K = {"standard_normal": 4, "uniform_sym": 6}

JOBS_ENV = "ODX_JOBS"


def _from_dict(cls: type, data: dict[str, Any]) -> Any:
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigurationError(f"unknown {cls.__name__} keys: {', '.join(unknown)}")
    return cls(**data)


@dataclass
class AttackConfig:
    """Hyperparameters of one latent search."""

    distance: str = "mse"
    k: int = 4
    omega: tuple[float, ...] = (1.0, 1.0, 1.0, 1.0)
    eta: float = DEFAULT_LR
    max_iters: int = DEFAULT_ITERS
    clipping: str = "none"
    seed: int = 0
    adam: tuple[float, float, float] = (0.9, 0.999, 1e-8)
    record_stride: int = 10

    def __post_init__(self) -> None:
        self.omega = tuple(float(w) for w in self.omega)
        self.adam = tuple(float(a) for a in self.adam)  # type: ignore[assignment]
        self.validate()

    def validate(self) -> None:
        if self.distance not in DISTANCES:
            raise ConfigurationError(f"distance must be one of {DISTANCES}, got {self.distance!r}")
        if self.clipping not in CLIPPINGS:
            raise ConfigurationError(f"clipping must be one of {CLIPPINGS}, got {self.clipping!r}")
        if self.k < 0:
            raise ConfigurationError(f"k must be >= 0, got {self.k}")
        if len(self.omega) != self.k:
            raise ConfigurationError(f"omega has {len(self.omega)} weights, k is {self.k}")
        if any(w < 0 for w in self.omega):
            raise ConfigurationError("omega weights must be >= 0")
        if not self.eta > 0:
            raise ConfigurationError(f"eta must be > 0, got {self.eta}")
        if self.max_iters < 0:
            raise ConfigurationError(f"max_iters must be >= 0, got {self.max_iters}")
        if len(self.adam) != 3:
            raise ConfigurationError("adam takes (beta1, beta2, epsilon)")
        if self.record_stride < 1:
            raise ConfigurationError("record_stride must be >= 1")

    @classmethod
    def for_prior(cls, prior: PriorSpec, **overrides: Any) -> AttackConfig:
        """Protocol defaults for a prior: k/omega per prior, hard clipping iff uniform."""
        k = overrides.pop("k", DEFAULT_K[prior.kind])
        omega = overrides.pop("omega", (1.0,) * k)
        clipping = overrides.pop("clipping", "hard" if prior.kind == "uniform_sym" else "none")
        return cls(k=k, omega=omega, clipping=clipping, **overrides)

    def relaxed(self) -> AttackConfig:
        """Same search with the moment penalty fully disabled."""
        return dataclasses.replace(self, k=0, omega=())

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["omega"] = list(self.omega)
        d["adam"] = list(self.adam)
        return d

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> AttackConfig:
        return _from_dict(cls, data)


@dataclass
class TrainConfig:
    """Adversarial training run of a toy MLP generator/discriminator pair."""

    iterations: int = 2000
    batch_size: int = 32
    lr_g: float = 2e-3
    lr_d: float = 2e-3
    latent_dim: int = 16
    prior: str = "normal"
    seed: int = 0
    class_count: int | None = None
    hidden: int = 64
    log_every: int = 50
    betas: tuple[float, float] = (0.5, 0.999)

    def __post_init__(self) -> None:
        self.betas = tuple(float(b) for b in self.betas)  # type: ignore[assignment]
        self.validate()

    def validate(self) -> None:
        for name in ("batch_size", "latent_dim", "hidden", "log_every"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if self.iterations < 0:
            raise ConfigurationError("iterations must be >= 0")
        if not (self.lr_g > 0 and self.lr_d > 0):
            raise ConfigurationError("learning rates must be > 0")
        if self.class_count is not None and self.class_count < 2:
            raise ConfigurationError("class_count must be >= 2 for conditional training")
        self.prior_spec  # validates the prior name

    @property
    def prior_spec(self) -> PriorSpec:
        return PriorSpec.named(self.prior)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["betas"] = list(self.betas)
        return d

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> TrainConfig:
        return _from_dict(cls, data)


def default_jobs() -> int:
    """Parallel attack count from ODX_JOBS (set in the shell or .env), else 1."""
    raw = os.environ.get(JOBS_ENV, "").strip()
    if not raw:
        return 1
    try:
        jobs = int(raw)
    except ValueError:
        raise ConfigurationError(f"{JOBS_ENV} must be an integer, got {raw!r}") from None
    if jobs < 1:
        raise ConfigurationError(f"{JOBS_ENV} must be >= 1, got {jobs}")
    return jobs
