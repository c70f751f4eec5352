"""Latent priors p_Z: sampling, null CDFs and closed-form raw moments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import factorial2, ndtr

from odx.errors import ConfigurationError, ParameterError, UnsupportedMomentError

# Highest raw moment order served by theoretical_moment for either prior.
MAX_MOMENT_ORDER = 16

PRIOR_KINDS = ("standard_normal", "uniform_sym")

# Short names accepted on the command line and stored in GTC manifests.
_ALIASES = {
    "normal": "standard_normal",
    "standard_normal": "standard_normal",
    "uniform": "uniform_sym",
    "uniform_sym": "uniform_sym",
}


@dataclass(frozen=True)
class PriorSpec:
    """The distribution generator inputs are legitimately drawn from."""

    kind: str = "standard_normal"

    def __post_init__(self) -> None:
        if self.kind not in PRIOR_KINDS:
            raise ConfigurationError(f"unknown prior kind: {self.kind!r}")

    @classmethod
    def named(cls, name: str) -> PriorSpec:
        try:
            return cls(_ALIASES[name])
        except KeyError:
            raise ConfigurationError(
                f"unknown prior {name!r} (expected one of: normal, uniform)"
            ) from None

    @property
    def short_name(self) -> str:
        return "normal" if self.kind == "standard_normal" else "uniform"

    def cdf(self, x: np.ndarray) -> np.ndarray:
        """Null CDF F: Phi for the normal prior, (x+1)/2 clamped for uniform."""
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "standard_normal":
            return ndtr(x)
        return np.clip((x + 1.0) / 2.0, 0.0, 1.0)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "standard_normal":
            return rng.standard_normal(n)
        return rng.uniform(-1.0, 1.0, n)


def theoretical_moment(prior: PriorSpec, i: int) -> float:
    """E[Z^i] under the prior, from the derivatives of its MGF at zero."""
    if i < 1:
        raise ParameterError(f"moment order must be >= 1, got {i}")
    if i > MAX_MOMENT_ORDER:
        raise UnsupportedMomentError(
            f"moment order {i} exceeds the supported maximum {MAX_MOMENT_ORDER}"
        )
    if i % 2 == 1:
        return 0.0
    if prior.kind == "standard_normal":
        # (i-1)!! for even i
        return float(factorial2(i - 1, exact=True))
    return 1.0 / (i + 1)


def sample_moment(z: np.ndarray, i: int) -> float:
    """Raw sample moment (1/n) sum_j z_j^i."""
    z = np.asarray(z, dtype=np.float64).ravel()
    if z.size == 0:
        raise ParameterError("sample moment of an empty vector")
    if i < 1:
        raise ParameterError(f"moment order must be >= 1, got {i}")
    return float(np.mean(z**i))
