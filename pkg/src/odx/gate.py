"""The defender's gate: goodness-of-fit tests of a latent vector against p_Z.

All tests are case 0 (fully specified null). Samples are mapped through the
prior's CDF (probability integral transform) and tested for uniformity, except
Shapiro-Wilk which tests normality directly and is refused for the uniform
prior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy import stats
from scipy.special import kolmogorov

from odx.errors import ConfigurationError, ParameterError, SampleSizeError
from odx.priors import PriorSpec

TESTS = ("anderson_darling", "kolmogorov_smirnov", "shapiro_wilk")
TEST_ALIASES = {
    "ad": "anderson_darling",
    "ks": "kolmogorov_smirnov",
    "sw": "shapiro_wilk",
    **{name: name for name in TESTS},
}

_CDF_CLAMP = 1e-10
_SW_MIN, _SW_MAX = 3, 5000


@dataclass
class TestReport:
    """Statistic, p-value and (optionally) the decision at a level alpha."""

    __test__ = False  # not a pytest class

    test: str
    statistic: float
    p_value: float
    n: int
    alpha: float | None = None
    accepted: bool | None = None

    def decide(self, alpha: float) -> TestReport:
        if not 0.0 < alpha < 1.0:
            raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
        self.alpha = alpha
        self.accepted = bool(self.p_value >= alpha)
        return self

    def to_dict(self) -> dict[str, Any]:
        return {
            "test": self.test,
            "statistic": float(self.statistic),
            "p_value": float(self.p_value),
            "n": self.n,
            "alpha": self.alpha,
            "accepted": self.accepted,
        }


def resolve_test(name: str) -> str:
    try:
        return TEST_ALIASES[name]
    except KeyError:
        raise ConfigurationError(f"unknown test {name!r} (expected ad, ks or sw)") from None


def compatible_tests(prior: PriorSpec) -> tuple[str, ...]:
    if prior.kind == "standard_normal":
        return TESTS
    return ("anderson_darling", "kolmogorov_smirnov")


def _as_sample(z: np.ndarray) -> np.ndarray:
    return np.asarray(z, dtype=np.float64).ravel()


# -- Anderson-Darling ---------------------------------------------------------


def _ad_asymptotic_cdf(z: float) -> float:
    """Limiting CDF of A^2 under a fully specified null (Marsaglia & Marsaglia)."""
    if z <= 0.0:
        return 0.0
    if z < 2.0:
        poly = 2.00012 + (
            0.247105 - (0.0649821 - (0.0347962 - (0.011672 - 0.00168691 * z) * z) * z) * z
        ) * z
        return math.exp(-1.2337141 / z) / math.sqrt(z) * poly
    inner = 1.0776 - (
        2.30695 - (0.43424 - (0.082433 - (0.008056 - 0.0003146 * z) * z) * z) * z
    ) * z
    return math.exp(-math.exp(inner))


def _ad_small_sample_fix(n: int, x: float) -> float:
    """Finite-n correction to the asymptotic CDF value x."""
    if x > 0.8:
        return (
            -130.2137
            + (745.2337 - (1705.091 - (1950.646 - (1116.360 - 255.7844 * x) * x) * x) * x) * x
        ) / n
    c = 0.01265 + 0.1757 / n
    if x < c:
        t = x / c
        t = math.sqrt(t) * (1.0 - t) * (49.0 * t - 102.0)
        return t * (0.0037 / (n * n) + 0.00078 / n + 0.00006) / n
    t = (x - c) / (0.8 - c)
    t = -0.00022633 + (6.54034 - (14.6538 - (14.458 - (8.259 - 1.91864 * t) * t) * t) * t) * t
    return t * (0.04213 + 0.01365 / n) / n


def anderson_darling_pvalue(a2: float, n: int) -> float:
    x = _ad_asymptotic_cdf(a2)
    cdf = x + _ad_small_sample_fix(n, x)
    return float(min(1.0, max(0.0, 1.0 - cdf)))


def anderson_darling_statistic(u: np.ndarray) -> float:
    """A^2 of sorted, clamped CDF values u."""
    n = u.size
    i = np.arange(1, n + 1)
    s = np.sum((2 * i - 1) * (np.log(u) + np.log1p(-u[::-1])))
    return float(-n - s / n)


def anderson_darling(z: np.ndarray, prior: PriorSpec) -> TestReport:
    x = _as_sample(z)
    n = x.size
    if n < 2:
        raise SampleSizeError(f"Anderson-Darling needs n >= 2, got {n}")
    u = np.clip(prior.cdf(np.sort(x)), _CDF_CLAMP, 1.0 - _CDF_CLAMP)
    a2 = anderson_darling_statistic(u)
    return TestReport("anderson_darling", a2, anderson_darling_pvalue(a2, n), n)


# -- Kolmogorov-Smirnov ---------------------------------------------------------


def ks_statistic(u: np.ndarray) -> float:
    """Two-sided D of sorted CDF values u."""
    n = u.size
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - u), np.max(u - (i - 1) / n)))


def kolmogorov_smirnov(z: np.ndarray, prior: PriorSpec) -> TestReport:
    x = _as_sample(z)
    n = x.size
    if n < 1:
        raise SampleSizeError("Kolmogorov-Smirnov needs a nonempty sample")
    d = ks_statistic(prior.cdf(np.sort(x)))
    root = math.sqrt(n)
    lam = (root + 0.12 + 0.11 / root) * d
    p = float(min(1.0, max(0.0, kolmogorov(lam))))
    return TestReport("kolmogorov_smirnov", d, p, n)


# -- Shapiro-Wilk ---------------------------------------------------------------


def shapiro_wilk(z: np.ndarray) -> TestReport:
    x = _as_sample(z)
    n = x.size
    if not _SW_MIN <= n <= _SW_MAX:
        raise SampleSizeError(f"Shapiro-Wilk needs {_SW_MIN} <= n <= {_SW_MAX}, got {n}")
    w, p = stats.shapiro(x)
    return TestReport("shapiro_wilk", float(w), float(min(1.0, max(0.0, p))), n)


# -- gate -----------------------------------------------------------------------


def run_test(test: str, z: np.ndarray, prior: PriorSpec) -> TestReport:
    test = resolve_test(test)
    if test not in compatible_tests(prior):
        raise ConfigurationError(f"{test} is not available for the {prior.short_name} prior")
    if test == "anderson_darling":
        return anderson_darling(z, prior)
    if test == "kolmogorov_smirnov":
        return kolmogorov_smirnov(z, prior)
    return shapiro_wilk(z)


def gate_report(z: np.ndarray, prior: PriorSpec, test: str, alpha: float) -> TestReport:
    return run_test(test, z, prior).decide(alpha)


def validate(z: np.ndarray, prior: PriorSpec, test: str, alpha: float) -> bool:
    """upsilon(z): True iff Pr(T >= t | H0) >= alpha."""
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    return bool(gate_report(z, prior, test, alpha).accepted)


def decisions_agree(z: np.ndarray, prior: PriorSpec, alpha: float) -> bool:
    """Whether every test available for the prior reaches the same decision."""
    decisions = {validate(z, prior, t, alpha) for t in compatible_tests(prior)}
    return len(decisions) == 1
