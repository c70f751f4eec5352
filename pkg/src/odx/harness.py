"""Batch attacks over a target set: average MSE, gate pass rates, sweeps, entropy.

Attacks run concurrently on worker threads (bounded by ``jobs``) and are
aggregated in (class, target) order, so rows do not depend on scheduling.
"""

from __future__ import annotations

import asyncio
import csv
import io
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy import stats

from odx.config import AttackConfig
from odx.errors import ConfigurationError, DimensionError, ParameterError
from odx.gate import compatible_tests, decisions_agree, gate_report, resolve_test
from odx.layers import Tensor
from odx.metrics import AttackMetric, MetricsCollector
from odx.models import GeneratorModel
from odx.priors import sample_moment, theoretical_moment
from odx.search import attack_seed, distance_mse, search, with_seed
from odx.storage import atomic_write_text, write_json, write_latents

CSV_HEADER = ("dataset", "latent_dim", "prior", "avg_mse", "test_success", "avg_mse_relaxed")


@dataclass
class AttackOutcome:
    """One attack and its penalty-free rerun from the same start."""

    index: int
    y: int | None
    z_hat: Tensor
    mse: float
    mse_relaxed: float
    accepted: bool
    accepted_relaxed: bool
    p_value: float
    agree: bool
    iterations: int
    wall_time: float


@dataclass
class EvalRow:
    dataset: str
    latent_dim: int
    prior: str
    avg_mse: float
    test_success_rate: float
    avg_mse_relaxed: float
    per_class: dict[int, dict[str, float]] | None = None
    test_success_relaxed: float = 0.0
    tests_agree: float = 1.0
    moment_bias: list[float] = field(default_factory=list)
    attacks: int = 0
    latents: list[Tensor] = field(default_factory=list, repr=False)

    def csv_row(self) -> list[str]:
        return [
            self.dataset,
            str(self.latent_dim),
            self.prior,
            repr(self.avg_mse),
            repr(self.test_success_rate),
            repr(self.avg_mse_relaxed),
        ]

    def to_dict(self) -> dict[str, Any]:
        return {
            "dataset": self.dataset,
            "latent_dim": self.latent_dim,
            "prior": self.prior,
            "avg_mse": self.avg_mse,
            "test_success_rate": self.test_success_rate,
            "avg_mse_relaxed": self.avg_mse_relaxed,
            "test_success_relaxed": self.test_success_relaxed,
            "tests_agree": self.tests_agree,
            "moment_bias": list(self.moment_bias),
            "attacks": self.attacks,
            "per_class": None
            if self.per_class is None
            else {str(y): v for y, v in sorted(self.per_class.items())},
        }


def _attack(
    model: GeneratorModel,
    target: Tensor,
    index: int,
    y: int | None,
    cfg: AttackConfig,
    alpha: float,
    test: str,
) -> AttackOutcome:
    start = time.time()
    seeded = with_seed(cfg, attack_seed(cfg.seed, index, y))
    result = search(model, target, seeded, y)
    relaxed = search(model, target, seeded.relaxed(), y)
    report = gate_report(result.z_hat, model.prior, test, alpha)
    return AttackOutcome(
        index=index,
        y=y,
        z_hat=result.z_hat,
        mse=distance_mse(target, result.x_hat),
        mse_relaxed=distance_mse(target, relaxed.x_hat),
        accepted=bool(report.accepted),
        accepted_relaxed=bool(gate_report(relaxed.z_hat, model.prior, test, alpha).accepted),
        p_value=report.p_value,
        agree=decisions_agree(result.z_hat, model.prior, alpha),
        iterations=result.iterations_run,
        wall_time=time.time() - start,
    )


def _summarize(outcomes: list[AttackOutcome]) -> dict[str, float]:
    n = len(outcomes)
    return {
        "avg_mse": sum(o.mse for o in outcomes) / n,
        "test_success_rate": sum(o.accepted for o in outcomes) / n,
        "avg_mse_relaxed": sum(o.mse_relaxed for o in outcomes) / n,
        "count": n,
    }


def moment_bias(latents: list[Tensor], model: GeneratorModel, orders: int) -> list[float]:
    """Mean (sample - theoretical) raw moment per order 1..orders over the latents."""
    return [
        float(np.mean([sample_moment(z, i) for z in latents])) - theoretical_moment(model.prior, i)
        for i in range(1, orders + 1)
    ]


def _check_targets(model: GeneratorModel, targets: list[Tensor]) -> list[Tensor]:
    if not targets:
        raise ParameterError("evaluation needs at least one target")
    out = []
    for i, t in enumerate(targets):
        t = np.asarray(t, dtype=np.float64)
        if t.shape != model.output_shape:
            raise DimensionError(f"target {i} has shape {t.shape}, model emits {model.output_shape}")
        out.append(t)
    return out


async def evaluate_async(
    model: GeneratorModel,
    targets: list[Tensor],
    cfg: AttackConfig,
    alpha: float = 0.05,
    test: str = "ad",
    jobs: int = 1,
    dataset: str = "targets",
    metrics: MetricsCollector | None = None,
) -> EvalRow:
    targets = _check_targets(model, targets)
    test = resolve_test(test)
    if test not in compatible_tests(model.prior):
        raise ConfigurationError(f"{test} is not available for the {model.prior.short_name} prior")
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    if jobs < 1:
        raise ParameterError(f"jobs must be >= 1, got {jobs}")
    classes: list[int | None] = (
        list(range(model.class_count)) if model.conditional else [None]
    )
    sem = asyncio.Semaphore(jobs)

    async def bounded(index: int, y: int | None) -> AttackOutcome:
        async with sem:
            return await asyncio.to_thread(
                _attack, model, targets[index], index, y, cfg, alpha, test
            )

    print(
        f"[harness] {dataset}: {len(targets)} targets x {len(classes)} classes, jobs={jobs}",
        file=sys.stderr,
    )
    outcomes = await asyncio.gather(
        *(bounded(i, y) for y in classes for i in range(len(targets)))
    )

    if metrics is not None:
        for o in outcomes:
            metrics.record(
                AttackMetric(
                    index=o.index,
                    y=o.y,
                    wall_time=o.wall_time,
                    iterations=o.iterations,
                    mse=o.mse,
                    mse_relaxed=o.mse_relaxed,
                    p_value=o.p_value,
                    accepted=o.accepted,
                )
            )

    total = _summarize(outcomes)
    per_class = None
    if model.conditional:
        per_class = {y: _summarize([o for o in outcomes if o.y == y]) for y in classes}
    latents = [o.z_hat for o in outcomes]
    n = len(outcomes)
    return EvalRow(
        dataset=dataset,
        latent_dim=model.latent_dim,
        prior=model.prior.short_name,
        avg_mse=total["avg_mse"],
        test_success_rate=total["test_success_rate"],
        avg_mse_relaxed=total["avg_mse_relaxed"],
        per_class=per_class,
        test_success_relaxed=sum(o.accepted_relaxed for o in outcomes) / n,
        tests_agree=sum(o.agree for o in outcomes) / n,
        moment_bias=moment_bias(latents, model, max(cfg.k, 4)),
        attacks=n,
        latents=latents,
    )


def evaluate(
    model: GeneratorModel,
    targets: list[Tensor],
    cfg: AttackConfig,
    alpha: float = 0.05,
    test: str = "ad",
    jobs: int = 1,
    dataset: str = "targets",
    metrics: MetricsCollector | None = None,
) -> EvalRow:
    return asyncio.run(evaluate_async(model, targets, cfg, alpha, test, jobs, dataset, metrics))


def sweep(
    models: list[GeneratorModel],
    targets: list[Tensor],
    cfg: AttackConfig,
    alpha: float = 0.05,
    test: str = "ad",
    jobs: int = 1,
    names: list[str] | None = None,
    metrics: MetricsCollector | None = None,
) -> list[EvalRow]:
    """One row per model over shared targets and attack budget."""
    if not models:
        raise ParameterError("sweep needs at least one model")
    names = names or [f"model{i}" for i in range(len(models))]
    if len(names) != len(models):
        raise ParameterError("sweep needs one name per model")
    return [
        evaluate(m, targets, cfg, alpha, test, jobs, name, metrics)
        for m, name in zip(models, names)
    ]


def shannon_entropy(images: list[Tensor], bins: int = 256) -> float:
    """Entropy in bits of all channel values pooled into one histogram of bins levels."""
    if not len(images):
        raise ParameterError("entropy of an empty image set")
    if bins < 1:
        raise ParameterError(f"bins must be >= 1, got {bins}")
    values = np.concatenate([np.asarray(img, dtype=np.float64).ravel() for img in images])
    levels = np.clip(np.floor(values * bins), 0, bins - 1).astype(np.int64)
    counts = np.bincount(levels, minlength=bins)
    return float(stats.entropy(counts[counts > 0], base=2))


def export_latents(vectors: list[Tensor], path: str | Path) -> None:
    write_latents(vectors, Path(path))


def rows_csv(rows: list[EvalRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(row.csv_row())
    return buf.getvalue()


def write_rows_csv(rows: list[EvalRow], path: str | Path) -> None:
    atomic_write_text(Path(path), rows_csv(rows))


def write_rows_json(
    rows: list[EvalRow], path: str | Path, config: dict[str, Any] | None = None
) -> None:
    write_json(Path(path), {"config": config or {}, "rows": [r.to_dict() for r in rows]})
