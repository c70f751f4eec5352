"""Tests for batch evaluation, sweeps, and image entropy."""

from __future__ import annotations

import numpy as np
import pytest

from odx.config import AttackConfig, TrainConfig
from odx.datasets import make_toy_dataset
from odx.errors import ConfigurationError, DimensionError, ParameterError
from odx.gate import validate
from odx.harness import (
    CSV_HEADER,
    evaluate,
    evaluate_async,
    export_latents,
    rows_csv,
    shannon_entropy,
    sweep,
    write_rows_json,
)
from odx.metrics import MetricsCollector
from odx.models import forward
from odx.search import attack_seed, distance_mse, initial_latent, search, with_seed
from odx.storage import read_latents
from odx.train import train_gan

from tests.conftest import NORMAL, UNIFORM, linear_model, quick_config, small_generator


def _targets(model, n: int, seed: int = 0) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    return [rng.uniform(0, 1, model.output_shape) for _ in range(n)]


class TestEvaluate:
    def test_matches_individual_searches(self, mlp_model):
        cfg = quick_config(max_iters=20)
        targets = _targets(mlp_model, 3)
        row = evaluate(mlp_model, targets, cfg)
        mses = []
        for i, t in enumerate(targets):
            result = search(mlp_model, t, with_seed(cfg, attack_seed(cfg.seed, i)))
            mses.append(distance_mse(t, result.x_hat))
        assert row.avg_mse == pytest.approx(sum(mses) / 3, abs=1e-12)
        assert row.attacks == 3 and len(row.latents) == 3

    def test_zero_iterations_on_own_outputs(self, mlp_model):
        cfg = quick_config(max_iters=0)
        targets = [
            forward(mlp_model, initial_latent(mlp_model, with_seed(cfg, attack_seed(cfg.seed, i))))
            for i in range(2)
        ]
        row = evaluate(mlp_model, targets, cfg)
        assert row.avg_mse == 0.0 and row.avg_mse_relaxed == 0.0

    def test_success_rate_matches_revalidation(self, mlp_model):
        row = evaluate(mlp_model, _targets(mlp_model, 4), quick_config(), alpha=0.05)
        revalidated = sum(validate(z, mlp_model.prior, "ad", 0.05) for z in row.latents) / 4
        assert row.test_success_rate == revalidated
        assert 0.0 <= row.tests_agree <= 1.0
        assert len(row.moment_bias) == 4

    def test_jobs_do_not_change_rows(self, mlp_model):
        targets = _targets(mlp_model, 4)
        a = evaluate(mlp_model, targets, quick_config(), jobs=1)
        b = evaluate(mlp_model, targets, quick_config(), jobs=3)
        assert a.to_dict() == b.to_dict()
        for za, zb in zip(a.latents, b.latents):
            assert np.array_equal(za, zb)

    def test_per_class_rows_average_to_total(self):
        model = small_generator("mlp", 6, class_count=3, seed=1)
        row = evaluate(model, _targets(model, 2), quick_config(max_iters=15))
        assert row.attacks == 6 and set(row.per_class) == {0, 1, 2}
        total = sum(c["avg_mse"] * c["count"] for c in row.per_class.values()) / row.attacks
        assert row.avg_mse == pytest.approx(total, abs=1e-12)
        rate = sum(c["test_success_rate"] * c["count"] for c in row.per_class.values()) / row.attacks
        assert row.test_success_rate == pytest.approx(rate, abs=1e-12)

    def test_classes_attacked_alike(self):
        model = small_generator("mlp", 64, class_count=3, seed=2)
        row = evaluate(model, _targets(model, 100, seed=4), AttackConfig.for_prior(NORMAL), jobs=4)
        mses = sorted(c["avg_mse"] for c in row.per_class.values())
        assert mses[-1] <= 2.0 * mses[1]
        for summary in row.per_class.values():
            assert summary["count"] == 100
            assert summary["test_success_rate"] >= 0.99

    def test_metrics_recorded(self, mlp_model, capsys):
        metrics = MetricsCollector(label="unit")
        evaluate(mlp_model, _targets(mlp_model, 2), quick_config(max_iters=5), metrics=metrics)
        assert len(metrics.attacks) == 2
        assert metrics.accepted + metrics.rejected == 2
        assert "[harness]" in capsys.readouterr().err

    def test_bad_inputs(self, mlp_model):
        cfg = quick_config()
        with pytest.raises(ParameterError):
            evaluate(mlp_model, [], cfg)
        with pytest.raises(DimensionError):
            evaluate(mlp_model, [np.zeros((3, 4, 4))], cfg)
        with pytest.raises(ParameterError):
            evaluate(mlp_model, _targets(mlp_model, 1), cfg, jobs=0)
        uniform = small_generator("mlp", 8, UNIFORM)
        with pytest.raises(ConfigurationError):
            evaluate(uniform, _targets(uniform, 1), quick_config(UNIFORM), test="sw")

    @pytest.mark.asyncio
    async def test_async_entry_point(self, mlp_model):
        row = await evaluate_async(mlp_model, _targets(mlp_model, 2), quick_config(max_iters=5), jobs=2)
        assert row.attacks == 2 and row.prior == "normal"

    def test_larger_latent_fits_better(self):
        rng = np.random.default_rng(11)
        targets = [rng.normal(0, 1, 48) for _ in range(4)]
        mses = []
        for dim in (4, 16, 64):
            model = linear_model(rng.normal(0, 1 / np.sqrt(dim), (48, dim)))
            row = evaluate(model, targets, quick_config(max_iters=400, eta=0.05))
            mses.append(row.avg_mse_relaxed)
        assert mses[0] > mses[1] > mses[2]


def _trained(kind: str, latent_dim: int):
    data = make_toy_dataset(kind, 512, shape=(1, 8, 8), seed=0)
    cfg = TrainConfig(iterations=300, batch_size=32, latent_dim=latent_dim, hidden=128, seed=0)
    gen, _ = train_gan(data, cfg)
    return gen, data


class TestTrends:
    """Attack error on out-domain noise targets for small trained generators."""

    def test_error_falls_with_latent_dim(self):
        models = [_trained("texture", d)[0] for d in (16, 64, 256)]
        rows = sweep(models, _targets(models[0], 8, seed=21), quick_config(max_iters=300), jobs=4)
        mses = [r.avg_mse for r in rows]
        assert mses[0] > mses[1] > mses[2], mses

    def test_error_falls_with_training_entropy(self):
        trained = [_trained(kind, 64) for kind in ("flat", "stripes", "texture")]
        bits = [shannon_entropy(data.images) for _, data in trained]
        assert bits[0] < bits[1] < bits[2]
        models = [gen for gen, _ in trained]
        rows = sweep(
            models,
            _targets(models[0], 8, seed=22),
            quick_config(max_iters=300),
            names=["flat", "stripes", "texture"],
            jobs=4,
        )
        mses = [r.avg_mse for r in rows]
        assert mses[0] > mses[1] > mses[2], mses


class TestSweep:
    def test_one_row_per_model(self):
        models = [small_generator("mlp", d, seed=d) for d in (4, 8)]
        targets = _targets(models[0], 2)
        rows = sweep(models, targets, quick_config(max_iters=5), names=["a", "b"])
        assert [r.dataset for r in rows] == ["a", "b"]
        assert [r.latent_dim for r in rows] == [4, 8]

    def test_single_model(self, mlp_model):
        rows = sweep([mlp_model], _targets(mlp_model, 1), quick_config(max_iters=3))
        assert len(rows) == 1 and rows[0].dataset == "model0"

    def test_empty_and_name_mismatch(self, mlp_model):
        with pytest.raises(ParameterError):
            sweep([], _targets(mlp_model, 1), quick_config())
        with pytest.raises(ParameterError):
            sweep([mlp_model], _targets(mlp_model, 1), quick_config(), names=["a", "b"])


class TestExports:
    def test_csv_header_and_rows(self, mlp_model):
        row = evaluate(mlp_model, _targets(mlp_model, 1), quick_config(max_iters=3), dataset="flat")
        lines = rows_csv([row]).splitlines()
        assert lines[0] == ",".join(CSV_HEADER)
        assert lines[1].startswith("flat,8,normal,")

    def test_latents_and_json(self, tmp_path, mlp_model):
        row = evaluate(mlp_model, _targets(mlp_model, 2), quick_config(max_iters=3))
        export_latents(row.latents, tmp_path / "z.csv")
        back = read_latents(tmp_path / "z.csv")
        assert len(back) == 2 and back[0].size == 8
        write_rows_json([row], tmp_path / "rows.json", {"alpha": 0.05})
        text = (tmp_path / "rows.json").read_text()
        assert '"rows"' in text and '"alpha"' in text


class TestEntropy:
    def test_constant_images(self):
        assert shannon_entropy([np.zeros((3, 4, 4))]) == 0.0

    def test_two_levels(self):
        img = np.zeros((1, 2, 2))
        img[0, 0, :] = 1.0
        assert shannon_entropy([img]) == pytest.approx(1.0, abs=1e-12)

    def test_all_byte_levels(self):
        img = (np.arange(256) / 255.0).reshape(1, 16, 16)
        assert shannon_entropy([img]) == pytest.approx(8.0, abs=1e-12)

    def test_empty(self):
        with pytest.raises(ParameterError):
            shannon_entropy([])
