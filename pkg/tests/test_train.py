"""Tests for toy datasets and adversarial training."""

from __future__ import annotations

import numpy as np
import pytest

from odx.config import TrainConfig
from odx.datasets import ToyDataset, make_toy_dataset
from odx.errors import ConfigurationError, ParameterError
from odx.harness import shannon_entropy
from odx.images import write_image
from odx.train import _init_models, sample, train_acgan, train_gan


class TestToyDatasets:
    def test_entropy_ordering(self):
        bits = [
            shannon_entropy(make_toy_dataset(kind, 256, seed=0).images)
            for kind in ("flat", "stripes", "texture")
        ]
        assert bits[1] - bits[0] > 0.5
        assert bits[2] - bits[1] > 0.5

    def test_entropy_ignores_image_and_pixel_order(self):
        images = make_toy_dataset("texture", 12, shape=(3, 4, 4), seed=4).images
        rng = np.random.default_rng(0)
        shuffled = [images[i] for i in rng.permutation(len(images))]
        scrambled = [rng.permutation(img.ravel()).reshape(img.shape) for img in shuffled]
        bits = shannon_entropy(images)
        assert shannon_entropy(shuffled) == pytest.approx(bits, abs=1e-12)
        assert shannon_entropy(scrambled) == pytest.approx(bits, abs=1e-12)

    def test_seeded(self):
        a = make_toy_dataset("stripes", 20, seed=3)
        b = make_toy_dataset("stripes", 20, seed=3)
        assert all(np.array_equal(x, y) for x, y in zip(a.images, b.images))

    @pytest.mark.parametrize("kind", ["flat", "stripes", "texture"])
    def test_values_in_unit_interval(self, kind):
        data = make_toy_dataset(kind, 30, shape=(3, 6, 6), seed=1, labeled=True)
        stacked = data.stacked()
        assert stacked.shape == (30, 3, 6, 6)
        assert stacked.min() >= 0.0 and stacked.max() <= 1.0
        assert all(0 <= y < data.class_count for y in data.labels)

    def test_flat_images_are_single_colour(self):
        for img in make_toy_dataset("flat", 10, seed=2).images:
            assert np.all(img == img[:, :1, :1])

    def test_zero_count(self):
        with pytest.raises(ParameterError):
            make_toy_dataset("flat", 0)

    def test_unknown_kind(self):
        with pytest.raises(ConfigurationError):
            make_toy_dataset("clouds", 4)

    def test_from_directory_with_classes(self, tmp_path):
        for label in ("a", "b"):
            (tmp_path / label).mkdir()
            for i in range(3):
                write_image(np.full((3, 4, 4), 0.1 * i), tmp_path / label / f"{i}.ppm")
        data = ToyDataset.from_directory(tmp_path)
        assert len(data) == 6 and data.class_count == 2
        assert data.labels == [0, 0, 0, 1, 1, 1]

    def test_from_directory_flat(self, tmp_path):
        write_image(np.zeros((1, 2, 2)), tmp_path / "x.pgm")
        data = ToyDataset.from_directory(tmp_path)
        assert data.labels is None and data.shape == (1, 2, 2)


class TestTrainGan:
    def test_zero_iterations_returns_initial_models(self):
        data = make_toy_dataset("flat", 16, shape=(1, 4, 4))
        cfg = TrainConfig(iterations=0, latent_dim=4, hidden=8, seed=5)
        gen, disc = train_gan(data, cfg)
        init_seq, _ = np.random.SeedSequence(cfg.seed).spawn(2)
        gen0, disc0 = _init_models(data.shape, cfg, None, np.random.default_rng(init_seq))
        for trained, initial in ((gen, gen0), (disc, disc0)):
            params, expected = trained.parameters(), initial.parameters()
            assert set(params) == set(expected)
            for k, v in expected.items():
                assert np.array_equal(params[k], v), k
        assert gen.latent_dim == 4 and gen.layers[0].params["weight"].shape[1] == 4

    def test_losses_finite_and_logged(self, capsys):
        data = make_toy_dataset("flat", 64, shape=(1, 4, 4))
        cfg = TrainConfig(iterations=30, batch_size=8, latent_dim=4, hidden=16, log_every=10)
        history: list[dict] = []
        gen, _ = train_gan(data, cfg, history)
        assert [r["iteration"] for r in history] == [10, 20, 30]
        assert all(np.isfinite(r["L_D"]) and np.isfinite(r["L_G"]) for r in history)
        assert "[train]" in capsys.readouterr().err
        out = sample(gen, 5, seed=0)
        assert all(x.min() >= 0.0 and x.max() <= 1.0 for x in out)

    def test_seeded_training(self):
        data = make_toy_dataset("stripes", 32, shape=(1, 4, 4))
        cfg = TrainConfig(iterations=10, batch_size=8, latent_dim=4, hidden=8, seed=2)
        g1, _ = train_gan(data, cfg)
        g2, _ = train_gan(data, cfg)
        for k, v in g1.parameters().items():
            assert np.array_equal(v, g2.parameters()[k])

    def test_samples_track_flat_dataset(self):
        data = make_toy_dataset("flat", 256, shape=(3, 4, 4), seed=0)
        cfg = TrainConfig(iterations=1000, batch_size=32, latent_dim=8, hidden=32, seed=0)
        gen, _ = train_gan(data, cfg)
        images = np.stack(sample(gen, 1024, seed=1))
        got = images.mean(axis=(0, 2, 3))
        want = data.stacked().mean(axis=(0, 2, 3))
        assert np.all(np.abs(got - want) <= 0.15), (got, want)

    def test_rejects_class_count(self):
        data = make_toy_dataset("flat", 8, labeled=True)
        with pytest.raises(ConfigurationError):
            train_gan(data, TrainConfig(iterations=0, class_count=4))


class TestTrainAcgan:
    def test_conditional_generator_shape(self):
        data = make_toy_dataset("flat", 32, shape=(1, 4, 4), labeled=True)
        cfg = TrainConfig(iterations=0, latent_dim=6, hidden=8)
        gen, disc = train_acgan(data, cfg)
        assert gen.class_count == 4 and gen.layers[1].params["weight"].shape[1] == 10
        assert disc.class_count == 4

    def test_needs_labels(self):
        with pytest.raises(ConfigurationError):
            train_acgan(make_toy_dataset("flat", 8), TrainConfig(iterations=0))

    def test_class_count_must_match(self):
        data = make_toy_dataset("flat", 8, labeled=True)
        with pytest.raises(ConfigurationError):
            train_acgan(data, TrainConfig(iterations=0, class_count=3))

    def test_losses_finite(self):
        data = make_toy_dataset("stripes", 64, shape=(1, 4, 4), labeled=True)
        cfg = TrainConfig(iterations=20, batch_size=8, latent_dim=4, hidden=16, log_every=5)
        history: list[dict] = []
        train_acgan(data, cfg, history)
        assert len(history) == 4
        for r in history:
            assert all(np.isfinite(r[k]) for k in ("L_D", "L_G", "L_source", "L_class"))

    def test_class_conditional_samples(self):
        data = make_toy_dataset("flat", 256, shape=(3, 4, 4), seed=0, labeled=True)
        cfg = TrainConfig(iterations=600, batch_size=32, latent_dim=8, hidden=32, seed=0)
        gen, _ = train_acgan(data, cfg)
        stacked = data.stacked().reshape(len(data), -1)
        labels = np.array(data.labels)
        centroids = np.stack([stacked[labels == c].mean(axis=0) for c in range(4)])
        correct = total = 0
        for y in range(4):
            images = np.stack(sample(gen, 64, seed=10 + y, y=y)).reshape(64, -1)
            dists = ((images[:, None, :] - centroids[None]) ** 2).sum(axis=2)
            correct += int(np.sum(dists.argmin(axis=1) == y))
            total += 64
        assert correct / total >= 0.7


class TestSample:
    def test_seeded(self, mlp_model):
        a = sample(mlp_model, 3, seed=4)
        b = sample(mlp_model, 3, seed=4)
        assert all(np.array_equal(x, y) for x, y in zip(a, b))

    def test_count(self, mlp_model):
        with pytest.raises(ParameterError):
            sample(mlp_model, 0)
