"""Tests for the GTC model container."""

from __future__ import annotations

import json
import struct

import numpy as np
import pytest

from odx.container import MAGIC, from_bytes, load_generator, load_model, save_model, to_bytes
from odx.errors import FormatError
from odx.models import DiscriminatorModel, GeneratorModel, forward
from odx.presets import mlp_discriminator

from tests.conftest import UNIFORM, dense_tanh_model, small_generator


def _split(data: bytes) -> tuple[dict, bytes]:
    (length,) = struct.unpack("<I", data[8:12])
    return json.loads(data[12 : 12 + length]), data[12 + length :]


def _join(manifest: dict, payload: bytes) -> bytes:
    text = json.dumps(manifest).encode("utf-8")
    return MAGIC + struct.pack("<I", len(text)) + text + payload


class TestRoundTrip:
    @pytest.mark.parametrize("arch", ["mlp", "dcgan", "upsample"])
    def test_generator_outputs_bit_identical(self, tmp_path, arch):
        model = small_generator(arch, 6, UNIFORM, seed=2, shape=(3, 8, 8))
        path = tmp_path / "g.gtc"
        save_model(model, path)
        loaded = load_generator(path)
        assert isinstance(loaded, GeneratorModel)
        assert loaded.prior == UNIFORM and loaded.latent_dim == 6
        z = np.random.default_rng(0).uniform(-1, 1, 6)
        assert np.array_equal(forward(model, z), forward(loaded, z))

    def test_conditional_generator(self, tmp_path):
        model = small_generator("mlp", 4, class_count=3, seed=1)
        save_model(model, tmp_path / "c.gtc")
        loaded = load_generator(tmp_path / "c.gtc")
        assert loaded.class_count == 3
        z = np.ones(4)
        assert np.array_equal(forward(model, z, 2), forward(loaded, z, 2))

    def test_discriminator(self, tmp_path):
        rng = np.random.default_rng(0)
        disc = mlp_discriminator((1, 4, 4), 8, rng, class_count=2).quantized()
        save_model(disc, tmp_path / "d.gtc")
        loaded = load_model(tmp_path / "d.gtc")
        assert isinstance(loaded, DiscriminatorModel)
        x = rng.uniform(0, 1, (2, 1, 4, 4))
        src_a, cls_a = disc.forward(x)
        src_b, cls_b = loaded.forward(x)
        assert np.array_equal(src_a, src_b) and np.array_equal(cls_a, cls_b)

    def test_hand_built_float64_weights(self):
        model = dense_tanh_model(np.array([[0.1, 0.2], [0.3, -0.7]]))
        loaded = from_bytes(to_bytes(model))
        z = np.array([0.37, -1.1])
        assert np.array_equal(forward(model, z), forward(loaded, z))

    def test_bytes_deterministic(self):
        model = small_generator("dcgan", 6, seed=4, shape=(2, 8, 8))
        assert to_bytes(model) == to_bytes(model)

    def test_manifest_fields(self):
        manifest, payload = _split(to_bytes(small_generator("mlp", 5, seed=0)))
        assert manifest["model_kind"] == "generator"
        assert manifest["prior"] == "normal"
        entry = manifest["tensors"][0]
        assert set(entry) == {"name", "shape", "dtype", "offset", "byte_length"}
        assert entry["dtype"] == "f32"
        assert sum(e["byte_length"] for e in manifest["tensors"]) == len(payload)


class TestCorruption:
    def test_bad_magic(self):
        data = bytearray(to_bytes(small_generator()))
        data[:8] = b"NOTAGTC!"
        with pytest.raises(FormatError) as exc:
            from_bytes(bytes(data))
        assert exc.value.offset == 0

    def test_truncated_payload(self):
        data = to_bytes(small_generator())
        with pytest.raises(FormatError, match="past the end"):
            from_bytes(data[:-4])

    def test_short_file(self):
        with pytest.raises(FormatError):
            from_bytes(MAGIC)

    def test_manifest_length_beyond_file(self):
        data = bytearray(to_bytes(small_generator()))
        data[8:12] = struct.pack("<I", 10**9)
        with pytest.raises(FormatError, match="exceeds"):
            from_bytes(bytes(data))

    def test_length_shape_mismatch(self):
        manifest, payload = _split(to_bytes(small_generator()))
        manifest["tensors"][0]["shape"] = [1, 1]
        with pytest.raises(FormatError, match="does not match shape"):
            from_bytes(_join(manifest, payload))

    def test_overlapping_tensors(self):
        manifest, payload = _split(to_bytes(small_generator()))
        second = manifest["tensors"][1]
        first = manifest["tensors"][0]
        if second["byte_length"] <= first["byte_length"]:
            second["offset"] = first["offset"]
        else:
            first["offset"] = second["offset"]
        with pytest.raises(FormatError, match="overlap"):
            from_bytes(_join(manifest, payload))

    def test_discriminator_is_not_a_generator(self, tmp_path):
        disc = mlp_discriminator((1, 4, 4), 8, np.random.default_rng(0))
        save_model(disc, tmp_path / "d.gtc")
        with pytest.raises(FormatError, match="discriminator"):
            load_generator(tmp_path / "d.gtc")
