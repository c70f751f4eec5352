"""Tests for PPM/PGM image I/O and latent CSV files."""

from __future__ import annotations

import numpy as np
import pytest

from odx.errors import DimensionError, FormatError
from odx.images import decode_image, encode_image, load_image_dir, read_image, write_image
from odx.storage import read_latents, write_json, write_latents


class TestImages:
    def test_ppm_roundtrip_on_byte_grid(self, tmp_path):
        rng = np.random.default_rng(0)
        img = rng.integers(0, 256, (3, 5, 4)) / 255.0
        write_image(img, tmp_path / "a.ppm")
        np.testing.assert_allclose(read_image(tmp_path / "a.ppm"), img, atol=1e-12)

    def test_pgm_single_channel(self):
        img = np.array([[[0.0, 1.0], [0.5, 0.25]]])
        data = encode_image(img)
        assert data.startswith(b"P5")
        out = decode_image(data)
        assert out.shape == (1, 2, 2)
        assert out[0, 0, 1] == 1.0 and out[0, 0, 0] == 0.0

    def test_values_clipped_on_write(self):
        out = decode_image(encode_image(np.full((3, 1, 1), 1.7)))
        assert np.all(out == 1.0)

    def test_header_comments(self):
        data = b"P6\n# made by hand\n1 1\n255\n" + bytes([255, 0, 51])
        np.testing.assert_allclose(decode_image(data)[:, 0, 0], [1.0, 0.0, 0.2])

    def test_bad_magic(self):
        with pytest.raises(FormatError):
            decode_image(b"P3\n1 1\n255\n0 0 0")

    def test_truncated_raster(self):
        with pytest.raises(FormatError):
            decode_image(b"P6\n2 2\n255\n" + bytes(5))

    def test_unsupported_maxval(self):
        with pytest.raises(FormatError, match="maxval"):
            decode_image(b"P5\n1 1\n65535\n" + bytes(2))

    def test_bad_shape_on_encode(self):
        with pytest.raises(DimensionError):
            encode_image(np.zeros((2, 4, 4)))


class TestImageDirectory:
    def test_sorted_by_name(self, tmp_path):
        write_image(np.ones((1, 2, 2)), tmp_path / "b.pgm")
        write_image(np.zeros((1, 2, 2)), tmp_path / "a.pgm")
        (tmp_path / "notes.txt").write_text("ignored")
        images = load_image_dir(tmp_path)
        assert len(images) == 2
        assert images[0].max() == 0.0 and images[1].min() == 1.0

    def test_size_mismatch_names_file(self, tmp_path):
        write_image(np.ones((1, 2, 2)), tmp_path / "a.pgm")
        write_image(np.ones((1, 3, 3)), tmp_path / "b.pgm")
        with pytest.raises(DimensionError, match="b.pgm"):
            load_image_dir(tmp_path)

    def test_expected_shape(self, tmp_path):
        write_image(np.ones((1, 2, 2)), tmp_path / "a.pgm")
        with pytest.raises(DimensionError):
            load_image_dir(tmp_path, (3, 2, 2))

    def test_empty_directory(self, tmp_path):
        with pytest.raises(FormatError):
            load_image_dir(tmp_path)


class TestLatentFiles:
    def test_roundtrip(self, tmp_path):
        vectors = list(np.random.default_rng(3).standard_normal((4, 7)))
        write_latents(vectors, tmp_path / "z.csv")
        back = read_latents(tmp_path / "z.csv")
        assert len(back) == 4 and all(v.size == 7 for v in back)
        for a, b in zip(vectors, back):
            np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)

    def test_deterministic_bytes(self, tmp_path):
        vectors = [np.array([0.1, -2.5, 1e-300])]
        write_latents(vectors, tmp_path / "a.csv")
        write_latents(vectors, tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_unequal_lengths(self, tmp_path):
        with pytest.raises(DimensionError):
            write_latents([np.zeros(2), np.zeros(3)], tmp_path / "z.csv")

    def test_malformed_row(self, tmp_path):
        (tmp_path / "z.csv").write_text("0.1,0.2\n0.3,abc\n")
        with pytest.raises(FormatError, match=":2:"):
            read_latents(tmp_path / "z.csv")

    def test_json_carries_version(self, tmp_path):
        write_json(tmp_path / "r.json", {"b": 1, "a": 2})
        text = (tmp_path / "r.json").read_text()
        assert '"odx_version"' in text
        assert text.index('"a"') < text.index('"b"')
