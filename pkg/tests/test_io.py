import math

import numpy as np
import pytest

from tomoprior.geometry import ImageGrid, ParallelGeometry, Sinogram
from tomoprior.io import (
    DataFileError,
    load_image,
    load_image_any,
    load_sinogram,
    save_image,
    save_sinogram,
)


class TestImageFiles:
    def test_round_trip(self, tmp_path):
        img = ImageGrid(np.random.default_rng(0).random((32, 32)), pixel_size=0.5)
        path = tmp_path / "img.tpi"
        save_image(img, path)
        back = load_image(path)
        assert back.side == 32
        assert back.pixel_size == pytest.approx(0.5, rel=1e-6)
        assert np.allclose(back.values, img.values, atol=1e-6)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "img.tpi"
        save_image(ImageGrid(np.zeros((8, 8))), path)
        data = bytearray(path.read_bytes())
        data[:4] = b"NOPE"
        path.write_bytes(bytes(data))
        with pytest.raises(DataFileError):
            load_image(path)

    def test_truncated(self, tmp_path):
        path = tmp_path / "img.tpi"
        save_image(ImageGrid(np.zeros((8, 8))), path)
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(DataFileError):
            load_image(path)

    def test_load_any_accepts_npy(self, tmp_path):
        arr = np.random.default_rng(1).random((16, 16))
        path = tmp_path / "img.npy"
        np.save(path, arr)
        img = load_image_any(path)
        assert np.allclose(img.values, arr)


class TestSinogramFiles:
    def test_round_trip_with_limited_angle(self, tmp_path):
        geom = ParallelGeometry(num_views=12, num_detectors=20,
                                angular_range=math.radians(140))
        sino = Sinogram(geom, np.random.default_rng(2).random((12, 20)))
        path = tmp_path / "scan.tps"
        save_sinogram(sino, path)
        back = load_sinogram(path)
        assert back.geometry.num_views == 12
        assert back.geometry.num_detectors == 20
        assert back.geometry.angular_range == pytest.approx(math.radians(140),
                                                            rel=1e-6)
        assert np.allclose(back.values, sino.values, atol=1e-6)

    def test_full_half_turn_survives_float32_header(self, tmp_path):
        geom = ParallelGeometry(num_views=10, num_detectors=12)
        path = tmp_path / "scan.tps"
        save_sinogram(Sinogram(geom, np.zeros((10, 12))), path)
        back = load_sinogram(path)
        assert back.geometry.angular_range == pytest.approx(math.pi, rel=1e-6)

    def test_bad_payload_size(self, tmp_path):
        geom = ParallelGeometry(num_views=4, num_detectors=6)
        path = tmp_path / "scan.tps"
        save_sinogram(Sinogram(geom, np.zeros((4, 6))), path)
        path.write_bytes(path.read_bytes() + b"\x00\x00")
        with pytest.raises(DataFileError):
            load_sinogram(path)
