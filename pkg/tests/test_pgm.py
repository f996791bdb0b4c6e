"""Tests for the 16-bit PGM export."""
import numpy as np
import pytest

from circmean_fbp.errors import DataFormatError
from circmean_fbp.infrastructure.pgm import MAXVAL, export_pgm, read_pgm
from circmean_fbp.services.grids import ImageData, ImageGrid
from circmean_fbp.services.phantoms import mixed_phantom, sample_phantom


def test_header_and_big_endian_payload(tmp_path):
    grid = ImageGrid(1.0, 4)
    values = np.zeros((5, 5))
    values[2, 3] = 2.0
    values[1, 2] = -1.0
    path = tmp_path / "tiny.pgm"
    export_pgm(ImageData(grid, values), path)

    blob = path.read_bytes()
    header = b"P5\n5 5\n65535\n"
    assert blob.startswith(header)
    pixels = np.frombuffer(blob[len(header) :], dtype=">u2").reshape(5, 5)
    # top row is x2 = R0, columns run along x1
    expected = np.rint((values - values.min()) / (values.max() - values.min()) * MAXVAL).T[::-1]
    np.testing.assert_array_equal(pixels, expected)
    assert (tmp_path / "tiny.pgm.scale").read_text() == "min -1.0\nmax 2.0\n"


def test_round_trip_within_quantization(tmp_path):
    image = sample_phantom(mixed_phantom(), ImageGrid(1.0, 40))
    path = tmp_path / "phantom.pgm"
    export_pgm(image, path)
    span = image.values.max() - image.values.min()
    np.testing.assert_allclose(read_pgm(path), image.values, atol=span / MAXVAL)


def test_constant_image_maps_to_zero(tmp_path):
    path = tmp_path / "flat.pgm"
    export_pgm(ImageData.zeros(ImageGrid(1.0, 6)), path)
    assert not np.any(read_pgm(path))
    assert set(path.read_bytes()[len(b"P5\n7 7\n65535\n") :]) == {0}


def test_missing_sidecar(tmp_path):
    path = tmp_path / "lonely.pgm"
    export_pgm(ImageData.zeros(ImageGrid(1.0, 2)), path)
    (tmp_path / "lonely.pgm.scale").unlink()
    with pytest.raises(DataFormatError):
        read_pgm(path)
