"""Tests for the RGF1 container."""
import numpy as np
import pytest

from circmean_fbp.errors import DataFormatError
from circmean_fbp.infrastructure.rawgrid import decode_rgf, encode_rgf, read_rgf, write_rgf
from circmean_fbp.services.grids import (
    DetectorRing,
    ImageData,
    ImageGrid,
    MeansData,
    RadialGrid,
    TimeGrid,
    TraceKind,
    WaveTraceData,
)
from circmean_fbp.services.phantoms import gaussian_phantom, sample_phantom


@pytest.fixture()
def means(rng):
    return MeansData(DetectorRing(1.5, 6), RadialGrid(1.5, 9), rng.standard_normal((6, 10)))


def test_means_header_layout(means):
    blob = encode_rgf(means)
    header, payload = blob.split(b"\n\n", 1)
    lines = header.decode("ascii").split("\n")
    assert lines[:4] == ["RGF1", "kind means", "dims 6 10", "r0 1.5"]
    assert lines[4].startswith("steps ")
    assert len(payload) == 6 * 10 * 8
    np.testing.assert_array_equal(np.frombuffer(payload, dtype="<f8").reshape(6, 10), means.values)


def test_means_decode_restores_grids(means):
    decoded = decode_rgf(encode_rgf(means))
    assert isinstance(decoded, MeansData)
    assert decoded.ring == means.ring and decoded.rgrid == means.rgrid
    np.testing.assert_array_equal(decoded.values, means.values)


def test_trace_variant_is_kept():
    trace = WaveTraceData(DetectorRing(1.0, 3), TimeGrid(nt=7, step=0.3), np.arange(24.0).reshape(3, 8), kind="W")
    blob = encode_rgf(trace)
    assert b"\nvariant W\n\n" in blob
    decoded = decode_rgf(blob)
    assert decoded.kind is TraceKind.W
    assert decoded.tgrid == trace.tgrid


def test_signed_zeros_and_extremes_survive_bit_exactly():
    values = np.array(
        [[0.0, -0.0, 5e-324, -1.7976931348623157e308], [1.0 / 3.0, -2.5, np.nextafter(1.0, 2.0), -0.0]]
    )
    trace = WaveTraceData(DetectorRing(1.0, 2), TimeGrid(nt=3, step=0.5), values, kind="P")
    decoded = decode_rgf(encode_rgf(trace))
    assert decoded.values.tobytes() == values.astype("<f8").tobytes()
    np.testing.assert_array_equal(np.signbit(decoded.values), np.signbit(values))


def test_image_written_to_disk(tmp_path):
    image = sample_phantom(gaussian_phantom(), ImageGrid(1.0, 12))
    path = tmp_path / "image.rgf"
    write_rgf(path, image)
    decoded = read_rgf(path)
    assert isinstance(decoded, ImageData)
    assert decoded.grid == image.grid
    np.testing.assert_array_equal(decoded.values, image.values)


def _tamper(blob: bytes, old: bytes, new: bytes) -> bytes:
    assert old in blob
    return blob.replace(old, new, 1)


@pytest.mark.parametrize(
    ("old", "new", "message"),
    [
        (b"RGF1", b"RGF2", "magic"),
        (b"kind means", b"kind cube", "unknown kind"),
        (b"dims 6 10", b"dims 6 11", "payload has"),
        (b"dims 6 10", b"dims six 10", "bad dims"),
        (b"r0 1.5", b"r0 nan", "not finite"),
        (b"r0 1.5", b"r0 1.5\nr0 1.5", "duplicate"),
        (b"kind means\n", b"", "'kind' missing"),
    ],
)
def test_corrupt_headers_rejected(means, old, new, message):
    with pytest.raises(DataFormatError, match=message):
        decode_rgf(_tamper(encode_rgf(means), old, new))


def test_step_mismatch_rejected(means):
    blob = encode_rgf(means)
    header, payload = blob.split(b"\n\n", 1)
    lines = header.split(b"\n")
    lines[4] = b"steps 0.5 0.5"
    with pytest.raises(DataFormatError, match="step"):
        decode_rgf(b"\n".join(lines) + b"\n\n" + payload)


def test_truncated_payload_rejected(means):
    with pytest.raises(DataFormatError, match="payload"):
        decode_rgf(encode_rgf(means)[:-8])


def test_missing_terminator_rejected():
    with pytest.raises(DataFormatError, match="blank line"):
        decode_rgf(b"RGF1\nkind means\n")


def test_bad_trace_variant_rejected():
    trace = WaveTraceData(DetectorRing(1.0, 2), TimeGrid(nt=3, step=0.5), np.zeros((2, 4)), kind="P")
    with pytest.raises(DataFormatError, match="variant"):
        decode_rgf(_tamper(encode_rgf(trace), b"variant P", b"variant Q"))


def test_non_square_image_rejected():
    image = ImageData.zeros(ImageGrid(1.0, 4))
    with pytest.raises(DataFormatError, match="square"):
        decode_rgf(_tamper(encode_rgf(image), b"dims 5 5", b"dims 1 25"))


def test_missing_file_is_a_format_error(tmp_path):
    with pytest.raises(DataFormatError, match="cannot read"):
        read_rgf(tmp_path / "absent.rgf")
