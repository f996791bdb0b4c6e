"""Tests for the phantom description format."""
from pathlib import Path

import pytest

from circmean_fbp.errors import DataFormatError
from circmean_fbp.infrastructure.phantom_spec import format_phantom_spec, load_phantom_spec, parse_phantom_spec
from circmean_fbp.services.phantoms import GaussianBlob, UniformDisk, mixed_phantom

SAMPLE = """
# two primitives
disk  -0.3 0.2 0.25 1.0
gauss 0.3 -0.1 0.1 -0.5   # negative amplitude
"""


def test_parse_sample():
    phantom = parse_phantom_spec(SAMPLE)
    assert phantom.primitives == (
        UniformDisk((-0.3, 0.2), 0.25, 1.0),
        GaussianBlob((0.3, -0.1), 0.1, -0.5),
    )


def test_empty_text_is_zero_phantom():
    assert len(parse_phantom_spec("# nothing here\n\n")) == 0


def test_format_then_parse_keeps_primitives():
    phantom = mixed_phantom(2.0)
    assert parse_phantom_spec(format_phantom_spec(phantom), r0=2.0) == phantom


def test_shipped_mixed_scene_matches_factory():
    path = Path(__file__).resolve().parents[1] / "docs" / "phantoms" / "mixed.txt"
    assert load_phantom_spec(path, r0=1.0) == mixed_phantom()


@pytest.mark.parametrize(
    ("text", "message"),
    [
        ("square 0 0 1 1", "unknown primitive"),
        ("disk 0 0 0.5", "expects 4 numbers"),
        ("gauss 0 0 x 1", "non-numeric"),
        ("disk 0 0 -0.5 1", "line 1"),
    ],
)
def test_malformed_lines(text, message):
    with pytest.raises(DataFormatError, match=message):
        parse_phantom_spec(text)


def test_support_checked_only_with_radius():
    text = "disk 0.8 0 0.5 1"
    assert len(parse_phantom_spec(text)) == 1
    with pytest.raises(DataFormatError, match="beyond R0"):
        parse_phantom_spec(text, r0=1.0)


def test_load_from_file(tmp_path):
    path = tmp_path / "scene.txt"
    path.write_text(SAMPLE, encoding="utf-8")
    assert len(load_phantom_spec(path, r0=1.0)) == 2
    with pytest.raises(DataFormatError, match="cannot read"):
        load_phantom_spec(tmp_path / "missing.txt")
