"""Line-oriented phantom descriptions.

    # comment
    disk  cx cy radius amplitude
    gauss cx cy sigma  amplitude
"""
from __future__ import annotations

from pathlib import Path

from ..errors import DataFormatError, PreconditionError
from ..services.phantoms import GaussianBlob, Phantom, Primitive, UniformDisk


def parse_phantom_spec(text: str, r0: float | None = None) -> Phantom:
    """Parse a phantom description; with ``r0`` the support rule is checked too."""
    primitives: list[Primitive] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        keyword, *fields = line.split()
        if keyword not in ("disk", "gauss"):
            raise DataFormatError(f"line {lineno}: unknown primitive {keyword!r}")
        if len(fields) != 4:
            raise DataFormatError(f"line {lineno}: {keyword} expects 4 numbers, got {len(fields)}")
        try:
            cx, cy, size, amplitude = (float(v) for v in fields)
        except ValueError as exc:
            raise DataFormatError(f"line {lineno}: non-numeric field in {line!r}") from exc
        try:
            if keyword == "disk":
                primitives.append(UniformDisk(center=(cx, cy), radius=size, amplitude=amplitude))
            else:
                primitives.append(GaussianBlob(center=(cx, cy), sigma=size, amplitude=amplitude))
        except PreconditionError as exc:
            raise DataFormatError(f"line {lineno}: {exc}") from exc

    phantom = Phantom(tuple(primitives))
    if r0 is not None:
        try:
            phantom.validate(r0)
        except PreconditionError as exc:
            raise DataFormatError(str(exc)) from exc
    return phantom


def format_phantom_spec(phantom: Phantom) -> str:
    lines = []
    for primitive in phantom.primitives:
        cx, cy = primitive.center
        if isinstance(primitive, UniformDisk):
            lines.append(f"disk {cx!r} {cy!r} {primitive.radius!r} {primitive.amplitude!r}")
        else:
            lines.append(f"gauss {cx!r} {cy!r} {primitive.sigma!r} {primitive.amplitude!r}")
    return "\n".join(lines) + "\n"


def load_phantom_spec(path: str | Path, r0: float | None = None) -> Phantom:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    return parse_phantom_spec(text, r0=r0)
