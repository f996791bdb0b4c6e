"""RGF1 raw grid files: a text header followed by little-endian float64 values."""
from __future__ import annotations

import math
from pathlib import Path
from typing import Union

import numpy as np

from ..errors import DataFormatError, PreconditionError
from ..services.grids import (
    DetectorRing,
    ImageData,
    ImageGrid,
    MeansData,
    RadialGrid,
    TimeGrid,
    TraceKind,
    WaveTraceData,
)

MAGIC = "RGF1"
PAYLOAD_DTYPE = np.dtype("<f8")

GridData = Union[MeansData, WaveTraceData, ImageData]


def _header(data: GridData) -> list[str]:
    if isinstance(data, MeansData):
        kind, r0 = "means", data.ring.r0
        steps = (data.ring.step, data.rgrid.step)
    elif isinstance(data, WaveTraceData):
        kind, r0 = "trace", data.ring.r0
        steps = (data.ring.step, data.tgrid.step)
    elif isinstance(data, ImageData):
        kind, r0 = "image", data.grid.r0
        steps = (data.grid.step, data.grid.step)
    else:
        raise TypeError(f"cannot encode {type(data).__name__}")
    rows, cols = data.values.shape
    lines = [MAGIC, f"kind {kind}", f"dims {rows} {cols}", f"r0 {r0!r}", f"steps {steps[0]!r} {steps[1]!r}"]
    if isinstance(data, WaveTraceData):
        lines.append(f"variant {data.kind.value}")
    return lines


def encode_rgf(data: GridData) -> bytes:
    header = "\n".join(_header(data)) + "\n\n"
    payload = np.ascontiguousarray(data.values, dtype=PAYLOAD_DTYPE).tobytes(order="C")
    return header.encode("ascii") + payload


def _parse_header(text: str) -> dict[str, list[str]]:
    lines = text.split("\n")
    if not lines or lines[0] != MAGIC:
        raise DataFormatError(f"missing {MAGIC} magic line")
    fields: dict[str, list[str]] = {}
    for line in lines[1:]:
        if not line.strip():
            raise DataFormatError("blank line inside header")
        key, *values = line.split()
        if key in fields:
            raise DataFormatError(f"duplicate header field {key!r}")
        fields[key] = values
    for required in ("kind", "dims", "r0", "steps"):
        if required not in fields:
            raise DataFormatError(f"header field {required!r} missing")
    return fields


def _floats(fields: dict[str, list[str]], key: str, count: int) -> list[float]:
    values = fields[key]
    if len(values) != count:
        raise DataFormatError(f"header field {key!r} expects {count} values, got {len(values)}")
    try:
        parsed = [float(v) for v in values]
    except ValueError as exc:
        raise DataFormatError(f"header field {key!r} is not numeric: {values}") from exc
    if not all(math.isfinite(v) for v in parsed):
        raise DataFormatError(f"header field {key!r} is not finite: {values}")
    return parsed


def _check_step(label: str, declared: float, derived: float) -> None:
    if not math.isclose(declared, derived, rel_tol=1e-12):
        raise DataFormatError(f"{label} step {declared!r} does not match the grid ({derived!r})")


def decode_rgf(blob: bytes) -> GridData:
    split = blob.find(b"\n\n")
    if split < 0:
        raise DataFormatError("header is not terminated by a blank line")
    try:
        text = blob[:split].decode("ascii")
    except UnicodeDecodeError as exc:
        raise DataFormatError("header is not ASCII") from exc
    fields = _parse_header(text)
    payload = blob[split + 2 :]

    kind = " ".join(fields["kind"])
    try:
        rows, cols = (int(v) for v in fields["dims"])
    except ValueError as exc:
        raise DataFormatError(f"bad dims {fields['dims']}") from exc
    if rows < 1 or cols < 2:
        raise DataFormatError(f"bad dims {rows} x {cols}")
    (r0,) = _floats(fields, "r0", 1)
    step_a, step_b = _floats(fields, "steps", 2)

    expected = rows * cols * PAYLOAD_DTYPE.itemsize
    if len(payload) != expected:
        raise DataFormatError(f"payload has {len(payload)} bytes, header declares {expected}")
    values = np.frombuffer(payload, dtype=PAYLOAD_DTYPE).reshape(rows, cols).astype(np.float64)

    try:
        if kind == "means":
            ring = DetectorRing(r0=r0, count=rows)
            rgrid = RadialGrid(r0=r0, nr=cols - 1)
            _check_step("angular", step_a, ring.step)
            _check_step("radial", step_b, rgrid.step)
            return MeansData(ring=ring, rgrid=rgrid, values=values)
        if kind == "trace":
            variant = fields.get("variant", ["P"])
            if len(variant) != 1 or variant[0] not in ("P", "W"):
                raise DataFormatError(f"bad trace variant {variant}")
            ring = DetectorRing(r0=r0, count=rows)
            _check_step("angular", step_a, ring.step)
            tgrid = TimeGrid(nt=cols - 1, step=step_b)
            return WaveTraceData(ring=ring, tgrid=tgrid, values=values, kind=TraceKind(variant[0]))
        if kind == "image":
            if rows != cols:
                raise DataFormatError(f"image must be square, got {rows} x {cols}")
            grid = ImageGrid(r0=r0, n=rows - 1)
            _check_step("image", step_a, grid.step)
            return ImageData(grid=grid, values=values)
    except PreconditionError as exc:
        raise DataFormatError(f"invalid {kind} file: {exc}") from exc
    raise DataFormatError(f"unknown kind {kind!r}")


def write_rgf(path: str | Path, data: GridData) -> None:
    Path(path).write_bytes(encode_rgf(data))


def read_rgf(path: str | Path) -> GridData:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    return decode_rgf(blob)
