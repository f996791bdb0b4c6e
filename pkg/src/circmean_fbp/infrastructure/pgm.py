"""16-bit binary PGM export with a text sidecar holding the scaling bounds."""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import DataFormatError, PreconditionError
from ..services.grids import ImageData

MAXVAL = 65535
SIDECAR_SUFFIX = ".scale"


def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + SIDECAR_SUFFIX)


def export_pgm(img: ImageData, path: str | Path) -> None:
    """Write P5 with maxval 65535, min–max scaled; a constant image maps to 0.

    Rows run from x2 = R0 down to x2 = −R0, columns along x1.
    """
    values = img.values
    if not np.all(np.isfinite(values)):
        raise PreconditionError("cli-io", "cannot export non-finite image values")
    lo, hi = float(values.min()), float(values.max())
    if hi > lo:
        levels = np.rint((values - lo) / (hi - lo) * MAXVAL)
    else:
        levels = np.zeros_like(values)
    pixels = np.ascontiguousarray(levels.T[::-1]).astype(np.int32)

    path = Path(path)
    Image.fromarray(pixels).save(path, format="PPM")
    _sidecar(path).write_text(f"min {lo!r}\nmax {hi!r}\n", encoding="ascii")


def read_pgm(path: str | Path) -> np.ndarray:
    """Values recovered from a PGM written by ``export_pgm``, indexed [i1, i2]."""
    path = Path(path)
    try:
        bounds = dict(line.split() for line in _sidecar(path).read_text(encoding="ascii").splitlines())
        lo, hi = float(bounds["min"]), float(bounds["max"])
        with Image.open(path) as handle:
            pixels = np.array(handle, dtype=np.float64)
    except (OSError, KeyError, ValueError) as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    levels = pixels[::-1].T
    return lo + levels / MAXVAL * (hi - lo)
