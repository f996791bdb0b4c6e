"""Sampling geometries and the data containers passed between pipeline stages."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ..errors import GridMismatchError, PreconditionError

_MODULE = "grids-and-data"


def _frozen(values: np.ndarray) -> np.ndarray:
    array = np.array(values, dtype=np.float64, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, slots=True)
class DetectorRing:
    """Nφ+1 detectors equally spaced on the circle S of radius R0."""

    r0: float
    count: int

    def __post_init__(self) -> None:
        if not self.r0 > 0:
            raise PreconditionError(_MODULE, f"detector radius must be positive, got {self.r0}")
        if self.count < 1:
            raise PreconditionError(_MODULE, f"detector count must be >= 1, got {self.count}")

    @property
    def step(self) -> float:
        return 2.0 * math.pi / self.count

    @property
    def angles(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.count) / self.count

    @property
    def positions(self) -> np.ndarray:
        angles = self.angles
        return self.r0 * np.stack([np.cos(angles), np.sin(angles)], axis=1)


@dataclass(frozen=True, slots=True)
class RadialGrid:
    """Radii r^m = m·h_r, m = 0..Nr, covering [0, 2R0]."""

    r0: float
    nr: int

    def __post_init__(self) -> None:
        if not self.r0 > 0:
            raise PreconditionError(_MODULE, f"R0 must be positive, got {self.r0}")
        if self.nr < 1:
            raise PreconditionError(_MODULE, f"Nr must be >= 1, got {self.nr}")

    @property
    def count(self) -> int:
        return self.nr + 1

    @property
    def step(self) -> float:
        return 2.0 * self.r0 / self.nr

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 2.0 * self.r0, self.count)


@dataclass(frozen=True, slots=True)
class TimeGrid:
    """Times t^j = j·h_t, j = 0..Nt."""

    nt: int
    step: float

    def __post_init__(self) -> None:
        if self.nt < 1:
            raise PreconditionError(_MODULE, f"Nt must be >= 1, got {self.nt}")
        if not self.step > 0:
            raise PreconditionError(_MODULE, f"time step must be positive, got {self.step}")

    @classmethod
    def covering(cls, t_max: float, nt: int) -> "TimeGrid":
        if not t_max > 0:
            raise PreconditionError(_MODULE, f"time horizon must be positive, got {t_max}")
        return cls(nt=nt, step=t_max / nt)

    @property
    def count(self) -> int:
        return self.nt + 1

    @property
    def t_max(self) -> float:
        return self.nt * self.step

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.count) * self.step


@dataclass(frozen=True, slots=True)
class ImageGrid:
    """(N+1)² Cartesian grid x^i = (−R0, −R0) + i·h_x over the square [−R0, R0]²."""

    r0: float
    n: int

    def __post_init__(self) -> None:
        if not self.r0 > 0:
            raise PreconditionError(_MODULE, f"R0 must be positive, got {self.r0}")
        if self.n < 1:
            raise PreconditionError(_MODULE, f"N must be >= 1, got {self.n}")

    @property
    def count(self) -> int:
        return self.n + 1

    @property
    def step(self) -> float:
        return 2.0 * self.r0 / self.n

    @property
    def axis(self) -> np.ndarray:
        return np.linspace(-self.r0, self.r0, self.count)

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinate arrays indexed [i1, i2]."""
        axis = self.axis
        return np.meshgrid(axis, axis, indexing="ij")

    def inside(self) -> np.ndarray:
        """Mask of grid points strictly inside the disk D."""
        x1, x2 = self.coordinates()
        return np.hypot(x1, x2) < self.r0


class TraceKind(str, Enum):
    P = "P"
    W = "W"


def _check_finite(values: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(values)):
        raise PreconditionError(_MODULE, f"{what} contains non-finite values")


@dataclass(frozen=True, slots=True)
class MeansData:
    """Circular means F[k, m] = (M f)(p^k, r^m)."""

    ring: DetectorRing
    rgrid: RadialGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        values = _frozen(self.values)
        expected = (self.ring.count, self.rgrid.count)
        if values.shape != expected:
            raise PreconditionError(_MODULE, f"means shape {values.shape} does not match grids {expected}")
        if self.ring.r0 != self.rgrid.r0:
            raise GridMismatchError(_MODULE, f"ring R0={self.ring.r0} differs from radial grid R0={self.rgrid.r0}")
        _check_finite(values, "means data")
        object.__setattr__(self, "values", values)

    def with_values(self, values: np.ndarray) -> "MeansData":
        return MeansData(ring=self.ring, rgrid=self.rgrid, values=values)


@dataclass(frozen=True, slots=True)
class WaveTraceData:
    """Boundary trace U[k, j] of the wave solution on S × [0, T_max]."""

    ring: DetectorRing
    tgrid: TimeGrid
    values: np.ndarray = field(repr=False)
    kind: TraceKind = TraceKind.P

    def __post_init__(self) -> None:
        values = _frozen(self.values)
        expected = (self.ring.count, self.tgrid.count)
        if values.shape != expected:
            raise PreconditionError(_MODULE, f"trace shape {values.shape} does not match grids {expected}")
        _check_finite(values, "trace data")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "kind", TraceKind(self.kind))

    def with_values(self, values: np.ndarray) -> "WaveTraceData":
        return WaveTraceData(ring=self.ring, tgrid=self.tgrid, values=values, kind=self.kind)


@dataclass(frozen=True, slots=True)
class ImageData:
    """Image values f^i on an ImageGrid; exactly zero outside D."""

    grid: ImageGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        values = _frozen(self.values)
        expected = (self.grid.count, self.grid.count)
        if values.shape != expected:
            raise PreconditionError(_MODULE, f"image shape {values.shape} does not match grid {expected}")
        _check_finite(values, "image data")
        if np.any(values[~self.grid.inside()] != 0.0):
            raise PreconditionError(_MODULE, "image has non-zero values outside the disk")
        object.__setattr__(self, "values", values)

    @classmethod
    def masked(cls, grid: ImageGrid, values: np.ndarray) -> "ImageData":
        """Build an image, zeroing every point outside D."""
        return cls(grid=grid, values=np.where(grid.inside(), values, 0.0))

    @classmethod
    def zeros(cls, grid: ImageGrid) -> "ImageData":
        return cls(grid=grid, values=np.zeros((grid.count, grid.count)))


def require_same_rgrid(module: str, left: RadialGrid, right: RadialGrid) -> None:
    if left != right:
        raise GridMismatchError(module, f"radial grids differ: {left} vs {right}")


def require_same_image_grid(module: str, left: ImageGrid, right: ImageGrid) -> None:
    if left != right:
        raise GridMismatchError(module, f"image grids differ: {left} vs {right}")
