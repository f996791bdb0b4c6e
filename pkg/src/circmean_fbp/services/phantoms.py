"""Analytic phantoms: superpositions of uniform disks and Gaussian blobs."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from ..errors import PreconditionError, SupportError
from .grids import ImageData, ImageGrid

_MODULE = "grids-and-data"

# Relative slack on the support checks so primitives touching the rim pass.
_SUPPORT_RTOL = 1e-12

GAUSSIAN_SUPPORT_SIGMAS = 4.0


@dataclass(frozen=True, slots=True)
class UniformDisk:
    center: tuple[float, float]
    radius: float
    amplitude: float = 1.0

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise PreconditionError(_MODULE, f"disk radius must be positive, got {self.radius}")

    @property
    def extent(self) -> float:
        return math.hypot(*self.center) + self.radius

    def evaluate(self, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        inside = np.hypot(x1 - self.center[0], x2 - self.center[1]) < self.radius
        return np.where(inside, self.amplitude, 0.0)


@dataclass(frozen=True, slots=True)
class GaussianBlob:
    center: tuple[float, float]
    sigma: float
    amplitude: float = 1.0

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise PreconditionError(_MODULE, f"gaussian sigma must be positive, got {self.sigma}")

    @property
    def extent(self) -> float:
        return math.hypot(*self.center) + GAUSSIAN_SUPPORT_SIGMAS * self.sigma

    def evaluate(self, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        dist2 = (x1 - self.center[0]) ** 2 + (x2 - self.center[1]) ** 2
        return self.amplitude * np.exp(-dist2 / (2.0 * self.sigma**2))


Primitive = Union[UniformDisk, GaussianBlob]


@dataclass(frozen=True, slots=True)
class Phantom:
    """Scene f as a sum of primitives; the empty phantom is f = 0."""

    primitives: tuple[Primitive, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "primitives", tuple(self.primitives))

    def __add__(self, other: "Phantom") -> "Phantom":
        return Phantom(self.primitives + other.primitives)

    def __len__(self) -> int:
        return len(self.primitives)

    @property
    def disks(self) -> list[UniformDisk]:
        return [p for p in self.primitives if isinstance(p, UniformDisk)]

    @property
    def gaussians(self) -> list[GaussianBlob]:
        return [p for p in self.primitives if isinstance(p, GaussianBlob)]

    @property
    def is_smooth(self) -> bool:
        """True when no indicator functions are present."""
        return not self.disks

    def scaled(self, factor: float) -> "Phantom":
        """Same scene with every amplitude multiplied by ``factor``."""
        rescaled: list[Primitive] = []
        for primitive in self.primitives:
            if isinstance(primitive, UniformDisk):
                rescaled.append(UniformDisk(primitive.center, primitive.radius, primitive.amplitude * factor))
            else:
                rescaled.append(GaussianBlob(primitive.center, primitive.sigma, primitive.amplitude * factor))
        return Phantom(tuple(rescaled))

    def validate(self, r0: float) -> None:
        """Raise SupportError if any primitive leaves the disk of radius r0."""
        limit = r0 * (1.0 + _SUPPORT_RTOL)
        for index, primitive in enumerate(self.primitives):
            if primitive.extent > limit:
                kind = "disk" if isinstance(primitive, UniformDisk) else "gaussian"
                raise SupportError(
                    _MODULE,
                    f"{kind} #{index} reaches radius {primitive.extent:.6g} beyond R0={r0:.6g}",
                )

    def evaluate(self, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        total = np.zeros(np.broadcast(x1, x2).shape)
        for primitive in self.primitives:
            total = total + primitive.evaluate(x1, x2)
        return total


def sample_phantom(phantom: Phantom, grid: ImageGrid) -> ImageData:
    """Pointwise samples f(x^i) on the image grid, zero outside D."""
    phantom.validate(grid.r0)
    x1, x2 = grid.coordinates()
    return ImageData.masked(grid, phantom.evaluate(x1, x2))


def gaussian_phantom(r0: float = 1.0) -> Phantom:
    """Single off-centre Gaussian whose tail at the rim is below 1e-7."""
    return Phantom((GaussianBlob(center=(0.1 * r0, -0.05 * r0), sigma=0.15 * r0, amplitude=1.0),))


def concentric_disk_phantom(r0: float = 1.0) -> Phantom:
    return Phantom((UniformDisk(center=(0.0, 0.0), radius=0.5 * r0, amplitude=1.0),))


def mixed_phantom(r0: float = 1.0) -> Phantom:
    """Large disk with two offset inner disks and one Gaussian kernel."""
    return Phantom(
        (
            UniformDisk(center=(0.0, 0.0), radius=0.8 * r0, amplitude=1.0),
            UniformDisk(center=(-0.25 * r0, 0.2 * r0), radius=0.3 * r0, amplitude=0.3),
            UniformDisk(center=(0.3 * r0, -0.15 * r0), radius=0.2 * r0, amplitude=-0.3),
            GaussianBlob(center=(0.2 * r0, 0.35 * r0), sigma=0.08 * r0, amplitude=0.8),
        )
    )
