"""Measurement simulator: circular means, wave traces, Abel inversion and noise."""
from __future__ import annotations

import logging
import math
from functools import lru_cache
from typing import Literal, TypeVar

import numpy as np
from scipy.special import i0e

from ..config import get_settings
from ..errors import GridMismatchError, PreconditionError
from ..observability import timed_stage
from .grids import DetectorRing, MeansData, RadialGrid, TimeGrid, TraceKind, WaveTraceData
from .phantoms import GaussianBlob, Phantom, UniformDisk
from .quadrature import composite_rule, linear_interpolation_weights

logger = logging.getLogger(__name__)

_MODULE = "forward-models"

MIN_CIRCLE_NODES = 16

GaussianRule = Literal["trapezoid", "closed"]
DataT = TypeVar("DataT", MeansData, WaveTraceData)


def arc_fraction(distance: np.ndarray, radius: np.ndarray, disk_radius: float) -> np.ndarray:
    """Fraction of the circle |x-p| = radius inside a disk whose centre lies ``distance`` from p."""
    d, r = np.broadcast_arrays(np.asarray(distance, dtype=np.float64), np.asarray(radius, dtype=np.float64))
    a = disk_radius
    with np.errstate(divide="ignore", invalid="ignore"):
        cosine = (d * d + r * r - a * a) / (2.0 * d * r)
        partial = np.arccos(np.clip(cosine, -1.0, 1.0)) / math.pi
    covered = d + r <= a
    missed = (r >= d + a) | (d >= r + a)
    fraction = np.where(covered, 1.0, np.where(missed, 0.0, partial))
    point = np.where(d < a, 1.0, 0.0)
    return np.where(r == 0.0, point, fraction)


def disk_arc_fraction(disk: UniformDisk, p: tuple[float, float], r: float) -> float:
    """Fraction of the circle of radius r about p lying inside ``disk``."""
    if r < 0:
        raise PreconditionError(_MODULE, f"circle radius must be non-negative, got {r}")
    distance = math.hypot(p[0] - disk.center[0], p[1] - disk.center[1])
    return float(arc_fraction(np.float64(distance), np.float64(r), disk.radius))


def gaussian_circular_mean(
    blob: GaussianBlob, positions: np.ndarray, radii: np.ndarray
) -> np.ndarray:
    """Closed-form mean of an untruncated Gaussian over circles, shape (len(positions), len(radii))."""
    d = np.hypot(positions[:, 0] - blob.center[0], positions[:, 1] - blob.center[1])[:, None]
    r = radii[None, :]
    s2 = blob.sigma**2
    return blob.amplitude * np.exp(-((d - r) ** 2) / (2.0 * s2)) * i0e(d * r / s2)


def _gaussian_trapezoid(
    blob: GaussianBlob, positions: np.ndarray, radii: np.ndarray, r0: float, quad_n: int
) -> np.ndarray:
    theta = 2.0 * np.pi * np.arange(quad_n) / quad_n
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    out = np.empty((positions.shape[0], radii.size))
    for k, (px, py) in enumerate(positions):
        x1 = px + radii[:, None] * cos_t[None, :]
        x2 = py + radii[:, None] * sin_t[None, :]
        # the tail outside D is part of no phantom
        values = np.where(np.hypot(x1, x2) <= r0, blob.evaluate(x1, x2), 0.0)
        out[k] = values.mean(axis=1)
    return out


def circular_mean(
    phantom: Phantom,
    ring: DetectorRing,
    rgrid: RadialGrid,
    quad_n: int | None = None,
    gaussian_rule: GaussianRule = "trapezoid",
) -> MeansData:
    """Sample F[k, m] = (M f)(p^k, r^m).

    Disks use the closed-form arc fraction. Gaussians use a ``quad_n``-point
    periodic trapezoidal rule over each circle, or the Bessel closed form when
    ``gaussian_rule="closed"`` (which ignores the truncation at the rim).
    """
    if ring.r0 != rgrid.r0:
        raise GridMismatchError(_MODULE, f"ring R0={ring.r0} differs from radial grid R0={rgrid.r0}")
    quad_n = get_settings().circle_quad_n if quad_n is None else quad_n
    if quad_n < MIN_CIRCLE_NODES:
        raise PreconditionError(_MODULE, f"quad_n must be >= {MIN_CIRCLE_NODES}, got {quad_n}")
    if gaussian_rule not in ("trapezoid", "closed"):
        raise PreconditionError(_MODULE, f"unknown gaussian rule {gaussian_rule!r}")
    phantom.validate(ring.r0)

    positions = ring.positions
    radii = rgrid.nodes
    values = np.zeros((ring.count, rgrid.count))
    with timed_stage("circular_mean", logger, nphi=ring.count - 1, nr=rgrid.nr):
        for disk in phantom.disks:
            d = np.hypot(positions[:, 0] - disk.center[0], positions[:, 1] - disk.center[1])
            values += disk.amplitude * arc_fraction(d[:, None], radii[None, :], disk.radius)
        for blob in phantom.gaussians:
            if gaussian_rule == "closed":
                values += gaussian_circular_mean(blob, positions, radii)
            else:
                values += _gaussian_trapezoid(blob, positions, radii, ring.r0, quad_n)

    logger.info(
        "circular means simulated",
        extra={"nphi": ring.count - 1, "nr": rgrid.nr, "primitives": len(phantom), "gaussian_rule": gaussian_rule},
    )
    return MeansData(ring=ring, rgrid=rgrid, values=values)


@lru_cache(maxsize=8)
def abel_forward_weights(rgrid: RadialGrid, tgrid: TimeGrid, order: int) -> np.ndarray:
    """Matrix W with U = F @ W.T, U(t) = ∫_0^{π/2} t·sinψ·F(t·sinψ) dψ.

    Panels break at the radial nodes so each one sees a single linear piece of F.
    """
    radii = rgrid.nodes
    weights = np.zeros((tgrid.count, rgrid.count))
    for j, t in enumerate(tgrid.nodes):
        if j == 0:
            continue
        breaks = np.append(np.arcsin(radii[radii < t] / t), 0.5 * np.pi)
        psi, w = composite_rule(breaks, order)
        s = t * np.sin(psi)
        lower, upper, w_lower, w_upper = linear_interpolation_weights(s, rgrid.step, rgrid.count)
        contrib = w * s
        weights[j] = np.bincount(lower, contrib * w_lower, minlength=rgrid.count) + np.bincount(
            upper, contrib * w_upper, minlength=rgrid.count
        )
    weights.setflags(write=False)
    return weights


@lru_cache(maxsize=8)
def abel_inverse_weights(rgrid: RadialGrid, tgrid: TimeGrid, order: int) -> np.ndarray:
    """Matrix V with M = U @ V.T, M(r) = (2/π)∫_0^{π/2} u(r·sinψ) dψ."""
    times = tgrid.nodes
    weights = np.zeros((rgrid.count, tgrid.count))
    weights[0, 0] = 1.0
    for m, r in enumerate(rgrid.nodes):
        if m == 0:
            continue
        breaks = np.append(np.arcsin(times[times < r] / r), 0.5 * np.pi)
        psi, w = composite_rule(breaks, order)
        s = r * np.sin(psi)
        lower, upper, w_lower, w_upper = linear_interpolation_weights(s, tgrid.step, tgrid.count)
        weights[m] = (2.0 / np.pi) * (
            np.bincount(lower, w * w_lower, minlength=tgrid.count)
            + np.bincount(upper, w * w_upper, minlength=tgrid.count)
        )
    weights.setflags(write=False)
    return weights


def wave_trace_P(means: MeansData, tgrid: TimeGrid, order: int | None = None) -> WaveTraceData:
    """Boundary trace of the wave solution with initial data (0, f)."""
    order = get_settings().gauss_legendre_order if order is None else order
    with timed_stage("wave_trace_P", logger, nt=tgrid.nt):
        weights = abel_forward_weights(means.rgrid, tgrid, order)
        values = means.values @ weights.T
    return WaveTraceData(ring=means.ring, tgrid=tgrid, values=values, kind=TraceKind.P)


def time_derivative(values: np.ndarray, step: float) -> np.ndarray:
    """Centered differences along axis 1, second-order one-sided at both ends."""
    if values.shape[1] < 3:
        raise PreconditionError(_MODULE, "time differencing needs at least 3 time samples")
    return np.gradient(values, step, axis=1, edge_order=2)


def wave_trace_W(means: MeansData, tgrid: TimeGrid, order: int | None = None) -> WaveTraceData:
    """Boundary trace of the wave solution with initial data (f, 0), W = ∂t P."""
    trace_p = wave_trace_P(means, tgrid, order)
    values = time_derivative(trace_p.values, tgrid.step)
    return WaveTraceData(ring=means.ring, tgrid=tgrid, values=values, kind=TraceKind.W)


def abel_invert_p2m(trace: WaveTraceData, rgrid: RadialGrid, order: int | None = None) -> MeansData:
    """Recover circular means from a W-trace on [0, T_max ⊇ 2R0]."""
    if trace.kind is not TraceKind.W:
        raise PreconditionError(_MODULE, "abel inversion expects a W-trace")
    if trace.ring.r0 != rgrid.r0:
        raise GridMismatchError(_MODULE, f"trace R0={trace.ring.r0} differs from radial grid R0={rgrid.r0}")
    diameter = 2.0 * rgrid.r0
    if trace.tgrid.t_max < diameter * (1.0 - 1e-12):
        raise PreconditionError(_MODULE, f"T_max={trace.tgrid.t_max:.6g} is shorter than 2R0={diameter:.6g}")
    order = get_settings().gauss_legendre_order if order is None else order
    with timed_stage("abel_invert", logger, nr=rgrid.nr):
        weights = abel_inverse_weights(rgrid, trace.tgrid, order)
        values = trace.values @ weights.T
    return MeansData(ring=trace.ring, rgrid=rgrid, values=values)


def add_noise(data: DataT, level: float, seed: int) -> DataT:
    """Add uniform noise on [-level·max|data|, level·max|data|], drawn from a seeded generator."""
    if level < 0:
        raise PreconditionError(_MODULE, f"noise level must be non-negative, got {level}")
    if level == 0:
        return data
    rng = np.random.default_rng(seed)
    amplitude = level * float(np.max(np.abs(data.values)))
    noise = rng.uniform(-1.0, 1.0, size=data.values.shape) * amplitude
    logger.info("noise added", extra={"level": level, "seed": seed, "amplitude": amplitude})
    return data.with_values(data.values + noise)
