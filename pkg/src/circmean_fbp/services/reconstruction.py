"""Filtered back-projection pipelines.

Scale constants, given that ``back_project`` averages over detectors (which is
(1/2πR0)∫_S … ds(p) for the trapezoidal rule):

* mlap, minv, hilbert, filbac: 1 (the 1/(2πR0) prefactor is the average).
* wavefinite: 2/π, since 1/(R0π²)·∫_S ds = (2πR0)/(R0π²) = 2/π times the average.
* adjoint-p, adjoint-w: −2/R0 on top of ``adjoint_P_star``, which already
  carries the factor R0 of its detector integral.
"""
from __future__ import annotations

import logging
import math
import time
from enum import Enum

import numpy as np
from pydantic import BaseModel, Field, model_validator

from ..config import get_settings
from ..errors import GridMismatchError, PreconditionError
from .forward import circular_mean, time_derivative, wave_trace_P, wave_trace_W
from .grids import (
    DetectorRing,
    ImageData,
    ImageGrid,
    MeansData,
    RadialGrid,
    TimeGrid,
    TraceKind,
    WaveTraceData,
)
from .operators import (
    SPLINE_MARGIN,
    adjoint_P_star,
    back_project,
    back_project_profiles,
    cached_kernel_table,
    discrete_laplacian,
    log_convolve_I,
    log_convolve_profiles,
    pv_convolve_hilbert,
    radial_derivative,
    radial_filter_D,
    radial_filter_filbac,
    smooth_profiles,
    wave_kernel_K,
)
from .phantoms import Phantom

logger = logging.getLogger(__name__)

_MODULE = "reconstructors"

# c_n = (−1)^{(n−2)/2}·2·((n−2)/2)!·π^{n/2} at n = 2
C2 = 2.0 * math.pi

# ∫_S ds = c_2·R0, so 1/(R0·π²)·∫_S … ds is c_2/π² times the detector average
WAVEFINITE_SCALE = C2 / math.pi**2


class ReconMethod(str, Enum):
    MLAP = "mlap"
    MINV = "minv"
    HILBERT = "hilbert"
    FILBAC = "filbac"
    WAVEFINITE = "wavefinite"
    ADJOINT_P = "adjoint-p"
    ADJOINT_W = "adjoint-w"

    @property
    def data_kind(self) -> str:
        if self is ReconMethod.WAVEFINITE:
            return "traceW"
        if self in (ReconMethod.ADJOINT_P, ReconMethod.ADJOINT_W):
            return "traceP"
        return "means"

    @property
    def is_adjoint(self) -> bool:
        return self in (ReconMethod.ADJOINT_P, ReconMethod.ADJOINT_W)


class ReconConfig(BaseModel):
    method: ReconMethod
    r0: float = Field(default=1.0, gt=0)
    # adjoint methods: use trace samples with t <= t_max only
    t_max: float | None = Field(default=None, gt=0)
    gauss_legendre_order: int = Field(default_factory=lambda: get_settings().gauss_legendre_order, ge=2, le=16)
    interp_order: int = Field(default_factory=lambda: get_settings().laplacian_interp_order)
    nr: int | None = Field(default=None, ge=2)
    workers: int | None = Field(default=None, ge=1)
    # standard deviation, in samples, of a Gaussian applied along r or t before filtering
    smoothing: float = Field(default_factory=lambda: get_settings().data_smoothing, ge=0.0)

    @model_validator(mode="after")
    def _check_method_preconditions(self) -> "ReconConfig":
        if self.interp_order not in (1, 3):
            raise ValueError(f"interp_order must be 1 or 3, got {self.interp_order}")
        if self.method.is_adjoint and self.t_max is not None and self.t_max < 2.0 * self.r0:
            raise ValueError(f"{self.method.value} needs t_max >= 2*r0, got {self.t_max}")
        return self


def _check_ring(ring: DetectorRing, igrid: ImageGrid) -> None:
    if ring.r0 != igrid.r0:
        raise GridMismatchError(_MODULE, f"data R0={ring.r0} differs from image grid R0={igrid.r0}")


def recon_minv(means: MeansData, igrid: ImageGrid, *, workers: int | None = None) -> ImageData:
    """f ≈ B_d(I_d(D_d F))."""
    _check_ring(means.ring, igrid)
    filtered = log_convolve_I(radial_filter_D(means), cached_kernel_table(means.rgrid))
    return back_project(filtered, igrid, order=1, workers=workers)


def recon_mlap(
    means: MeansData, igrid: ImageGrid, *, interp_order: int | None = None, workers: int | None = None
) -> ImageData:
    """f ≈ Δ_d B(I_d(r·F)).

    The convolved profile is evaluated SPLINE_MARGIN nodes past 2R0, so the
    interpolant near |x − p| = 2R0 follows the true profile.
    """
    _check_ring(means.ring, igrid)
    interp_order = get_settings().laplacian_interp_order if interp_order is None else interp_order
    rgrid = means.rgrid
    table = cached_kernel_table(rgrid, SPLINE_MARGIN)
    profiles = log_convolve_profiles(rgrid.nodes * means.values, table)
    image = back_project_profiles(profiles, rgrid.step, means.ring, igrid, order=interp_order, workers=workers)
    return discrete_laplacian(image)


def recon_hilbert(means: MeansData, igrid: ImageGrid, *, workers: int | None = None) -> ImageData:
    _check_ring(means.ring, igrid)
    weighted = means.with_values(means.rgrid.nodes * radial_derivative(means.values, means.rgrid.step))
    return pv_convolve_hilbert(weighted, igrid, workers=workers)


def recon_filbac(means: MeansData, igrid: ImageGrid, *, workers: int | None = None) -> ImageData:
    _check_ring(means.ring, igrid)
    return back_project(radial_filter_filbac(means), igrid, order=1, workers=workers)


def recon_wavefinite(
    trace: WaveTraceData, igrid: ImageGrid, *, interp_order: int | None = None, workers: int | None = None
) -> ImageData:
    """f ≈ (2/π)·Δ_d B[∫_0^{2R0} W f(p,t)·K(t, r̄) dt], using trace samples in [0, 2R0] only.

    The r̄ profile is sampled on the trace's own time step up to SPLINE_MARGIN
    nodes past 2R0; K stays finite for r̄ > 2R0.
    """
    if trace.kind is not TraceKind.W:
        raise PreconditionError(_MODULE, "wavefinite reconstruction expects a W-trace")
    ring, tgrid = trace.ring, trace.tgrid
    _check_ring(ring, igrid)
    diameter = 2.0 * ring.r0
    if tgrid.t_max < diameter * (1.0 - 1e-12):
        raise PreconditionError(_MODULE, f"T_max={tgrid.t_max:.6g} is shorter than 2R0={diameter:.6g}")
    interp_order = get_settings().laplacian_interp_order if interp_order is None else interp_order

    step = tgrid.step
    last = min(tgrid.nt, int(math.floor(diameter / step + 1e-9)))
    if not math.isclose(last * step, diameter, rel_tol=1e-9):
        logger.warning(
            "2R0 is not a time node; kernel integral truncated", extra={"t_last": last * step, "diameter": diameter}
        )
    times = tgrid.nodes[: last + 1]
    rbar = step * np.arange(int(math.ceil(diameter / step - 1e-9)) + 1 + SPLINE_MARGIN)

    trapezoid = np.full(times.size, step)
    trapezoid[[0, -1]] = 0.5 * step
    kernel = wave_kernel_K(times[:, None], rbar[None, :], ring.r0)
    profiles = trace.values[:, : last + 1] @ (trapezoid[:, None] * kernel)

    image = back_project_profiles(profiles, step, ring, igrid, order=interp_order, workers=workers)
    lap = discrete_laplacian(image)
    return ImageData(grid=igrid, values=WAVEFINITE_SCALE * lap.values)


def second_time_derivative(values: np.ndarray, step: float) -> np.ndarray:
    """Centered second differences, second-order one-sided at both ends."""
    if values.shape[1] < 4:
        raise PreconditionError(_MODULE, "second time derivative needs at least 4 time samples")
    out = np.empty_like(values)
    out[:, 1:-1] = values[:, 2:] - 2.0 * values[:, 1:-1] + values[:, :-2]
    out[:, 0] = 2.0 * values[:, 0] - 5.0 * values[:, 1] + 4.0 * values[:, 2] - values[:, 3]
    out[:, -1] = 2.0 * values[:, -1] - 5.0 * values[:, -2] + 4.0 * values[:, -3] - values[:, -4]
    return out / step**2


def _truncate(trace: WaveTraceData, t_max: float | None) -> WaveTraceData:
    if t_max is None or t_max >= trace.tgrid.t_max:
        return trace
    last = int(math.floor(t_max / trace.tgrid.step + 1e-9))
    tgrid = TimeGrid(nt=last, step=trace.tgrid.step)
    return WaveTraceData(ring=trace.ring, tgrid=tgrid, values=trace.values[:, : last + 1], kind=trace.kind)


def recon_adjoint(trace: WaveTraceData, cfg: ReconConfig, igrid: ImageGrid) -> ImageData:
    """f = −(2/R0)·P*(t·∂t²·P f)  or  f = −(2/R0)·P*(∂t(t·∂t P f)).

    adjoint-w also accepts a W-trace directly, forming ∂t(t·W f).
    """
    if not cfg.method.is_adjoint:
        raise PreconditionError(_MODULE, f"{cfg.method.value} is not an adjoint method")
    if trace.ring.r0 != cfg.r0:
        raise GridMismatchError(_MODULE, f"trace R0={trace.ring.r0} differs from config R0={cfg.r0}")
    _check_ring(trace.ring, igrid)
    if cfg.method is ReconMethod.ADJOINT_P and trace.kind is not TraceKind.P:
        raise PreconditionError(_MODULE, "adjoint-p expects a P-trace")
    trace = _truncate(trace, cfg.t_max)
    r0 = trace.ring.r0
    if trace.tgrid.t_max < 2.0 * r0 * (1.0 - 1e-12):
        raise PreconditionError(_MODULE, f"T_max={trace.tgrid.t_max:.6g} is shorter than 2R0={2.0 * r0:.6g}")
    recommended = get_settings().adjoint_tmax_factor * r0
    if trace.tgrid.t_max < recommended * (1.0 - 1e-9):
        logger.warning(
            "short trace for adjoint inversion; truncation error dominates",
            extra={"t_max": trace.tgrid.t_max, "recommended": recommended},
        )

    times = trace.tgrid.nodes
    step = trace.tgrid.step
    values = trace.values
    if cfg.method is ReconMethod.ADJOINT_P:
        weighted = times * second_time_derivative(values, step)
    elif trace.kind is TraceKind.P:
        weighted = time_derivative(times * time_derivative(values, step), step)
    else:
        weighted = time_derivative(times * values, step)

    source = WaveTraceData(ring=trace.ring, tgrid=trace.tgrid, values=weighted, kind=TraceKind.P)
    image = adjoint_P_star(source, igrid, nr=cfg.nr, order=cfg.gauss_legendre_order, workers=cfg.workers)
    return ImageData(grid=igrid, values=(-2.0 / r0) * image.values)


def reconstruct(data: MeansData | WaveTraceData, cfg: ReconConfig, igrid: ImageGrid) -> ImageData:
    """Dispatch ``data`` to the pipeline named by ``cfg.method``."""
    method = cfg.method
    if igrid.r0 != cfg.r0:
        raise GridMismatchError(_MODULE, f"image grid R0={igrid.r0} differs from config R0={cfg.r0}")
    expects_means = method.data_kind == "means"
    if expects_means != isinstance(data, MeansData):
        raise PreconditionError(_MODULE, f"{method.value} expects {method.data_kind} data")
    if cfg.smoothing > 0:
        # P-traces vanish at t = 0
        parity = "odd" if isinstance(data, WaveTraceData) and data.kind is TraceKind.P else "even"
        data = data.with_values(smooth_profiles(data.values, cfg.smoothing, parity))
        logger.debug("data smoothed", extra={"width": cfg.smoothing, "parity": parity})

    start = time.perf_counter()
    if method is ReconMethod.MINV:
        image = recon_minv(data, igrid, workers=cfg.workers)
    elif method is ReconMethod.MLAP:
        image = recon_mlap(data, igrid, interp_order=cfg.interp_order, workers=cfg.workers)
    elif method is ReconMethod.HILBERT:
        image = recon_hilbert(data, igrid, workers=cfg.workers)
    elif method is ReconMethod.FILBAC:
        image = recon_filbac(data, igrid, workers=cfg.workers)
    elif method is ReconMethod.WAVEFINITE:
        image = recon_wavefinite(data, igrid, interp_order=cfg.interp_order, workers=cfg.workers)
    else:
        image = recon_adjoint(data, cfg, igrid)
    elapsed = time.perf_counter() - start

    logger.info(
        "reconstruction finished",
        extra={"method": method.value, "n": igrid.n, "nphi": data.ring.count - 1, "seconds": round(elapsed, 4)},
    )
    return image


def simulate(
    phantom: Phantom,
    method: ReconMethod,
    n: int,
    *,
    r0: float = 1.0,
    nphi: int | None = None,
    nr: int | None = None,
    tmax_factor: float | None = None,
    quad_n: int | None = None,
    gaussian_rule: str = "trapezoid",
) -> MeansData | WaveTraceData:
    """Exact data of the kind ``method`` consumes, with N = Nφ = Nr unless overridden.

    Traces share the radial step: the W-trace covers [0, 2R0], the P-trace
    [0, tmax_factor·R0].
    """
    nphi = n if nphi is None else nphi
    nr = n if nr is None else nr
    ring = DetectorRing(r0=r0, count=nphi + 1)
    rgrid = RadialGrid(r0=r0, nr=nr)
    means = circular_mean(phantom, ring, rgrid, quad_n=quad_n, gaussian_rule=gaussian_rule)
    kind = method.data_kind
    if kind == "means":
        return means
    if kind == "traceW":
        return wave_trace_W(means, TimeGrid(nt=nr, step=rgrid.step))
    factor = get_settings().adjoint_tmax_factor if tmax_factor is None else tmax_factor
    nt = int(round(factor * nr / 2.0))
    return wave_trace_P(means, TimeGrid(nt=nt, step=rgrid.step))
