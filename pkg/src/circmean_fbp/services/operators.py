"""Discrete filtered back-projection operators.

Every operator here is linear in its data argument. Radial filters act per
detector on a uniform radial grid; ``back_project`` carries filtered radial
profiles to the image grid and is the only O(N³) stage.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal

import numpy as np
from scipy.ndimage import gaussian_filter1d, map_coordinates, spline_filter1d
from scipy.special import xlogy

from ..config import get_settings
from ..errors import GridMismatchError, PreconditionError
from ..observability import timed_stage
from .grids import (
    DetectorRing,
    ImageData,
    ImageGrid,
    MeansData,
    RadialGrid,
    TimeGrid,
    WaveTraceData,
    require_same_rgrid,
)
from .quadrature import composite_rule, linear_interpolation_weights

logger = logging.getLogger(__name__)

_MODULE = "fbp-operators"

Parity = Literal["odd", "even"]


# ---------------------------------------------------------------------------
# radial filters
# ---------------------------------------------------------------------------


def radial_filter_D(means: MeansData) -> MeansData:
    """(D_d G)^m = ((m+½)G^{m+1} + (m−½)G^{m−1} − 2m·G^m) / h_r, zero ghosts at m = −1, Nr+1."""
    if means.rgrid.nr < 2:
        raise PreconditionError(_MODULE, "radial filter needs Nr >= 2")
    values = means.values
    padded = np.pad(values, ((0, 0), (1, 1)))
    m = np.arange(means.rgrid.count, dtype=np.float64)
    filtered = ((m + 0.5) * padded[:, 2:] + (m - 0.5) * padded[:, :-2] - 2.0 * m * values) / means.rgrid.step
    return means.with_values(filtered)


def radial_derivative(values: np.ndarray, step: float) -> np.ndarray:
    """∂_r of data sampled at r = 0..2R0, using the odd extension at r = 0 and a one-sided end."""
    derivative = np.gradient(values, step, axis=1, edge_order=2)
    derivative[:, 0] = values[:, 1] / step
    return derivative


# ---------------------------------------------------------------------------
# log-convolution I_d
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class KernelTable:
    """Exact integrals of log|r² − s²| against the hat basis, rows s, columns m'.

    Rows 0..Nr are the radial nodes s = r^m; ``extra`` further rows continue
    the node spacing past 2R0, where the integral is still finite.
    """

    rgrid: RadialGrid
    a: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)

    @property
    def extra(self) -> int:
        return self.a.shape[0] - self.rgrid.count

    @property
    def radii(self) -> np.ndarray:
        return _table_radii(self.rgrid, self.extra)


def _table_radii(rgrid: RadialGrid, extra: int) -> np.ndarray:
    nodes = rgrid.nodes
    return np.concatenate([nodes, nodes[-1] + rgrid.step * np.arange(1, extra + 1)])


def _log_antiderivative(r: np.ndarray, s: np.ndarray) -> np.ndarray:
    return xlogy(r - s, np.abs(r - s)) + xlogy(r + s, np.abs(r + s)) - 2.0 * r


def _moment_antiderivative(r: np.ndarray, s: np.ndarray) -> np.ndarray:
    diff = r * r - s * s
    return 0.5 * (xlogy(diff, np.abs(diff)) - r * r)


def build_kernel_table(rgrid: RadialGrid, extra: int = 0) -> KernelTable:
    if extra < 0:
        raise PreconditionError(_MODULE, f"extra kernel rows must be non-negative, got {extra}")
    nodes = rgrid.nodes
    s = _table_radii(rgrid, extra)[:, None]
    lower = nodes[None, :-1]
    upper = nodes[None, 1:]
    a = _log_antiderivative(upper, s) - _log_antiderivative(lower, s)
    b = -lower * a + (_moment_antiderivative(upper, s) - _moment_antiderivative(lower, s))
    a.setflags(write=False)
    b.setflags(write=False)
    return KernelTable(rgrid=rgrid, a=a, b=b)


@lru_cache(maxsize=4)
def cached_kernel_table(rgrid: RadialGrid, extra: int = 0) -> KernelTable:
    return build_kernel_table(rgrid, extra)


def log_convolve_profiles(values: np.ndarray, table: KernelTable) -> np.ndarray:
    """Log-convolved profiles at every row of ``table``, one row per detector."""
    if values.shape[1] != table.rgrid.count:
        raise GridMismatchError(_MODULE, f"{values.shape[1]} radial samples for a table on {table.rgrid}")
    slopes = np.diff(values, axis=1) / table.rgrid.step
    return values[:, :-1] @ table.a.T + slopes @ table.b.T


def log_convolve_I(means: MeansData, table: KernelTable) -> MeansData:
    """Integral of the linear interpolant of G against log|r² − (r^m)²| over [0, 2R0]."""
    require_same_rgrid(_MODULE, means.rgrid, table.rgrid)
    return means.with_values(log_convolve_profiles(means.values, table)[:, : means.rgrid.count])


# ---------------------------------------------------------------------------
# back-projection
# ---------------------------------------------------------------------------

# Profile samples past 2R0 handed to the cubic spline. Its mirror end condition
# is only exact for profiles that are even about the last sample; this many
# extra samples keep that end out of reach of any |x − p| < 2R0.
SPLINE_MARGIN = 12


def smooth_profiles(values: np.ndarray, width: float, parity: Parity = "even") -> np.ndarray:
    """Gaussian mollification along axis 1 with standard deviation ``width`` samples.

    Sample 0 sits at r = 0 (or t = 0); the data are continued across it by
    ``parity`` before filtering.
    """
    if width < 0:
        raise PreconditionError(_MODULE, f"smoothing width must be non-negative, got {width}")
    if parity not in ("odd", "even"):
        raise PreconditionError(_MODULE, f"parity must be 'odd' or 'even', got {parity!r}")
    if width == 0:
        return values
    pad = min(int(np.ceil(4.0 * width)), values.shape[1] - 1)
    padded = np.pad(values, ((0, 0), (pad, 0)), mode="reflect", reflect_type=parity)
    return gaussian_filter1d(padded, width, axis=1, mode="mirror", truncate=4.0)[:, pad:]


def _interpolant(values: np.ndarray, step: float, order: int):
    if order == 1:

        def evaluate(k: int, radii: np.ndarray) -> np.ndarray:
            lower, upper, w_lower, w_upper = linear_interpolation_weights(radii, step, values.shape[1])
            row = values[k]
            return w_lower * row[lower] + w_upper * row[upper]

        return evaluate
    if order == 3:
        coefficients = spline_filter1d(values, order=3, axis=1, mode="mirror")

        def evaluate(k: int, radii: np.ndarray) -> np.ndarray:
            return map_coordinates(coefficients[k], (radii / step)[None, :], order=3, mode="mirror", prefilter=False)

        return evaluate
    raise PreconditionError(_MODULE, f"interpolation order must be 1 or 3, got {order}")


def back_project_profiles(
    values: np.ndarray,
    step: float,
    ring: DetectorRing,
    igrid: ImageGrid,
    *,
    order: int = 1,
    workers: int | None = None,
    pixel_chunk: int | None = None,
) -> ImageData:
    """Average over detectors of radial profiles sampled at r = 0, step, 2·step, …

    ``values`` has one row per detector; the profile grid must reach the
    largest distance |x − p| over D, which is below 2R0.
    """
    if igrid.r0 != ring.r0:
        raise GridMismatchError(_MODULE, f"image grid R0={igrid.r0} differs from ring R0={ring.r0}")
    if values.shape[0] != ring.count:
        raise GridMismatchError(_MODULE, f"{values.shape[0]} profiles for {ring.count} detectors")
    if (values.shape[1] - 1) * step < 2.0 * ring.r0 * (1.0 - 1e-12):
        raise PreconditionError(_MODULE, "radial profiles do not reach 2R0")
    settings = get_settings()
    workers = settings.workers if workers is None else workers
    pixel_chunk = settings.pixel_chunk if pixel_chunk is None else pixel_chunk

    inside = igrid.inside()
    x1, x2 = igrid.coordinates()
    points = np.stack([x1[inside], x2[inside]], axis=1)
    detectors = ring.positions
    evaluate = _interpolant(np.ascontiguousarray(values, dtype=np.float64), step, order)

    def project(chunk: np.ndarray) -> np.ndarray:
        total = np.zeros(chunk.shape[0])
        # ascending k so the sum is independent of chunking and worker count
        for k in range(ring.count):
            radii = np.hypot(chunk[:, 0] - detectors[k, 0], chunk[:, 1] - detectors[k, 1])
            total += evaluate(k, radii)
        return total / ring.count

    chunks = [points[i : i + pixel_chunk] for i in range(0, points.shape[0], pixel_chunk)]
    with timed_stage("back_project", logger, order=order, workers=workers, pixels=points.shape[0]):
        if workers > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(project, chunks))
        else:
            parts = [project(chunk) for chunk in chunks]

    image = np.zeros((igrid.count, igrid.count))
    if parts:
        image[inside] = np.concatenate(parts)
    return ImageData(grid=igrid, values=image)


def back_project(
    data: MeansData,
    igrid: ImageGrid,
    *,
    order: int = 1,
    workers: int | None = None,
    pixel_chunk: int | None = None,
) -> ImageData:
    """(B_d G)^i = (1/(Nφ+1))·Σ_k T^k[G](|x^i − p^k|) inside D, 0 outside.

    ``order=1`` is the linear spline T^k; ``order=3`` interpolates with a cubic
    B-spline, which keeps a subsequent discrete Laplacian second-order accurate.
    """
    return back_project_profiles(
        data.values, data.rgrid.step, data.ring, igrid, order=order, workers=workers, pixel_chunk=pixel_chunk
    )


# ---------------------------------------------------------------------------
# Laplacian
# ---------------------------------------------------------------------------


def laplacian_support(grid: ImageGrid) -> np.ndarray:
    """Points whose whole 5-point stencil lies inside D."""
    inside = grid.inside()
    support = np.zeros_like(inside)
    support[1:-1, 1:-1] = (
        inside[1:-1, 1:-1] & inside[2:, 1:-1] & inside[:-2, 1:-1] & inside[1:-1, 2:] & inside[1:-1, :-2]
    )
    return support


def discrete_laplacian(img: ImageData) -> ImageData:
    grid = img.grid
    if grid.n < 2:
        raise PreconditionError(_MODULE, "discrete Laplacian needs N >= 2")
    f = img.values
    lap = np.zeros_like(f)
    lap[1:-1, 1:-1] = (f[2:, 1:-1] + f[:-2, 1:-1] + f[1:-1, 2:] + f[1:-1, :-2] - 4.0 * f[1:-1, 1:-1]) / grid.step**2
    return ImageData(grid=grid, values=np.where(laplacian_support(grid), lap, 0.0))


# ---------------------------------------------------------------------------
# principal-value convolution with 1/(s − r)
# ---------------------------------------------------------------------------


def pv_hat_weights(nodes: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Weights w[q, j] with P.V.∫ g(r)/(s_q − r) dr = Σ_j w[q, j]·g_j for the linear interpolant of g.

    ``nodes`` must be uniform. The log terms of the two end nodes drop out when
    s hits an end node (finite part).
    """
    nodes = np.asarray(nodes, dtype=np.float64)
    s = np.atleast_1d(np.asarray(s, dtype=np.float64))
    if nodes.size < 2:
        raise PreconditionError(_MODULE, "principal-value rule needs at least two nodes")
    step = nodes[1] - nodes[0]
    u = s[:, None] - nodes[None, :]
    phi = xlogy(u, np.abs(u))
    weights = np.empty_like(u)
    weights[:, 1:-1] = (phi[:, :-2] - 2.0 * phi[:, 1:-1] + phi[:, 2:]) / step
    with np.errstate(divide="ignore"):
        log_first = np.where(u[:, 0] != 0.0, np.log(np.abs(u[:, 0])), 0.0)
        log_last = np.where(u[:, -1] != 0.0, np.log(np.abs(u[:, -1])), 0.0)
    weights[:, 0] = (phi[:, 1] - phi[:, 0]) / step + log_first + 1.0
    weights[:, -1] = (phi[:, -2] - phi[:, -1]) / step - log_last - 1.0
    return weights


def pv_line_integral(values: np.ndarray, start: float, step: float, s: float) -> float:
    """P.V.∫ g(r)/(s − r) dr for g linear between samples ``values`` at start + j·step."""
    values = np.asarray(values, dtype=np.float64)
    nodes = start + step * np.arange(values.size)
    return float(pv_hat_weights(nodes, np.array([s]))[0] @ values)


@lru_cache(maxsize=8)
def folded_pv_weights(rgrid: RadialGrid, parity: Parity) -> np.ndarray:
    """PV weights at the radial nodes for data extended to [−2R0, 2R0] by parity."""
    nr = rgrid.nr
    nodes = rgrid.nodes
    # mirrored copies keep s = r^m an exact node, so the finite-part branch is hit
    extended = np.concatenate([-nodes[:0:-1], nodes])
    weights = pv_hat_weights(extended, nodes)
    positive = weights[:, nr:]
    mirrored = weights[:, nr::-1]
    if parity == "odd":
        folded = positive - mirrored
        folded[:, 0] = 0.0
    elif parity == "even":
        folded = positive + mirrored
        folded[:, 0] = positive[:, 0]
    else:
        raise PreconditionError(_MODULE, f"parity must be 'odd' or 'even', got {parity!r}")
    folded.setflags(write=False)
    return folded


def pv_filter(means: MeansData, parity: Parity) -> MeansData:
    """Principal value of the parity-extended data against 1/(s − r) at every radial node s."""
    weights = folded_pv_weights(means.rgrid, parity)
    return means.with_values(means.values @ weights.T)


def radial_filter_hilbert(means: MeansData) -> MeansData:
    """P.V.∫ (r·∂_r M f)(r)/(s − r) dr with M f extended oddly, at s = r^m."""
    if means.rgrid.nr < 2:
        raise PreconditionError(_MODULE, "Hilbert filter needs Nr >= 2")
    g = means.rgrid.nodes * radial_derivative(means.values, means.rgrid.step)
    return pv_filter(means.with_values(g), "odd")


def radial_filter_filbac(means: MeansData) -> MeansData:
    """s·P.V.∫ (∂_r M f)(r)/(s − r) dr with ∂_r M f extended evenly, at s = r^m."""
    if means.rgrid.nr < 2:
        raise PreconditionError(_MODULE, "filbac filter needs Nr >= 2")
    derivative = radial_derivative(means.values, means.rgrid.step)
    filtered = pv_filter(means.with_values(derivative), "even")
    return filtered.with_values(means.rgrid.nodes * filtered.values)


def pv_convolve_hilbert(
    means: MeansData, igrid: ImageGrid, *, workers: int | None = None
) -> ImageData:
    """Back-projected principal value of already-weighted data g = r·∂_r M f (odd extension).

    The principal value is taken at the radial nodes only and reaches |x − p|
    through the linear back-projection, which adds an O(h_r²) interpolation
    error on top of the quadrature error.
    """
    if means.rgrid.nr < 2:
        raise PreconditionError(_MODULE, "Hilbert convolution needs Nr >= 2")
    return back_project(pv_filter(means, "odd"), igrid, order=1, workers=workers)


# ---------------------------------------------------------------------------
# wave kernel K(t, r̄)
# ---------------------------------------------------------------------------


def wave_kernel_gamma(t: np.ndarray | float, rbar: np.ndarray | float, r0: float) -> np.ndarray:
    """Branch term Γ(t, r̄) of the kernel: log branch for t < r̄, arctan branch for t > r̄."""
    t, rbar = np.broadcast_arrays(np.asarray(t, dtype=np.float64), np.asarray(rbar, dtype=np.float64))
    c = np.sqrt(np.maximum(4.0 * r0 * r0 - t * t, 0.0))
    q = t * t - rbar * rbar
    root = np.sqrt(np.abs(q))
    with np.errstate(divide="ignore", invalid="ignore"):
        log_branch = root * np.log((c + root) / (c - root))
    arctan_branch = 2.0 * root * np.arctan2(c, root)
    return np.where(q < 0, log_branch, np.where(q > 0, arctan_branch, 0.0))


def wave_kernel_K(t: np.ndarray | float, rbar: np.ndarray | float, r0: float) -> np.ndarray:
    """K(t, r̄) = ∫_t^{2R0} r·log|r² − r̄²| / √(r² − t²) dr in closed form.

    For t < r̄ the log branch is regrouped as (c+b)log(c+b) + (c−b)log|c−b| − 2c
    with c = √(4R0² − t²), b = √(r̄² − t²), which stays finite at r̄ = 2R0.
    """
    t, rbar = np.broadcast_arrays(np.asarray(t, dtype=np.float64), np.asarray(rbar, dtype=np.float64))
    c = np.sqrt(np.maximum(4.0 * r0 * r0 - t * t, 0.0))
    q = t * t - rbar * rbar
    b = np.sqrt(np.maximum(-q, 0.0))
    below = xlogy(c + b, c + b) + xlogy(c - b, np.abs(c - b)) - 2.0 * c
    root = np.sqrt(np.maximum(q, 0.0))
    above = xlogy(c, np.abs(4.0 * r0 * r0 - rbar * rbar)) - 2.0 * c + 2.0 * root * np.arctan2(c, root)
    return np.where(q < 0, below, above)


# ---------------------------------------------------------------------------
# adjoint of the trace operator P
# ---------------------------------------------------------------------------


def _origin_weights(tgrid: TimeGrid) -> np.ndarray:
    """Finite part of ∫_0^T G(t)/t dt for the linear interpolant of G."""
    times = tgrid.nodes
    step = tgrid.step
    weights = np.zeros(tgrid.count)
    # first panel: the G_0/t term has no finite part
    weights[0] -= 1.0
    weights[1] += 1.0
    left = times[1:-1]
    logs = np.log(times[2:] / left)
    ramp = 1.0 - left * logs / step
    weights[1:-1] += logs - ramp
    weights[2:] += ramp
    return weights


@lru_cache(maxsize=8)
def adjoint_inner_weights(rgrid: RadialGrid, tgrid: TimeGrid, order: int) -> np.ndarray:
    """Matrix V with Φ = G @ V.T, Φ(c) = ∫_c^{T_max} G(t)/√(t² − c²) dt at c = r^m.

    Uses t = c·cosh ψ with panels breaking at the time nodes.
    """
    times = tgrid.nodes
    t_max = tgrid.t_max
    weights = np.zeros((rgrid.count, tgrid.count))
    for m, c in enumerate(rgrid.nodes):
        if m == 0:
            weights[0] = _origin_weights(tgrid)
            continue
        if c >= t_max:
            continue
        crossing = times[(times > c) & (times < t_max)]
        breaks = np.concatenate(([0.0], np.arccosh(crossing / c), [np.arccosh(t_max / c)]))
        psi, w = composite_rule(breaks, order)
        lower, upper, w_lower, w_upper = linear_interpolation_weights(c * np.cosh(psi), tgrid.step, tgrid.count)
        weights[m] = np.bincount(lower, w * w_lower, minlength=tgrid.count) + np.bincount(
            upper, w * w_upper, minlength=tgrid.count
        )
    weights.setflags(write=False)
    return weights


def adjoint_inner_integral(values: np.ndarray, tgrid: TimeGrid, rgrid: RadialGrid, order: int | None = None) -> np.ndarray:
    """Φ[k, m] = ∫_{r^m}^{T_max} G[k](t)/√(t² − (r^m)²) dt for linear-in-t G."""
    order = get_settings().gauss_legendre_order if order is None else order
    return values @ adjoint_inner_weights(rgrid, tgrid, order).T


def adjoint_P_star(
    trace: WaveTraceData,
    igrid: ImageGrid,
    *,
    nr: int | None = None,
    order: int | None = None,
    workers: int | None = None,
) -> ImageData:
    """(P*G)(y) = (1/2π)∫_S ∫_{|y−p|}^{T_max} G(p,t)/√(t² − |y−p|²) dt ds(p).

    The detector integral with ds = R0·h_φ equals R0 times the detector
    average, so the result is R0·B_d[Φ] with Φ evaluated on a radial grid of
    ``nr`` intervals (default N).
    """
    r0 = trace.ring.r0
    if trace.tgrid.t_max < 2.0 * r0 * (1.0 - 1e-12):
        raise PreconditionError(_MODULE, f"T_max={trace.tgrid.t_max:.6g} is shorter than 2R0={2.0 * r0:.6g}")
    rgrid = RadialGrid(r0=r0, nr=igrid.n if nr is None else nr)
    with timed_stage("adjoint_inner", logger, nr=rgrid.nr, nt=trace.tgrid.nt):
        inner = adjoint_inner_integral(trace.values, trace.tgrid, rgrid, order)
    image = back_project_profiles(inner, rgrid.step, trace.ring, igrid, order=1, workers=workers)
    return ImageData(grid=igrid, values=r0 * image.values)
