"""Executable oracles: integral identities, convergence studies and error metrics."""
from __future__ import annotations

import logging
import math
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Literal, NamedTuple

import numpy as np
from scipy.integrate import quad

from ..config import get_settings
from ..errors import PreconditionError, VerificationError
from .forward import circular_mean, time_derivative, wave_trace_P
from .grids import DetectorRing, ImageData, ImageGrid, RadialGrid, TimeGrid, require_same_image_grid
from .phantoms import Phantom, sample_phantom
from .reconstruction import ReconConfig, ReconMethod, reconstruct, second_time_derivative, simulate

logger = logging.getLogger(__name__)

_MODULE = "verification-harness"

KEYIDENT_MIN_NODES = 16
MIN_STUDY_SIZE = 32
# tanh-sinh abscissae run over τ ∈ [−T, T]
_TANH_SINH_HALF_WIDTH = 3.5

KeyIdentityRule = Literal["graded", "periodic"]


class KeyIdentity(NamedTuple):
    lhs: float
    rhs: float

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs) / (1.0 + abs(self.rhs))


class TraceIdentity(NamedTuple):
    lhs: float
    asymm: float
    symm: float


class DiffAbel(NamedTuple):
    lhs: float
    rhs: float

    @property
    def relative_error(self) -> float:
        return abs(self.lhs - self.rhs) / max(abs(self.rhs), 1e-300)


class ImageMetrics(NamedTuple):
    rel_l2: float
    max_abs: float


@dataclass(slots=True)
class ConvergenceRow:
    n: int
    max_err: float
    l2_err: float
    order: float | None
    l2_order: float | None
    seconds: float


# ---------------------------------------------------------------------------
# log identity on the circle
# ---------------------------------------------------------------------------


def _tanh_sinh_offsets(nodes: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Fractions of an arc measured from each end, plus weights, for a unit-length arc."""
    tau = np.linspace(-_TANH_SINH_HALF_WIDTH, _TANH_SINH_HALF_WIDTH, nodes)
    step = tau[1] - tau[0]
    u = 0.5 * np.pi * np.sinh(tau)
    from_left = 1.0 / (1.0 + np.exp(-2.0 * u))
    from_right = 1.0 / (1.0 + np.exp(2.0 * u))
    weights = step * 0.5 * np.pi * np.cosh(tau) / (2.0 * np.cosh(u) ** 2)
    return from_left, from_right, weights


def _graded_log_integral(alpha: float, nodes_per_arc: int) -> float:
    """∫_0^{2π} log|cos α − cos θ| dθ, split at θ = ±α.

    On either arc cos α − cos θ = ±2·sin(δ_l/2)·sin(δ_r/2), with δ_l, δ_r the
    distances to the two arc ends, which keeps the log accurate at the ends.
    """
    from_left, from_right, weights = _tanh_sinh_offsets(nodes_per_arc)
    total = 0.0
    for length in (2.0 * alpha, 2.0 * math.pi - 2.0 * alpha):
        left = length * from_left
        right = length * from_right
        values = math.log(2.0) + np.log(np.sin(0.5 * left)) + np.log(np.sin(0.5 * right))
        total += length * float(np.sum(weights * values))
    return total


def verify_key_identity(
    x: Sequence[float],
    y: Sequence[float],
    r0: float,
    quad_n: int | None = None,
    rule: KeyIdentityRule = "graded",
) -> KeyIdentity:
    """lhs = ∫_S log||x−p|² − |y−p|²| ds(p) by quadrature, rhs = 2πR0·(log|x−y| + log R0)."""
    quad_n = get_settings().keyident_quad_n if quad_n is None else quad_n
    if quad_n < KEYIDENT_MIN_NODES:
        raise PreconditionError(_MODULE, f"quad_n must be >= {KEYIDENT_MIN_NODES}, got {quad_n}")
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if np.hypot(*xa) >= r0 or np.hypot(*ya) >= r0:
        raise PreconditionError(_MODULE, "both points must lie strictly inside the disk")
    if np.array_equal(xa, ya):
        raise PreconditionError(_MODULE, "x and y must differ")
    # the integrand is symmetric in (x, y); a fixed order makes lhs symmetric bit for bit
    if tuple(ya) < tuple(xa):
        xa, ya = ya, xa

    distance = float(np.hypot(*(xa - ya)))
    rhs = 2.0 * math.pi * r0 * (math.log(distance) + math.log(r0))

    if rule == "graded":
        a = (float(xa @ xa) - float(ya @ ya)) / (2.0 * r0 * distance)
        alpha = math.acos(min(1.0, max(-1.0, a)))
        angular = 2.0 * math.pi * math.log(2.0 * r0 * distance) + _graded_log_integral(alpha, quad_n // 2)
        lhs = r0 * angular
    elif rule == "periodic":
        phi = 2.0 * np.pi * np.arange(quad_n) / quad_n
        p = r0 * np.stack([np.cos(phi), np.sin(phi)], axis=1)
        diff = np.sum((xa - p) ** 2, axis=1) - np.sum((ya - p) ** 2, axis=1)
        with np.errstate(divide="ignore"):
            logs = np.where(diff != 0.0, np.log(np.abs(diff)), 0.0)
        lhs = r0 * (2.0 * np.pi / quad_n) * float(np.sum(logs))
    else:
        raise PreconditionError(_MODULE, f"unknown rule {rule!r}")
    return KeyIdentity(lhs=lhs, rhs=rhs)


# ---------------------------------------------------------------------------
# trace identities
# ---------------------------------------------------------------------------


def _trapezoid_weights(count: int, step: float) -> np.ndarray:
    weights = np.full(count, step)
    weights[[0, -1]] = 0.5 * step
    return weights


def verify_trace_identity(
    f: Phantom,
    g: Phantom,
    *,
    r0: float = 1.0,
    nphi: int = 64,
    nr: int = 256,
    nt: int = 4096,
    t_max: float | None = None,
    lhs_n: int = 1024,
    quad_n: int | None = None,
) -> TraceIdentity:
    """⟨f, g⟩ against −(2/R0)∬ t·u_tt·v and (2/R0)∬ t·u_t·v_t over S × [0, T_max].

    u = P f and v = P g are simulated on the same ring and time grid; the
    detector integral uses ds = R0·h_φ.
    """
    t_max = get_settings().adjoint_tmax_factor * r0 if t_max is None else t_max
    required = get_settings().adjoint_tmax_factor * r0
    if t_max < required * (1.0 - 1e-12):
        raise PreconditionError(_MODULE, f"T_max={t_max:.6g} is below {required:.6g}")
    f.validate(r0)
    g.validate(r0)

    ring = DetectorRing(r0=r0, count=nphi + 1)
    rgrid = RadialGrid(r0=r0, nr=nr)
    tgrid = TimeGrid.covering(t_max, nt)
    u = wave_trace_P(circular_mean(f, ring, rgrid, quad_n=quad_n), tgrid).values
    v = wave_trace_P(circular_mean(g, ring, rgrid, quad_n=quad_n), tgrid).values

    times = tgrid.nodes
    weights = _trapezoid_weights(tgrid.count, tgrid.step) * times
    ds = r0 * ring.step
    scale = (2.0 / r0) * ds
    asymm = -scale * float(np.sum((second_time_derivative(u, tgrid.step) * v) @ weights))
    symm = scale * float(np.sum((time_derivative(u, tgrid.step) * time_derivative(v, tgrid.step)) @ weights))

    fine = ImageGrid(r0=r0, n=lhs_n)
    lhs = fine.step**2 * float(np.sum(sample_phantom(f, fine).values * sample_phantom(g, fine).values))
    logger.info("trace identity evaluated", extra={"lhs": lhs, "asymm": asymm, "symm": symm, "nt": nt})
    return TraceIdentity(lhs=lhs, asymm=asymm, symm=symm)


# ---------------------------------------------------------------------------
# differentiation formula for the Abel-type integral
# ---------------------------------------------------------------------------


def _gaussian_profile(r: float) -> float:
    return math.exp(-r * r)


def _gaussian_profile_derivative(r: float) -> float:
    return -2.0 * r * math.exp(-r * r)


def _abel_integral(integrand: Callable[[float], float], t: float, limit: int) -> float:
    # ∫_0^t F(r)/√(t² − r²) dr = ∫_0^t [F(r)/√(t + r)]·(t − r)^{−1/2} dr
    value, _ = quad(
        lambda r: integrand(r) / math.sqrt(t + r),
        0.0,
        t,
        weight="alg",
        wvar=(0.0, -0.5),
        epsabs=1e-14,
        epsrel=1e-13,
        limit=limit,
    )
    return value


def verify_diff_abel(
    profile: Callable[[float], float] = _gaussian_profile,
    derivative: Callable[[float], float] = _gaussian_profile_derivative,
    t: float = 1.0,
    step: float = 1e-2,
    limit: int = 200,
) -> DiffAbel:
    """∂_t ∫_0^t r·h/√(t²−r²) dr by Richardson-extrapolated differences vs (1/t)∫_0^t r·∂_r(r·h)/√(t²−r²) dr."""
    if not t > 0:
        raise PreconditionError(_MODULE, f"t must be positive, got {t}")
    if not 0 < step < t:
        raise PreconditionError(_MODULE, f"step must lie in (0, t), got {step}")

    def moment(tt: float) -> float:
        return _abel_integral(lambda r: r * profile(r), tt, limit)

    def centered(h: float) -> float:
        return (moment(t + h) - moment(t - h)) / (2.0 * h)

    lhs = (4.0 * centered(0.5 * step) - centered(step)) / 3.0
    rhs = _abel_integral(lambda r: r * (profile(r) + r * derivative(r)), t, limit) / t
    return DiffAbel(lhs=lhs, rhs=rhs)


# ---------------------------------------------------------------------------
# metrics and convergence studies
# ---------------------------------------------------------------------------


def image_metrics(recon: ImageData, reference: ImageData) -> ImageMetrics:
    """Relative L² and absolute max-norm differences over points inside D.

    With a zero reference the first entry is the absolute norm ‖recon − ref‖₂.
    """
    require_same_image_grid(_MODULE, recon.grid, reference.grid)
    inside = recon.grid.inside()
    diff = recon.values[inside] - reference.values[inside]
    diff_norm = float(np.sqrt(np.sum(diff * diff)))
    ref_norm = float(np.sqrt(np.sum(reference.values[inside] ** 2)))
    max_abs = float(np.max(np.abs(diff))) if diff.size else 0.0
    if ref_norm == 0.0:
        return ImageMetrics(rel_l2=diff_norm, max_abs=max_abs)
    return ImageMetrics(rel_l2=diff_norm / ref_norm, max_abs=max_abs)


def _observed_order(previous: float, current: float, ratio: float) -> float | None:
    if previous <= 0.0 or current <= 0.0:
        return None
    return math.log(previous / current) / math.log(ratio)


def convergence_study(
    phantom: Phantom,
    method: ReconMethod | str,
    sizes: Sequence[int],
    *,
    r0: float = 1.0,
    workers: int | None = None,
    quad_n: int | None = None,
) -> list[ConvergenceRow]:
    """Run the full pipeline at N = Nφ = Nr for each size and compare with the sampled phantom."""
    method = ReconMethod(method)
    sizes = [int(n) for n in sizes]
    if not sizes:
        raise PreconditionError(_MODULE, "no sizes given")
    if any(n < MIN_STUDY_SIZE for n in sizes):
        raise PreconditionError(_MODULE, f"every size must be >= {MIN_STUDY_SIZE}, got {sizes}")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise PreconditionError(_MODULE, f"sizes must be strictly ascending, got {sizes}")

    cfg = ReconConfig(method=method, r0=r0, workers=workers)
    rows: list[ConvergenceRow] = []
    for n in sizes:
        data = simulate(phantom, method, n, r0=r0, quad_n=quad_n)
        grid = ImageGrid(r0=r0, n=n)
        start = time.perf_counter()
        recon = reconstruct(data, cfg, grid)
        seconds = time.perf_counter() - start
        reference = sample_phantom(phantom, grid)
        inside = grid.inside()
        diff = recon.values[inside] - reference.values[inside]
        max_err = float(np.max(np.abs(diff)))
        l2_err = image_metrics(recon, reference).rel_l2
        order = l2_order = None
        if rows:
            ratio = n / rows[-1].n
            order = _observed_order(rows[-1].max_err, max_err, ratio)
            l2_order = _observed_order(rows[-1].l2_err, l2_err, ratio)
        rows.append(ConvergenceRow(n=n, max_err=max_err, l2_err=l2_err, order=order, l2_order=l2_order, seconds=seconds))
        logger.info(
            "convergence step",
            extra={"method": method.value, "n": n, "max_err": max_err, "l2_err": l2_err, "order": order},
        )
    return rows


def assert_order(
    rows: Sequence[ConvergenceRow], phantom: Phantom, window: tuple[float, float] = (1.6, 2.4)
) -> None:
    """Raise VerificationError if any observed max-norm order leaves ``window``."""
    if not phantom.is_smooth:
        raise PreconditionError(_MODULE, "order claims need a smooth phantom; indicator phantoms are report-only")
    low, high = window
    for row in rows[1:]:
        if row.order is None or not low <= row.order <= high:
            raise VerificationError(f"observed order {row.order} at N={row.n} outside [{low}, {high}]")


def format_study_table(rows: Sequence[ConvergenceRow], include_timing: bool = True) -> str:
    """Tab-separated table with a header line; missing orders (and omitted timings) are written as '-'."""

    def cell(value: float | None) -> str:
        return "-" if value is None else repr(float(value))

    lines = ["n\tmax_err\tl2_err\torder\tl2_order\tseconds"]
    for row in rows:
        seconds = f"{row.seconds:.6f}" if include_timing else "-"
        fields = [str(row.n), cell(row.max_err), cell(row.l2_err), cell(row.order), cell(row.l2_order), seconds]
        lines.append("\t".join(fields))
    return "\n".join(lines) + "\n"
