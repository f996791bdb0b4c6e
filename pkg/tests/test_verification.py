"""Tests for the numerical oracles and the convergence harness."""
import math

import numpy as np
import pytest

from circmean_fbp.errors import PreconditionError, VerificationError
from circmean_fbp.services.grids import ImageData, ImageGrid
from circmean_fbp.services.phantoms import (
    GaussianBlob,
    Phantom,
    UniformDisk,
    gaussian_phantom,
    mixed_phantom,
    sample_phantom,
)
from circmean_fbp.services.reconstruction import ReconMethod
from circmean_fbp.services.verification import (
    ConvergenceRow,
    assert_order,
    convergence_study,
    format_study_table,
    image_metrics,
    verify_diff_abel,
    verify_key_identity,
    verify_trace_identity,
)


def _interior_point(rng, r0: float = 1.0) -> tuple[float, float]:
    radius = r0 * math.sqrt(rng.uniform(0.0, 0.95**2))
    angle = rng.uniform(0.0, 2.0 * math.pi)
    return radius * math.cos(angle), radius * math.sin(angle)


def test_key_identity_on_random_pairs(rng):
    for _ in range(50):
        x, y = _interior_point(rng), _interior_point(rng)
        assert verify_key_identity(x, y, 1.0, quad_n=2**16).residual <= 1e-6


def test_key_identity_other_radius(rng):
    x, y = _interior_point(rng, 2.5), _interior_point(rng, 2.5)
    assert verify_key_identity(x, y, 2.5, quad_n=2**14).residual <= 1e-6


def test_key_identity_is_symmetric():
    x, y = (0.3, -0.2), (-0.5, 0.1)
    first = verify_key_identity(x, y, 1.0, quad_n=4096)
    second = verify_key_identity(y, x, 1.0, quad_n=4096)
    assert first.lhs == second.lhs
    assert first.rhs == second.rhs


def test_key_identity_improves_with_nodes():
    x, y = (0.41, 0.12), (-0.23, -0.37)
    residuals = [verify_key_identity(x, y, 1.0, quad_n=n).residual for n in (16, 256, 1024)]
    assert residuals[-1] <= max(residuals[0], 1e-12)
    assert residuals[-1] <= 1e-10


def test_periodic_rule_is_coarser_but_consistent():
    result = verify_key_identity((0.2, 0.3), (-0.4, 0.1), 1.0, quad_n=4096, rule="periodic")
    assert result.residual < 1e-2


@pytest.mark.parametrize(
    ("x", "y"),
    [((1.0, 0.0), (0.0, 0.0)), ((0.1, 0.1), (0.1, 0.1))],
)
def test_key_identity_preconditions(x, y):
    with pytest.raises(PreconditionError):
        verify_key_identity(x, y, 1.0, quad_n=64)


def test_key_identity_rejects_tiny_rule():
    with pytest.raises(PreconditionError, match="quad_n"):
        verify_key_identity((0.1, 0.0), (0.0, 0.2), 1.0, quad_n=8)


def test_diff_abel_formula():
    assert verify_diff_abel().relative_error <= 1e-4


def test_diff_abel_with_polynomial_profile():
    result = verify_diff_abel(lambda r: 1.0 - r * r, lambda r: -2.0 * r, t=0.7, step=1e-2)
    assert result.relative_error <= 1e-4


def test_diff_abel_preconditions():
    with pytest.raises(PreconditionError):
        verify_diff_abel(t=0.0)
    with pytest.raises(PreconditionError):
        verify_diff_abel(t=1.0, step=2.0)


def test_image_metrics():
    grid = ImageGrid(1.0, 32)
    reference = sample_phantom(gaussian_phantom(), grid)
    assert image_metrics(reference, reference) == (0.0, 0.0)
    doubled = ImageData(grid, 2.0 * reference.values)
    metrics = image_metrics(doubled, reference)
    assert metrics.rel_l2 == pytest.approx(1.0)
    assert metrics.max_abs == pytest.approx(np.max(np.abs(reference.values)))


def test_image_metrics_with_zero_reference():
    grid = ImageGrid(1.0, 16)
    zero = ImageData.zeros(grid)
    assert image_metrics(zero, zero) == (0.0, 0.0)
    recon = ImageData.masked(grid, np.full((grid.count, grid.count), 0.5))
    inside_count = int(np.count_nonzero(grid.inside()))
    metrics = image_metrics(recon, zero)
    assert metrics.rel_l2 == pytest.approx(0.5 * math.sqrt(inside_count), rel=1e-12)
    assert metrics.max_abs == 0.5


def test_image_metrics_match_pointwise_summation(rng):
    grid = ImageGrid(1.0, 64)
    recon = ImageData.masked(grid, rng.normal(size=(65, 65)))
    reference = ImageData.masked(grid, 1.0 + rng.uniform(size=(65, 65)))
    diff_sq = ref_sq = max_abs = 0.0
    for i in range(65):
        for j in range(65):
            # the reference is at least 1 inside D and exactly 0 outside
            if reference.values[i, j] == 0.0:
                continue
            d = recon.values[i, j] - reference.values[i, j]
            diff_sq += d * d
            ref_sq += reference.values[i, j] ** 2
            max_abs = max(max_abs, abs(d))
    metrics = image_metrics(recon, reference)
    assert metrics.rel_l2 == pytest.approx(math.sqrt(diff_sq / ref_sq), rel=1e-12)
    assert metrics.max_abs == max_abs


def test_zero_phantom_study_has_zero_error():
    rows = convergence_study(Phantom(), ReconMethod.MINV, [32, 64])
    assert [row.n for row in rows] == [32, 64]
    assert all(row.max_err == 0.0 and row.l2_err == 0.0 for row in rows)
    assert all(row.order is None for row in rows)


def test_study_rejects_bad_sizes():
    with pytest.raises(PreconditionError, match="ascending"):
        convergence_study(gaussian_phantom(), "minv", [64, 32])
    with pytest.raises(PreconditionError, match=">= 32"):
        convergence_study(gaussian_phantom(), "minv", [16, 32])


def test_assert_order_windows():
    rows = [
        ConvergenceRow(n=64, max_err=4e-3, l2_err=1e-2, order=None, l2_order=None, seconds=0.1),
        ConvergenceRow(n=128, max_err=1e-3, l2_err=2.5e-3, order=2.0, l2_order=2.0, seconds=0.8),
    ]
    assert_order(rows, gaussian_phantom())
    rows[1].order = 1.1
    with pytest.raises(VerificationError, match="outside"):
        assert_order(rows, gaussian_phantom())
    with pytest.raises(PreconditionError, match="smooth phantom"):
        assert_order(rows, mixed_phantom())


def test_study_table_format():
    rows = [
        ConvergenceRow(n=64, max_err=0.004, l2_err=0.01, order=None, l2_order=None, seconds=0.25),
        ConvergenceRow(n=128, max_err=0.001, l2_err=0.0025, order=2.0, l2_order=2.0, seconds=2.0),
    ]
    table = format_study_table(rows, include_timing=False)
    assert table == (
        "n\tmax_err\tl2_err\torder\tl2_order\tseconds\n"
        "64\t0.004\t0.01\t-\t-\t-\n"
        "128\t0.001\t0.0025\t2.0\t2.0\t-\n"
    )
    assert format_study_table(rows).splitlines()[1].endswith("\t0.250000")


def test_trace_identity_rejects_short_horizon():
    with pytest.raises(PreconditionError, match="below"):
        verify_trace_identity(gaussian_phantom(), gaussian_phantom(), t_max=5.0)


@pytest.mark.slow
def test_trace_identity_for_equal_phantoms():
    result = verify_trace_identity(gaussian_phantom(), gaussian_phantom())
    assert result.symm > 0.0
    assert result.symm == pytest.approx(result.lhs, rel=1e-2)
    assert result.asymm == pytest.approx(result.lhs, rel=1e-2)
    assert result.asymm == pytest.approx(result.symm, rel=5e-3)


@pytest.mark.slow
@pytest.mark.parametrize(
    ("f", "g"),
    [
        (
            Phantom((GaussianBlob((0.2, 0.1), 0.12, 1.0),)),
            Phantom((GaussianBlob((0.0, -0.1), 0.15, -0.6),)),
        ),
        (
            Phantom((GaussianBlob((0.1, 0.0), 0.1, 1.0), GaussianBlob((-0.3, 0.2), 0.1, -0.5))),
            gaussian_phantom(),
        ),
    ],
)
def test_trace_identity_for_mixed_pairs(f, g):
    result = verify_trace_identity(f, g)
    scale = abs(result.lhs)
    assert result.asymm == pytest.approx(result.lhs, abs=1e-2 * scale)
    assert result.symm == pytest.approx(result.lhs, abs=1e-2 * scale)


@pytest.mark.slow
def test_trace_identity_for_disjoint_supports():
    f = Phantom((GaussianBlob((-0.5, 0.0), 0.1, 1.0),))
    g = Phantom((GaussianBlob((0.5, 0.0), 0.1, 1.0),))
    result = verify_trace_identity(f, g, nr=512)
    norms = math.pi * 0.1**2
    assert abs(result.lhs) <= 1e-12
    assert abs(result.asymm) <= 1e-3 * norms
    assert abs(result.symm) <= 1e-3 * norms


@pytest.mark.slow
def test_trace_identity_for_disjoint_disks():
    f = Phantom((UniformDisk((-0.5, 0.0), 0.3, 1.0),))
    g = Phantom((UniformDisk((0.5, 0.0), 0.3, 1.0),))
    result = verify_trace_identity(f, g)
    norm = math.pi * 0.3**2
    assert result.lhs == 0.0
    assert abs(result.symm) <= 1e-2 * norm


@pytest.mark.slow
def test_doubling_n_scales_minv_time_cubically():
    rows = convergence_study(gaussian_phantom(), ReconMethod.MINV, [128, 256], workers=1)
    ratio = rows[1].seconds / rows[0].seconds
    # O(N³) gives 8x per doubling
    assert 4.0 <= ratio <= 16.0
