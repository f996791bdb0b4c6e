"""Command-line surface: simulate, reconstruct, verify and compare."""
from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Callable, Sequence
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from .config import get_settings
from .errors import DataFormatError, PreconditionError, VerificationError
from .infrastructure.pgm import export_pgm
from .infrastructure.phantom_spec import load_phantom_spec
from .infrastructure.rawgrid import read_rgf, write_rgf
from .observability import RUN_COUNTER, configure_logging, timed_stage, write_metrics
from .services.forward import add_noise, circular_mean, wave_trace_P, wave_trace_W
from .services.grids import DetectorRing, ImageData, ImageGrid, RadialGrid, TimeGrid
from .services.phantoms import sample_phantom
from .services.reconstruction import ReconConfig, ReconMethod, reconstruct
from .services.verification import (
    assert_order,
    convergence_study,
    format_study_table,
    image_metrics,
    verify_diff_abel,
    verify_key_identity,
    verify_trace_identity,
)

logger = logging.getLogger("circmean_fbp.cli")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_VERIFY = 4


def _sizes(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _cmd_phantom(args: argparse.Namespace) -> int:
    phantom = load_phantom_spec(args.spec, r0=args.r0)
    image = sample_phantom(phantom, ImageGrid(r0=args.r0, n=args.n))
    write_rgf(args.out, image)
    if args.pgm:
        export_pgm(image, args.pgm)
    return EXIT_OK


def _cmd_forward(args: argparse.Namespace) -> int:
    phantom = load_phantom_spec(args.spec, r0=args.r0)
    ring = DetectorRing(r0=args.r0, count=args.nphi + 1)
    rgrid = RadialGrid(r0=args.r0, nr=args.nr)
    means = circular_mean(phantom, ring, rgrid, quad_n=args.quad, gaussian_rule=args.gaussian_rule)
    if args.kind == "means":
        write_rgf(args.out, means)
        return EXIT_OK

    if args.tmax is not None:
        t_max = args.tmax
    elif args.kind == "traceW":
        t_max = 2.0 * args.r0
    else:
        t_max = get_settings().adjoint_tmax_factor * args.r0
    nt = args.nt if args.nt is not None else max(1, int(round(t_max / rgrid.step)))
    tgrid = TimeGrid.covering(t_max, nt)
    trace = wave_trace_W(means, tgrid) if args.kind == "traceW" else wave_trace_P(means, tgrid)
    write_rgf(args.out, trace)
    return EXIT_OK


def _cmd_noise(args: argparse.Namespace) -> int:
    data = read_rgf(args.input)
    if isinstance(data, ImageData):
        raise PreconditionError("forward-models", "noise applies to means or trace files, not images")
    write_rgf(args.out, add_noise(data, args.level, args.seed))
    return EXIT_OK


def _cmd_recon(args: argparse.Namespace) -> int:
    data = read_rgf(args.input)
    if isinstance(data, ImageData):
        raise PreconditionError("reconstructors", "cannot reconstruct from an image file")
    r0 = data.ring.r0
    overrides = {
        key: value
        for key, value in (("interp_order", args.interp_order), ("smoothing", args.smoothing))
        if value is not None
    }
    cfg = ReconConfig(
        method=ReconMethod(args.method), r0=r0, t_max=args.tmax, nr=args.nr, workers=args.workers, **overrides
    )
    image = reconstruct(data, cfg, ImageGrid(r0=r0, n=args.n))
    write_rgf(args.out, image)
    if args.pgm:
        export_pgm(image, args.pgm)
    return EXIT_OK


def _cmd_verify_keyident(args: argparse.Namespace) -> int:
    result = verify_key_identity(tuple(args.x), tuple(args.y), args.r0, quad_n=args.quad, rule=args.rule)
    print(f"lhs\t{result.lhs!r}\nrhs\t{result.rhs!r}\nresidual\t{result.residual!r}")
    if not result.residual <= args.tol:
        raise VerificationError(f"key identity residual {result.residual:.3e} exceeds {args.tol:.1e}")
    return EXIT_OK


def _cmd_verify_trace(args: argparse.Namespace) -> int:
    f = load_phantom_spec(args.f, r0=args.r0)
    g = load_phantom_spec(args.g, r0=args.r0)
    result = verify_trace_identity(
        f, g, r0=args.r0, nphi=args.nphi, nr=args.nr, nt=args.nt, t_max=args.tmax, lhs_n=args.lhs_n, quad_n=args.quad
    )
    fine = ImageGrid(r0=args.r0, n=args.lhs_n)
    norm_f = fine.step * float(np.linalg.norm(sample_phantom(f, fine).values))
    norm_g = fine.step * float(np.linalg.norm(sample_phantom(g, fine).values))
    scale = max(abs(result.lhs), norm_f * norm_g, 1e-300)
    errors = {name: abs(value - result.lhs) / scale for name, value in (("asymm", result.asymm), ("symm", result.symm))}
    print(f"lhs\t{result.lhs!r}\nasymm\t{result.asymm!r}\nsymm\t{result.symm!r}")
    worst = max(errors.values())
    if not worst <= args.tol:
        raise VerificationError(f"trace identity mismatch {worst:.3e} exceeds {args.tol:.1e}")
    return EXIT_OK


def _cmd_verify_diffabel(args: argparse.Namespace) -> int:
    result = verify_diff_abel(t=args.t, step=args.step, limit=args.quad)
    print(f"lhs\t{result.lhs!r}\nrhs\t{result.rhs!r}\nrelative_error\t{result.relative_error!r}")
    if not result.relative_error <= args.tol:
        raise VerificationError(f"differentiation formula mismatch {result.relative_error:.3e} exceeds {args.tol:.1e}")
    return EXIT_OK


def _cmd_study(args: argparse.Namespace) -> int:
    phantom = load_phantom_spec(args.spec, r0=args.r0)
    rows = convergence_study(phantom, args.method, args.sizes, r0=args.r0, workers=args.workers)
    table = format_study_table(rows, include_timing=args.timing)
    Path(args.out).write_text(table, encoding="utf-8")
    if args.assert_order:
        assert_order(rows, phantom, window=(args.min_order, args.max_order))
    return EXIT_OK


def _cmd_metrics(args: argparse.Namespace) -> int:
    recon = read_rgf(args.recon)
    reference = read_rgf(args.ref)
    if not isinstance(recon, ImageData) or not isinstance(reference, ImageData):
        raise DataFormatError("metrics compares two image files")
    result = image_metrics(recon, reference)
    print(f"rel_l2\t{result.rel_l2!r}\nmax_abs\t{result.max_abs!r}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="circmean-fbp", description="Circular-mean and wave-trace tomography")
    parser.add_argument("--log-level", default=None, help="Override the configured log level")
    parser.add_argument("--log-text", action="store_true", help="Plain-text logs instead of JSON lines")
    parser.add_argument("--metrics-out", default=None, help="Write prometheus metrics to this text file")
    parser.add_argument("--workers", type=int, default=None, help="Threads for the back-projection kernels")
    commands = parser.add_subparsers(dest="command", required=True)

    phantom = commands.add_parser("phantom", help="Sample a phantom onto the image grid")
    phantom.add_argument("--spec", required=True)
    phantom.add_argument("--n", type=int, required=True)
    phantom.add_argument("--r0", type=float, default=1.0)
    phantom.add_argument("--out", required=True)
    phantom.add_argument("--pgm", default=None)
    phantom.set_defaults(handler=_cmd_phantom)

    forward = commands.add_parser("forward", help="Simulate circular means or wave traces")
    forward.add_argument("--spec", required=True)
    forward.add_argument("--nphi", type=int, required=True, help="Nφ; the ring has Nφ+1 detectors")
    forward.add_argument("--nr", type=int, required=True, help="Nr; radii r^m = m·2R0/Nr, m = 0..Nr")
    forward.add_argument("--r0", type=float, default=1.0)
    forward.add_argument("--kind", choices=("means", "traceP", "traceW"), default="means")
    forward.add_argument("--nt", type=int, default=None, help="Time intervals (default keeps h_t = h_r)")
    forward.add_argument("--tmax", type=float, default=None, help="Trace horizon (default 2R0 for traceW, 20R0 for traceP)")
    forward.add_argument("--quad", type=int, default=None, help="Trapezoidal nodes per circle for Gaussians")
    forward.add_argument("--gaussian-rule", choices=("trapezoid", "closed"), default="trapezoid")
    forward.add_argument("--out", required=True)
    forward.set_defaults(handler=_cmd_forward)

    noise = commands.add_parser("noise", help="Add seeded uniform noise to a data file")
    noise.add_argument("--in", dest="input", required=True)
    noise.add_argument("--level", type=float, required=True)
    noise.add_argument("--seed", type=int, required=True)
    noise.add_argument("--out", required=True)
    noise.set_defaults(handler=_cmd_noise)

    recon = commands.add_parser("recon", help="Reconstruct an image from a data file")
    recon.add_argument("--in", dest="input", required=True)
    recon.add_argument("--method", choices=[m.value for m in ReconMethod], required=True)
    recon.add_argument("--n", type=int, required=True)
    recon.add_argument("--tmax", type=float, default=None, help="Use trace samples up to this time (adjoint methods)")
    recon.add_argument("--nr", type=int, default=None, help="Radial intervals for the adjoint inner integral")
    recon.add_argument("--interp-order", type=int, choices=(1, 3), default=None)
    recon.add_argument(
        "--smoothing", type=float, default=None, help="Gaussian width in samples applied to the data before filtering"
    )
    recon.add_argument("--out", required=True)
    recon.add_argument("--pgm", default=None)
    recon.set_defaults(handler=_cmd_recon)

    verify = commands.add_parser("verify", help="Run a numerical identity check")
    checks = verify.add_subparsers(dest="check", required=True)

    keyident = checks.add_parser("keyident")
    keyident.add_argument("--x", nargs=2, type=float, metavar=("X1", "X2"), required=True)
    keyident.add_argument("--y", nargs=2, type=float, metavar=("Y1", "Y2"), required=True)
    keyident.add_argument("--r0", type=float, default=1.0)
    keyident.add_argument("--quad", type=int, default=None)
    keyident.add_argument("--rule", choices=("graded", "periodic"), default="graded")
    keyident.add_argument("--tol", type=float, default=1e-6)
    keyident.set_defaults(handler=_cmd_verify_keyident)

    trace = checks.add_parser("trace")
    trace.add_argument("--f", required=True, help="Phantom spec file for f")
    trace.add_argument("--g", required=True, help="Phantom spec file for g")
    trace.add_argument("--r0", type=float, default=1.0)
    trace.add_argument("--nphi", type=int, default=64)
    trace.add_argument("--nr", type=int, default=256)
    trace.add_argument("--nt", type=int, default=4096)
    trace.add_argument("--tmax", type=float, default=None)
    trace.add_argument("--lhs-n", type=int, default=1024)
    trace.add_argument("--quad", type=int, default=None)
    trace.add_argument("--tol", type=float, default=1e-2)
    trace.set_defaults(handler=_cmd_verify_trace)

    diffabel = checks.add_parser("diffabel")
    diffabel.add_argument("--t", type=float, default=1.0)
    diffabel.add_argument("--step", type=float, default=1e-2)
    diffabel.add_argument("--quad", type=int, default=200, help="Subinterval limit of the adaptive quadrature")
    diffabel.add_argument("--tol", type=float, default=1e-4)
    diffabel.set_defaults(handler=_cmd_verify_diffabel)

    study = commands.add_parser("study", help="Convergence study over image sizes")
    study.add_argument("--spec", required=True)
    study.add_argument("--method", choices=[m.value for m in ReconMethod], required=True)
    study.add_argument("--sizes", type=_sizes, required=True)
    study.add_argument("--r0", type=float, default=1.0)
    study.add_argument("--out", required=True)
    study.add_argument("--timing", action="store_true", help="Record wall time per size")
    study.add_argument("--assert-order", action="store_true")
    study.add_argument("--min-order", type=float, default=1.6)
    study.add_argument("--max-order", type=float, default=2.4)
    study.set_defaults(handler=_cmd_study)

    metrics = commands.add_parser("metrics", help="Compare a reconstruction with a reference image")
    metrics.add_argument("--recon", required=True)
    metrics.add_argument("--ref", required=True)
    metrics.set_defaults(handler=_cmd_metrics)

    return parser


def _command_name(args: argparse.Namespace) -> str:
    return f"verify-{args.check}" if args.command == "verify" else args.command


def cli_main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    settings = get_settings()
    configure_logging(args.log_level or settings.log_level, json_lines=settings.log_json and not args.log_text)
    command = _command_name(args)
    handler: Callable[[argparse.Namespace], int] = args.handler

    try:
        with timed_stage(f"cli_{command}", logger):
            code = handler(args)
    except DataFormatError as exc:
        logger.error("data format error", extra={"command": command, "error": str(exc)})
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_DATA
    except (PreconditionError, ValidationError) as exc:
        logger.error("precondition failed", extra={"command": command, "error": str(exc)})
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_USAGE
    except VerificationError as exc:
        logger.error("verification failed", extra={"command": command, "error": str(exc)})
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_VERIFY
    except OSError as exc:
        logger.error("i/o failure", extra={"command": command, "error": str(exc)})
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_DATA

    RUN_COUNTER.labels(command=command, result="ok" if code == EXIT_OK else f"exit_{code}").inc()
    metrics_path = args.metrics_out or settings.metrics_textfile
    if metrics_path:
        write_metrics(metrics_path)
    return code


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))
