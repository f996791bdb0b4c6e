"""Command-line round trips through real files."""
import numpy as np
import pytest

from circmean_fbp.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, EXIT_VERIFY, cli_main
from circmean_fbp.infrastructure.rawgrid import read_rgf
from circmean_fbp.services.grids import ImageData, MeansData, TraceKind

GAUSSIAN_SPEC = "gauss 0.1 -0.05 0.15 1.0\n"
MIXED_SPEC = "disk -0.3 0.2 0.25 1.0\ngauss 0.3 -0.1 0.1 1.0\n"


@pytest.fixture()
def specs(tmp_path):
    paths = {}
    for name, text in (("gaussian", GAUSSIAN_SPEC), ("mixed", MIXED_SPEC), ("empty", "# zero scene\n")):
        path = tmp_path / f"{name}.txt"
        path.write_text(text, encoding="utf-8")
        paths[name] = path
    return paths


def _forward(spec, out, *extra):
    return cli_main(["forward", "--spec", str(spec), "--nphi", "32", "--nr", "32", "--out", str(out), *extra])


def test_phantom_command_writes_image_and_pgm(specs, tmp_path):
    out, pgm = tmp_path / "f.rgf", tmp_path / "f.pgm"
    assert cli_main(["phantom", "--spec", str(specs["mixed"]), "--n", "24", "--out", str(out), "--pgm", str(pgm)]) == EXIT_OK
    image = read_rgf(out)
    assert isinstance(image, ImageData) and image.grid.n == 24
    assert pgm.read_bytes().startswith(b"P5\n25 25\n65535\n")


def test_forward_recon_metrics_pipeline(specs, tmp_path, capsys):
    means, recon, reference = tmp_path / "m.rgf", tmp_path / "r.rgf", tmp_path / "ref.rgf"
    assert _forward(specs["gaussian"], means) == EXIT_OK
    assert isinstance(read_rgf(means), MeansData)
    assert cli_main(["recon", "--in", str(means), "--method", "minv", "--n", "48", "--out", str(recon)]) == EXIT_OK
    assert cli_main(["phantom", "--spec", str(specs["gaussian"]), "--n", "48", "--out", str(reference)]) == EXIT_OK
    capsys.readouterr()
    assert cli_main(["metrics", "--recon", str(recon), "--ref", str(reference)]) == EXIT_OK
    lines = dict(line.split("\t") for line in capsys.readouterr().out.splitlines())
    assert float(lines["rel_l2"]) <= 0.25
    assert float(lines["max_abs"]) >= 0.0


def test_forward_is_deterministic(specs, tmp_path):
    first, second = tmp_path / "a.rgf", tmp_path / "b.rgf"
    assert _forward(specs["mixed"], first, "--kind", "traceW") == EXIT_OK
    assert _forward(specs["mixed"], second, "--kind", "traceW") == EXIT_OK
    assert first.read_bytes() == second.read_bytes()
    trace = read_rgf(first)
    assert trace.kind is TraceKind.W
    assert trace.tgrid.t_max == pytest.approx(2.0)


def test_trace_p_default_horizon(specs, tmp_path):
    out = tmp_path / "p.rgf"
    assert _forward(specs["gaussian"], out, "--kind", "traceP", "--tmax", "4.0", "--nt", "64") == EXIT_OK
    trace = read_rgf(out)
    assert trace.kind is TraceKind.P
    assert trace.tgrid.nt == 64 and trace.tgrid.t_max == pytest.approx(4.0)


def test_noise_levels(specs, tmp_path):
    clean, same, noisy = tmp_path / "c.rgf", tmp_path / "s.rgf", tmp_path / "n.rgf"
    assert _forward(specs["gaussian"], clean) == EXIT_OK
    assert cli_main(["noise", "--in", str(clean), "--level", "0", "--seed", "1", "--out", str(same)]) == EXIT_OK
    assert same.read_bytes() == clean.read_bytes()
    assert cli_main(["noise", "--in", str(clean), "--level", "0.05", "--seed", "1", "--out", str(noisy)]) == EXIT_OK
    delta = read_rgf(noisy).values - read_rgf(clean).values
    assert 0.0 < np.max(np.abs(delta)) <= 0.05 * np.max(np.abs(read_rgf(clean).values))


def test_zero_scene_reconstructs_to_zero(specs, tmp_path):
    means, recon = tmp_path / "m.rgf", tmp_path / "r.rgf"
    assert _forward(specs["empty"], means) == EXIT_OK
    assert cli_main(["recon", "--in", str(means), "--method", "hilbert", "--n", "32", "--out", str(recon)]) == EXIT_OK
    assert not np.any(read_rgf(recon).values)
    smoothed = ["recon", "--in", str(means), "--method", "mlap", "--n", "32", "--smoothing", "2", "--out", str(recon)]
    assert cli_main(smoothed) == EXIT_OK
    assert not np.any(read_rgf(recon).values)


def test_data_errors_exit_three(specs, tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("blob 0 0 1 1\n", encoding="utf-8")
    assert _forward(bad, tmp_path / "x.rgf") == EXIT_DATA
    outside = tmp_path / "outside.txt"
    outside.write_text("disk 0.9 0 0.5 1\n", encoding="utf-8")
    assert _forward(outside, tmp_path / "x.rgf") == EXIT_DATA
    garbage = tmp_path / "garbage.rgf"
    garbage.write_bytes(b"not a grid file")
    assert cli_main(["recon", "--in", str(garbage), "--method", "minv", "--n", "8", "--out", str(tmp_path / "y")]) == EXIT_DATA
    assert cli_main(["metrics", "--recon", str(tmp_path / "none.rgf"), "--ref", str(garbage)]) == EXIT_DATA


def test_usage_errors_exit_two(specs, tmp_path):
    assert cli_main(["forward", "--spec", str(specs["gaussian"])]) == EXIT_USAGE
    assert cli_main(["recon", "--in", "x", "--method", "fourier", "--n", "8", "--out", "y"]) == EXIT_USAGE
    means = tmp_path / "m.rgf"
    assert _forward(specs["gaussian"], means) == EXIT_OK
    # wavefinite needs a W-trace
    assert cli_main(["recon", "--in", str(means), "--method", "wavefinite", "--n", "8", "--out", str(tmp_path / "r")]) == EXIT_USAGE


def test_adjoint_rejects_short_horizon(specs, tmp_path):
    trace = tmp_path / "p.rgf"
    assert _forward(specs["gaussian"], trace, "--kind", "traceP", "--tmax", "4.0") == EXIT_OK
    args = ["recon", "--in", str(trace), "--method", "adjoint-p", "--n", "16", "--tmax", "1.0", "--out", str(tmp_path / "r")]
    assert cli_main(args) == EXIT_USAGE


def test_verify_commands(capsys):
    assert cli_main(["verify", "keyident", "--x", "0.2", "0.1", "--y", "-0.3", "0.4", "--quad", "4096"]) == EXIT_OK
    assert "residual" in capsys.readouterr().out
    args = ["verify", "keyident", "--x", "0.2", "0.1", "--y", "-0.3", "0.4", "--quad", "64", "--rule", "periodic", "--tol", "1e-12"]
    assert cli_main(args) == EXIT_VERIFY
    assert cli_main(["verify", "diffabel"]) == EXIT_OK
    assert cli_main(["verify", "keyident", "--x", "0.2", "--y", "0", "0"]) == EXIT_USAGE


def test_keyident_accepts_negative_coordinates(capsys):
    assert cli_main(["verify", "keyident", "--x", "0.5", "0", "--y", "-0.5", "0", "--quad", "4096"]) == EXIT_OK
    out = dict(line.split("\t") for line in capsys.readouterr().out.splitlines())
    assert abs(float(out["rhs"])) <= 1e-12
    assert float(out["residual"]) <= 1e-6


def test_study_table_and_order_guard(specs, tmp_path):
    table = tmp_path / "study.tsv"
    args = ["study", "--spec", str(specs["gaussian"]), "--method", "minv", "--sizes", "32,64", "--out", str(table)]
    assert cli_main(args) == EXIT_OK
    lines = table.read_text().splitlines()
    assert lines[0] == "n\tmax_err\tl2_err\torder\tl2_order\tseconds"
    assert [line.split("\t")[0] for line in lines[1:]] == ["32", "64"]
    assert all(line.endswith("\t-") for line in lines[1:])

    mixed = ["study", "--spec", str(specs["mixed"]), "--method", "minv", "--sizes", "32,64", "--out", str(table)]
    assert cli_main([*mixed, "--assert-order"]) == EXIT_USAGE


def test_metrics_textfile(specs, tmp_path):
    metrics = tmp_path / "metrics.prom"
    out = tmp_path / "f.rgf"
    args = ["--metrics-out", str(metrics), "phantom", "--spec", str(specs["gaussian"]), "--n", "8", "--out", str(out)]
    assert cli_main(args) == EXIT_OK
    text = metrics.read_text()
    assert "circmean_fbp_runs_total" in text
    assert 'command="phantom"' in text
