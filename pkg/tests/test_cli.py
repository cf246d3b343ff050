import math

import numpy as np
import pytest

from rjnest import cli
from rjnest.models import GaussianTestModel

SMALL = "new_level_interval = 300\nsave_interval = 20\nmax_num_levels = 6\nmax_num_saves = 200\n"


@pytest.fixture
def options_file(tmp_path):
    path = tmp_path / "opts.txt"
    path.write_text(SMALL)
    return path


def test_generate_sinusoid(tmp_path):
    assert cli.main(["generate", "sinusoid", "--seed", "1", "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["generate", "sinusoid", "--seed", "1", "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "sinusoid_data.txt").read_bytes()
    assert a == (tmp_path / "b" / "sinusoid_data.txt").read_bytes()
    rows = [ln for ln in a.decode().splitlines() if not ln.startswith("#")]
    assert len(rows) == 1001 and len(rows[0].split()) == 2


def test_generate_galaxyfield(tmp_path):
    assert cli.main(["generate", "galaxyfield", "--seed", "1", "--out", str(tmp_path),
                     "--size", "40", "--count", "5"]) == 0
    image = np.loadtxt(tmp_path / "galaxyfield_image.txt")
    cat = np.loadtxt(tmp_path / "galaxyfield_catalog.csv", delimiter=",")
    assert image.shape == (40, 40) and cat.shape == (5, 8)


def test_generate_unwritable(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["generate", "sinusoid", "--out", str(blocker / "sub")]) == 2


def test_usage_error_exit_code():
    assert cli.main(["run", "--model", "nonsense", "--out", "x"]) == 2
    assert cli.main([]) == 2


def run_args(out, options_file, *extra):
    return ["run", "--model", "gaussian-test", "--dim", "3", "--width", "0.02",
            "--options", str(options_file), "--out", str(out), "--progress-every", "0", *extra]


def test_run_refuses_overwrite_and_is_deterministic(tmp_path, options_file):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(run_args(a, options_file, "--deterministic", "--seed", "7")) == 0
    assert cli.main(run_args(b, options_file, "--deterministic", "--seed", "7")) == 0
    for name in ("samples.csv", "levels.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert "# seed = 7" in (a / "samples.csv").read_text()
    assert cli.main(run_args(a, options_file, "--seed", "7")) == 2
    assert cli.main(run_args(a, options_file, "--seed", "8", "--force")) == 0
    assert (a / "samples.csv").read_bytes() != (b / "samples.csv").read_bytes()


def test_run_bad_options(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("warp_factor = 9\n")
    assert cli.main(run_args(tmp_path / "out", bad)) == 2
    assert cli.main(["run", "--model", "sinusoid", "--out", str(tmp_path / "o")]) == 2


def test_run_nan_exit_code(tmp_path, options_file, monkeypatch, capsys):
    class NanAfterStart(GaussianTestModel):
        calls = 0

        def log_likelihood(self, state):
            NanAfterStart.calls += 1
            return math.nan if NanAfterStart.calls > 50 else super().log_likelihood(state)

    monkeypatch.setattr(cli, "build_model", lambda *a, **k: NanAfterStart(3, 0.02))
    assert cli.main(run_args(tmp_path / "nan", options_file)) == 3
    assert "offending state" in capsys.readouterr().err


def test_postprocess_prints_results(tmp_path, options_file, capsys):
    cli.main(run_args(tmp_path / "r", options_file))
    capsys.readouterr()
    assert cli.main(["postprocess", str(tmp_path / "r")]) == 0
    out = capsys.readouterr().out
    assert "log Z =" in out and "H =" in out
    assert (tmp_path / "r" / "results.csv").exists()
    assert cli.main(["postprocess", str(tmp_path / "missing")]) == 2


def test_bench_reports_ratio(tmp_path, options_file, capsys):
    from rjnest.models import generate_sinusoid_data, write_sinusoid_data
    t, y = generate_sinusoid_data(1)
    data = tmp_path / "d.txt"
    write_sinusoid_data(data, t, y)
    assert cli.main(["bench", "--model", "sinusoid", "--data", str(data), "--steps", "300",
                     "--options", str(options_file)]) == 0
    out = capsys.readouterr().out
    assert "speedup" in out and "identical chains: True" in out
