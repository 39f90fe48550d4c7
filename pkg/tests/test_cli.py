import hashlib
import json
import subprocess
import sys

import pytest

from impact_lattice import cli
from impact_lattice.cli import UsageError, main, parse_config

SMALL = ["--L", "8", "--steps", "12", "--seed", "5"]


def test_parse_figure_panel_flags():
    job = parse_config("--L 41 --K 2 --alpha 2 --temperature 1 --steps 100 --seed 7".split())
    p = job.params
    assert (p.L, p.K, p.alpha, p.temperature, p.steps, p.seed) == (41, 2, 2.0, 1.0, 100, 7)
    assert job.cells() == [(1.0, 2.0)]


def test_parse_defaults():
    job = parse_config([])
    assert (job.params.L, job.params.K, job.params.steps) == (41, 2, 100)
    assert job.runs == 1 and job.engine == "kernel" and job.params.update == "sync"
    assert job.params.scaling == "1+d^a" and job.snapshots == [100]


def test_parse_lists_and_options():
    job = parse_config(["--alpha", "6,1,3", "--temperature", "0,2", "--snapshots", "10,0",
                        "--engine", "fft", "--update", "async", "--scaling", "(1+d)^a"])
    assert job.alphas == [1.0, 3.0, 6.0] and job.temperatures == [0.0, 2.0]
    assert job.cells()[0] == (0.0, 1.0) and len(job.cells()) == 6
    assert job.snapshots == [0, 10]
    assert job.engine == "fft" and job.params.update == "async" and job.params.scaling == "(1+d)^a"


@pytest.mark.parametrize(
    "argv, flag",
    [
        (["--temperature", "-1"], "temperature"),
        (["--L", "0"], "L"),
        (["--K", "two"], "K"),
        (["--alpha", "x"], "alpha"),
        (["--engine", "gpu"], "engine"),
        (["--snapshots", "500"], "snapshots"),
        (["--runs", "0"], "runs"),
        (["--update", "random"], "update"),
    ],
)
def test_domain_errors_exit_2_naming_flag(argv, flag, capsys):
    assert main(argv) == 2
    err = capsys.readouterr().err
    assert err.count("\n") == 1
    assert flag in err


def test_unknown_flag_exit_2(capsys):
    assert main(["--colour", "red"]) == 2
    err = capsys.readouterr().err
    assert "--colour" in err and err.count("\n") == 1


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "job.cfg"
    cfg.write_text("# model\nL = 12\nalpha=2,3\ntemperature = 0.5\nsteps=30\nimpact_scale=1\n")
    job = parse_config(["--config", str(cfg), "--L", "9"])
    assert job.params.L == 9 and job.alphas == [2.0, 3.0] and job.params.steps == 30
    assert job.params.impact_scale == 1.0
    cfg.write_text("colour = red\n")
    with pytest.raises(UsageError):
        parse_config(["--config", str(cfg)])


def test_io_failure_exit_1(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(SMALL + ["--out", str(blocker / "sub")]) == 1
    assert "error" in capsys.readouterr().err


def _csv_bytes(out):
    return {p.relative_to(out).as_posix(): p.read_bytes() for p in sorted(out.rglob("*.csv"))}


def test_single_cell_sweep(tmp_path):
    out = tmp_path / "one"
    assert main(SMALL + ["--runs", "2", "--alpha", "3", "--temperature", "1", "--snapshots", "0,12", "--out", str(out)]) == 0
    table = (out / "smax_table.csv").read_text().splitlines()
    assert table[0] == "T,alpha,mean_smax_frac,std_smax_frac,mean_n_clusters,mean_n_small_clusters,runs"
    assert len(table) == 2 and table[1].startswith("1,3,") and table[1].endswith(",2")
    assert (out / "histogram_3_1.csv").exists()
    for name in ("opinions_t0.csv", "opinions_t12.ppm", "sustain_t12.pgm", "sustain_t0.csv"):
        assert (out / name).exists()
    rows = (out / "opinions_t12.csv").read_text().split("\n")
    assert len(rows) == 9 and rows[-1] == "" and all(len(r.split(",")) == 8 for r in rows[:-1])
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["tool_version"] == cli.__version__
    assert manifest["engine"] == "kernel" and manifest["n_runs"] == 2
    for entry in manifest["outputs"]:
        data = (out / entry["path"]).read_bytes()
        assert hashlib.sha256(data).hexdigest() == entry["sha256"]


def test_sweep_rows_ordered_and_rerun_identical(tmp_path):
    args = SMALL + ["--runs", "2", "--alpha", "6,2", "--temperature", "1,0"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    lines = (a / "smax_table.csv").read_text().splitlines()[1:]
    assert [tuple(l.split(",")[:2]) for l in lines] == [("0", "2"), ("0", "6"), ("1", "2"), ("1", "6")]
    assert (a / "alpha_6_T_0" / "opinions_t12.csv").exists()
    assert _csv_bytes(a) == _csv_bytes(b)


def test_manifest_round_trip(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(SMALL + ["--runs", "2", "--alpha", "2,3", "--temperature", "0.5", "--engine", "fft", "--out", str(a)]) == 0
    assert main(["--from-manifest", str(a / "manifest.json"), "--out", str(b)]) == 0
    assert _csv_bytes(a) == _csv_bytes(b)
    assert json.loads((b / "manifest.json").read_text())["engine"] == "fft"


def test_empirical_sustain_maps(tmp_path):
    out = tmp_path / "emp"
    assert main(SMALL + ["--sustain", "empirical", "--sustain-samples", "200", "--out", str(out)]) == 0
    vals = [float(x) for line in (out / "sustain_t12.csv").read_text().split() for x in line.split(",")]
    assert all(0 <= v <= 1 for v in vals)


@pytest.mark.parametrize("threads", ["1", "4", "0"])
def test_thread_counts_give_identical_tables(tmp_path, monkeypatch, threads):
    args = ["--L", "7", "--steps", "8", "--seed", "11", "--runs", "3", "--alpha", "2,6", "--temperature", "0,1"]
    monkeypatch.setenv(cli.THREADS_ENV, "1")
    assert main(args + ["--out", str(tmp_path / "ref")]) == 0
    monkeypatch.setenv(cli.THREADS_ENV, threads)
    assert main(args + ["--out", str(tmp_path / "t")]) == 0
    assert (tmp_path / "ref" / "smax_table.csv").read_bytes() == (tmp_path / "t" / "smax_table.csv").read_bytes()


def test_bad_thread_env(monkeypatch):
    monkeypatch.setenv(cli.THREADS_ENV, "-2")
    assert main(["--L", "3", "--steps", "1"]) == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "impact_lattice", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("impact-lattice ")
    res = subprocess.run([sys.executable, "-m", "impact_lattice", "--temperature", "-1"], capture_output=True, text=True)
    assert res.returncode == 2 and "temperature" in res.stderr
